//! Modes of the delayed consensus loop.
//!
//! Every eigenvalue `lambda` of the gain matrix contributes the `tau + 1`
//! roots of `h(z) = z^(tau+1) - z^tau + lambda`. This module finds those roots,
//! evaluates the largest modulus `rho(lambda)`, and derives the convergence
//! rate, the stability bound and the modulus-minimizing eigenvalue.
//!
//! Root finding runs Aberth-Ehrlich simultaneous iteration, then replaces the
//! real roots by bracketed solves on the real line. The number of real roots
//! is known in closed form: `h` has its only positive critical point at
//! `z_c = tau / (tau + 1)`, so two positive roots exist iff `h(z_c) <= 0`, and
//! for even `tau` a single negative root exists whenever `lambda > 0`. Real
//! roots are therefore returned with an exactly zero imaginary part.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Relative residual accepted for a polished root.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-12;
/// Relative residual accepted for a symmetric eigenpair.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-9;
/// Bracket width at which the search for the minimizing eigenvalue stops.
pub const LAMBDA_SEARCH_TOL: f64 = 1e-10;
/// Root moduli within this distance of 1 count as unstable.
pub const MARGINAL_TOL: f64 = 1e-9;
/// Largest augmented state matrix the dense oracle will build.
pub const AUGMENTED_MAX_SIDE: usize = 5000;
/// Symmetry tolerance for inputs to the symmetric eigensolver.
pub const SYMMETRY_TOL: f64 = 1e-12;

const ABERTH_MAX_ITER: usize = 500;

/// Real eigenvalues sorted non-decreasingly.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
}

impl Spectrum {
    pub fn new(mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite eigenvalue".into()));
        }
        eigenvalues.sort_by(f64::total_cmp);
        Ok(Spectrum { eigenvalues })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Second-smallest eigenvalue (the Fiedler value for Laplacians).
    pub fn lambda2(&self) -> Option<f64> {
        self.eigenvalues.get(1).copied()
    }

    pub fn lambda_max(&self) -> Option<f64> {
        self.eigenvalues.last().copied()
    }

    /// Absolute threshold below which an eigenvalue is treated as zero.
    pub fn zero_tolerance(&self) -> f64 {
        let scale = self
            .eigenvalues
            .iter()
            .fold(1.0_f64, |acc, v| acc.max(v.abs()));
        1e-9 * scale
    }
}

/// All `tau + 1` roots of `z^(tau+1) - z^tau + lambda`, with multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub roots: Vec<Complex64>,
    pub lambda: f64,
    pub tau: usize,
}

impl RootSet {
    pub fn max_modulus(&self) -> f64 {
        self.roots.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Real roots (those with an exactly zero imaginary part).
    pub fn real_roots(&self) -> impl Iterator<Item = f64> + '_ {
        self.roots.iter().filter(|z| z.im == 0.0).map(|z| z.re)
    }

    pub fn nonreal_roots(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.roots.iter().copied().filter(|z| z.im != 0.0)
    }

    /// Largest modulus among real roots, if any.
    pub fn max_real_modulus(&self) -> Option<f64> {
        self.real_roots().map(f64::abs).reduce(f64::max)
    }

    /// Largest modulus among roots with nonzero imaginary part, if any.
    pub fn max_nonreal_modulus(&self) -> Option<f64> {
        self.nonreal_roots().map(|z| z.norm()).reduce(f64::max)
    }

    pub fn relative_residual(&self, z: Complex64) -> f64 {
        relative_residual(z, self.lambda, self.tau)
    }
}

/// Upper end of the stable eigenvalue interval: `2 sin(pi / (2 (2 tau + 1)))`.
///
/// The angle is carried to twice working precision before the sine, which
/// makes `stability_bound(1)` exactly 1.
pub fn stability_bound(tau: usize) -> f64 {
    // pi - PI
    const PI_LO: f64 = 1.224_646_799_147_353_2e-16;
    let m = (2 * (2 * tau + 1)) as f64;
    let hi = PI / m;
    let lo = ((-hi).mul_add(m, PI) + PI_LO) / m;
    2.0 * hi.cos().mul_add(lo, hi.sin())
}

/// Eigenvalue at which the two positive real roots merge,
/// `tau^tau / (tau + 1)^(tau + 1)`.
pub fn merge_point(tau: usize) -> f64 {
    let zc = critical_point(tau);
    zc.powi(tau as i32) / (tau + 1) as f64
}

/// The positive critical point `tau / (tau + 1)` of the characteristic
/// polynomial.
pub fn critical_point(tau: usize) -> f64 {
    tau as f64 / (tau + 1) as f64
}

#[inline]
fn eval(z: Complex64, lambda: f64, tau: usize) -> (Complex64, Complex64) {
    let zpm = z.powu(tau as u32 - 1);
    let zp = zpm * z;
    let h = zp * (z - 1.0) + lambda;
    let dh = zpm * ((tau + 1) as f64 * z - tau as f64);
    (h, dh)
}

#[inline]
fn eval_real(x: f64, lambda: f64, tau: usize) -> (f64, f64) {
    let xpm = x.powi(tau as i32 - 1);
    let xp = xpm * x;
    (
        xp * (x - 1.0) + lambda,
        xpm * ((tau + 1) as f64 * x - tau as f64),
    )
}

fn relative_residual(z: Complex64, lambda: f64, tau: usize) -> f64 {
    let (h, _) = eval(z, lambda, tau);
    let scale = lambda.max(1.0) * z.norm().max(1.0).powi(tau as i32 + 1);
    h.norm() / scale
}

/// Safeguarded Newton on a bracket `[lo, hi]` across which `f` changes sign.
/// `f` returns the value and the derivative.
fn bracketed_root(f: impl Fn(f64) -> (f64, f64), mut lo: f64, mut hi: f64) -> f64 {
    let lo_positive = f(lo).0 > 0.0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return x;
        }
        if (fx > 0.0) == lo_positive {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        x = next;
    }
    x
}

/// Real roots of the characteristic polynomial for `lambda > 0`.
fn real_roots(lambda: f64, tau: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(3);
    let zc = critical_point(tau);
    let zc_pow = zc.powi(tau as i32);
    let h_c = zc_pow * (zc - 1.0) + lambda;
    let slack = 8.0 * f64::EPSILON * (lambda + zc_pow);
    let h = |x: f64| eval_real(x, lambda, tau);
    if h_c.abs() <= slack {
        out.extend([zc, zc]);
    } else if h_c < 0.0 {
        out.push(bracketed_root(h, 0.0, zc));
        out.push(bracketed_root(h, zc, 1.0));
    }
    if tau % 2 == 0 {
        // h(-x) = lambda - x^tau (1 + x) has one zero in (0, lambda^(1/tau)].
        let t = tau as i32;
        let g = |x: f64| {
            let xpm = x.powi(t - 1);
            (
                lambda - xpm * x * (1.0 + x),
                -xpm * (tau as f64 + (tau + 1) as f64 * x),
            )
        };
        out.push(-bracketed_root(g, 0.0, lambda.powf(1.0 / tau as f64)));
    }
    out
}

fn aberth(lambda: f64, tau: usize) -> Vec<Complex64> {
    let m = tau + 1;
    // Roots sum to 1 and multiply to +-lambda.
    let center = 1.0 / m as f64;
    let radius = lambda.powf(1.0 / m as f64).max(0.5);
    let mut z: Vec<Complex64> = (0..m)
        .map(|k| {
            let angle = 2.0 * PI * k as f64 / m as f64 + 0.4;
            Complex64::new(center, 0.0) + Complex64::from_polar(radius, angle)
        })
        .collect();
    for _ in 0..ABERTH_MAX_ITER {
        let mut converged = true;
        for i in 0..m {
            let (h, dh) = eval(z[i], lambda, tau);
            if h == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = h / dh;
            let repulsion: Complex64 = (0..m)
                .filter(|&j| j != i)
                .map(|j| (z[i] - z[j]).inv())
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if !step.is_finite() {
                continue;
            }
            z[i] -= step;
            if step.norm() > 1e-14 * z[i].norm().max(1e-3) {
                converged = false;
            }
        }
        if converged {
            break;
        }
    }
    z
}

fn newton_polish(mut z: Complex64, lambda: f64, tau: usize) -> Complex64 {
    let mut best = eval(z, lambda, tau).0.norm();
    for _ in 0..8 {
        let (h, dh) = eval(z, lambda, tau);
        if h.norm() == 0.0 || dh.norm() == 0.0 {
            break;
        }
        let candidate = z - h / dh;
        let r = eval(candidate, lambda, tau).0.norm();
        if r.is_finite() && r < best {
            best = r;
            z = candidate;
        } else {
            break;
        }
    }
    z
}

/// All roots of `z^(tau+1) - z^tau + lambda` for `lambda >= 0`, `tau >= 1`.
pub fn char_roots(lambda: f64, tau: usize) -> Result<RootSet> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidInput(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    if tau == 0 {
        return Err(Error::InvalidInput(
            "delay must be at least one step".into(),
        ));
    }
    if lambda == 0.0 {
        let mut roots = vec![Complex64::new(1.0, 0.0)];
        roots.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), tau));
        return Ok(RootSet { roots, lambda, tau });
    }

    let reals = real_roots(lambda, tau);
    let mut pool = aberth(lambda, tau);
    for &r in &reals {
        let nearest = pool
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - r).norm().total_cmp(&(b.1 - r).norm()))
            .map(|(i, _)| i)
            .expect("pool holds one candidate per remaining root");
        pool.swap_remove(nearest);
    }

    let mut roots: Vec<Complex64> = reals.iter().map(|&r| Complex64::new(r, 0.0)).collect();
    let upper: Vec<Complex64> = pool.iter().copied().filter(|z| z.im > 0.0).collect();
    if 2 * upper.len() == pool.len() {
        for z in upper {
            let p = newton_polish(z, lambda, tau);
            let p = Complex64::new(p.re, p.im.abs());
            roots.push(p);
            roots.push(p.conj());
        }
    } else {
        roots.extend(pool.into_iter().map(|z| newton_polish(z, lambda, tau)));
    }

    let worst = roots
        .iter()
        .map(|&z| relative_residual(z, lambda, tau))
        .fold(0.0, f64::max);
    if !(worst <= ROOT_RESIDUAL_TOL) {
        return Err(Error::RootFinder {
            lambda,
            tau,
            residual: worst,
        });
    }
    Ok(RootSet { roots, lambda, tau })
}

/// Largest root modulus for eigenvalue `lambda`; 1 at `lambda = 0`.
pub fn rho(lambda: f64, tau: usize) -> Result<f64> {
    Ok(char_roots(lambda, tau)?.max_modulus())
}

/// `rho` evaluated on every grid point; output order follows the input.
pub fn rho_grid(lambdas: &[f64], tau: usize) -> Result<Vec<f64>> {
    lambdas.par_iter().map(|&l| rho(l, tau)).collect()
}

fn nonzero_part(spec: &Spectrum) -> Result<&[f64]> {
    let values = spec.eigenvalues();
    if values.len() < 2 {
        return Err(Error::InvalidInput(
            "convergence rate needs at least one eigenvalue besides the structural zero".into(),
        ));
    }
    let tol = spec.zero_tolerance();
    if values[0] < -tol {
        return Err(Error::InvalidInput(format!(
            "negative gain eigenvalue {} has no consensus mode",
            values[0]
        )));
    }
    if values.iter().all(|v| v.abs() <= tol) {
        return Err(Error::InvalidInput("all eigenvalues are zero".into()));
    }
    Ok(&values[1..])
}

/// Convergence rate: the largest `rho` over the spectrum minus its structural
/// zero. Only the second-smallest and the largest eigenvalue are evaluated,
/// since `rho` decreases and then increases on the stable interval.
///
/// Eigenvalues within the zero tolerance are evaluated at 0 (`rho = 1`).
pub fn conv_rate(spec: &Spectrum, tau: usize) -> Result<f64> {
    let rest = nonzero_part(spec)?;
    let clamp = |v: f64| {
        if v.abs() <= spec.zero_tolerance() {
            0.0
        } else {
            v
        }
    };
    let lo = rho(clamp(rest[0]), tau)?;
    let hi = rho(clamp(rest[rest.len() - 1]), tau)?;
    Ok(lo.max(hi))
}

/// Same as [`conv_rate`] but evaluates every eigenvalue.
pub fn conv_rate_full_scan(spec: &Spectrum, tau: usize) -> Result<f64> {
    let tol = spec.zero_tolerance();
    let rest = nonzero_part(spec)?;
    let mut worst = 0.0_f64;
    for &v in rest {
        let v = if v.abs() <= tol { 0.0 } else { v };
        worst = worst.max(rho(v, tau)?);
    }
    Ok(worst)
}

/// Eigenvalue minimizing `rho(., tau)` on `(0, stability_bound(tau))`, by
/// golden-section search.
pub fn lambda_th(tau: usize) -> Result<f64> {
    if tau == 0 {
        return Err(Error::InvalidInput(
            "delay must be at least one step".into(),
        ));
    }
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, stability_bound(tau));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = rho(c, tau)?;
    let mut fd = rho(d, tau)?;
    while b - a > LAMBDA_SEARCH_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = rho(c, tau)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = rho(d, tau)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// State matrix of the delay-free realization with
/// `x_a(k) = [x(k - tau); ...; x(k)]`.
pub fn augmented_matrix(gain: &DMatrix<f64>, tau: usize) -> Result<DMatrix<f64>> {
    if tau == 0 {
        return Err(Error::InvalidInput(
            "delay must be at least one step".into(),
        ));
    }
    let n = gain.nrows();
    if gain.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: gain.ncols(),
        });
    }
    let side = n * (tau + 1);
    if side > AUGMENTED_MAX_SIDE {
        return Err(Error::TooLarge(side));
    }
    let mut a = DMatrix::zeros(side, side);
    for block in 0..tau {
        for i in 0..n {
            a[(block * n + i, (block + 1) * n + i)] = 1.0;
        }
    }
    let last = tau * n;
    for i in 0..n {
        a[(last + i, last + i)] = 1.0;
        for j in 0..n {
            a[(last + i, j)] = -gain[(i, j)];
        }
    }
    Ok(a)
}

/// Eigenvalues of the augmented state matrix from a dense nonsymmetric
/// eigensolver.
pub fn augmented_spectrum(gain: &DMatrix<f64>, tau: usize) -> Result<Vec<Complex64>> {
    let a = augmented_matrix(gain, tau)?;
    let m = faer::Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)]);
    let values = m
        .eigenvalues()
        .map_err(|e| Error::Eigensolver(format!("augmented matrix, tau={tau}: {e:?}")))?;
    Ok(values.iter().map(|z| Complex64::new(z.re, z.im)).collect())
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let scale = m.amax().max(1.0);
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in i + 1..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_TOL * scale {
        return Err(Error::Asymmetric(worst));
    }
    Ok(())
}

/// Eigenpairs of a symmetric matrix, sorted by eigenvalue; column `k` of the
/// returned matrix pairs with entry `k` of the vector. Every pair is checked
/// against the eigen-residual tolerance.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_symmetric(m)?;
    let n = m.nrows();
    let eig = nalgebra::SymmetricEigen::try_new(m.clone(), f64::EPSILON, 100 * n.max(10))
        .ok_or_else(|| Error::Eigensolver(format!("symmetric matrix of side {n}")))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    let scale = m.amax().max(1.0);
    for (k, &value) in values.iter().enumerate() {
        let v = vectors.column(k);
        let residual = (m * v - v * value).amax();
        if residual > EIGEN_RESIDUAL_TOL * scale {
            return Err(Error::Eigensolver(format!(
                "eigenpair {k} has residual {residual:e}"
            )));
        }
    }
    Ok((values, vectors))
}

/// Sorted spectrum of a symmetric matrix.
pub fn laplacian_spectrum(m: &DMatrix<f64>) -> Result<Spectrum> {
    check_symmetric(m)?;
    let n = m.nrows();
    let eig = nalgebra::SymmetricEigen::try_new(m.clone(), f64::EPSILON, 100 * n.max(10))
        .ok_or_else(|| Error::Eigensolver(format!("symmetric matrix of side {n}")))?;
    Spectrum::new(eig.eigenvalues.iter().copied().collect())
}
