//! Feedback-gain design for a fixed architecture.
//!
//! A gain matrix is a weighted Laplacian of the architecture graph,
//! `K = sum_e w_e L_e`, which makes it symmetric with zero row sums and keeps
//! its off-diagonal support on the graph edges. The closed loop is
//! `x(k+1) = x(k) - K x(k - tau)`.
//!
//! Three strategies are provided:
//! - `uniform-standard`: `K = g L` with `g = ubar(tau) / (2 d_max + 1)`.
//! - `uniform-optimal`: `K = g L` with `g` balancing the modes of the smallest
//!   and largest nonzero Laplacian eigenvalues.
//! - `multi-optimal`: per-edge weights minimizing `lambda_N / lambda_2`, then
//!   the same balancing scalar.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{laplacian, weighted_laplacian, Topology};
use crate::spectral::{
    conv_rate, lambda_th, laplacian_spectrum, rho, stability_bound, symmetric_eigen, Spectrum,
    MARGINAL_TOL,
};

/// Factor applied to the stability limit when the balance point is
/// infeasible.
pub const CLAMP_FACTOR: f64 = 1.0 - 1e-9;

/// Tolerance on the balance residual `|rho(s lo) - rho(s hi)|`.
pub const BALANCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    UniformStandard,
    UniformOptimal,
    MultiOptimal,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::UniformStandard,
        Strategy::UniformOptimal,
        Strategy::MultiOptimal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::UniformStandard => "uniform-standard",
            Strategy::UniformOptimal => "uniform-optimal",
            Strategy::MultiOptimal => "multi-optimal",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-standard" | "uniform-std" | "standard" => Ok(Strategy::UniformStandard),
            "uniform-optimal" | "uniform-opt" => Ok(Strategy::UniformOptimal),
            "multi-optimal" | "multi-opt" | "structured" => Ok(Strategy::MultiOptimal),
            other => Err(Error::InvalidInput(format!("unknown strategy `{other}`"))),
        }
    }
}

/// Symmetric gain matrix with zero row sums, supported on `pattern`'s edges.
///
/// Stored as one weight per pattern edge: `K[i][j] = K[j][i] = -w_e` for edge
/// `e = (i, j)` and `K[i][i] = sum of w_e over edges at i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    pattern: Topology,
    weights: Vec<f64>,
}

/// Flat file form of a [`GainMatrix`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainMatrixFile {
    pub n: usize,
    pub pattern_edges: Vec<[usize; 2]>,
    pub weights: Vec<f64>,
    pub diagonal: Vec<f64>,
}

impl GainMatrix {
    pub fn new(pattern: Topology, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != pattern.n_edges() {
            return Err(Error::DimensionMismatch {
                expected: pattern.n_edges(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput("non-finite gain weight".into()));
        }
        Ok(GainMatrix { pattern, weights })
    }

    /// `g L` for the pattern's Laplacian `L`.
    pub fn uniform(pattern: Topology, gain: f64) -> Result<Self> {
        let weights = vec![gain; pattern.n_edges()];
        GainMatrix::new(pattern, weights)
    }

    pub fn pattern(&self) -> &Topology {
        &self.pattern
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n(&self) -> usize {
        self.pattern.n_nodes()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        GainMatrix::new(
            self.pattern.clone(),
            self.weights.iter().map(|w| w * factor).collect(),
        )
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n()];
        for (&(i, j), &w) in self.pattern.edges().iter().zip(&self.weights) {
            d[i] += w;
            d[j] += w;
        }
        d
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        weighted_laplacian(&self.pattern, &self.weights)
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        laplacian_spectrum(&self.to_dense())
    }

    pub fn to_file(&self) -> GainMatrixFile {
        GainMatrixFile {
            n: self.n(),
            pattern_edges: self.pattern.edges().iter().map(|&(i, j)| [i, j]).collect(),
            weights: self.weights.clone(),
            diagonal: self.diagonal(),
        }
    }

    /// Rebuilds the matrix from its file form, checking that the stored
    /// diagonal cancels the off-diagonal row sums.
    pub fn from_file(file: &GainMatrixFile) -> Result<Self> {
        let pattern = Topology::new(file.n, file.pattern_edges.iter().map(|e| (e[0], e[1])))?;
        if pattern
            .edges()
            .iter()
            .zip(&file.pattern_edges)
            .any(|(&(i, j), e)| [i, j] != *e)
        {
            return Err(Error::InvalidInput(
                "pattern_edges must be listed once each as i < j in sorted order".into(),
            ));
        }
        let matrix = GainMatrix::new(pattern, file.weights.clone())?;
        if file.diagonal.len() != file.n {
            return Err(Error::DimensionMismatch {
                expected: file.n,
                got: file.diagonal.len(),
            });
        }
        let scale = matrix.weights.iter().fold(1.0_f64, |a, w| a.max(w.abs()));
        for (i, (got, want)) in file.diagonal.iter().zip(matrix.diagonal()).enumerate() {
            if (got - want).abs() > 1e-12 * scale * file.n as f64 {
                return Err(Error::InvalidInput(format!(
                    "row {i} does not sum to zero (diagonal {got}, expected {want})"
                )));
            }
        }
        Ok(matrix)
    }
}

/// True iff every eigenvalue but the structural zero lies in
/// `(0, stability_bound(tau))` and no mode sits within the marginal band of
/// the unit circle.
pub fn is_stable(gain: &GainMatrix, tau: usize) -> Result<bool> {
    let spec = gain.spectrum()?;
    spectrum_is_stable(&spec, tau)
}

pub(crate) fn spectrum_is_stable(spec: &Spectrum, tau: usize) -> Result<bool> {
    let values = spec.eigenvalues();
    if values.len() < 2 {
        return Ok(false);
    }
    let tol = spec.zero_tolerance();
    let ubar = stability_bound(tau);
    if values[0].abs() > tol || values[1] <= tol || values[values.len() - 1] >= ubar {
        return Ok(false);
    }
    Ok(conv_rate(spec, tau)? < 1.0 - MARGINAL_TOL)
}

/// A gain matrix together with the quantities it was designed for.
#[derive(Debug, Clone, PartialEq)]
pub struct GainDesign {
    pub strategy: Strategy,
    /// `g` for uniform strategies, `beta` for the structured one.
    pub scale: f64,
    pub matrix: GainMatrix,
    pub tau: usize,
    pub lambda2: f64,
    pub lambda_n: f64,
    pub rate: f64,
    pub stable: bool,
}

/// Flat file form of a [`GainDesign`]: the gain matrix fields plus metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFile {
    #[serde(flatten)]
    pub matrix: GainMatrixFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    #[serde(default, rename = "lambdaN", skip_serializing_if = "Option::is_none")]
    pub lambda_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ubar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stable: Option<bool>,
}

impl GainDesign {
    /// Evaluates `matrix` under delay `tau`.
    pub fn evaluate(
        strategy: Strategy,
        scale: f64,
        matrix: GainMatrix,
        tau: usize,
    ) -> Result<Self> {
        let spec = matrix.spectrum()?;
        let rate = conv_rate(&spec, tau)?;
        let stable = spectrum_is_stable(&spec, tau)?;
        Ok(GainDesign {
            strategy,
            scale,
            tau,
            lambda2: spec.lambda2().unwrap_or(0.0),
            lambda_n: spec.lambda_max().unwrap_or(0.0),
            rate,
            stable,
            matrix,
        })
    }

    pub fn to_file(&self) -> DesignFile {
        DesignFile {
            matrix: self.matrix.to_file(),
            strategy: Some(self.strategy.as_str().to_string()),
            tau: Some(self.tau),
            scale: Some(self.scale),
            lambda2: Some(self.lambda2),
            lambda_n: Some(self.lambda_n),
            ubar: Some(stability_bound(self.tau)),
            rate: Some(self.rate),
            stable: Some(self.stable),
        }
    }
}

fn require_design_input(g: &Topology) -> Result<()> {
    if g.n_nodes() < 2 {
        return Err(Error::InvalidInput(
            "gain design needs at least two nodes".into(),
        ));
    }
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    Ok(())
}

/// `K = g L` with `g = ubar(tau) / (2 d_max + 1)`; stable by Gershgorin.
pub fn uniform_standard(g1n: &Topology, tau: usize) -> Result<GainDesign> {
    require_design_input(g1n)?;
    let gain = stability_bound(tau) / (2 * g1n.max_degree() + 1) as f64;
    let matrix = GainMatrix::uniform(g1n.clone(), gain)?;
    GainDesign::evaluate(Strategy::UniformStandard, gain, matrix, tau)
}

/// `K = g L` with `g` equalizing the slowest modes of `lambda_2(L)` and
/// `lambda_N(L)`.
pub fn uniform_optimal(g1n: &Topology, tau: usize) -> Result<GainDesign> {
    require_design_input(g1n)?;
    let spec = laplacian_spectrum(&laplacian(g1n))?;
    let (lo, hi) = extreme_nonzero(&spec)?;
    let gain = bisect_balance(lo, hi, tau)?;
    let matrix = GainMatrix::uniform(g1n.clone(), gain)?;
    GainDesign::evaluate(Strategy::UniformOptimal, gain, matrix, tau)
}

fn extreme_nonzero(spec: &Spectrum) -> Result<(f64, f64)> {
    match (spec.lambda2(), spec.lambda_max()) {
        (Some(lo), Some(hi)) if lo > spec.zero_tolerance() => Ok((lo, hi)),
        _ => Err(Error::Disconnected),
    }
}

/// Scaling `s` that equalizes `rho(s lo)` and `rho(s hi)` on the stable range
/// `s hi < ubar(tau)`.
///
/// `phi(s) = rho(s hi) - rho(s lo)` is negative while both points sit on the
/// decreasing branch of `rho`, positive once both sit on the increasing one,
/// and strictly increasing in between, so bisection applies. Without a sign
/// change on the stable range the clamped endpoint is returned. When `lo` and
/// `hi` coincide every scaling balances; the eigenvalue is placed at the
/// minimizer of `rho`.
pub fn bisect_balance(lo: f64, hi: f64, tau: usize) -> Result<f64> {
    if !(lo > 0.0 && lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidInput(format!(
            "balance needs 0 < lo <= hi, got lo={lo}, hi={hi}"
        )));
    }
    if hi - lo <= 1e-12 * hi {
        return Ok(lambda_th(tau)? / hi);
    }
    let phi = |s: f64| -> Result<f64> { Ok(rho(s * hi, tau)? - rho(s * lo, tau)?) };
    let s_max = stability_bound(tau) / hi;
    let mut b = s_max * CLAMP_FACTOR;
    let phi_b = phi(b)?;
    if phi_b <= 0.0 {
        return Ok(b);
    }
    let mut a = s_max * 1e-3;
    let mut phi_a = phi(a)?;
    let mut shrink = 0;
    while phi_a >= 0.0 {
        if shrink == 60 {
            return Ok(a);
        }
        b = a;
        a *= 0.5;
        phi_a = phi(a)?;
        shrink += 1;
    }
    let (mut best_s, mut best_phi) = if phi_a.abs() < phi_b.abs() {
        (a, phi_a)
    } else {
        (b, phi_b)
    };
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let v = phi(mid)?;
        if v.abs() < best_phi.abs() {
            best_s = mid;
            best_phi = v;
        }
        if v == 0.0 {
            break;
        }
        if v < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(best_s)
}

/// Iteration controls for the edge-weight optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuredOptions {
    pub max_iter: usize,
    /// Largest per-edge move of the first step, as a fraction of the mean
    /// absolute weight. Step `k` is `step0 / k` of that.
    pub step0: f64,
    /// Stop after this many iterations without improvement.
    pub patience: usize,
}

impl Default for StructuredOptions {
    fn default() -> Self {
        StructuredOptions {
            max_iter: 5000,
            step0: 0.5,
            patience: 750,
        }
    }
}

/// Edge weights with `lambda_2 = 1` and the smallest `lambda_N` found.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedWeights {
    pub weights: Vec<f64>,
    pub lambda2: f64,
    pub lambda_n: f64,
    pub iterations: usize,
}

/// Minimizes `lambda_N / lambda_2` of the weighted Laplacian over edge
/// weights by projected subgradient descent, starting from uniform weights.
///
/// Each iterate is rescaled so that `lambda_2 = 1`, which is the projection
/// onto the normalized set. With unit eigenvectors `v_2`, `v_N`, the
/// subgradient of the ratio with respect to `w_e`, `e = (i, j)`, is
/// `(v_N[i] - v_N[j])^2 - ratio * (v_2[i] - v_2[j])^2`.
pub fn minimize_eigen_ratio(g: &Topology, opts: &StructuredOptions) -> Result<NormalizedWeights> {
    require_design_input(g)?;
    let n = g.n_nodes();
    let m = g.n_edges();
    let mut w = vec![1.0; m];
    let mut best: Option<NormalizedWeights> = None;
    let mut last_improvement = 0;
    let mut iterations = 0;

    for k in 1..=opts.max_iter {
        iterations = k;
        let (values, vectors) = symmetric_eigen(&weighted_laplacian(g, &w))?;
        let (l2, ln) = (values[1], values[n - 1]);
        if !(l2 > 1e-12 * ln.abs().max(1e-300)) || !ln.is_finite() {
            // Left the connected cone; restart from the best point with the
            // already smaller step.
            w = best
                .as_ref()
                .map(|b| b.weights.clone())
                .unwrap_or_else(|| vec![1.0; m]);
            continue;
        }
        for x in &mut w {
            *x /= l2;
        }
        let ratio = ln / l2;
        let improved = best
            .as_ref()
            .is_none_or(|b| ratio < b.lambda_n * (1.0 - 1e-12));
        if improved {
            best = Some(NormalizedWeights {
                weights: w.clone(),
                lambda2: 1.0,
                lambda_n: ratio,
                iterations: k,
            });
            last_improvement = k;
        } else if k - last_improvement > opts.patience {
            break;
        }
        if n == 2 || ratio <= 1.0 {
            break;
        }

        let v2 = vectors.column(1);
        let vn = vectors.column(n - 1);
        let grad: Vec<f64> = g
            .edges()
            .iter()
            .map(|&(i, j)| {
                let dn = vn[i] - vn[j];
                let d2 = v2[i] - v2[j];
                dn * dn - ratio * d2 * d2
            })
            .collect();
        let gmax = grad.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        if gmax == 0.0 {
            break;
        }
        let mean_w = w.iter().map(|x| x.abs()).sum::<f64>() / m as f64;
        let step = opts.step0 / k as f64 * mean_w / gmax;
        for (x, d) in w.iter_mut().zip(&grad) {
            *x -= step * d;
        }
    }

    let mut best = best.ok_or_else(|| Error::Optimizer {
        iterations,
        lambda2: f64::NAN,
        lambda_n: f64::NAN,
        best_weights: w.clone(),
    })?;
    // Certify the returned point with a fresh decomposition.
    let spec = laplacian_spectrum(&weighted_laplacian(g, &best.weights))?;
    let (l2, ln) = (spec.eigenvalues()[1], spec.eigenvalues()[n - 1]);
    if !(l2 >= 1.0 - 1e-6 && (l2 - 1.0).abs() <= 1e-6 && ln.is_finite()) {
        return Err(Error::Optimizer {
            iterations,
            lambda2: l2,
            lambda_n: ln,
            best_weights: best.weights,
        });
    }
    best.lambda2 = l2;
    best.lambda_n = ln;
    best.iterations = iterations;
    Ok(best)
}

/// Structured design: optimized edge weights followed by the balancing
/// scalar `beta`.
pub fn optimize_structured(g1n: &Topology, tau: usize) -> Result<GainDesign> {
    optimize_structured_with(g1n, tau, &StructuredOptions::default())
}

pub fn optimize_structured_with(
    g1n: &Topology,
    tau: usize,
    opts: &StructuredOptions,
) -> Result<GainDesign> {
    let normalized = minimize_eigen_ratio(g1n, opts)?;
    let beta = bisect_balance(
        normalized.lambda2,
        normalized.lambda_n.max(normalized.lambda2),
        tau,
    )?;
    let matrix = GainMatrix::new(g1n.clone(), normalized.weights)?.scaled(beta)?;
    GainDesign::evaluate(Strategy::MultiOptimal, beta, matrix, tau)
}

/// Designs gains for `g1n` with the given strategy.
pub fn design(g1n: &Topology, tau: usize, strategy: Strategy) -> Result<GainDesign> {
    match strategy {
        Strategy::UniformStandard => uniform_standard(g1n, tau),
        Strategy::UniformOptimal => uniform_optimal(g1n, tau),
        Strategy::MultiOptimal => optimize_structured(g1n, tau),
    }
}
