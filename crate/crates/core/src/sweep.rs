//! Architecture sweeps: for each hop count n, build the n-hop closure, apply
//! the delay `tau_n`, design gains, and record the resulting convergence rate.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gains::{design, Strategy};
use crate::graph::{hop_closure, max_hop, Topology};
use crate::spectral::stability_bound;

/// Map from hop count `n >= 1` to a feedback delay `tau_n >= 1`, strictly
/// increasing in `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayModel {
    kind: DelayKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum DelayKind {
    Linear,
    Quadratic,
    Table(Vec<usize>),
    #[cfg(test)]
    Constant(usize),
}

impl DelayModel {
    /// `tau_n = n`
    pub fn linear() -> Self {
        DelayModel {
            kind: DelayKind::Linear,
        }
    }

    /// `tau_n = n^2`
    pub fn quadratic() -> Self {
        DelayModel {
            kind: DelayKind::Quadratic,
        }
    }

    /// `tau_n = table[n - 1]`.
    pub fn table(values: Vec<usize>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("delay table is empty".into()));
        }
        if values[0] < 1 {
            return Err(Error::InvalidInput(
                "delays must be at least one step".into(),
            ));
        }
        if let Some(w) = values.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!(
                "delay table must be strictly increasing, found {} then {}",
                w[0], w[1]
            )));
        }
        Ok(DelayModel {
            kind: DelayKind::Table(values),
        })
    }

    /// Whitespace-separated delays, first entry for n = 1.
    pub fn table_from_text(text: &str) -> Result<Self> {
        let values = text
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad delay entry `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        DelayModel::table(values)
    }

    /// Constant delay. Violates the increasing-delay assumption; only used to
    /// contrast the architecture-dependent case.
    #[cfg(test)]
    pub(crate) fn constant(tau: usize) -> Self {
        DelayModel {
            kind: DelayKind::Constant(tau),
        }
    }

    pub fn tau(&self, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(Error::InvalidInput("hop count must be at least 1".into()));
        }
        match &self.kind {
            DelayKind::Linear => Ok(n),
            DelayKind::Quadratic => Ok(n * n),
            DelayKind::Table(values) => values.get(n - 1).copied().ok_or_else(|| {
                Error::InvalidInput(format!(
                    "delay table has {} entries, hop count {n} requested",
                    values.len()
                ))
            }),
            #[cfg(test)]
            DelayKind::Constant(t) => Ok(*t),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            DelayKind::Linear => "linear",
            DelayKind::Quadratic => "quadratic",
            DelayKind::Table(_) => "table",
            #[cfg(test)]
            DelayKind::Constant(_) => "constant",
        }
    }
}

/// One (hop count, strategy) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub n: usize,
    pub tau: usize,
    pub strategy: String,
    pub gain_or_beta: f64,
    pub lambda2: f64,
    #[serde(rename = "lambdaN")]
    pub lambda_n: f64,
    pub ubar: f64,
    pub stable: bool,
    pub rate: f64,
}

pub const CSV_HEADER: [&str; 9] = [
    "n",
    "tau",
    "strategy",
    "gain_or_beta",
    "lambda2",
    "lambdaN",
    "ubar",
    "stable",
    "rate",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Free-form description of the base graph.
    pub base: String,
    pub seed: Option<u64>,
    pub delay: String,
    pub strategies: Vec<Strategy>,
    /// Sorted by n, then by position in `strategies`.
    pub reports: Vec<RateReport>,
    /// Minimizing hop count per strategy; `None` when every cell is unstable.
    pub best: Vec<(Strategy, Option<usize>)>,
}

fn evaluate_cell(
    closure: &Topology,
    n: usize,
    tau: usize,
    strategy: Strategy,
) -> Result<RateReport> {
    let d = design(closure, tau, strategy)?;
    Ok(RateReport {
        n,
        tau,
        strategy: strategy.as_str().to_string(),
        gain_or_beta: d.scale,
        lambda2: d.lambda2,
        lambda_n: d.lambda_n,
        ubar: stability_bound(tau),
        stable: d.stable,
        rate: d.rate,
    })
}

/// Hop count of the smallest stable rate for `strategy`; ties go to the
/// smaller n.
pub fn argmin_stable(reports: &[RateReport], strategy: Strategy) -> Option<usize> {
    reports
        .iter()
        .filter(|r| r.strategy == strategy.as_str() && r.stable)
        .min_by(|a, b| a.rate.total_cmp(&b.rate).then(a.n.cmp(&b.n)))
        .map(|r| r.n)
}

/// A single sweep cell.
pub fn rate_point(
    g1: &Topology,
    n: usize,
    delays: &DelayModel,
    strategy: Strategy,
) -> Result<RateReport> {
    let diameter = max_hop(g1)?;
    if n == 0 || n > diameter {
        return Err(Error::InvalidInput(format!(
            "hop count {n} outside 1..={diameter}"
        )));
    }
    let tau = delays.tau(n)?;
    evaluate_cell(&hop_closure(g1, n)?, n, tau, strategy)
}

/// Evaluates every (n, strategy) cell for `n` from 1 to the diameter of `g1`
/// (excluding the complete closure when `include_complete` is false).
///
/// Cells run on the current rayon pool; output order does not depend on it.
pub fn sweep(
    g1: &Topology,
    delays: &DelayModel,
    strategies: &[Strategy],
    include_complete: bool,
) -> Result<SweepResult> {
    if strategies.is_empty() {
        return Err(Error::InvalidInput("no strategies requested".into()));
    }
    let diameter = max_hop(g1)?;
    let last = if include_complete {
        diameter
    } else {
        diameter - 1
    };
    if last == 0 {
        return Err(Error::InvalidInput(
            "base graph is complete; nothing to sweep without the complete closure".into(),
        ));
    }
    let hops: Vec<usize> = (1..=last).collect();
    let taus = hops
        .iter()
        .map(|&n| delays.tau(n))
        .collect::<Result<Vec<_>>>()?;
    let closures = hops
        .par_iter()
        .map(|&n| hop_closure(g1, n))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, Strategy)> = (0..hops.len())
        .flat_map(|i| strategies.iter().map(move |&s| (i, s)))
        .collect();
    let reports = cells
        .par_iter()
        .map(|&(i, s)| evaluate_cell(&closures[i], hops[i], taus[i], s))
        .collect::<Result<Vec<_>>>()?;

    let best = strategies
        .iter()
        .map(|&s| (s, argmin_stable(&reports, s)))
        .collect();

    Ok(SweepResult {
        base: format!("N={} E={}", g1.n_nodes(), g1.n_edges()),
        seed: None,
        delay: delays.name().to_string(),
        strategies: strategies.to_vec(),
        reports,
        best,
    })
}

impl SweepResult {
    pub fn best_for(&self, strategy: Strategy) -> Option<usize> {
        self.best
            .iter()
            .find(|(s, _)| *s == strategy)
            .and_then(|(_, n)| *n)
    }

    pub fn report(&self, n: usize, strategy: Strategy) -> Option<&RateReport> {
        self.reports
            .iter()
            .find(|r| r.n == n && r.strategy == strategy.as_str())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(CSV_HEADER).map_err(csv_err)?;
        for r in &self.reports {
            w.write_record([
                r.n.to_string(),
                r.tau.to_string(),
                r.strategy.clone(),
                r.gain_or_beta.to_string(),
                r.lambda2.to_string(),
                r.lambda_n.to_string(),
                r.ubar.to_string(),
                r.stable.to_string(),
                r.rate.to_string(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Summary with the argmin row per strategy.
    pub fn summary(&self) -> SweepSummary {
        let best = self
            .best
            .iter()
            .map(|&(s, n)| {
                let row = n.and_then(|n| self.report(n, s)).cloned();
                (s.as_str().to_string(), row)
            })
            .collect();
        SweepSummary {
            base: self.base.clone(),
            seed: self.seed,
            delay: self.delay.clone(),
            hops: self.reports.iter().map(|r| r.n).max().unwrap_or(0),
            best,
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub base: String,
    pub seed: Option<u64>,
    pub delay: String,
    pub hops: usize,
    /// Argmin row per strategy, `null` when no cell is stable.
    pub best: BTreeMap<String, Option<RateReport>>,
}
