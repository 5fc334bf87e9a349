//! Flat JSON experiment configuration shared by `graph` and `sweep`.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Seed used when a random generator is requested without one.
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Regular,
    Ring,
    Clustered,
    Path,
    Complete,
    Star,
}

impl GraphKind {
    pub fn is_random(self) -> bool {
        matches!(self, GraphKind::Regular | GraphKind::Clustered)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GraphKind::Regular => "regular",
            GraphKind::Ring => "ring",
            GraphKind::Clustered => "clustered",
            GraphKind::Path => "path",
            GraphKind::Complete => "complete",
            GraphKind::Star => "star",
        }
    }
}

/// Every field is optional so that a file and the command line can each
/// supply a part; flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphKind>,
    /// Edge-list file used instead of a generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_sizes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_intra: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_inter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategies: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub include_complete: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,
}

macro_rules! overlay_fields {
    ($base:expr, $top:expr, $($f:ident),*) => {
        ExperimentConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

impl ExperimentConfig {
    /// Fields set in `top` replace those of `self`.
    pub fn overlay(self, top: ExperimentConfig) -> ExperimentConfig {
        overlay_fields!(
            self,
            top,
            graph,
            input,
            n,
            degree,
            seed,
            cluster_sizes,
            p_intra,
            p_inter,
            delay,
            strategies,
            include_complete,
            out,
            summary
        )
    }

    /// Fills defaults: a random generator always gets an explicit seed.
    pub fn materialize(mut self) -> ExperimentConfig {
        if self.input.is_none() && self.graph.is_some_and(GraphKind::is_random) {
            self.seed.get_or_insert(DEFAULT_SEED);
        }
        if self.graph == Some(GraphKind::Regular) {
            self.degree.get_or_insert(3);
        }
        self
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("bad config {}: {e}", path.display())))?;
        Ok(config.materialize())
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, text + "\n")
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
    }
}
