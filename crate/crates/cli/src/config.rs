use std::path::Path;

use serde::{Deserialize, Serialize};
use stacked_contact::estimate::InitSpec;
use stacked_contact::ParamSet;

use crate::CliError;

/// Flat run configuration. Every key is optional; unknown keys are errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub delta: f64,
    pub range: usize,
    pub dim: usize,
    pub side: usize,
    /// `all-1`, `all-2`, `single-2` or `density`.
    pub init: String,
    pub p1: f64,
    pub p2: f64,
    pub horizon: f64,
    pub seed: u64,
    pub reps: usize,
    pub raster_out: Option<String>,
    pub csv_out: Option<String>,
    pub sample_interval: f64,
    pub lambda1_low: f64,
    pub lambda2_low: Option<f64>,
    pub lambda0: Option<f64>,
    pub epsilon0: f64,
    pub u1: f64,
    pub u2: f64,
    pub step: f64,
    pub block_time: f64,
    pub recoveries: u32,
    pub lambda1_grid: Vec<f64>,
    pub lambda2_grid: Vec<f64>,
    /// `basic-cp` or `stacked-lambda2`.
    pub target: String,
    pub bracket: (f64, f64),
    pub tolerance: f64,
    pub threshold: f64,
    pub p: f64,
    /// `survival` or `extinction`.
    pub rule: String,
    pub width: usize,
    pub levels: usize,
    /// Sequential replicate execution.
    pub sequential: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            lambda1: 2.0,
            lambda2: 3.0,
            delta: 1.0,
            range: 1,
            dim: 1,
            side: 200,
            init: "all-2".into(),
            p1: 0.5,
            p2: 0.25,
            horizon: 20.0,
            seed: 1,
            reps: 200,
            raster_out: None,
            csv_out: None,
            sample_interval: 1.0,
            lambda1_low: 1.0,
            lambda2_low: None,
            lambda0: None,
            epsilon0: 0.1,
            u1: 0.1,
            u2: 0.1,
            step: 1e-3,
            block_time: 0.05,
            recoveries: 2,
            lambda1_grid: vec![2.0, 4.0, 6.0, 8.0],
            lambda2_grid: vec![2.0, 4.0, 6.0, 8.0],
            target: "basic-cp".into(),
            bracket: (1.0, 6.0),
            tolerance: 0.1,
            threshold: 0.5,
            p: 0.9,
            rule: "survival".into(),
            width: 100,
            levels: 100,
            sequential: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
            }
        }
    }

    pub fn params(&self) -> Result<ParamSet, CliError> {
        Ok(ParamSet::new(self.lambda1, self.lambda2, self.delta, self.range, self.dim, self.side)?)
    }

    pub fn init_spec(&self) -> Result<InitSpec, CliError> {
        match self.init.as_str() {
            "all-1" => Ok(InitSpec::AllHealthy),
            "all-2" => Ok(InitSpec::AllInfected),
            "single-2" => Ok(InitSpec::SingleInfected),
            "density" => Ok(InitSpec::Density { p1: self.p1, p2: self.p2 }),
            other => Err(CliError::Config(format!(
                "init: expected all-1, all-2, single-2 or density, got {other:?}"
            ))),
        }
    }

    /// Single-line JSON echo for output headers.
    pub fn echo(&self) -> String {
        format!("config {}", serde_json::to_string(self).expect("config serializes"))
    }
}
