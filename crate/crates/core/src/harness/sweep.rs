use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::config::SimConfig;
use crate::harness::point::{derive_seed, run_point, RunResult};

/// A sweep point that failed, with its error message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub axis_value: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub results: Vec<RunResult>,
    pub failures: Vec<PointFailure>,
}

/// Seed of sweep point `index`.
pub fn point_seed(base_seed: u64, index: usize) -> u64 {
    derive_seed(base_seed, index as u64)
}

/// Runs every axis value of the configured sweep. Failed points are
/// reported alongside the results of the others; results are sorted by
/// axis value.
pub fn run_sweep(cfg: &SimConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let mut out = SweepOutcome::default();
    for (i, &v) in cfg.sweep.values.iter().enumerate() {
        let seed = point_seed(cfg.sweep.base_seed, i);
        match run_point(&cfg.at(v), seed) {
            Ok(r) => out.results.push(r),
            Err(e) => out.failures.push(PointFailure {
                axis_value: v,
                message: e.at(format!("{:?} = {v}", cfg.sweep.axis)).to_string(),
            }),
        }
    }
    out.results.sort_by(|a, b| a.axis_value.total_cmp(&b.axis_value));
    Ok(out)
}
