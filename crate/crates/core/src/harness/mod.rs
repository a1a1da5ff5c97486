//! Configuration, Monte Carlo operating points and sweeps, and result
//! emission.

pub mod config;
pub mod emit;
pub mod point;
pub mod probes;
pub mod stats;
pub mod sweep;

pub use config::{Axis, BaselineConfig, BaselineKind, ChainKind, SimConfig, SweepConfig};
pub use emit::{emit_results, Format, ResultRow};
pub use point::{derive_seed, measure_output_snr, snr_parts, SnrMeter, SnrParts, run_point, run_point_chains, ChainSpec, RunResult, ThresholdChoice};
pub use sweep::{run_sweep, SweepOutcome};
