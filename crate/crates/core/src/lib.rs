//! Simulation of an OFDM powerline link in impulsive noise, with an
//! emulated analog adaptive limiter, digital baselines and a Monte Carlo
//! harness.

pub mod acdl;
pub mod baselines;
pub mod dsp;
pub mod error;
pub mod exec;
pub mod harness;
pub mod noise;
pub mod ofdm;
pub mod signal;

pub use error::{Error, Result};
pub use signal::{ProbePoint, SignalBuffer};
