//! Memoryless blanking and clipping at the ADC rate, and exhaustive
//! threshold search over a fixed grid.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ofdm::BerCount;
use crate::signal::SignalBuffer;

fn check_threshold(t: f64) -> Result<()> {
    if t > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidThreshold(t))
    }
}

pub fn blank(r: Complex64, threshold: f64) -> Result<Complex64> {
    check_threshold(threshold)?;
    Ok(if r.norm() > threshold {
        Complex64::default()
    } else {
        r
    })
}

pub fn clip_baseline(r: Complex64, threshold: f64) -> Result<Complex64> {
    check_threshold(threshold)?;
    let m = r.norm();
    Ok(if m > threshold { r * (threshold / m) } else { r })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    Blanking,
    Clipping,
}

impl Nonlinearity {
    pub fn apply_sample(self, r: Complex64, threshold: f64) -> Result<Complex64> {
        match self {
            Nonlinearity::Blanking => blank(r, threshold),
            Nonlinearity::Clipping => clip_baseline(r, threshold),
        }
    }

    pub fn apply(self, buf: &SignalBuffer, threshold: f64) -> Result<SignalBuffer> {
        check_threshold(threshold)?;
        let t2 = threshold * threshold;
        let out = buf
            .samples()
            .iter()
            .map(|&r| {
                let p = r.norm_sqr();
                if p <= t2 {
                    r
                } else {
                    match self {
                        Nonlinearity::Blanking => Complex64::default(),
                        Nonlinearity::Clipping => r * (threshold / p.sqrt()),
                    }
                }
            })
            .collect();
        SignalBuffer::new(out, buf.sample_rate(), buf.origin())
    }

    pub fn label(self) -> &'static str {
        match self {
            Nonlinearity::Blanking => "blanking",
            Nonlinearity::Clipping => "clipping",
        }
    }
}

/// Thresholds are multiples of the received RMS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSearchSpec {
    pub grid: Vec<f64>,
    pub trials_per_point: usize,
}

impl ThresholdSearchSpec {
    pub fn new(grid: Vec<f64>, trials_per_point: usize) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidConfig("threshold grid is empty".into()));
        }
        if grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidConfig("threshold grid values must be positive".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("threshold grid must be strictly increasing".into()));
        }
        Ok(Self {
            grid,
            trials_per_point,
        })
    }

    /// `points` values spaced logarithmically from `lo` to `hi` inclusive.
    pub fn log_grid(lo: f64, hi: f64, points: usize, trials_per_point: usize) -> Result<Self> {
        if points == 0 || !(lo > 0.0) || !(hi >= lo) {
            return Err(Error::InvalidConfig(format!(
                "bad threshold grid {lo}..{hi} with {points} points"
            )));
        }
        let grid = if points == 1 {
            vec![lo]
        } else {
            let r = (hi / lo).ln();
            (0..points)
                .map(|i| lo * (r * i as f64 / (points - 1) as f64).exp())
                .collect()
        };
        Self::new(grid, trials_per_point)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSearch {
    pub threshold: f64,
    pub at_optimum: BerCount,
    pub curve: Vec<(f64, BerCount)>,
}

/// Picks the grid point of lowest BER, the smallest threshold winning ties.
/// `counts[i]` must come from the same trials for every `i`.
pub fn select_threshold(spec: &ThresholdSearchSpec, counts: &[BerCount]) -> Result<ThresholdSearch> {
    if counts.len() != spec.grid.len() {
        return Err(Error::LengthMismatch {
            expected: spec.grid.len(),
            found: counts.len(),
        });
    }
    if let Some(i) = counts.iter().position(|c| c.errors == 0) {
        return Err(Error::BudgetTooSmall {
            threshold: spec.grid[i],
        });
    }
    let mut best = 0;
    for (i, c) in counts.iter().enumerate().skip(1) {
        // Cross-multiplied comparison avoids rounding in the ratio.
        let lhs = c.errors as u128 * counts[best].total as u128;
        let rhs = counts[best].errors as u128 * c.total as u128;
        if lhs < rhs {
            best = i;
        }
    }
    Ok(ThresholdSearch {
        threshold: spec.grid[best],
        at_optimum: counts[best],
        curve: spec.grid.iter().copied().zip(counts.iter().copied()).collect(),
    })
}

/// Exhaustive search: `eval` returns one count per grid threshold, all on
/// common random numbers.
pub fn optimize_threshold<F>(spec: &ThresholdSearchSpec, eval: F) -> Result<ThresholdSearch>
where
    F: FnOnce(&[f64]) -> Result<Vec<BerCount>>,
{
    let counts = eval(&spec.grid)?;
    select_threshold(spec, &counts)
}
