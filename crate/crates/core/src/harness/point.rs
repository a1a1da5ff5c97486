//! One operating point: trials on common random numbers for any set of
//! chains, with BER and in-band output SNR accumulated per chain.

use std::time::Instant;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acdl::{agc_tune, AcdlChain, Gains};
use crate::baselines::{select_threshold, Nonlinearity, ThresholdSearchSpec};
use crate::error::{Error, Result};
use crate::harness::config::{ChainKind, SimConfig};
use crate::harness::stats::wilson95;
use crate::noise::{NoiseConfig, NoiseRealization};
use crate::ofdm::{
    assign_carriers, count_ber, map_bits, ofdm_modulate, BerCount, BitFrame, MatchedFilter,
    Receiver,
};
use crate::signal::{fft_forward, resample, Band, SignalBuffer};

/// Output SNR values are capped here when the error vanishes.
pub const SNR_CAP_DB: f64 = 100.0;

/// Largest lag searched when checking reference alignment.
const ALIGN_LAGS: i64 = 2;

/// Derives an independent seed for item `index` under `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdChoice {
    Search(ThresholdSearchSpec),
    /// Multiple of the received RMS.
    Fixed(f64),
}

/// A processing chain evaluated at an operating point.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainSpec {
    Linear,
    Acdl {
        beta: f64,
        substeps: usize,
        force_linear: bool,
    },
    Baseline {
        kind: Nonlinearity,
        threshold: ThresholdChoice,
    },
}

impl ChainSpec {
    pub fn label(&self) -> String {
        match self {
            ChainSpec::Linear => "linear".into(),
            ChainSpec::Acdl {
                beta,
                substeps,
                force_linear,
            } => {
                let mut s = format!("acdl(beta={beta}");
                if *substeps != 1 {
                    s += &format!(",substeps={substeps}");
                }
                if *force_linear {
                    s += ",unbounded";
                }
                s + ")"
            }
            ChainSpec::Baseline { kind, .. } => kind.label().into(),
        }
    }

    /// The chain selected by a configuration.
    pub fn from_config(cfg: &SimConfig) -> Result<Self> {
        Ok(match cfg.chain() {
            ChainKind::Linear => ChainSpec::Linear,
            ChainKind::Acdl => ChainSpec::Acdl {
                beta: cfg.acdl.beta,
                substeps: cfg.acdl.euler_substeps,
                force_linear: cfg.acdl.force_linear,
            },
            ChainKind::Blanking | ChainKind::Clipping => ChainSpec::Baseline {
                kind: cfg.nonlinearity().expect("baseline chain"),
                threshold: match cfg.baselines.threshold {
                    Some(t) => ThresholdChoice::Fixed(t),
                    None => ThresholdChoice::Search(cfg.baselines.search_spec()?),
                },
            },
        })
    }

    fn thresholds(&self) -> &[f64] {
        match self {
            ChainSpec::Baseline {
                threshold: ThresholdChoice::Search(s),
                ..
            } => &s.grid,
            ChainSpec::Baseline {
                threshold: ThresholdChoice::Fixed(t),
                ..
            } => std::slice::from_ref(t),
            _ => &[],
        }
    }

    fn substeps(&self) -> usize {
        match self {
            ChainSpec::Acdl { substeps, .. } => *substeps,
            _ => 1,
        }
    }
}

/// Metrics for one chain at one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub axis_value: f64,
    pub chain: String,
    pub ber: f64,
    pub ber_ci_lo: f64,
    pub ber_ci_hi: f64,
    pub snr_db: f64,
    pub bits: u64,
    pub errors: u64,
    pub seed: u64,
    pub trials: u64,
    /// Threshold used by a baseline, in units of received RMS.
    pub threshold: Option<f64>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl RunResult {
    pub fn ci(&self) -> (f64, f64) {
        (self.ber_ci_lo, self.ber_ci_hi)
    }
}

/// In-band energies of the reference and of the error.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SnrParts {
    pub signal: f64,
    pub error: f64,
}

impl SnrParts {
    pub fn db(&self) -> f64 {
        if self.error <= 0.0 {
            return SNR_CAP_DB;
        }
        (10.0 * (self.signal / self.error).log10()).min(SNR_CAP_DB)
    }
}

impl std::ops::AddAssign for SnrParts {
    fn add_assign(&mut self, rhs: Self) {
        self.signal += rhs.signal;
        self.error += rhs.error;
    }
}

/// Reference spectrum restricted to a band, reused across many processed
/// outputs.
pub struct SnrMeter {
    len: usize,
    bins: Vec<usize>,
    reference: Vec<Complex64>,
    /// Per-lag phasors over `bins`.
    phasors: Vec<(i64, Vec<Complex64>)>,
}

impl SnrMeter {
    pub fn new(reference: &SignalBuffer, band: Band) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let n = reference.len();
        let rate = reference.sample_rate();
        let mut r = reference.samples().to_vec();
        fft_forward(&mut r);
        let bins: Vec<usize> = (0..n)
            .filter(|&k| band.contains(crate::signal::bin_frequency(k, n, rate)))
            .collect();
        let phasors = (-ALIGN_LAGS..=ALIGN_LAGS)
            .map(|lag| {
                let ph = bins
                    .iter()
                    .map(|&k| {
                        let f = crate::signal::bin_frequency(k, n, rate) / rate;
                        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * f * lag as f64)
                    })
                    .collect();
                (lag, ph)
            })
            .collect();
        let reference = bins.iter().map(|&k| r[k]).collect();
        Ok(Self {
            len: n,
            bins,
            reference,
            phasors,
        })
    }

    /// In-band energies of the reference and of `processed - reference`,
    /// after checking that the cross-correlation peaks at zero lag.
    pub fn parts(&self, processed: &SignalBuffer) -> Result<SnrParts> {
        if processed.len() != self.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                found: processed.len(),
            });
        }
        let mut p = processed.samples().to_vec();
        fft_forward(&mut p);
        let p: Vec<Complex64> = self.bins.iter().map(|&k| p[k]).collect();
        let mut parts = SnrParts::default();
        for (a, b) in p.iter().zip(&self.reference) {
            parts.signal += b.norm_sqr();
            parts.error += (a - b).norm_sqr();
        }
        let cross: Vec<Complex64> = p.iter().zip(&self.reference).map(|(a, b)| a * b.conj()).collect();
        let mut best = (0, f64::NEG_INFINITY);
        for (lag, ph) in &self.phasors {
            let c: f64 = cross.iter().zip(ph).map(|(x, w)| (x * w).re).sum();
            if c > best.1 {
                best = (*lag, c);
            }
        }
        if best.0 != 0 && parts.signal > 0.0 {
            return Err(Error::Misaligned { lag: best.0 });
        }
        let scale = 1.0 / (self.len as f64 * self.len as f64);
        parts.signal *= scale;
        parts.error *= scale;
        Ok(parts)
    }
}

/// In-band energies of `reference` and `processed - reference`, after
/// checking that the cross-correlation peaks at zero lag.
pub fn snr_parts(processed: &SignalBuffer, reference: &SignalBuffer, band: Band) -> Result<SnrParts> {
    if processed.len() != reference.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            found: processed.len(),
        });
    }
    SnrMeter::new(reference, band)?.parts(processed)
}

/// Output SNR in dB of `processed` against the aligned `reference` in `band`.
pub fn measure_output_snr(processed: &SignalBuffer, reference: &SignalBuffer, band: Band) -> Result<f64> {
    Ok(snr_parts(processed, reference, band)?.db())
}

/// Per-chain outcome of one trial; baselines carry one entry per threshold.
#[derive(Debug, Clone, Default)]
struct ChainTrial {
    counts: Vec<BerCount>,
    snr: Vec<SnrParts>,
}

/// Receivers and settings shared by all trials of a point.
struct Prepared {
    cfg: SimConfig,
    chains: Vec<ChainSpec>,
    /// Receiver per chain.
    receivers: Vec<Receiver>,
    /// Distinct Euler substep counts needing a linear reference.
    substeps: Vec<usize>,
}

fn calibrated_receiver(cfg: &SimConfig, chain: &ChainSpec) -> Result<Receiver> {
    let unity = AcdlChain::new(&cfg.acdl, &cfg.ofdm, Gains::unity(&cfg.acdl))?;
    let rate = cfg.ofdm.analog_rate();
    match chain {
        ChainSpec::Baseline { .. } => Receiver::calibrate(&cfg.ofdm, MatchedFilter::Standard, |b| {
            unity.process_bypass(&resample(b, rate)?)
        }),
        _ => {
            let mf = if cfg.ofdm.use_modified_mf {
                MatchedFilter::Modified { tau: cfg.acdl.tau_s }
            } else {
                MatchedFilter::Standard
            };
            let lin = unity.with_substeps(chain.substeps())?;
            Receiver::calibrate(&cfg.ofdm, mf, |b| {
                Ok(lin.linear_front(&lin.front_end(&resample(b, rate)?)?, false)?.output)
            })
        }
    }
}

impl Prepared {
    fn new(cfg: &SimConfig, chains: &[ChainSpec]) -> Result<Self> {
        cfg.validate()?;
        let receivers = chains
            .iter()
            .map(|c| calibrated_receiver(cfg, c))
            .collect::<Result<Vec<_>>>()?;
        let mut substeps: Vec<usize> = chains.iter().map(ChainSpec::substeps).collect();
        substeps.sort_unstable();
        substeps.dedup();
        Ok(Self {
            cfg: cfg.clone(),
            chains: chains.to_vec(),
            receivers,
            substeps,
        })
    }

    fn data_range(&self) -> (usize, usize) {
        let per = self.cfg.ofdm.adc_samples_per_symbol();
        let first = self.cfg.sweep.preamble_symbols;
        (first * per, self.cfg.data_symbols() * per)
    }

    fn data_segment(&self, buf: &SignalBuffer) -> Result<SignalBuffer> {
        let (start, len) = self.data_range();
        buf.slice(start, len)
    }

    fn score(
        &self,
        index: usize,
        out: &SignalBuffer,
        meter: &SnrMeter,
        bits: &[u8],
    ) -> Result<(BerCount, SnrParts)> {
        let first = self.cfg.sweep.preamble_symbols;
        let got = self.receivers[index].demodulate(out, first, self.cfg.data_symbols())?;
        let count = count_ber(bits, &got)?;
        let snr = meter.parts(&self.data_segment(out)?)?;
        Ok((count, snr))
    }

    fn run_trial(&self, seed: u64) -> Result<Vec<ChainTrial>> {
        let cfg = &self.cfg;
        let ofdm = &cfg.ofdm;
        let s_total = cfg.sweep.trial_symbols;
        let frame = BitFrame::for_symbols(ofdm, s_total, derive_seed(seed, 0));
        let symbols = assign_carriers(&map_bits(&frame, ofdm.modulation)?, ofdm)?;
        let s = ofdm_modulate(&symbols, ofdm)?;
        let noise_cfg = NoiseConfig {
            seed: derive_seed(seed, 1),
            ..cfg.noise.clone()
        };
        let signal_power = ofdm.n_data_carriers() as f64 / ofdm.fft_size as f64;
        let noise = NoiseRealization::generate(s.len(), s.sample_rate(), &noise_cfg, ofdm, signal_power)?;
        let r = s.add(&noise.total()?)?;

        let per_analog = ofdm.adc_samples_per_symbol() * ofdm.oversample_factor;
        let preamble = r.slice(0, cfg.sweep.preamble_symbols * per_analog)?;
        let gains = agc_tune(&preamble, &cfg.acdl, ofdm)?;
        let preamble_s = cfg.sweep.preamble_symbols as f64 * ofdm.symbol_duration();
        if gains.startup_s > preamble_s * (1.0 + 1e-9) {
            return Err(Error::InvalidConfig(format!(
                "startup window {:.3e} s exceeds the {preamble_s:.3e} s preamble",
                gains.startup_s
            )));
        }
        let base = AcdlChain::new(&cfg.acdl, ofdm, gains)?;
        let x = base.front_end(&r)?;
        let xs = base.front_end(&s)?;
        let band = ofdm.data_band();
        let mut references: Vec<(usize, SnrMeter)> = Vec::new();
        for &m in &self.substeps {
            let c = base.with_substeps(m)?;
            let y = c.linear_front(&xs, false)?.output;
            references.push((m, SnrMeter::new(&self.data_segment(&y)?, band)?));
        }
        let reference = |m: usize| -> &SnrMeter {
            &references.iter().find(|(k, _)| *k == m).expect("prepared").1
        };
        let bits_per = ofdm.bits_per_ofdm_symbol();
        let first = cfg.sweep.preamble_symbols;
        let bits = &frame.bits[first * bits_per..(first + cfg.data_symbols()) * bits_per];

        let mut bypass: Option<(SignalBuffer, SnrMeter)> = None;
        let mut out = Vec::with_capacity(self.chains.len());
        for (i, chain) in self.chains.iter().enumerate() {
            let mut trial = ChainTrial::default();
            match chain {
                ChainSpec::Linear => {
                    let y = base.linear_front(&x, false)?.output;
                    let (c, p) = self.score(i, &y, reference(1), bits)?;
                    trial.counts.push(c);
                    trial.snr.push(p);
                }
                ChainSpec::Acdl {
                    beta,
                    substeps,
                    force_linear,
                } => {
                    let c = base
                        .with_beta(*beta)
                        .with_substeps(*substeps)?
                        .with_force_linear(*force_linear);
                    let y = c.process_front(&x, false)?.output;
                    let (c, p) = self.score(i, &y, reference(*substeps), bits)?;
                    trial.counts.push(c);
                    trial.snr.push(p);
                }
                ChainSpec::Baseline { kind, .. } => {
                    if bypass.is_none() {
                        let clean = base.process_bypass(&s)?;
                        let meter = SnrMeter::new(&self.data_segment(&clean)?, band)?;
                        bypass = Some((base.process_bypass(&r)?, meter));
                    }
                    let (rx, meter) = bypass.as_ref().expect("set above");
                    let rms = rx.mean_power().sqrt();
                    for &t in chain.thresholds() {
                        let y = kind.apply(rx, t * rms)?;
                        let (c, p) = self.score(i, &y, meter, bits)?;
                        trial.counts.push(c);
                        trial.snr.push(p);
                    }
                }
            }
            out.push(trial);
        }
        Ok(out)
    }
}

/// Running totals for one chain.
#[derive(Debug, Clone)]
struct Tally {
    counts: Vec<BerCount>,
    snr: Vec<SnrParts>,
}

impl Tally {
    fn new(n: usize) -> Self {
        Self {
            counts: vec![BerCount { errors: 0, total: 0 }; n.max(1)],
            snr: vec![SnrParts::default(); n.max(1)],
        }
    }

    fn add(&mut self, t: &ChainTrial) {
        for (a, b) in self.counts.iter_mut().zip(&t.counts) {
            *a += *b;
        }
        for (a, b) in self.snr.iter_mut().zip(&t.snr) {
            *a += *b;
        }
    }

    /// Index of the lowest error count, smallest index on ties.
    fn best(&self) -> usize {
        let mut best = 0;
        for (i, c) in self.counts.iter().enumerate() {
            if c.errors < self.counts[best].errors {
                best = i;
            }
        }
        best
    }
}

/// Runs trials in fixed-size batches until every chain meets the stopping
/// rule. Results do not depend on the execution mode.
fn run_trials(prep: &Prepared, seed: u64, stream_offset: u64, max_trials: usize, stop: bool) -> Result<(Vec<Tally>, u64)> {
    let sweep = &prep.cfg.sweep;
    let mut tallies: Vec<Tally> = prep.chains.iter().map(|c| Tally::new(c.thresholds().len())).collect();
    let mut done = 0u64;
    let batch = sweep.batch_size as u64;
    let finished = |t: &[Tally]| {
        t.iter().all(|t| {
            let c = t.counts[t.best()];
            c.total >= sweep.bits_min || (stop && sweep.stop_at_errors > 0 && c.errors >= sweep.stop_at_errors)
        })
    };
    while (done as usize) < max_trials && !(stop && finished(&tallies)) {
        let end = (done + batch).min(max_trials as u64);
        let outcomes = sweep
            .execution
            .map(done..end, |i| prep.run_trial(derive_seed(seed, stream_offset + i)));
        for o in outcomes {
            for (tally, trial) in tallies.iter_mut().zip(o?) {
                tally.add(&trial);
            }
        }
        done = end;
    }
    Ok((tallies, done))
}

fn result_for(
    chain: &ChainSpec,
    tally: &Tally,
    axis_value: f64,
    seed: u64,
    trials: u64,
    threshold: Option<f64>,
    pick: usize,
) -> RunResult {
    let c = tally.counts[pick];
    let (lo, hi) = wilson95(c.errors, c.total);
    RunResult {
        axis_value,
        chain: chain.label(),
        ber: c.ber(),
        ber_ci_lo: lo,
        ber_ci_hi: hi,
        snr_db: tally.snr[pick].db(),
        bits: c.total,
        errors: c.errors,
        seed,
        trials,
        threshold,
        wall_time_s: 0.0,
    }
}

/// Seed offset separating threshold-search trials from measurement trials.
const SEARCH_STREAM: u64 = 1 << 40;

/// Evaluates `chains` on common random numbers at the configured operating
/// point. `axis_value` only labels the results.
pub fn run_point_chains(cfg: &SimConfig, chains: &[ChainSpec], axis_value: f64, seed: u64) -> Result<Vec<RunResult>> {
    let start = Instant::now();
    let mut chains = chains.to_vec();
    // Thresholds chosen on separate trials become fixed for measurement.
    for chain in chains.iter_mut() {
        if let ChainSpec::Baseline {
            kind,
            threshold: ThresholdChoice::Search(spec),
        } = chain
        {
            if spec.trials_per_point > 0 {
                let probe = vec![ChainSpec::Baseline {
                    kind: *kind,
                    threshold: ThresholdChoice::Search(spec.clone()),
                }];
                let prep = Prepared::new(cfg, &probe)?;
                let (tallies, _) = run_trials(&prep, seed, SEARCH_STREAM, spec.trials_per_point, false)?;
                let found = select_threshold(spec, &tallies[0].counts)?;
                *chain = ChainSpec::Baseline {
                    kind: *kind,
                    threshold: ThresholdChoice::Fixed(found.threshold),
                };
            }
        }
    }
    let prep = Prepared::new(cfg, &chains)?;
    let (tallies, trials) = run_trials(&prep, seed, 0, cfg.sweep.trials, true)?;
    let elapsed = start.elapsed().as_secs_f64();
    chains
        .iter()
        .zip(&tallies)
        .map(|(chain, tally)| {
            let (pick, threshold) = match chain {
                ChainSpec::Baseline {
                    threshold: ThresholdChoice::Search(spec),
                    ..
                } => {
                    let found = select_threshold(spec, &tally.counts)?;
                    let i = spec.grid.iter().position(|t| *t == found.threshold).expect("grid point");
                    (i, Some(found.threshold))
                }
                ChainSpec::Baseline {
                    threshold: ThresholdChoice::Fixed(t),
                    ..
                } => (0, Some(*t)),
                _ => (0, None),
            };
            let mut r = result_for(chain, tally, axis_value, seed, trials, threshold, pick);
            r.wall_time_s = elapsed;
            Ok(r)
        })
        .collect()
}

/// Evaluates the configured chain at the configured operating point.
pub fn run_point(cfg: &SimConfig, seed: u64) -> Result<RunResult> {
    let chain = ChainSpec::from_config(cfg)?;
    let axis_value = match cfg.sweep.axis {
        crate::harness::config::Axis::EbN0 => cfg.noise.eb_n0_db,
        crate::harness::config::Axis::Sir => cfg.noise.sir_db,
        crate::harness::config::Axis::Beta => cfg.acdl.beta,
        crate::harness::config::Axis::Threshold => cfg.baselines.threshold.unwrap_or(f64::NAN),
    };
    Ok(run_point_chains(cfg, &[chain], axis_value, seed)?.remove(0))
}
