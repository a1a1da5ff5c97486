//! Thermal, cyclostationary and asynchronous impulsive noise at the analog
//! emulation rate, with power calibration against the desired signal.
//!
//! Impulsive components are generated as a white complex Gaussian process
//! modulated by its instantaneous variance envelope
//! `sum_k A_k^2 exp(-2 (t - t_k) / tau)`. A sum of independent Gaussians with
//! those variances has exactly this law, so one normal draw per sample
//! suffices however many bursts overlap.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::ofdm::OfdmConfig;
use crate::signal::{fft_forward, fft_inverse, ProbePoint, SignalBuffer};

/// RNG stream indices, one per noise component.
const STREAM_THERMAL: u64 = 1;
const STREAM_CS: u64 = 2;
const STREAM_AS: u64 = 3;
const STREAM_PHASE: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmplitudeDist {
    Gaussian,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub eb_n0_db: f64,
    /// Signal over total impulsive power; `inf` disables impulsive noise.
    #[serde(with = "extended_f64")]
    pub sir_db: f64,
    pub inv_lambda_s: f64,
    pub tau_cs_s: f64,
    pub tau_as_s: f64,
    pub f_ac_hz: f64,
    pub cs_as_ratio: f64,
    pub as_amplitude: AmplitudeDist,
    /// Spectral decay applied to shaped components.
    pub shape_db_per_mhz: f64,
    pub shape_thermal: bool,
    pub shape_cyclostationary: bool,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            eb_n0_db: 10.0,
            sir_db: 0.0,
            inv_lambda_s: 2e-5,
            tau_cs_s: 200e-6,
            tau_as_s: 2e-6,
            f_ac_hz: 60.0,
            cs_as_ratio: 3.0,
            as_amplitude: AmplitudeDist::Gaussian,
            shape_db_per_mhz: 30.0,
            shape_thermal: true,
            shape_cyclostationary: true,
            seed: 42,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.eb_n0_db.is_finite() {
            return Err(Error::NonFinite {
                name: "eb_n0_db",
                value: self.eb_n0_db,
            });
        }
        if self.sir_db.is_nan() || self.sir_db == f64::NEG_INFINITY {
            return Err(Error::NonFinite {
                name: "sir_db",
                value: self.sir_db,
            });
        }
        ensure_positive("inv_lambda_s", self.inv_lambda_s)?;
        ensure_positive("tau_cs_s", self.tau_cs_s)?;
        ensure_positive("tau_as_s", self.tau_as_s)?;
        ensure_positive("f_ac_hz", self.f_ac_hz)?;
        ensure_positive("cs_as_ratio", self.cs_as_ratio)?;
        if !(self.shape_db_per_mhz >= 0.0 && self.shape_db_per_mhz.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "shape_db_per_mhz {} must be non-negative",
                self.shape_db_per_mhz
            )));
        }
        Ok(())
    }

    pub fn burst_period(&self) -> f64 {
        1.0 / (2.0 * self.f_ac_hz)
    }
}

/// Infinite values as the strings `"inf"` and `"-inf"`, which every
/// serialization format can carry; finite values as numbers.
mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => t.parse().map_err(|_| de::Error::custom(format!("not a number: {t:?}"))),
            },
        }
    }
}

/// Per-component power targets for one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTargets {
    pub signal_power: f64,
    /// Thermal density per Hz within the data band.
    pub n0: f64,
    pub cyclostationary: f64,
    pub asynchronous: f64,
}

impl PowerTargets {
    pub fn impulsive(&self) -> f64 {
        self.cyclostationary + self.asynchronous
    }
}

pub fn calibrate(signal_power: f64, cfg: &NoiseConfig, ofdm: &OfdmConfig) -> Result<PowerTargets> {
    cfg.validate()?;
    ensure_positive("signal_power", signal_power)?;
    let eb = signal_power * ofdm.symbol_duration() / ofdm.bits_per_ofdm_symbol() as f64;
    let n0 = eb / 10f64.powf(cfg.eb_n0_db / 10.0);
    let p_imp = if cfg.sir_db == f64::INFINITY {
        0.0
    } else {
        signal_power / 10f64.powf(cfg.sir_db / 10.0)
    };
    let r = cfg.cs_as_ratio;
    Ok(PowerTargets {
        signal_power,
        n0,
        cyclostationary: p_imp * r / (1.0 + r),
        asynchronous: p_imp / (1.0 + r),
    })
}

/// Rng for one component of one realization.
pub fn component_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn complex_normal<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn normalize(samples: &mut [Complex64], power: f64) {
    let n = samples.len() as f64;
    let p = samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
    if p > 0.0 {
        let g = (power / p).sqrt();
        samples.iter_mut().for_each(|z| *z *= g);
    }
}

/// Circularly symmetric complex Gaussian noise normalized to `power`.
pub fn gen_awgn(len: usize, rate: f64, power: f64, seed: u64) -> Result<SignalBuffer> {
    if !(power >= 0.0) || !power.is_finite() {
        return Err(Error::NonPositive {
            name: "power",
            value: power,
        });
    }
    if power == 0.0 {
        return SignalBuffer::zeros(len, rate, ProbePoint::Channel);
    }
    let mut rng = component_rng(seed, STREAM_THERMAL);
    let mut samples: Vec<Complex64> = (0..len).map(|_| complex_normal(&mut rng)).collect();
    normalize(&mut samples, power);
    SignalBuffer::new(samples, rate, ProbePoint::Channel)
}

/// Variance-envelope modulated white noise for events `(t_k, A_k^2)` sorted
/// by time, relative to the buffer start. Events before the start contribute
/// their decayed tails.
fn envelope_noise<R: Rng>(
    len: usize,
    rate: f64,
    events: &[(f64, f64)],
    tau: f64,
    rng: &mut R,
) -> Vec<Complex64> {
    let dt = 1.0 / rate;
    let decay = (-2.0 * dt / tau).exp();
    let mut env = 0.0;
    let mut next = 0;
    let mut out = Vec::with_capacity(len);
    for n in 0..len {
        let t = n as f64 * dt;
        env *= decay;
        while next < events.len() && events[next].0 <= t {
            let (tk, a2) = events[next];
            env += a2 * (-2.0 * (t - tk) / tau).exp();
            next += 1;
        }
        out.push(if env > 0.0 {
            complex_normal(rng) * env.sqrt()
        } else {
            Complex64::default()
        });
    }
    out
}

/// Burst onsets in buffer-relative time for a buffer starting at absolute
/// time `t_start`. Onsets lie on the absolute grid `k / (2 f_ac)`.
pub fn burst_onsets(duration: f64, t_start: f64, cfg: &NoiseConfig) -> Vec<f64> {
    let period = cfg.burst_period();
    // Tails older than 20 time constants are below 1e-17 in power.
    let lookback = 20.0 * cfg.tau_cs_s;
    let k0 = ((t_start - lookback) / period).ceil() as i64;
    let k1 = ((t_start + duration) / period).floor() as i64;
    (k0..=k1).map(|k| k as f64 * period - t_start).collect()
}

/// Cyclostationary bursts (unshaped) normalized to `power`, for a buffer
/// that starts at absolute time `t_start`.
pub fn gen_cyclostationary(
    len: usize,
    rate: f64,
    power: f64,
    t_start: f64,
    cfg: &NoiseConfig,
) -> Result<SignalBuffer> {
    cfg.validate()?;
    let duration = len as f64 / rate;
    if duration < cfg.burst_period() {
        return Err(Error::DurationTooShort {
            duration,
            period: cfg.burst_period(),
        });
    }
    if power == 0.0 {
        return SignalBuffer::zeros(len, rate, ProbePoint::Channel);
    }
    let events: Vec<(f64, f64)> = burst_onsets(duration, t_start, cfg)
        .into_iter()
        .map(|t| (t, 1.0))
        .collect();
    let mut rng = component_rng(cfg.seed, STREAM_CS);
    let mut samples = envelope_noise(len, rate, &events, cfg.tau_cs_s, &mut rng);
    normalize(&mut samples, power);
    SignalBuffer::new(samples, rate, ProbePoint::Channel)
}

/// Poisson arrival times on `[0, duration)` with mean spacing `inv_lambda`.
pub fn poisson_arrivals<R: Rng>(duration: f64, inv_lambda: f64, rng: &mut R) -> Vec<f64> {
    let exp = Exp::new(1.0 / inv_lambda).expect("positive rate");
    let mut t = 0.0;
    let mut out = Vec::new();
    loop {
        t += exp.sample(rng);
        if t >= duration {
            return out;
        }
        out.push(t);
    }
}

/// Asynchronous impulses normalized to `power`, with their arrival times.
pub fn gen_asynchronous(
    len: usize,
    rate: f64,
    power: f64,
    cfg: &NoiseConfig,
) -> Result<(SignalBuffer, Vec<f64>)> {
    cfg.validate()?;
    let mut rng = component_rng(cfg.seed, STREAM_AS);
    let arrivals = poisson_arrivals(len as f64 / rate, cfg.inv_lambda_s, &mut rng);
    if power == 0.0 {
        return Ok((SignalBuffer::zeros(len, rate, ProbePoint::Channel)?, arrivals));
    }
    let events: Vec<(f64, f64)> = arrivals
        .iter()
        .map(|&t| {
            let a = match cfg.as_amplitude {
                AmplitudeDist::Gaussian => StandardNormal.sample(&mut rng),
                AmplitudeDist::Constant => 1.0,
            };
            (t, a * a)
        })
        .collect();
    let mut samples = envelope_noise(len, rate, &events, cfg.tau_as_s, &mut rng);
    normalize(&mut samples, power);
    Ok((SignalBuffer::new(samples, rate, ProbePoint::Channel)?, arrivals))
}

/// Power gain of the shaping filter at frequency `f`.
pub fn shaping_power_gain(f: f64, db_per_mhz: f64) -> f64 {
    10f64.powf(-db_per_mhz * f.abs() / 1e6 / 10.0)
}

/// Spectral shaping with power decaying `db_per_mhz` away from DC, unit gain
/// at DC.
pub fn shape_psd(buf: &SignalBuffer, db_per_mhz: f64) -> SignalBuffer {
    let n = buf.len();
    let rate = buf.sample_rate();
    let mut data = buf.samples().to_vec();
    if n == 0 || db_per_mhz == 0.0 {
        return buf.clone();
    }
    fft_forward(&mut data);
    for (k, z) in data.iter_mut().enumerate() {
        let f = crate::signal::bin_frequency(k, n, rate);
        *z *= shaping_power_gain(f, db_per_mhz).sqrt() / n as f64;
    }
    fft_inverse(&mut data);
    SignalBuffer::new(data, rate, buf.origin()).expect("rate already validated")
}

/// Ratio of total to data-band mean power gain of the shaping filter at
/// `rate`, i.e. the factor by which a shaped process with in-band density
/// `N0` exceeds `N0 * rate` in total power.
fn shaped_total_factor(db_per_mhz: f64, rate: f64, ofdm: &OfdmConfig) -> f64 {
    let band = ofdm.data_band();
    let mean = |lo: f64, hi: f64| {
        let steps = 4096;
        (0..steps)
            .map(|i| shaping_power_gain(lo + (hi - lo) * (i as f64 + 0.5) / steps as f64, db_per_mhz))
            .sum::<f64>()
            / steps as f64
    };
    mean(-rate / 2.0, rate / 2.0) / mean(band.lo_hz, band.hi_hz)
}

/// Power attenuation at which shaped spectra are treated as empty.
const SHAPED_FLOOR_DB: f64 = 60.0;

/// Largest power-of-two factor below `rate` at which a process shaped by
/// `db_per_mhz` can be synthesized without losing spectrum above the floor.
fn synthesis_factor(len: usize, rate: f64, db_per_mhz: f64) -> usize {
    if db_per_mhz <= 0.0 {
        return 1;
    }
    let f_max = SHAPED_FLOOR_DB / db_per_mhz * 1e6;
    let mut l = 1;
    while len % (2 * l) == 0 && rate / (2 * l) as f64 >= 2.0 * f_max {
        l *= 2;
    }
    l
}

/// Unit-power complex Gaussian process with the shaping spectrum, drawn in
/// the frequency domain at a reduced rate and interpolated to `rate`.
pub fn shaped_gaussian<R: Rng>(len: usize, rate: f64, db_per_mhz: f64, rng: &mut R) -> Result<SignalBuffer> {
    let l = synthesis_factor(len, rate, db_per_mhz);
    let m = len / l;
    let low_rate = rate / l as f64;
    let mut spec: Vec<Complex64> = (0..m)
        .map(|k| {
            let f = crate::signal::bin_frequency(k, m, low_rate);
            complex_normal(rng) * shaping_power_gain(f, db_per_mhz).sqrt()
        })
        .collect();
    fft_inverse(&mut spec);
    let low = SignalBuffer::new(spec, low_rate, ProbePoint::Channel)?;
    let mut out = crate::signal::resample(&low, rate)?.into_samples();
    normalize(&mut out, 1.0);
    SignalBuffer::new(out, rate, ProbePoint::Channel)
}

/// Thermal noise at density `n0` over the data band, optionally shaped.
pub fn gen_thermal(len: usize, rate: f64, n0: f64, cfg: &NoiseConfig, ofdm: &OfdmConfig) -> Result<SignalBuffer> {
    let white = n0 * rate;
    if !cfg.shape_thermal {
        return gen_awgn(len, rate, white, cfg.seed);
    }
    let total = white * shaped_total_factor(cfg.shape_db_per_mhz, rate, ofdm);
    let mut rng = component_rng(cfg.seed, STREAM_THERMAL);
    Ok(shaped_gaussian(len, rate, cfg.shape_db_per_mhz, &mut rng)?.scaled(total.sqrt()))
}

/// Cyclostationary bursts whose carrier is shaped, normalized to `power`.
/// The envelope varies slowly against the shaping response, so shaping the
/// carrier stands in for shaping the product.
pub fn gen_cyclostationary_shaped(
    len: usize,
    rate: f64,
    power: f64,
    t_start: f64,
    cfg: &NoiseConfig,
) -> Result<SignalBuffer> {
    cfg.validate()?;
    let duration = len as f64 / rate;
    if duration < cfg.burst_period() {
        return Err(Error::DurationTooShort {
            duration,
            period: cfg.burst_period(),
        });
    }
    if power == 0.0 {
        return SignalBuffer::zeros(len, rate, ProbePoint::Channel);
    }
    let mut rng = component_rng(cfg.seed, STREAM_CS);
    let carrier = shaped_gaussian(len, rate, cfg.shape_db_per_mhz, &mut rng)?;
    let onsets = burst_onsets(duration, t_start, cfg);
    let decay = (-2.0 * (1.0 / rate) / cfg.tau_cs_s).exp();
    let mut env = 0.0;
    let mut next = 0;
    let mut samples: Vec<Complex64> = carrier
        .samples()
        .iter()
        .enumerate()
        .map(|(n, z)| {
            let t = n as f64 / rate;
            env *= decay;
            while next < onsets.len() && onsets[next] <= t {
                env += (-2.0 * (t - onsets[next]) / cfg.tau_cs_s).exp();
                next += 1;
            }
            z * env.sqrt()
        })
        .collect();
    normalize(&mut samples, power);
    SignalBuffer::new(samples, rate, ProbePoint::Channel)
}

/// One draw of all three noise components for a single trial.
#[derive(Debug, Clone)]
pub struct NoiseRealization {
    pub thermal: SignalBuffer,
    pub cyclostationary: SignalBuffer,
    pub asynchronous: SignalBuffer,
    pub arrivals: Vec<f64>,
    pub burst_onsets: Vec<f64>,
    pub t_start: f64,
    pub targets: PowerTargets,
}

impl NoiseRealization {
    /// Generates all components at `rate`. The trial's position on the AC
    /// cycle is drawn uniformly from the seed.
    pub fn generate(
        len: usize,
        rate: f64,
        cfg: &NoiseConfig,
        ofdm: &OfdmConfig,
        signal_power: f64,
    ) -> Result<Self> {
        let targets = calibrate(signal_power, cfg, ofdm)?;
        let t_start = component_rng(cfg.seed, STREAM_PHASE).random::<f64>() * cfg.burst_period();
        let thermal = gen_thermal(len, rate, targets.n0, cfg, ofdm)?;
        let cyclostationary = if cfg.shape_cyclostationary {
            gen_cyclostationary_shaped(len, rate, targets.cyclostationary, t_start, cfg)?
        } else {
            gen_cyclostationary(len, rate, targets.cyclostationary, t_start, cfg)?
        };
        let (asynchronous, arrivals) = gen_asynchronous(len, rate, targets.asynchronous, cfg)?;
        let burst_onsets = burst_onsets(len as f64 / rate, t_start, cfg);
        Ok(Self {
            thermal,
            cyclostationary,
            asynchronous,
            arrivals,
            burst_onsets,
            t_start,
            targets,
        })
    }

    /// Sum of the impulsive components.
    pub fn impulsive(&self) -> Result<SignalBuffer> {
        self.cyclostationary.add(&self.asynchronous)
    }

    pub fn total(&self) -> Result<SignalBuffer> {
        self.thermal.add(&self.impulsive()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibration_split_and_limits() {
        let ofdm = OfdmConfig::default();
        let cfg = NoiseConfig {
            sir_db: 0.0,
            ..NoiseConfig::default()
        };
        let t = calibrate(2.0, &cfg, &ofdm).unwrap();
        assert!((t.impulsive() - 2.0).abs() < 1e-12);
        assert!((t.cyclostationary - 1.5).abs() < 1e-12);
        let t = calibrate(2.0, &NoiseConfig { sir_db: f64::INFINITY, ..cfg.clone() }, &ofdm).unwrap();
        assert_eq!(t.impulsive(), 0.0);
        assert!(calibrate(2.0, &NoiseConfig { sir_db: f64::NAN, ..cfg.clone() }, &ofdm).is_err());
        assert!(calibrate(2.0, &NoiseConfig { eb_n0_db: f64::INFINITY, ..cfg }, &ofdm).is_err());
    }

    #[test]
    fn onsets_sit_on_absolute_grid() {
        let cfg = NoiseConfig::default();
        let p = cfg.burst_period();
        let on = burst_onsets(0.05, 0.3 * p, &cfg);
        for t in &on {
            let k = (t + 0.3 * p) / p;
            assert!((k - k.round()).abs() < 1e-9);
        }
        assert!(on[0] < 0.0 && on.iter().all(|t| *t <= 0.05));
    }
}
