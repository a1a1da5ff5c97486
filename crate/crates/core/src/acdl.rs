//! Adaptive canonical differential limiter emulated at the analog rate.
//!
//! Each quadrature path runs the clipped mean tracking filter (CMTF) and two
//! quartile tracking filters (QTFs) by forward Euler. The QTFs follow the
//! gain-scaled difference signal and set the CMTF clipping range through
//! Tukey's fences.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::{BiquadCascade, CascadeStream, OnePole};
use crate::error::{ensure_positive, Error, Result};
use crate::ofdm::OfdmConfig;
use crate::signal::{ProbePoint, SignalBuffer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcdlConfig {
    pub tau_s: f64,
    pub t0_s: f64,
    pub beta: f64,
    pub v_c: f64,
    /// Front-end bandwidth in units of the signal bandwidth.
    pub xi: f64,
    pub gain_k: f64,
    /// QTF slew rate as a fraction of IQR times mean crossing rate.
    pub qtf_step_fraction: f64,
    pub agc_target_mean_abs: f64,
    pub agc_target_iqr: f64,
    /// Startup window length in QTF ramp times.
    pub startup_ramps: f64,
    pub aa_order: usize,
    pub euler_substeps: usize,
    /// Cap the clipping range at the comparator rails.
    pub rail_limit: bool,
    /// Replace the Tukey range by an unbounded one.
    pub force_linear: bool,
    pub probe_dump: bool,
}

impl Default for AcdlConfig {
    fn default() -> Self {
        Self::for_signal(&OfdmConfig::default())
    }
}

impl AcdlConfig {
    /// Defaults scaled to the signal bandwidth of `ofdm`.
    pub fn for_signal(ofdm: &OfdmConfig) -> Self {
        let bx = ofdm.signal_bandwidth();
        Self {
            tau_s: 1.0 / (4.0 * std::f64::consts::PI * bx),
            t0_s: 300.0 / bx,
            beta: 3.0,
            v_c: 1.0,
            xi: 16.0,
            gain_k: 4.0,
            qtf_step_fraction: 0.01,
            agc_target_mean_abs: 0.1,
            agc_target_iqr: 0.4,
            startup_ramps: 20.0,
            aa_order: 4,
            euler_substeps: 1,
            rail_limit: true,
            force_linear: false,
            probe_dump: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("tau_s", self.tau_s)?;
        ensure_positive("t0_s", self.t0_s)?;
        ensure_positive("v_c", self.v_c)?;
        ensure_positive("xi", self.xi)?;
        ensure_positive("gain_k", self.gain_k)?;
        ensure_positive("qtf_step_fraction", self.qtf_step_fraction)?;
        ensure_positive("agc_target_mean_abs", self.agc_target_mean_abs)?;
        ensure_positive("agc_target_iqr", self.agc_target_iqr)?;
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("beta {} must be non-negative", self.beta)));
        }
        if !(self.startup_ramps >= 0.0) {
            return Err(Error::InvalidConfig("startup_ramps must be non-negative".into()));
        }
        if self.aa_order < 2 || self.aa_order % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "aa_order {} must be even and at least 2",
                self.aa_order
            )));
        }
        if self.euler_substeps == 0 {
            return Err(Error::InvalidConfig("euler_substeps must be at least 1".into()));
        }
        Ok(())
    }

    /// Anti-aliasing corner frequency.
    pub fn aa_corner_hz(&self) -> f64 {
        1.0 / (2.0 * std::f64::consts::PI * self.tau_s)
    }
}

/// Closed clipping interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipRange {
    pub lo: f64,
    pub hi: f64,
}

impl ClipRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo > hi || lo.is_nan() || hi.is_nan() {
            return Err(Error::InvertedRange { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn unbounded() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Largest slope magnitude the CMTF can reach with this range.
    pub fn max_rate(&self, tau: f64) -> f64 {
        self.lo.abs().max(self.hi.abs()) / tau
    }
}

pub fn clip(x: f64, alpha_minus: f64, alpha_plus: f64) -> Result<f64> {
    let r = ClipRange::new(alpha_minus, alpha_plus)?;
    Ok(x.max(r.lo).min(r.hi))
}

#[inline]
fn clip_unchecked(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

/// Sign with `sgn(0) = 0`.
#[inline]
fn sgn(x: f64) -> f64 {
    f64::from(u8::from(x > 0.0)) - f64::from(u8::from(x < 0.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CmtfState {
    pub chi: Complex64,
}

fn check_step(dt: f64, tau: f64) -> Result<()> {
    ensure_positive("dt", dt)?;
    ensure_positive("tau", tau)?;
    if dt > tau / 20.0 {
        return Err(Error::StepTooCoarse { dt, tau });
    }
    Ok(())
}

/// One Euler step of the CMTF. Each quadrature has its own range.
pub fn cmtf_step(
    state: CmtfState,
    x: Complex64,
    range_re: ClipRange,
    range_im: ClipRange,
    tau: f64,
    dt: f64,
) -> Result<CmtfState> {
    check_step(dt, tau)?;
    let k = dt / tau;
    let d = x - state.chi;
    Ok(CmtfState {
        chi: state.chi
            + Complex64::new(
                k * clip_unchecked(d.re, range_re.lo, range_re.hi),
                k * clip_unchecked(d.im, range_im.lo, range_im.hi),
            ),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QtfState {
    pub q1: f64,
    pub q3: f64,
}

impl QtfState {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

pub fn qtf_step(state: QtfState, y: f64, a: f64, t0: f64, dt: f64) -> QtfState {
    let s = a * dt / t0;
    QtfState {
        q1: state.q1 + s * (sgn(y - state.q1) - 0.5),
        q3: state.q3 + s * (sgn(y - state.q3) + 0.5),
    }
}

pub fn tukey_range(q1: f64, q3: f64, beta: f64) -> Result<ClipRange> {
    if q1 > q3 {
        return Err(Error::InvertedRange { lo: q1, hi: q3 });
    }
    let iqr = q3 - q1;
    ClipRange::new(q1 - beta * iqr, q3 + beta * iqr)
}

/// Front-end lowpass with noise bandwidth `xi * B_x` at the analog rate.
pub fn front_end_lowpass(buf: &SignalBuffer, cfg: &AcdlConfig, ofdm: &OfdmConfig) -> SignalBuffer {
    let fraction = cfg.xi * ofdm.signal_bandwidth() / (buf.sample_rate() / 2.0);
    let out = OnePole::with_noise_fraction(fraction).run(buf.samples());
    SignalBuffer::new(out, buf.sample_rate(), ProbePoint::LinearInput).expect("valid rate")
}

/// Gains and QTF slew chosen by the AGC for one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub gain_k: f64,
    pub gain_g_big: f64,
    pub gain_g: f64,
    pub qtf_a: f64,
    /// Mean up-crossing rate of the scaled difference at its third quartile.
    pub crossing_rate: f64,
    pub startup_s: f64,
}

impl Gains {
    /// Unit gains with a slow QTF; for tests that do not tune.
    pub fn unity(cfg: &AcdlConfig) -> Self {
        Self {
            gain_k: 1.0,
            gain_g_big: 1.0,
            gain_g: 1.0,
            qtf_a: 1e-3 * cfg.v_c,
            crossing_rate: 0.0,
            startup_s: 0.0,
        }
    }

    pub fn input_gain(&self) -> f64 {
        self.gain_k * self.gain_g_big
    }

    /// Time for a QTF to move by one IQR of the scaled difference.
    pub fn ramp_time(&self, t0: f64, iqr: f64) -> f64 {
        iqr * t0 / self.qtf_a
    }
}

/// Chain output at the ADC rate with optional probe traces.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub output: SignalBuffer,
    pub probes: Vec<SignalBuffer>,
}

impl ChainOutput {
    pub fn probe(&self, point: ProbePoint) -> Option<&SignalBuffer> {
        self.probes.iter().find(|p| p.origin() == point)
    }
}

struct PathParams {
    k: f64,
    s: f64,
    g: f64,
    beta: f64,
    v_c: f64,
    floor: f64,
    rail: bool,
    unbounded: bool,
    startup: usize,
    substeps: usize,
}

impl PathParams {
    /// Clipping bounds in the input domain from the current quartiles.
    #[inline(always)]
    fn bounds(&self, q1: f64, q3: f64, startup: bool) -> (f64, f64) {
        if self.unbounded {
            return (f64::NEG_INFINITY, f64::INFINITY);
        }
        if startup {
            return (-self.v_c / self.g, self.v_c / self.g);
        }
        let (a, b) = (q1.min(q3), q1.max(q3));
        let iqr = b - a;
        let (mut lo, mut hi) = (a - self.beta * iqr, b + self.beta * iqr);
        if hi - lo < self.floor {
            let c = 0.5 * (lo + hi);
            lo = c - 0.5 * self.floor;
            hi = c + 0.5 * self.floor;
        }
        if self.rail {
            lo = lo.clamp(-self.v_c, self.v_c);
            hi = hi.clamp(-self.v_c, self.v_c);
        }
        (lo / self.g, hi / self.g)
    }
}

/// CMTF and QTF state of one quadrature path. All states advance from the
/// same previous state (forward Euler).
#[derive(Debug, Clone, Copy)]
struct PathState {
    chi: f64,
    q1: f64,
    q3: f64,
    x_prev: f64,
    /// Scaled difference at the last substep.
    y: f64,
}

impl PathState {
    fn new(x0: f64) -> Self {
        Self {
            chi: x0,
            q1: 0.0,
            q3: 0.0,
            x_prev: x0,
            y: 0.0,
        }
    }

    #[inline(always)]
    fn step(&mut self, xn: f64, p: &PathParams, startup: bool) -> f64 {
        let m = p.substeps as f64;
        for j in 1..=p.substeps {
            let xi = if p.substeps == 1 {
                xn
            } else {
                self.x_prev + (xn - self.x_prev) * (j as f64 / m)
            };
            let (lo, hi) = p.bounds(self.q1, self.q3, startup);
            let d = xi - self.chi;
            self.y = p.g * d;
            self.chi += p.k * clip_unchecked(d, lo, hi);
            self.q3 += p.s * (sgn(self.y - self.q3) + 0.5);
            self.q1 += p.s * (sgn(self.y - self.q1) - 0.5);
        }
        self.x_prev = xn;
        self.chi
    }

    #[inline(always)]
    fn step_linear(&mut self, xn: f64, k: f64, substeps: usize) -> f64 {
        let m = substeps as f64;
        for j in 1..=substeps {
            let xi = if substeps == 1 {
                xn
            } else {
                self.x_prev + (xn - self.x_prev) * (j as f64 / m)
            };
            self.chi += k * (xi - self.chi);
        }
        self.x_prev = xn;
        self.chi
    }
}

/// Anti-aliasing filter, ideal ADC and output gain, fed one sample at a time.
struct BackEnd<'a> {
    aa: CascadeStream<'a>,
    decimation: usize,
    inv_gain: f64,
    n: usize,
    out: Vec<Complex64>,
    chi_trace: Option<Vec<Complex64>>,
    aa_trace: Option<Vec<Complex64>>,
}

impl<'a> BackEnd<'a> {
    fn new(aa: &'a BiquadCascade, decimation: usize, inv_gain: f64, len: usize, record: bool) -> Self {
        let trace = || record.then(|| Vec::with_capacity(len));
        Self {
            aa: aa.stream(),
            decimation,
            inv_gain,
            n: 0,
            out: Vec::with_capacity(len / decimation + 1),
            chi_trace: trace(),
            aa_trace: trace(),
        }
    }

    #[inline(always)]
    fn push(&mut self, chi: Complex64) {
        let v = self.aa.step(chi);
        if self.n % self.decimation == 0 {
            self.out.push(v * self.inv_gain);
        }
        self.n += 1;
        if let Some(t) = self.chi_trace.as_mut() {
            t.push(chi);
        }
        if let Some(t) = self.aa_trace.as_mut() {
            t.push(v);
        }
    }
}

/// First-order lowpass `chi += (dt/tau)(x - chi)` with the same stepping as
/// the CMTF.
fn linear_path(x: &[f64], k: f64, substeps: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let Some(&x0) = x.first() else {
        return out;
    };
    let (mut chi, mut x_prev) = (x0, x0);
    let m = substeps as f64;
    for &xn in x {
        for j in 1..=substeps {
            let xi = if substeps == 1 {
                xn
            } else {
                x_prev + (xn - x_prev) * (j as f64 / m)
            };
            chi += k * (xi - chi);
        }
        x_prev = xn;
        out.push(chi);
    }
    out
}

fn split(buf: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    buf.iter().map(|z| (z.re, z.im)).unzip()
}

/// Both processing chains for one configuration and one set of gains.
#[derive(Debug, Clone)]
pub struct AcdlChain {
    cfg: AcdlConfig,
    gains: Gains,
    rate: f64,
    decimation: usize,
    signal_bandwidth: f64,
    aa: BiquadCascade,
}

impl AcdlChain {
    pub fn new(cfg: &AcdlConfig, ofdm: &OfdmConfig, gains: Gains) -> Result<Self> {
        cfg.validate()?;
        ofdm.validate()?;
        let rate = ofdm.analog_rate();
        check_step(1.0 / rate / cfg.euler_substeps as f64, cfg.tau_s)?;
        Ok(Self {
            aa: BiquadCascade::butterworth_lowpass(cfg.aa_order, cfg.aa_corner_hz(), rate),
            cfg: cfg.clone(),
            gains,
            rate,
            decimation: ofdm.oversample_factor,
            signal_bandwidth: ofdm.signal_bandwidth(),
        })
    }

    pub fn config(&self) -> &AcdlConfig {
        &self.cfg
    }

    pub fn gains(&self) -> &Gains {
        &self.gains
    }

    /// Same chain with another Tukey coefficient.
    pub fn with_beta(&self, beta: f64) -> Self {
        let mut c = self.clone();
        c.cfg.beta = beta;
        c
    }

    /// Same chain with the Euler step divided by `substeps`.
    pub fn with_substeps(&self, substeps: usize) -> Result<Self> {
        check_step(1.0 / self.rate / substeps as f64, self.cfg.tau_s)?;
        let mut c = self.clone();
        c.cfg.euler_substeps = substeps;
        Ok(c)
    }

    pub fn with_force_linear(&self, on: bool) -> Self {
        let mut c = self.clone();
        c.cfg.force_linear = on;
        c
    }

    fn check_rate(&self, buf: &SignalBuffer) -> Result<()> {
        if (buf.sample_rate() - self.rate).abs() > 1e-9 * self.rate {
            return Err(Error::InvalidConfig(format!(
                "chain runs at {} Hz, input is at {} Hz",
                self.rate,
                buf.sample_rate()
            )));
        }
        Ok(())
    }

    /// Front-end lowpass followed by the input gain `K G`; this trace feeds
    /// the CMTF (point I) and the linear chain alike.
    pub fn front_end(&self, input: &SignalBuffer) -> Result<SignalBuffer> {
        self.check_rate(input)?;
        let fraction = self.cfg.xi * self.signal_bandwidth / (self.rate / 2.0);
        let gain = self.gains.input_gain();
        let out = OnePole::with_noise_fraction(fraction)
            .run(input.samples())
            .into_iter()
            .map(|z| z * gain)
            .collect();
        SignalBuffer::new(out, self.rate, ProbePoint::CmtfInput)
    }

    fn back_end(&self, len: usize, record: bool) -> BackEnd<'_> {
        BackEnd::new(&self.aa, self.decimation, 1.0 / self.gains.input_gain(), len, record)
    }

    fn adc_rate(&self) -> f64 {
        self.rate / self.decimation as f64
    }

    fn path_params(&self) -> PathParams {
        let dt = 1.0 / self.rate / self.cfg.euler_substeps as f64;
        PathParams {
            k: dt / self.cfg.tau_s,
            s: self.gains.qtf_a * dt / self.cfg.t0_s,
            g: self.gains.gain_g,
            beta: self.cfg.beta,
            v_c: self.cfg.v_c,
            floor: 1e-6 * self.cfg.v_c,
            rail: self.cfg.rail_limit,
            unbounded: self.cfg.force_linear,
            startup: (self.gains.startup_s * self.rate).ceil() as usize,
            substeps: self.cfg.euler_substeps,
        }
    }

    /// ACDL chain from the front-end output (point I) to point IV.
    pub fn process_front(&self, x: &SignalBuffer, record: bool) -> Result<ChainOutput> {
        self.check_rate(x)?;
        if x.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let p = self.path_params();
        let xs = x.samples();
        let mut sink = self.back_end(xs.len(), record);
        let mut y = record.then(|| Vec::with_capacity(xs.len()));
        let (mut re, mut im) = (PathState::new(xs[0].re), PathState::new(xs[0].im));
        for (n, z) in xs.iter().enumerate() {
            let startup = n < p.startup;
            let chi = Complex64::new(re.step(z.re, &p, startup), im.step(z.im, &p, startup));
            sink.push(chi);
            if let Some(y) = y.as_mut() {
                y.push(Complex64::new(re.y, im.y));
            }
        }
        let output = SignalBuffer::new(sink.out, self.adc_rate(), ProbePoint::Baseband)?;
        let probes = match (sink.chi_trace, sink.aa_trace, y) {
            (Some(chi), Some(aa), Some(y)) => vec![
                x.clone().with_origin(ProbePoint::CmtfInput),
                SignalBuffer::new(chi, self.rate, ProbePoint::CmtfOutput)?,
                SignalBuffer::new(aa, self.rate, ProbePoint::AntiAliased)?,
                output.clone(),
                SignalBuffer::new(y, self.rate, ProbePoint::Difference)?,
            ],
            _ => Vec::new(),
        };
        Ok(ChainOutput { output, probes })
    }

    /// Linear-regime chain from the front-end output to point c.
    pub fn linear_front(&self, x: &SignalBuffer, record: bool) -> Result<ChainOutput> {
        self.check_rate(x)?;
        if x.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let p = self.path_params();
        let xs = x.samples();
        let mut sink = self.back_end(xs.len(), record);
        let (mut re, mut im) = (PathState::new(xs[0].re), PathState::new(xs[0].im));
        for z in xs {
            sink.push(Complex64::new(
                re.step_linear(z.re, p.k, p.substeps),
                im.step_linear(z.im, p.k, p.substeps),
            ));
        }
        let output = SignalBuffer::new(sink.out, self.adc_rate(), ProbePoint::LinearBaseband)?;
        let probes = match sink.aa_trace {
            Some(aa) => vec![
                x.clone().with_origin(ProbePoint::LinearInput),
                SignalBuffer::new(aa, self.rate, ProbePoint::LinearAntiAliased)?,
                output.clone(),
            ],
            None => Vec::new(),
        };
        Ok(ChainOutput { output, probes })
    }

    pub fn process(&self, input: &SignalBuffer) -> Result<ChainOutput> {
        self.process_front(&self.front_end(input)?, self.cfg.probe_dump)
    }

    pub fn process_linear(&self, input: &SignalBuffer) -> Result<ChainOutput> {
        self.linear_front(&self.front_end(input)?, self.cfg.probe_dump)
    }

    /// Front end and anti-aliasing only, with no CMTF stage: the path used
    /// ahead of the digital baselines.
    pub fn process_bypass(&self, input: &SignalBuffer) -> Result<SignalBuffer> {
        let x = self.front_end(input)?;
        let mut sink = self.back_end(x.len(), false);
        for &z in x.samples() {
            sink.push(z);
        }
        SignalBuffer::new(sink.out, self.adc_rate(), ProbePoint::LinearBaseband)
    }
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn empirical_quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    sorted_quantile(&v, p)
}

fn sorted_quantile(v: &[f64], p: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let h = p * (v.len() - 1) as f64;
    let i = h.floor() as usize;
    let frac = h - i as f64;
    if i + 1 < v.len() {
        v[i] + frac * (v[i + 1] - v[i])
    } else {
        v[i]
    }
}

/// Tunes `G`, `g` and the QTF slew on a calibration segment of the chain
/// input, using the linear-regime chain. The startup window never exceeds
/// the segment.
pub fn agc_tune(segment: &SignalBuffer, cfg: &AcdlConfig, ofdm: &OfdmConfig) -> Result<Gains> {
    if segment.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    if segment.samples().iter().all(|z| *z == Complex64::default()) {
        return Err(Error::ZeroCalibration);
    }
    let mut gains = Gains {
        gain_k: cfg.gain_k,
        gain_g_big: 1.0,
        gain_g: 1.0,
        qtf_a: cfg.v_c,
        crossing_rate: 0.0,
        startup_s: 0.0,
    };
    let probe = AcdlChain::new(cfg, ofdm, gains)?;
    // Output of the linear chain before the output gain, at unit G.
    let lin = probe.linear_front(&probe.front_end(segment)?, false)?;
    let mean_abs = lin
        .output
        .samples()
        .iter()
        .map(|z| z.re.abs() + z.im.abs())
        .sum::<f64>()
        / (2 * lin.output.len()) as f64
        * cfg.gain_k;
    if mean_abs == 0.0 {
        return Err(Error::ZeroCalibration);
    }
    gains.gain_g_big = cfg.agc_target_mean_abs * cfg.v_c / mean_abs;

    let chain = AcdlChain::new(cfg, ofdm, gains)?;
    let x = chain.front_end(segment)?;
    let (re, im) = split(x.samples());
    let k = chain.path_params().k;
    let rate = chain.rate;
    let mut iqr_sum = 0.0;
    let mut diffs = Vec::with_capacity(2);
    for path in [re, im] {
        let chi = linear_path(&path, k, cfg.euler_substeps);
        let d: Vec<f64> = path.iter().zip(&chi).map(|(a, b)| a - b).collect();
        let mut sorted = d.clone();
        sorted.sort_by(f64::total_cmp);
        let q1 = sorted_quantile(&sorted, 0.25);
        let q3 = sorted_quantile(&sorted, 0.75);
        iqr_sum += q3 - q1;
        diffs.push((d, q3));
    }
    let iqr = iqr_sum / 2.0;
    if iqr <= 0.0 {
        return Err(Error::ZeroCalibration);
    }
    gains.gain_g = cfg.agc_target_iqr * cfg.v_c / iqr;

    let duration = segment.len() as f64 / rate;
    let crossings: usize = diffs
        .iter()
        .map(|(d, q3)| d.windows(2).filter(|w| w[0] < *q3 && w[1] >= *q3).count())
        .sum();
    let f0 = crossings as f64 / 2.0 / duration;
    if f0 == 0.0 {
        return Err(Error::ZeroCalibration);
    }
    let iqr_y = gains.gain_g * iqr;
    gains.crossing_rate = f0;
    // The slew is raised when needed so that startup fits in the segment.
    let rate_floor = if cfg.startup_ramps > 0.0 {
        cfg.startup_ramps / duration
    } else {
        0.0
    };
    gains.qtf_a = iqr_y * cfg.t0_s * (cfg.qtf_step_fraction * f0).max(rate_floor);
    gains.startup_s = cfg.startup_ramps * gains.ramp_time(cfg.t0_s, iqr_y);
    Ok(gains)
}

/// ACDL chain with gains tuned on the whole input.
pub fn acdl_process(buf: &SignalBuffer, cfg: &AcdlConfig, ofdm: &OfdmConfig) -> Result<ChainOutput> {
    let gains = agc_tune(buf, cfg, ofdm)?;
    AcdlChain::new(cfg, ofdm, gains)?.process(buf)
}

/// Linear reference chain with gains tuned on the whole input.
pub fn linear_chain_process(buf: &SignalBuffer, cfg: &AcdlConfig, ofdm: &OfdmConfig) -> Result<ChainOutput> {
    let gains = agc_tune(buf, cfg, ofdm)?;
    AcdlChain::new(cfg, ofdm, gains)?.process_linear(buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgn_of_zero_is_zero() {
        assert_eq!(sgn(0.0), 0.0);
        assert_eq!(sgn(-0.0), 0.0);
        assert_eq!(sgn(2.0), 1.0);
        assert_eq!(sgn(-1e-300), -1.0);
    }

    #[test]
    fn default_step_is_fine_enough() {
        let cfg = AcdlConfig::default();
        let dt = 1.0 / OfdmConfig::default().analog_rate();
        assert!(dt <= cfg.tau_s / 20.0);
        assert!((cfg.aa_corner_hz() - 250e3).abs() < 1e-6);
    }

    #[test]
    fn quantile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(empirical_quantile(&v, 0.25), 2.0);
        assert_eq!(empirical_quantile(&v, 0.5), 3.0);
        assert_eq!(empirical_quantile(&[1.0, 2.0], 0.5), 1.5);
    }
}
