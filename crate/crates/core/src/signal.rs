//! Sampled complex-baseband traces and the measurements taken on them.
//!
//! Every stage of the link exchanges [`SignalBuffer`]s: the transmitter
//! emits one at the emulated analog rate, the noise generators produce one
//! per component, and the front-end chains hand ADC-rate buffers to the
//! receiver. Measurements here (band power, averaged-periodogram PSD,
//! per-quadrature amplitude densities) are pure functions of a buffer.

use crate::dsp::kaiser_lowpass;
use crate::error::{Error, Result};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

/// Where in the link a trace was recorded.
///
/// Roman numerals follow the limiter's block diagram: `I` is the CMTF input
/// (front-end output after gain), `II` the CMTF output, `III` the
/// anti-aliased trace, `IV` the ADC-rate baseband output and `V` the
/// g-scaled difference signal feeding the quartile trackers. Letters mark
/// the equivalent linear chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProbePoint {
    Transmit,
    Channel,
    CmtfInput,
    CmtfOutput,
    AntiAliased,
    Baseband,
    Difference,
    LinearInput,
    LinearAntiAliased,
    LinearBaseband,
    Other,
}

impl ProbePoint {
    pub fn label(self) -> &'static str {
        match self {
            ProbePoint::Transmit => "tx",
            ProbePoint::Channel => "channel",
            ProbePoint::CmtfInput => "I",
            ProbePoint::CmtfOutput => "II",
            ProbePoint::AntiAliased => "III",
            ProbePoint::Baseband => "IV",
            ProbePoint::Difference => "V",
            ProbePoint::LinearInput => "a",
            ProbePoint::LinearAntiAliased => "b",
            ProbePoint::LinearBaseband => "c",
            ProbePoint::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalBuffer {
    samples: Vec<Complex64>,
    sample_rate: f64,
    origin: ProbePoint,
}

impl SignalBuffer {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64, origin: ProbePoint) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidSampleRate(sample_rate));
        }
        Ok(Self {
            samples,
            sample_rate,
            origin,
        })
    }

    pub fn zeros(len: usize, sample_rate: f64, origin: ProbePoint) -> Result<Self> {
        Self::new(vec![Complex64::default(); len], sample_rate, origin)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn origin(&self) -> ProbePoint {
        self.origin
    }

    pub fn with_origin(mut self, origin: ProbePoint) -> Self {
        self.origin = origin;
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Mean squared magnitude over the whole buffer (0 for an empty one).
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|z| z * gain).collect(),
            sample_rate: self.sample_rate,
            origin: self.origin,
        }
    }

    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        let end = start.checked_add(len).filter(|&e| e <= self.samples.len());
        let end = end.ok_or(Error::LengthMismatch {
            expected: start.saturating_add(len),
            found: self.samples.len(),
        })?;
        Self::new(self.samples[start..end].to_vec(), self.sample_rate, self.origin)
    }

    /// Element-wise sum; both buffers must share rate and length.
    pub fn add(&self, other: &SignalBuffer) -> Result<Self> {
        self.check_compatible(other)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a + b)
            .collect();
        Self::new(samples, self.sample_rate, self.origin)
    }

    pub fn sub(&self, other: &SignalBuffer) -> Result<Self> {
        self.check_compatible(other)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a - b)
            .collect();
        Self::new(samples, self.sample_rate, self.origin)
    }

    fn check_compatible(&self, other: &SignalBuffer) -> Result<()> {
        if self.samples.len() != other.samples.len() {
            return Err(Error::LengthMismatch {
                expected: self.samples.len(),
                found: other.samples.len(),
            });
        }
        if (self.sample_rate - other.sample_rate).abs() > 1e-9 * self.sample_rate {
            return Err(Error::InvalidConfig(format!(
                "sample rates differ: {} vs {}",
                self.sample_rate, other.sample_rate
            )));
        }
        Ok(())
    }
}

/// Signed frequency interval `[lo_hz, hi_hz]` of a complex-baseband signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl Band {
    pub fn new(lo_hz: f64, hi_hz: f64) -> Self {
        Self { lo_hz, hi_hz }
    }

    fn validate(&self, rate: f64) -> Result<()> {
        let nyq = rate / 2.0;
        let ok = self.lo_hz.is_finite()
            && self.hi_hz.is_finite()
            && self.lo_hz < self.hi_hz
            && self.lo_hz >= -nyq * (1.0 + 1e-12)
            && self.hi_hz <= nyq * (1.0 + 1e-12);
        if ok {
            Ok(())
        } else {
            Err(Error::BandOutOfRange {
                lo: self.lo_hz,
                hi: self.hi_hz,
                rate,
            })
        }
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo_hz && f <= self.hi_hz
    }
}

/// Signed frequency of FFT bin `k` out of `n` at sample rate `rate`.
pub fn bin_frequency(k: usize, n: usize, rate: f64) -> f64 {
    let k = if k < n.div_ceil(2) {
        k as f64
    } else {
        k as f64 - n as f64
    };
    k * rate / n as f64
}

pub fn fft_forward(data: &mut [Complex64]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(data.len()).process(data);
}

pub fn fft_inverse(data: &mut [Complex64]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(data.len()).process(data);
}

/// Mean squared magnitude of `buf`, optionally restricted to a band by
/// integrating the periodogram of the whole buffer over that band.
pub fn measure_power(buf: &SignalBuffer, band: Option<Band>) -> Result<f64> {
    if buf.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let Some(band) = band else {
        return Ok(buf.mean_power());
    };
    band.validate(buf.sample_rate())?;
    let n = buf.len();
    let mut spec = buf.samples().to_vec();
    fft_forward(&mut spec);
    let scale = 1.0 / (n as f64 * n as f64);
    let power = spec
        .iter()
        .enumerate()
        .filter(|(k, _)| band.contains(bin_frequency(*k, n, buf.sample_rate())))
        .map(|(_, z)| z.norm_sqr())
        .sum::<f64>();
    Ok(power * scale)
}

/// Averaged modified periodogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    /// Bin centres in Hz, strictly increasing from about -fs/2 to fs/2.
    pub frequencies: Vec<f64>,
    /// Power spectral density, dB re 1 (unit^2/Hz).
    pub psd_db: Vec<f64>,
    /// Bin spacing in Hz.
    pub resolution_bw: f64,
    /// Equivalent noise bandwidth of the taper in Hz.
    pub enbw_hz: f64,
    pub segments: usize,
}

impl SpectrumEstimate {
    /// Integral of the density over all bins.
    pub fn total_power(&self) -> f64 {
        self.psd_db
            .iter()
            .map(|d| 10f64.powf(d / 10.0))
            .sum::<f64>()
            * self.resolution_bw
    }

    /// Least-squares slope of the dB density versus frequency over `band`,
    /// in dB per MHz.
    pub fn slope_db_per_mhz(&self, band: Band) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .frequencies
            .iter()
            .zip(&self.psd_db)
            .filter(|(f, _)| band.contains(**f))
            .map(|(f, d)| (*f / 1e6, *d))
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }

    pub fn peak_frequency(&self) -> f64 {
        let (i, _) = self
            .psd_db
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &d)| {
                if d > acc.1 {
                    (i, d)
                } else {
                    acc
                }
            });
        self.frequencies[i]
    }
}

/// Hann-tapered, 50 %-overlapped averaged periodogram.
pub fn estimate_psd(buf: &SignalBuffer, segment_len: usize) -> Result<SpectrumEstimate> {
    if buf.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    if segment_len > buf.len() || segment_len < 2 {
        return Err(Error::SegmentTooLong {
            segment: segment_len,
            len: buf.len(),
        });
    }
    let rate = buf.sample_rate();
    let window: Vec<f64> = (0..segment_len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / segment_len as f64).cos())
        .collect();
    let w_energy: f64 = window.iter().map(|w| w * w).sum();
    let step = (segment_len / 2).max(1);
    let segments = (buf.len() - segment_len) / step + 1;

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(segment_len);
    let mut acc = vec![0.0; segment_len];
    let mut scratch = vec![Complex64::default(); segment_len];
    for s in 0..segments {
        let seg = &buf.samples()[s * step..s * step + segment_len];
        for (dst, (x, w)) in scratch.iter_mut().zip(seg.iter().zip(&window)) {
            *dst = x * w;
        }
        fft.process(&mut scratch);
        for (a, z) in acc.iter_mut().zip(&scratch) {
            *a += z.norm_sqr();
        }
    }
    // density so that sum(psd) * df equals the mean power
    let norm = 1.0 / (segments as f64 * w_energy * rate);
    let half = segment_len / 2;
    let order: Vec<usize> = (0..segment_len).map(|i| (i + half + segment_len % 2) % segment_len).collect();
    let frequencies = order
        .iter()
        .map(|&k| bin_frequency(k, segment_len, rate))
        .collect();
    let psd_db = order
        .iter()
        .map(|&k| 10.0 * (acc[k] * norm).max(1e-300).log10())
        .collect();
    let w_sum: f64 = window.iter().sum();
    Ok(SpectrumEstimate {
        frequencies,
        psd_db,
        resolution_bw: rate / segment_len as f64,
        enbw_hz: rate * w_energy / (w_sum * w_sum),
        segments,
    })
}

/// Zero-phase FIR resampler design: Kaiser-windowed sinc with this many
/// zero crossings per side (in units of the lower rate).
const RESAMPLE_HALF_SPAN: usize = 8;
const RESAMPLE_KAISER_BETA: f64 = 8.0;

/// Integer-factor rate conversion preserving duration.
///
/// Downward conversion low-pass filters at the target Nyquist frequency
/// and keeps every M-th sample; upward conversion zero-stuffs and rejects
/// images with the same prototype. Both are zero-phase, with the buffer
/// extended by its edge values so constant signals stay constant.
pub fn resample(buf: &SignalBuffer, target_rate: f64) -> Result<SignalBuffer> {
    if !(target_rate > 0.0 && target_rate.is_finite()) {
        return Err(Error::InvalidSampleRate(target_rate));
    }
    let rate = buf.sample_rate();
    let ratio = rate / target_rate;
    let as_int = |r: f64| -> Option<usize> {
        let n = r.round();
        (n >= 1.0 && (r - n).abs() < 1e-9 * r).then_some(n as usize)
    };
    if let Some(m) = as_int(ratio) {
        if m == 1 {
            return Ok(buf.clone());
        }
        return Ok(decimate(buf, m, target_rate));
    }
    if let Some(l) = as_int(1.0 / ratio) {
        return Ok(interpolate(buf, l, target_rate));
    }
    Err(Error::NonIntegerRateRatio {
        from: rate,
        to: target_rate,
    })
}

/// Input extended by `pad` copies of its first and last sample.
fn edge_padded(x: &[Complex64], pad: usize) -> Vec<Complex64> {
    let (first, last) = match (x.first(), x.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return vec![Complex64::default(); 2 * pad],
    };
    let mut v = Vec::with_capacity(x.len() + 2 * pad);
    v.extend(std::iter::repeat_n(first, pad));
    v.extend_from_slice(x);
    v.extend(std::iter::repeat_n(last, pad));
    v
}

fn decimate(buf: &SignalBuffer, m: usize, target_rate: f64) -> SignalBuffer {
    let half = RESAMPLE_HALF_SPAN * m;
    let taps = kaiser_lowpass(0.5 / m as f64, half, RESAMPLE_KAISER_BETA);
    let x = edge_padded(buf.samples(), half);
    let n_out = buf.len().div_ceil(m);
    // taps are symmetric, so correlation equals convolution
    let samples = (0..n_out)
        .map(|j| {
            let window = &x[j * m..j * m + taps.len()];
            window.iter().zip(&taps).map(|(z, &h)| z * h).sum()
        })
        .collect();
    SignalBuffer {
        samples,
        sample_rate: target_rate,
        origin: buf.origin(),
    }
}

fn interpolate(buf: &SignalBuffer, l: usize, target_rate: f64) -> SignalBuffer {
    let half = RESAMPLE_HALF_SPAN * l;
    let proto = kaiser_lowpass(0.5 / l as f64, half, RESAMPLE_KAISER_BETA);
    // Output sample i*l + p draws on inputs i + d for d in -span..=span.
    let span = RESAMPLE_HALF_SPAN as isize;
    let phases: Vec<Vec<f64>> = (0..l)
        .map(|p| {
            let mut branch: Vec<f64> = (-span..=span)
                .map(|d| {
                    let k = p as isize + half as isize - d * l as isize;
                    if k >= 0 && (k as usize) < proto.len() {
                        proto[k as usize]
                    } else {
                        0.0
                    }
                })
                .collect();
            let s: f64 = branch.iter().sum();
            branch.iter_mut().for_each(|b| *b /= s);
            branch
        })
        .collect();
    let x = edge_padded(buf.samples(), RESAMPLE_HALF_SPAN);
    let width = 2 * RESAMPLE_HALF_SPAN + 1;
    let mut samples = Vec::with_capacity(buf.len() * l);
    for i in 0..buf.len() {
        let window = &x[i..i + width];
        for branch in &phases {
            samples.push(window.iter().zip(branch).map(|(z, &h)| z * h).sum());
        }
    }
    SignalBuffer {
        samples,
        sample_rate: target_rate,
        origin: buf.origin(),
    }
}

/// Per-quadrature amplitude densities over shared bin edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTable {
    pub edges: Vec<f64>,
    pub re_density: Vec<f64>,
    pub im_density: Vec<f64>,
}

impl DensityTable {
    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

pub fn amplitude_histogram(buf: &SignalBuffer, bins: usize) -> Result<DensityTable> {
    if bins < 2 {
        return Err(Error::TooFewBins(bins));
    }
    if buf.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for z in buf.samples() {
        lo = lo.min(z.re.min(z.im));
        hi = hi.max(z.re.max(z.im));
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0);
        lo -= pad;
        hi += pad;
    }
    let width = (hi - lo) / bins as f64;
    let index = |v: f64| (((v - lo) / width) as usize).min(bins - 1);
    let mut re = vec![0.0; bins];
    let mut im = vec![0.0; bins];
    for z in buf.samples() {
        re[index(z.re)] += 1.0;
        im[index(z.im)] += 1.0;
    }
    let norm = 1.0 / (buf.len() as f64 * width);
    re.iter_mut().chain(im.iter_mut()).for_each(|c| *c *= norm);
    let edges = (0..=bins).map(|i| lo + i as f64 * width).collect();
    Ok(DensityTable {
        edges,
        re_density: re,
        im_density: im,
    })
}

pub fn write_trace_csv(buf: &SignalBuffer, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "t_seconds,re,im")?;
    let dt = 1.0 / buf.sample_rate();
    for (i, z) in buf.samples().iter().enumerate() {
        writeln!(w, "{:.9e},{:.9e},{:.9e}", i as f64 * dt, z.re, z.im)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_psd_csv(spec: &SpectrumEstimate, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "f_hz,psd_db")?;
    for (f, d) in spec.frequencies.iter().zip(&spec.psd_db) {
        writeln!(w, "{f:.6e},{d:.6}")?;
    }
    w.flush()?;
    Ok(())
}
