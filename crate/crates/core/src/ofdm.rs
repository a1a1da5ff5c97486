//! OFDM transmitter and receiver on a PRIME-like carrier plan.
//!
//! The transmitter builds one IDFT per symbol, shapes the chip stream with a
//! root-raised-cosine pulse at the ADC rate and interpolates to the analog
//! emulation rate. The receiver matched-filters at the ADC rate, samples at
//! chip instants, takes a DFT per symbol and makes hard decisions after
//! per-carrier phase correction.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dsp::{fir_at, rrc_pulse};
use crate::error::{Error, Result};
use crate::signal::{resample, Band, ProbePoint, SignalBuffer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Bpsk,
    Qpsk,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmConfig {
    pub fft_size: usize,
    /// First data carrier, inclusive.
    pub data_carrier_lo: usize,
    /// Last data carrier, inclusive.
    pub data_carrier_hi: usize,
    pub modulation: Modulation,
    pub rolloff: f64,
    pub fs_chip_hz: f64,
    pub fs_adc_hz: f64,
    /// Analog emulation rate as a multiple of the ADC rate.
    pub oversample_factor: usize,
    /// Matched-filter and transmit-pulse span in chips.
    pub mf_span_symbols: usize,
    /// Accuracy order of the central difference in the modified matched filter.
    pub mf_derivative_order: usize,
    /// Use the modified matched filter after chains containing a CMTF stage.
    pub use_modified_mf: bool,
    pub cyclic_prefix: usize,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            fft_size: 512,
            data_carrier_lo: 86,
            data_carrier_hi: 182,
            modulation: Modulation::Bpsk,
            rolloff: 0.25,
            fs_chip_hz: 250e3,
            fs_adc_hz: 1e6,
            oversample_factor: 32,
            mf_span_symbols: 16,
            mf_derivative_order: 6,
            use_modified_mf: true,
            cyclic_prefix: 0,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.fft_size < 2 {
            return bad(format!("fft_size {} too small", self.fft_size));
        }
        if self.data_carrier_lo > self.data_carrier_hi || self.data_carrier_hi >= self.fft_size {
            return bad(format!(
                "data carriers {}..={} not within 0..{}",
                self.data_carrier_lo, self.data_carrier_hi, self.fft_size
            ));
        }
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) {
            return bad(format!("rolloff {} outside (0, 1]", self.rolloff));
        }
        crate::error::ensure_positive("fs_chip_hz", self.fs_chip_hz)?;
        crate::error::ensure_positive("fs_adc_hz", self.fs_adc_hz)?;
        let expected_adc = 8.0 * self.signal_bandwidth();
        if ((self.fs_adc_hz - expected_adc) / expected_adc).abs() > 1e-9 {
            return bad(format!(
                "fs_adc_hz {} must equal 8 B_x = {expected_adc}",
                self.fs_adc_hz
            ));
        }
        if self.oversample_factor == 0 {
            return bad("oversample_factor must be at least 1".into());
        }
        if self.mf_span_symbols == 0 || self.mf_span_symbols % 2 != 0 {
            return bad(format!(
                "mf_span_symbols {} must be even and positive",
                self.mf_span_symbols
            ));
        }
        if derivative_stencil(self.mf_derivative_order).is_none() {
            return bad(format!(
                "mf_derivative_order {} not in {{2, 4, 6, 8}}",
                self.mf_derivative_order
            ));
        }
        if self.cyclic_prefix >= self.fft_size {
            return bad(format!("cyclic_prefix {} too long", self.cyclic_prefix));
        }
        Ok(())
    }

    pub fn symbol_duration(&self) -> f64 {
        self.fft_size as f64 / self.fs_chip_hz
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        1.0 / self.symbol_duration()
    }

    /// One-sided bandwidth B_x of the chip-rate complex envelope.
    pub fn signal_bandwidth(&self) -> f64 {
        self.fs_chip_hz / 2.0
    }

    pub fn mf_bandwidth(&self) -> f64 {
        1.25 * self.signal_bandwidth()
    }

    pub fn analog_rate(&self) -> f64 {
        self.fs_adc_hz * self.oversample_factor as f64
    }

    pub fn samples_per_chip(&self) -> usize {
        (self.fs_adc_hz / self.fs_chip_hz).round() as usize
    }

    pub fn chips_per_symbol(&self) -> usize {
        self.fft_size + self.cyclic_prefix
    }

    pub fn adc_samples_per_symbol(&self) -> usize {
        self.chips_per_symbol() * self.samples_per_chip()
    }

    pub fn data_carriers(&self) -> std::ops::RangeInclusive<usize> {
        self.data_carrier_lo..=self.data_carrier_hi
    }

    pub fn n_data_carriers(&self) -> usize {
        self.data_carrier_hi - self.data_carrier_lo + 1
    }

    pub fn bits_per_ofdm_symbol(&self) -> usize {
        self.n_data_carriers() * self.modulation.bits_per_symbol()
    }

    /// Signed band spanned by the data carriers.
    pub fn data_band(&self) -> Band {
        let df = self.subcarrier_spacing();
        Band::new(
            self.data_carrier_lo as f64 * df,
            self.data_carrier_hi as f64 * df,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitFrame {
    pub bits: Vec<u8>,
    pub seed: u64,
}

impl BitFrame {
    pub fn random(len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits = (0..len).map(|_| rng.random_range(0..=1u8)).collect();
        Self { bits, seed }
    }

    /// Random payload filling `n_symbols` OFDM symbols.
    pub fn for_symbols(cfg: &OfdmConfig, n_symbols: usize, seed: u64) -> Self {
        Self::random(cfg.bits_per_ofdm_symbol() * n_symbols, seed)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

pub fn map_bits(frame: &BitFrame, modulation: Modulation) -> Result<Vec<Complex64>> {
    let k = modulation.bits_per_symbol();
    if frame.len() % k != 0 {
        return Err(Error::LengthMismatch {
            expected: frame.len().next_multiple_of(k),
            found: frame.len(),
        });
    }
    let sign = |b: u8| if b == 0 { 1.0 } else { -1.0 };
    Ok(match modulation {
        Modulation::Bpsk => frame
            .bits
            .iter()
            .map(|&b| Complex64::new(sign(b), 0.0))
            .collect(),
        Modulation::Qpsk => frame
            .bits
            .chunks_exact(2)
            .map(|p| Complex64::new(sign(p[0]), sign(p[1])) / 2f64.sqrt())
            .collect(),
    })
}

/// Spreads constellation points over the data carriers, one full-length
/// carrier vector per OFDM symbol.
pub fn assign_carriers(points: &[Complex64], cfg: &OfdmConfig) -> Result<Vec<Vec<Complex64>>> {
    let n_data = cfg.n_data_carriers();
    if points.len() % n_data != 0 {
        return Err(Error::LengthMismatch {
            expected: points.len().next_multiple_of(n_data),
            found: points.len(),
        });
    }
    Ok(points
        .chunks_exact(n_data)
        .map(|chunk| {
            let mut sym = vec![Complex64::default(); cfg.fft_size];
            sym[cfg.data_carriers()].copy_from_slice(chunk);
            sym
        })
        .collect())
}

/// Chip stream (IDFT with 1/sqrt(N) scaling plus cyclic prefix).
pub fn ofdm_chips(symbols: &[Vec<Complex64>], cfg: &OfdmConfig) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    let n = cfg.fft_size;
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    let scale = 1.0 / (n as f64).sqrt();
    let mut chips = Vec::with_capacity(symbols.len() * cfg.chips_per_symbol());
    for sym in symbols {
        if sym.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: sym.len(),
            });
        }
        if let Some(k) = (0..n).find(|k| !cfg.data_carriers().contains(k) && sym[*k] != Complex64::default()) {
            return Err(Error::NonDataCarrier { carrier: k });
        }
        let mut buf: Vec<Complex64> = sym.iter().map(|s| s * scale).collect();
        ifft.process(&mut buf);
        chips.extend_from_slice(&buf[n - cfg.cyclic_prefix..]);
        chips.extend_from_slice(&buf);
    }
    Ok(chips)
}

/// Transmit pulse at the ADC rate, normalized to energy `samples_per_chip`
/// so that shaping preserves the mean chip power.
pub fn transmit_pulse(cfg: &OfdmConfig) -> Vec<f64> {
    let mut p = rrc_taps(cfg);
    let spc = cfg.samples_per_chip() as f64;
    let e: f64 = p.iter().map(|h| h * h).sum();
    p.iter_mut().for_each(|h| *h *= (spc / e).sqrt());
    p
}

fn rrc_taps(cfg: &OfdmConfig) -> Vec<f64> {
    let spc = cfg.samples_per_chip();
    let half = cfg.mf_span_symbols / 2 * spc;
    (0..=2 * half)
        .map(|k| rrc_pulse((k as f64 - half as f64) / spc as f64, cfg.rolloff))
        .collect()
}

/// Pulse-shapes a chip stream to the ADC rate. Chip `j` is centered on
/// sample `j * samples_per_chip`.
pub fn pulse_shape(chips: &[Complex64], cfg: &OfdmConfig) -> Result<SignalBuffer> {
    let spc = cfg.samples_per_chip();
    let p = transmit_pulse(cfg);
    let half = (p.len() / 2) as isize;
    let len = chips.len() * spc;
    let mut out = vec![Complex64::default(); len];
    for (j, &c) in chips.iter().enumerate() {
        if c == Complex64::default() {
            continue;
        }
        let c0 = (j * spc) as isize;
        for (k, &h) in p.iter().enumerate() {
            let n = c0 + k as isize - half;
            if n >= 0 && (n as usize) < len {
                out[n as usize] += c * h;
            }
        }
    }
    SignalBuffer::new(out, cfg.fs_adc_hz, ProbePoint::Transmit)
}

/// Transmit trace at the ADC rate.
pub fn ofdm_modulate_adc(symbols: &[Vec<Complex64>], cfg: &OfdmConfig) -> Result<SignalBuffer> {
    pulse_shape(&ofdm_chips(symbols, cfg)?, cfg)
}

/// Transmit trace at the analog emulation rate.
pub fn ofdm_modulate(symbols: &[Vec<Complex64>], cfg: &OfdmConfig) -> Result<SignalBuffer> {
    let adc = ofdm_modulate_adc(symbols, cfg)?;
    Ok(resample(&adc, cfg.analog_rate())?.with_origin(ProbePoint::Transmit))
}

/// Unit-energy RRC matched filter at the ADC rate; the center tap is
/// `taps.len() / 2`.
pub fn matched_filter_taps(cfg: &OfdmConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut h = rrc_taps(cfg);
    let e: f64 = h.iter().map(|x| x * x).sum();
    h.iter_mut().for_each(|x| *x /= e.sqrt());
    Ok(h)
}

fn derivative_stencil(order: usize) -> Option<&'static [f64]> {
    const S2: [f64; 3] = [-0.5, 0.0, 0.5];
    const S4: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
    const S6: [f64; 7] = [
        -1.0 / 60.0,
        3.0 / 20.0,
        -0.75,
        0.0,
        0.75,
        -3.0 / 20.0,
        1.0 / 60.0,
    ];
    const S8: [f64; 9] = [
        1.0 / 280.0,
        -4.0 / 105.0,
        0.2,
        -0.8,
        0.0,
        0.8,
        -0.2,
        4.0 / 105.0,
        -1.0 / 280.0,
    ];
    match order {
        2 => Some(&S2),
        4 => Some(&S4),
        6 => Some(&S6),
        8 => Some(&S8),
        _ => None,
    }
}

/// `h + tau * dh/dt`, the derivative taken by a central difference. The
/// result is longer than `h` by the stencil width minus one, keeps the same
/// center and has the same DC gain.
pub fn modified_matched_filter_taps(cfg: &OfdmConfig, tau: f64) -> Result<Vec<f64>> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::NonPositive { name: "tau", value: tau });
    }
    let h = matched_filter_taps(cfg)?;
    if tau == 0.0 {
        return Ok(h);
    }
    let stencil = derivative_stencil(cfg.mf_derivative_order).expect("validated");
    let r = stencil.len() / 2;
    let get = |i: isize| {
        if i >= 0 && (i as usize) < h.len() {
            h[i as usize]
        } else {
            0.0
        }
    };
    let scale = tau * cfg.fs_adc_hz;
    Ok((0..h.len() + 2 * r)
        .map(|i| {
            let k = i as isize - r as isize;
            let d: f64 = stencil
                .iter()
                .enumerate()
                .map(|(j, c)| c * get(k + j as isize - r as isize))
                .sum();
            get(k) + scale * d
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatchedFilter {
    Standard,
    Modified { tau: f64 },
}

impl MatchedFilter {
    pub fn taps(self, cfg: &OfdmConfig) -> Result<Vec<f64>> {
        match self {
            MatchedFilter::Standard => matched_filter_taps(cfg),
            MatchedFilter::Modified { tau } => modified_matched_filter_taps(cfg, tau),
        }
    }
}

/// Delay and per-carrier complex gain of a transmit-to-decision path.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainCalibration {
    /// Extra delay in ADC samples between transmit chip instants and the
    /// matched-filter peak.
    pub delay: isize,
    /// Complex gain of each data carrier, in carrier order.
    pub carrier_gain: Vec<Complex64>,
}

/// Matched filter, chip-instant sampler and DFT for one receive chain.
#[derive(Clone)]
pub struct Receiver {
    cfg: OfdmConfig,
    taps: Vec<f64>,
    calibration: ChainCalibration,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Receiver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Receiver")
            .field("taps", &self.taps.len())
            .field("calibration", &self.calibration)
            .finish()
    }
}

impl Receiver {
    /// Receiver calibrated by sending a single chip through `chain`, which
    /// maps an ADC-rate transmit trace to the ADC-rate received trace.
    pub fn calibrate<F>(cfg: &OfdmConfig, mf: MatchedFilter, chain: F) -> Result<Self>
    where
        F: FnOnce(&SignalBuffer) -> Result<SignalBuffer>,
    {
        cfg.validate()?;
        let taps = mf.taps(cfg)?;
        let n = cfg.fft_size;
        let spc = cfg.samples_per_chip() as isize;
        let mut chips = vec![Complex64::default(); 2 * n];
        chips[n] = Complex64::new(1.0, 0.0);
        let probe = pulse_shape(&chips, cfg)?;
        let rx = chain(&probe)?;
        if rx.len() != probe.len() {
            return Err(Error::LengthMismatch {
                expected: probe.len(),
                found: rx.len(),
            });
        }
        let center = taps.len() / 2;
        let anchor = n as isize * spc;
        let search = cfg.mf_span_symbols as isize * spc;
        let mf_at = |i: isize| fir_at(rx.samples(), &taps, center, i);
        let (delay, peak) = (-search..=search)
            .map(|d| (d, mf_at(anchor + d).norm()))
            .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if peak == 0.0 {
            return Err(Error::ZeroCalibration);
        }
        let half = n as isize / 2;
        let response: Vec<(isize, Complex64)> = (-half..half)
            .map(|m| (m, mf_at(anchor + delay + m * spc)))
            .collect();
        let carrier_gain = cfg
            .data_carriers()
            .map(|k| {
                response
                    .iter()
                    .map(|&(m, g)| g * Complex64::from_polar(1.0, -2.0 * PI * (k as f64) * m as f64 / n as f64))
                    .sum()
            })
            .collect();
        Ok(Self::with_calibration(
            cfg,
            taps,
            ChainCalibration {
                delay,
                carrier_gain,
            },
        ))
    }

    /// Receiver calibrated on the transmit pulse alone.
    pub fn nominal(cfg: &OfdmConfig, mf: MatchedFilter) -> Result<Self> {
        Self::calibrate(cfg, mf, |b| Ok(b.clone()))
    }

    pub fn with_calibration(cfg: &OfdmConfig, taps: Vec<f64>, calibration: ChainCalibration) -> Self {
        Self {
            cfg: cfg.clone(),
            fft: FftPlanner::new().plan_fft_forward(cfg.fft_size),
            taps,
            calibration,
        }
    }

    pub fn calibration(&self) -> &ChainCalibration {
        &self.calibration
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Phase-corrected decision statistics of the data carriers for symbols
    /// `first..first + count`, concatenated in symbol order.
    pub fn decision_statistics(
        &self,
        adc: &SignalBuffer,
        first: usize,
        count: usize,
    ) -> Result<Vec<Complex64>> {
        let cfg = &self.cfg;
        let needed = (first + count) * cfg.adc_samples_per_symbol();
        if adc.len() < needed {
            return Err(Error::LengthMismatch {
                expected: needed,
                found: adc.len(),
            });
        }
        let n = cfg.fft_size;
        let spc = cfg.samples_per_chip();
        let center = self.taps.len() / 2;
        let scale = 1.0 / (n as f64).sqrt();
        let mut out = Vec::with_capacity(count * cfg.n_data_carriers());
        let mut buf = vec![Complex64::default(); n];
        for s in first..first + count {
            let chip0 = s * cfg.chips_per_symbol() + cfg.cyclic_prefix;
            for (m, slot) in buf.iter_mut().enumerate() {
                let idx = ((chip0 + m) * spc) as isize + self.calibration.delay;
                *slot = fir_at(adc.samples(), &self.taps, center, idx) * scale;
            }
            self.fft.process(&mut buf);
            out.extend(
                buf[cfg.data_carriers()]
                    .iter()
                    .zip(&self.calibration.carrier_gain)
                    .map(|(y, g)| y * g.conj() / g.norm()),
            );
        }
        Ok(out)
    }

    /// Hard-decision bits for symbols `first..first + count`.
    pub fn demodulate(&self, adc: &SignalBuffer, first: usize, count: usize) -> Result<Vec<u8>> {
        let stats = self.decision_statistics(adc, first, count)?;
        let bit = |v: f64| u8::from(v < 0.0);
        Ok(match self.cfg.modulation {
            Modulation::Bpsk => stats.iter().map(|z| bit(z.re)).collect(),
            Modulation::Qpsk => stats.iter().flat_map(|z| [bit(z.re), bit(z.im)]).collect(),
        })
    }
}

/// Demodulates a symbol-aligned ADC-rate trace containing a whole number of
/// OFDM symbols, using a receiver calibrated on the transmit pulse.
pub fn demodulate(buf: &SignalBuffer, cfg: &OfdmConfig, which_mf: MatchedFilter) -> Result<Vec<u8>> {
    cfg.validate()?;
    let per = cfg.adc_samples_per_symbol();
    if buf.is_empty() || buf.len() % per != 0 {
        return Err(Error::LengthMismatch {
            expected: buf.len().div_ceil(per).max(1) * per,
            found: buf.len(),
        });
    }
    Receiver::nominal(cfg, which_mf)?.demodulate(buf, 0, buf.len() / per)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerCount {
    pub errors: u64,
    pub total: u64,
}

impl BerCount {
    pub fn ber(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.errors as f64 / self.total as f64
        }
    }
}

impl std::ops::AddAssign for BerCount {
    fn add_assign(&mut self, rhs: Self) {
        self.errors += rhs.errors;
        self.total += rhs.total;
    }
}

pub fn count_ber(sent: &[u8], received: &[u8]) -> Result<BerCount> {
    if sent.len() != received.len() {
        return Err(Error::LengthMismatch {
            expected: sent.len(),
            found: received.len(),
        });
    }
    let errors = sent.iter().zip(received).filter(|(a, b)| a != b).count();
    Ok(BerCount {
        errors: errors as u64,
        total: sent.len() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencils_are_antisymmetric_and_exact_on_lines() {
        for order in [2, 4, 6, 8] {
            let s = derivative_stencil(order).unwrap();
            let r = (s.len() / 2) as f64;
            assert!(s.iter().sum::<f64>().abs() < 1e-15);
            let slope: f64 = s.iter().enumerate().map(|(j, c)| c * (j as f64 - r)).sum();
            assert!((slope - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn default_config_is_valid() {
        let cfg = OfdmConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.samples_per_chip(), 4);
        assert_eq!(cfg.n_data_carriers(), 97);
        assert!((cfg.analog_rate() - 32e6).abs() < 1e-6);
    }
}
