//! Small filter building blocks shared by the transmitter, the emulated
//! analog front end and the receiver.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Forward-Euler first-order lowpass, `y += a (x - y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnePole {
    pub alpha: f64,
}

impl OnePole {
    pub fn new(alpha: f64) -> Self {
        Self { alpha }
    }

    /// Pole chosen so that complex white noise of unit power comes out with
    /// power `fraction` (two-sided noise bandwidth over sample rate).
    /// Fractions at or above one give the identity.
    pub fn with_noise_fraction(fraction: f64) -> Self {
        if fraction >= 1.0 {
            return Self { alpha: 1.0 };
        }
        // Noise gain of y += a(x - y) is a / (2 - a).
        Self {
            alpha: 2.0 * fraction / (1.0 + fraction),
        }
    }

    pub fn noise_gain(&self) -> f64 {
        self.alpha / (2.0 - self.alpha)
    }

    pub fn run(&self, input: &[Complex64]) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(input.len());
        let mut y = input.first().copied().unwrap_or_default();
        if self.alpha >= 1.0 {
            return input.to_vec();
        }
        for &x in input {
            y += (x - y) * self.alpha;
            out.push(y);
        }
        out
    }
}

/// Second-order section in transposed direct form II, real coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    pub fn response(&self, f_norm: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -2.0 * PI * f_norm);
        let z2 = z1 * z1;
        (self.b[0] + z1 * self.b[1] + z2 * self.b[2]) / (1.0 + z1 * self.a[0] + z2 * self.a[1])
    }
}

/// Cascade of biquads with complex state (I and Q filtered identically).
#[derive(Debug, Clone, PartialEq)]
pub struct BiquadCascade {
    sections: Vec<Biquad>,
}

impl BiquadCascade {
    /// Butterworth lowpass of even `order` via the bilinear transform with
    /// pre-warping, corner `corner_hz` at sample rate `rate`.
    pub fn butterworth_lowpass(order: usize, corner_hz: f64, rate: f64) -> Self {
        assert!(order >= 2 && order % 2 == 0, "even order required");
        let k = (PI * corner_hz / rate).tan();
        let sections = (0..order / 2)
            .map(|i| {
                let theta = PI * (2 * i + 1) as f64 / (2 * order) as f64;
                let q_inv = 2.0 * theta.sin();
                let norm = 1.0 / (1.0 + q_inv * k + k * k);
                let b0 = k * k * norm;
                Biquad {
                    b: [b0, 2.0 * b0, b0],
                    a: [2.0 * (k * k - 1.0) * norm, (1.0 - q_inv * k + k * k) * norm],
                }
            })
            .collect();
        Self { sections }
    }

    pub fn response(&self, f_norm: f64) -> Complex64 {
        self.sections
            .iter()
            .map(|s| s.response(f_norm))
            .product()
    }

    /// Sample-by-sample form of [`BiquadCascade::run`] with identical
    /// arithmetic.
    pub fn stream(&self) -> CascadeStream<'_> {
        CascadeStream {
            sections: &self.sections,
            state: vec![(Complex64::default(), Complex64::default()); self.sections.len()],
        }
    }

    pub fn run(&self, input: &[Complex64]) -> Vec<Complex64> {
        let mut out = input.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (Complex64::default(), Complex64::default());
            for v in out.iter_mut() {
                let x = *v;
                let y = x * s.b[0] + z1;
                z1 = x * s.b[1] - y * s.a[0] + z2;
                z2 = x * s.b[2] - y * s.a[1];
                *v = y;
            }
        }
        out
    }
}

/// Running state of a [`BiquadCascade`].
#[derive(Debug, Clone)]
pub struct CascadeStream<'a> {
    sections: &'a [Biquad],
    state: Vec<(Complex64, Complex64)>,
}

impl CascadeStream<'_> {
    #[inline]
    pub fn step(&mut self, x: Complex64) -> Complex64 {
        let mut v = x;
        for (s, (z1, z2)) in self.sections.iter().zip(self.state.iter_mut()) {
            let y = v * s.b[0] + *z1;
            *z1 = v * s.b[1] - y * s.a[0] + *z2;
            *z2 = v * s.b[2] - y * s.a[1];
            v = y;
        }
        v
    }
}

/// Zeroth-order modified Bessel function of the first kind.
pub fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc lowpass. `cutoff` is in cycles per sample, the filter
/// has `2 * half_len + 1` taps and unit DC gain.
pub fn kaiser_lowpass(cutoff: f64, half_len: usize, beta: f64) -> Vec<f64> {
    let n = 2 * half_len + 1;
    let i0b = bessel_i0(beta);
    let mut taps: Vec<f64> = (0..n)
        .map(|i| {
            let m = i as f64 - half_len as f64;
            let sinc = if m == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * m).sin() / (PI * m)
            };
            let r = if half_len == 0 { 0.0 } else { m / half_len as f64 };
            sinc * bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0b
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Root-raised-cosine impulse response at `t` symbol periods.
pub fn rrc_pulse(t: f64, rolloff: f64) -> f64 {
    let a = rolloff;
    if t.abs() < 1e-12 {
        return 1.0 - a + 4.0 * a / PI;
    }
    if a > 0.0 && ((4.0 * a * t).abs() - 1.0).abs() < 1e-9 {
        let s = (PI / (4.0 * a)).sin();
        let c = (PI / (4.0 * a)).cos();
        return a / 2f64.sqrt() * ((1.0 + 2.0 / PI) * s + (1.0 - 2.0 / PI) * c);
    }
    let num = (PI * t * (1.0 - a)).sin() + 4.0 * a * t * (PI * t * (1.0 + a)).cos();
    let den = PI * t * (1.0 - (4.0 * a * t).powi(2));
    num / den
}

/// Raised-cosine spectrum magnitude of an RRC pulse (root of the RC shape),
/// `f_sym` being frequency in units of the symbol rate.
pub fn rrc_spectrum(f_sym: f64, rolloff: f64) -> f64 {
    let f = f_sym.abs();
    let lo = (1.0 - rolloff) / 2.0;
    let hi = (1.0 + rolloff) / 2.0;
    if f <= lo {
        1.0
    } else if f >= hi {
        0.0
    } else {
        (0.5 * (1.0 + (PI / rolloff * (f - lo)).cos())).sqrt()
    }
}

/// Frequency response of a real FIR whose tap `center` sits at time zero.
pub fn fir_response(taps: &[f64], center: usize, f_norm: f64) -> Complex64 {
    taps.iter()
        .enumerate()
        .map(|(k, &h)| {
            let n = k as f64 - center as f64;
            Complex64::from_polar(h, -2.0 * PI * f_norm * n)
        })
        .sum()
}

/// Centered ("same"-length) FIR filtering with zero padding.
pub fn fir_same(input: &[Complex64], taps: &[f64]) -> Vec<Complex64> {
    let center = taps.len() / 2;
    (0..input.len())
        .map(|n| fir_at(input, taps, center, n as isize))
        .collect()
}

/// One output of a centered FIR at index `n`, zero outside the input.
#[inline]
pub fn fir_at(input: &[Complex64], taps: &[f64], center: usize, n: isize) -> Complex64 {
    let mut acc = Complex64::default();
    let len = input.len() as isize;
    for (k, &h) in taps.iter().enumerate() {
        let idx = n + center as isize - k as isize;
        if idx >= 0 && idx < len {
            acc += input[idx as usize] * h;
        }
    }
    acc
}
