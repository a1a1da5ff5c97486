use acdl_core::noise::*;
use acdl_core::ofdm::OfdmConfig;
use acdl_core::signal::{estimate_psd, Band};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

const RATE: f64 = 32e6;

fn kurtosis(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2)
}

/// Two-sided Kolmogorov-Smirnov statistic against N(0, sigma^2).
fn ks_normal(v: &[f64], sigma: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let d = Normal::new(0.0, sigma).unwrap();
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = d.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn calibration_follows_eb_n0_and_sir() {
    let ofdm = OfdmConfig::default();
    let cfg = NoiseConfig {
        eb_n0_db: 10.0,
        sir_db: 0.0,
        ..NoiseConfig::default()
    };
    let p = 97.0 / 512.0;
    let t = calibrate(p, &cfg, &ofdm).unwrap();
    let eb = p * ofdm.symbol_duration() / 97.0;
    assert!((t.n0 - eb / 10.0).abs() < 1e-18);
    assert!((t.impulsive() - p).abs() < 1e-15);
    assert!((t.cyclostationary / t.asynchronous - 3.0).abs() < 1e-12);
    let off = calibrate(p, &NoiseConfig { sir_db: f64::INFINITY, ..cfg.clone() }, &ofdm).unwrap();
    assert_eq!(off.impulsive(), 0.0);
    assert!(calibrate(p, &NoiseConfig { sir_db: f64::NAN, ..cfg }, &ofdm).is_err());
}

#[test]
fn awgn_is_gaussian_and_hits_its_power() {
    let n = gen_awgn(1 << 16, RATE, 2.0, 3).unwrap();
    assert!((n.mean_power() - 2.0).abs() < 1e-12);
    let re: Vec<f64> = n.samples().iter().map(|z| z.re).collect();
    assert!(ks_normal(&re, 1.0) < 1.63 / (re.len() as f64).sqrt());
    assert!((kurtosis(&re) - 3.0).abs() < 0.1);
}

#[test]
fn impulsive_noise_is_heavy_tailed() {
    let cfg = NoiseConfig::default();
    let len = 1 << 19;
    let (a, arrivals) = gen_asynchronous(len, RATE, 1.0, &cfg).unwrap();
    assert!(!arrivals.is_empty());
    assert!((a.mean_power() - 1.0).abs() < 1e-9);
    let re: Vec<f64> = a.samples().iter().map(|z| z.re).collect();
    assert!(kurtosis(&re) > 6.0, "{}", kurtosis(&re));
}

#[test]
fn burst_onsets_sit_on_the_mains_grid() {
    let cfg = NoiseConfig::default();
    let period = cfg.burst_period();
    assert!((period - 1.0 / 120.0).abs() < 1e-15);
    let t_start = 0.3 * period;
    let on = burst_onsets(0.05, t_start, &cfg);
    for w in on.windows(2) {
        assert!((w[1] - w[0] - period).abs() < 1e-12);
    }
    for t in &on {
        let k = (t + t_start) / period;
        assert!((k - k.round()).abs() < 1e-9);
    }
    assert!(on[0] < 0.0 && on[0] > -20.0 * cfg.tau_cs_s - period);
}

#[test]
fn cyclostationary_needs_a_full_period() {
    let cfg = NoiseConfig::default();
    assert!(gen_cyclostationary(1000, RATE, 1.0, 0.0, &cfg).is_err());
}

#[test]
fn poisson_counts_have_unit_dispersion() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let inv_lambda = 2e-5;
    let window = 1e-3;
    let counts: Vec<f64> = (0..2000)
        .map(|_| poisson_arrivals(window, inv_lambda, &mut rng).len() as f64)
        .collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((mean - 50.0).abs() < 1.0, "{mean}");
    assert!((var / mean - 1.0).abs() < 0.1, "{}", var / mean);
}

#[test]
fn shaped_thermal_slope_and_density() {
    let ofdm = OfdmConfig::default();
    let cfg = NoiseConfig::default();
    let n0 = 1e-7;
    let th = gen_thermal(1 << 20, RATE, n0, &cfg, &ofdm).unwrap();
    let s = estimate_psd(&th, 4096).unwrap();
    let slope = s.slope_db_per_mhz(Band::new(0.0, 1e6));
    assert!((slope + 30.0).abs() < 3.0, "{slope}");
    let band = ofdm.data_band();
    let (sum, count) = s
        .frequencies
        .iter()
        .zip(&s.psd_db)
        .filter(|(f, _)| band.contains(**f))
        .fold((0.0, 0), |(a, c), (_, d)| (a + 10f64.powf(d / 10.0), c + 1));
    let density = sum / count as f64;
    assert!((density / n0 - 1.0).abs() < 0.1, "{density}");
}

#[test]
fn shaping_gain_is_unity_at_dc() {
    assert_eq!(shaping_power_gain(0.0, 30.0), 1.0);
    assert!((shaping_power_gain(1e6, 30.0) - 1e-3).abs() < 1e-15);
    assert_eq!(shaping_power_gain(-5e5, 30.0), shaping_power_gain(5e5, 30.0));
}

#[test]
fn realization_is_reproducible_and_calibrated() {
    let ofdm = OfdmConfig::default();
    let cfg = NoiseConfig {
        sir_db: 0.0,
        ..NoiseConfig::default()
    };
    let len = 1 << 19;
    let a = NoiseRealization::generate(len, RATE, &cfg, &ofdm, 0.2).unwrap();
    let b = NoiseRealization::generate(len, RATE, &cfg, &ofdm, 0.2).unwrap();
    assert_eq!(a.total().unwrap(), b.total().unwrap());
    assert!((a.cyclostationary.mean_power() / a.targets.cyclostationary - 1.0).abs() < 1e-9);
    assert!((a.asynchronous.mean_power() / a.targets.asynchronous - 1.0).abs() < 1e-9);
    let c = NoiseRealization::generate(len, RATE, &NoiseConfig { seed: 43, ..cfg }, &ofdm, 0.2).unwrap();
    assert_ne!(a.thermal, c.thermal);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn awgn_power_is_exact(power in 1e-6f64..10.0, seed in any::<u64>()) {
        let n = gen_awgn(4096, RATE, power, seed).unwrap();
        prop_assert!((n.mean_power() / power - 1.0).abs() < 1e-9);
    }

    #[test]
    fn impulsive_split_sums_to_target(sir in -20.0f64..30.0, ratio in 0.1f64..10.0) {
        let ofdm = OfdmConfig::default();
        let cfg = NoiseConfig { sir_db: sir, cs_as_ratio: ratio, ..NoiseConfig::default() };
        let t = calibrate(1.0, &cfg, &ofdm).unwrap();
        prop_assert!((t.impulsive() - 10f64.powf(-sir / 10.0)).abs() < 1e-9 * t.impulsive());
        prop_assert!((t.cyclostationary / t.asynchronous - ratio).abs() < 1e-9 * ratio);
    }
}
