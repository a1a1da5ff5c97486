use acdl_core::acdl::*;
use acdl_core::ofdm::{assign_carriers, map_bits, ofdm_modulate, BitFrame, OfdmConfig};
use acdl_core::signal::{ProbePoint, SignalBuffer};
use acdl_core::Error;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn ofdm_signal(symbols: usize, seed: u64) -> SignalBuffer {
    let cfg = OfdmConfig::default();
    let frame = BitFrame::for_symbols(&cfg, symbols, seed);
    ofdm_modulate(&assign_carriers(&map_bits(&frame, cfg.modulation).unwrap(), &cfg).unwrap(), &cfg).unwrap()
}

#[test]
fn defaults_follow_the_signal_bandwidth() {
    let cfg = AcdlConfig::default();
    let bx = 125e3;
    assert!((cfg.tau_s - 1.0 / (4.0 * std::f64::consts::PI * bx)).abs() < 1e-18);
    assert!((cfg.aa_corner_hz() - 2.0 * bx).abs() < 1e-6);
    assert_eq!(cfg.beta, 3.0);
    assert!(AcdlConfig { aa_order: 3, ..cfg.clone() }.validate().is_err());
    assert!(AcdlConfig { beta: -1.0, ..cfg }.validate().is_err());
}

#[test]
fn clipping_and_ranges() {
    assert_eq!(clip(5.0, -1.0, 2.0).unwrap(), 2.0);
    assert_eq!(clip(-5.0, -1.0, 2.0).unwrap(), -1.0);
    assert_eq!(clip(0.5, -1.0, 2.0).unwrap(), 0.5);
    assert!(matches!(clip(0.0, 1.0, -1.0), Err(Error::InvertedRange { .. })));
    let r = tukey_range(-1.0, 1.0, 3.0).unwrap();
    assert_eq!((r.lo, r.hi), (-7.0, 7.0));
    assert!(tukey_range(1.0, -1.0, 3.0).is_err());
    assert_eq!(r.max_rate(0.5), 14.0);
    assert!(ClipRange::unbounded().width().is_infinite());
}

#[test]
fn coarse_steps_are_rejected() {
    let r = ClipRange::unbounded();
    let s = CmtfState::default();
    assert!(matches!(
        cmtf_step(s, Complex64::new(1.0, 0.0), r, r, 1.0, 0.1),
        Err(Error::StepTooCoarse { .. })
    ));
    let next = cmtf_step(s, Complex64::new(1.0, -1.0), r, r, 1.0, 0.05).unwrap();
    assert!((next.chi - Complex64::new(0.05, -0.05)).norm() < 1e-15);
}

#[test]
fn quartile_trackers_settle_on_gaussian_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut s = QtfState::default();
    let (a, t0, dt) = (1.0, 1.0, 2e-3);
    let n = 400_000;
    let (mut below1, mut below3) = (0usize, 0usize);
    for i in 0..n {
        let y: f64 = StandardNormal.sample(&mut rng);
        if i >= n / 2 {
            below1 += usize::from(y < s.q1);
            below3 += usize::from(y < s.q3);
        }
        s = qtf_step(s, y, a, t0, dt);
    }
    let half = (n / 2) as f64;
    assert!((below3 as f64 / half - 0.75).abs() < 0.02);
    assert!((below1 as f64 / half - 0.25).abs() < 0.02);
    assert!((s.iqr() - 1.349).abs() < 0.1, "{}", s.iqr());
}

#[test]
fn unbounded_chain_equals_the_linear_chain() {
    let ofdm = OfdmConfig::default();
    let cfg = AcdlConfig::default();
    let s = ofdm_signal(2, 4);
    let chain = AcdlChain::new(&cfg, &ofdm, Gains::unity(&cfg)).unwrap().with_force_linear(true);
    let a = chain.process(&s).unwrap().output;
    let b = chain.process_linear(&s).unwrap().output;
    let resid = a.sub(&b).unwrap().mean_power().sqrt();
    assert!(resid <= 1e-10 * b.mean_power().sqrt(), "{resid}");
}

#[test]
fn probes_are_recorded_on_request() {
    let ofdm = OfdmConfig::default();
    let cfg = AcdlConfig::default();
    let s = ofdm_signal(1, 5);
    let chain = AcdlChain::new(&cfg, &ofdm, Gains::unity(&cfg)).unwrap();
    let x = chain.front_end(&s).unwrap();
    let out = chain.process_front(&x, true).unwrap();
    for p in [
        ProbePoint::CmtfInput,
        ProbePoint::CmtfOutput,
        ProbePoint::AntiAliased,
        ProbePoint::Baseband,
        ProbePoint::Difference,
    ] {
        assert!(out.probe(p).is_some(), "{p:?}");
    }
    assert_eq!(out.probe(ProbePoint::CmtfOutput).unwrap().len(), s.len());
    assert_eq!(out.output.len() * ofdm.oversample_factor, s.len());
    let lin = chain.linear_front(&x, true).unwrap();
    assert_eq!(lin.probes.len(), 3);
    assert!(chain.process_front(&x, false).unwrap().probes.is_empty());
}

#[test]
fn agc_hits_its_targets() {
    let ofdm = OfdmConfig::default();
    let cfg = AcdlConfig::default();
    let s = ofdm_signal(3, 6);
    let g = agc_tune(&s, &cfg, &ofdm).unwrap();
    let chain = AcdlChain::new(&cfg, &ofdm, g).unwrap();
    let y = chain.process_linear(&s).unwrap().output;
    let mean_abs = y.samples().iter().map(|z| z.re.abs() + z.im.abs()).sum::<f64>() / (2 * y.len()) as f64;
    assert!((mean_abs * g.input_gain() - cfg.agc_target_mean_abs * cfg.v_c).abs() < 1e-9);
    assert!(g.gain_g > 0.0 && g.qtf_a > 0.0 && g.crossing_rate > 0.0);
    let expected_startup = (cfg.startup_ramps / (cfg.qtf_step_fraction * g.crossing_rate)).min(s.duration());
    assert!((g.startup_s / expected_startup - 1.0).abs() < 1e-9);
}

#[test]
fn agc_rejects_silence() {
    let ofdm = OfdmConfig::default();
    let z = SignalBuffer::zeros(1 << 16, ofdm.analog_rate(), ProbePoint::Channel).unwrap();
    assert!(matches!(agc_tune(&z, &AcdlConfig::default(), &ofdm), Err(Error::ZeroCalibration)));
}

#[test]
fn empirical_quantile_interpolates() {
    let v = [4.0, 1.0, 3.0, 2.0];
    assert_eq!(empirical_quantile(&v, 0.0), 1.0);
    assert_eq!(empirical_quantile(&v, 1.0), 4.0);
    assert!((empirical_quantile(&v, 0.5) - 2.5).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cmtf_slew_is_bounded(
        xs in prop::collection::vec(-1e3f64..1e3, 1..200),
        lo in -5.0f64..0.0,
        hi in 0.0f64..5.0,
    ) {
        let (tau, dt) = (1.0, 0.02);
        let r = ClipRange::new(lo, hi).unwrap();
        let bound = r.max_rate(tau) * (1.0 + 1e-6);
        let mut s = CmtfState::default();
        for x in xs {
            let next = cmtf_step(s, Complex64::new(x, -x), r, r, tau, dt).unwrap();
            prop_assert!((next.chi.re - s.chi.re).abs() / dt <= bound);
            prop_assert!((next.chi.im - s.chi.im).abs() / dt <= bound);
            s = next;
        }
    }

    #[test]
    fn quartiles_stay_ordered_from_ordered_start(ys in prop::collection::vec(-10.0f64..10.0, 1..500)) {
        let mut s = QtfState { q1: -0.1, q3: 0.1 };
        for y in ys {
            s = qtf_step(s, y, 1.0, 1.0, 1e-3);
            prop_assert!(s.q1 <= s.q3 + 2e-3);
        }
    }
}
