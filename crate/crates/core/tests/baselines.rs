use acdl_core::baselines::*;
use acdl_core::ofdm::BerCount;
use acdl_core::signal::{ProbePoint, SignalBuffer};
use acdl_core::Error;
use num_complex::Complex64;
use proptest::prelude::*;

fn count(errors: u64, total: u64) -> BerCount {
    BerCount { errors, total }
}

#[test]
fn per_sample_rules() {
    let z = Complex64::new(3.0, 4.0);
    assert_eq!(blank(z, 6.0).unwrap(), z);
    assert_eq!(blank(z, 4.0).unwrap(), Complex64::default());
    let c = clip_baseline(z, 2.5).unwrap();
    assert!((c - Complex64::new(1.5, 2.0)).norm() < 1e-12);
    assert_eq!(clip_baseline(z, 5.0).unwrap(), z);
    assert!(matches!(blank(z, 0.0), Err(Error::InvalidThreshold(_))));
    assert!(clip_baseline(z, -1.0).is_err());
}

#[test]
fn buffer_form_matches_per_sample_form() {
    let s: Vec<Complex64> = (0..64).map(|i| Complex64::from_polar(i as f64 / 8.0, i as f64)).collect();
    let buf = SignalBuffer::new(s.clone(), 1e6, ProbePoint::Baseband).unwrap();
    for kind in [Nonlinearity::Blanking, Nonlinearity::Clipping] {
        let out = kind.apply(&buf, 3.3).unwrap();
        for (a, b) in out.samples().iter().zip(&s) {
            assert!((a - kind.apply_sample(*b, 3.3).unwrap()).norm() < 1e-12);
        }
    }
}

#[test]
fn selection_prefers_lowest_ber_then_smallest_threshold() {
    let spec = ThresholdSearchSpec::new(vec![1.0, 2.0, 3.0, 4.0], 0).unwrap();
    let r = select_threshold(&spec, &[count(9, 100), count(3, 100), count(3, 100), count(5, 100)]).unwrap();
    assert_eq!(r.threshold, 2.0);
    assert_eq!(r.at_optimum, count(3, 100));
    assert_eq!(r.curve.len(), 4);
}

#[test]
fn zero_error_points_mean_the_budget_is_too_small() {
    let spec = ThresholdSearchSpec::new(vec![1.0, 2.0], 0).unwrap();
    assert!(matches!(
        select_threshold(&spec, &[count(1, 10), count(0, 10)]),
        Err(Error::BudgetTooSmall { threshold }) if threshold == 2.0
    ));
    assert!(select_threshold(&spec, &[count(1, 10)]).is_err());
}

#[test]
fn optimize_evaluates_the_whole_grid() {
    let spec = ThresholdSearchSpec::log_grid(0.5, 8.0, 5, 0).unwrap();
    let r = optimize_threshold(&spec, |grid| {
        Ok(grid.iter().map(|t| count(1 + ((t.ln() - 2f64.ln()).abs() * 10.0) as u64, 1000)).collect())
    })
    .unwrap();
    assert!((r.threshold - 2.0).abs() < 1e-9);
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-10.0f64..10.0, -10.0f64..10.0).prop_map(|(a, b)| Complex64::new(a, b))
}

proptest! {
    #[test]
    fn both_rules_are_idempotent(z in complex(), t in 0.01f64..10.0) {
        for kind in [Nonlinearity::Blanking, Nonlinearity::Clipping] {
            let once = kind.apply_sample(z, t).unwrap();
            let twice = kind.apply_sample(once, t).unwrap();
            prop_assert!((once - twice).norm() <= 1e-12 * (1.0 + once.norm()));
        }
    }

    #[test]
    fn clipping_preserves_phase_and_bounds_magnitude(z in complex(), t in 0.01f64..10.0) {
        let c = clip_baseline(z, t).unwrap();
        prop_assert!(c.norm() <= t * (1.0 + 1e-12) || c == z);
        if z.norm() > 1e-9 {
            prop_assert!((c.arg() - z.arg()).abs() < 1e-9);
        }
    }

    #[test]
    fn blanking_output_is_input_or_zero(z in complex(), t in 0.01f64..10.0) {
        let b = blank(z, t).unwrap();
        prop_assert!(b == z || b == Complex64::default());
        prop_assert!(b.norm() <= t);
    }

    #[test]
    fn log_grids_are_increasing(lo in 0.01f64..1.0, span in 1.01f64..100.0, n in 2usize..60) {
        let s = ThresholdSearchSpec::log_grid(lo, lo * span, n, 0).unwrap();
        prop_assert_eq!(s.grid.len(), n);
        prop_assert!(s.grid.windows(2).all(|w| w[1] > w[0]));
    }
}
