use std::f64::consts::{SQRT_2, TAU};

use cosymlab::catalog;
use cosymlab::forms::KForm;
use cosymlab::phase::{flow, volume_transport};
use cosymlab::section::{crossing_sequence, first_return, DEFAULT_T_MAX};
use cosymlab::tischler::{rationalize, PeriodVector};
use cosymlab::Execution;
use proptest::prelude::*;

const TOL: f64 = 1e-10;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn oscillator_flow_is_rotation(q in -2.0..2.0f64, p in -2.0..2.0f64, t in -10.0..10.0f64) {
        let sys = catalog::harmonic_oscillator();
        let r = flow(&sys, &[q, p], t, 1e-12).unwrap();
        // q' = p, p' = -q
        let exact = [q * t.cos() + p * t.sin(), p * t.cos() - q * t.sin()];
        prop_assert!((r.point[0] - exact[0]).abs() < 1e-8 && (r.point[1] - exact[1]).abs() < 1e-8);
    }

    #[test]
    fn return_sequence_is_consistent(a in -0.9..0.9f64, b in -0.9..0.9f64) {
        prop_assume!(a * a + b * b < 1.5);
        let sys = catalog::linear_oscillator(1.0, SQRT_2);
        let sec = catalog::linear_oscillator_section(1.0, SQRT_2, 1.0);
        let p = sec.chart.as_ref().unwrap().lift(&[a, b]);
        let seq = crossing_sequence(&sys, &sec, &p, 4, DEFAULT_T_MAX, TOL).unwrap();
        let mut q = p.clone();
        for (k, c) in seq.iter().enumerate() {
            let r = first_return(&sys, &sec, &q, DEFAULT_T_MAX, TOL).unwrap();
            prop_assert!(r.transversality_margin > 1.0);
            q = r.image;
            prop_assert!(sys.manifold.distance(&q, &c.point) < (k + 1) as f64 * 1e-8);
            prop_assert!((sys.energy(&c.point) - 1.0).abs() < 1e-8);
            prop_assert!(sec.offset(&c.point).abs() < 1e-10);
        }
    }

    #[test]
    fn rationalize_is_minimal(v in proptest::collection::vec(-3.0..3.0f64, 1..4), k in 1..4i32) {
        let eps = 10f64.powi(-k);
        let pv = PeriodVector { values: v.clone(), cycles: vec![String::new(); v.len()], errors: vec![0.0; v.len()] };
        if let Ok(ra) = rationalize(&pv, eps, 2000, Execution::default()) {
            prop_assert!(ra.error <= eps);
            // no smaller denominator works
            for d in 1..ra.d {
                let worst = v.iter().map(|x| (x - (x * d as f64).round() / d as f64).abs()).fold(0.0, f64::max);
                prop_assert!(worst > eps);
            }
        }
    }

    #[test]
    fn d_squared_vanishes(a in -1.0..1.0f64, b in -1.0..1.0f64, x in 0.0..TAU, y in 0.0..TAU, z in 0.0..TAU) {
        let f = KForm::scalar_fd(3, move |p| a * p[0].sin() * p[1].cos() + b * p[2] * p[0]);
        let dd = f.exterior_derivative(1e-4).unwrap().exterior_derivative(1e-4).unwrap();
        let c = dd.coefficients(&[x, y, z]);
        prop_assert!(c.iter().all(|v| v.abs() < 1e-5), "{c:?}");
    }
}

#[test]
fn pendulum_preserves_phase_volume() {
    let sys = catalog::pendulum();
    let r = volume_transport(&sys, &[0.5, -0.5], &[1.5, 0.5], 1.0, 100, TOL, Execution::default()).unwrap();
    assert_eq!(r.samples, 10_000);
    assert!(r.relative_error < 0.02, "{r:?}");
}

#[test]
fn oscillator_pair_preserves_phase_volume() {
    // 4D boundary cells dominate the error at coarse grids, so refine

    let sys = catalog::linear_oscillator(1.0, SQRT_2);
    let r = volume_transport(&sys, &[0.0, 0.0, 0.0, 0.0], &[0.5, 0.5, 0.5, 0.5], 1.0, 20, TOL, Execution::default()).unwrap();
    assert_eq!(r.samples, 160_000);
    assert!(r.relative_error < 0.02, "{r:?}");
}
