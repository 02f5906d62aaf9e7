use std::f64::consts::{SQRT_2, TAU};

use cosymlab::catalog::{self, product_example};
use cosymlab::cosym::{chart_samples, verify_cosymplectic};
use cosymlab::forms::KForm;
use cosymlab::section::{return_map_jacobian, verify_global, DEFAULT_T_MAX};
use cosymlab::tischler::{build_approximation, check_transversality_preserved, extract_leaf, periods, rationalize};
use cosymlab::Execution;

const TOL: f64 = 1e-10;

#[test]
fn t5_return_map_is_symplectic() {
    let ex = product_example(catalog::t5_seed()).unwrap();
    for u in ex.section_samples(8, 3) {
        let p = ex.section.chart.as_ref().unwrap().lift(&u);
        let jac = return_map_jacobian(&ex.system, &ex.section, &p, 1e-5, DEFAULT_T_MAX, TOL).unwrap();
        assert_eq!(jac.dim, 4);
        assert!(jac.symplectic_defect < 1e-5, "{jac:?}");
        assert!((jac.determinant - 1.0).abs() < 1e-6);
    }
}

#[test]
fn seeds_are_cosymplectic() {
    for name in catalog::SEED_NAMES {
        let cs = catalog::seed(name).unwrap();
        let r = verify_cosymplectic(&cs, &chart_samples(&cs.manifold, 64, 11)).unwrap();
        assert!(r.pass, "{name}: {r:?}");
    }
}

#[test]
fn tischler_sweep_converges() {
    let ex = product_example(catalog::irrational_seed()).unwrap();
    let cs = &ex.seed;
    let pv = periods(&cs.alpha, &cs.manifold, None).unwrap();
    assert!((pv.values[0] - 1.0).abs() < 1e-10 && (pv.values[1] - SQRT_2).abs() < 1e-10 && pv.values[2].abs() < 1e-10);
    let zs = chart_samples(&cs.manifold, 200, 5);
    let mut last = f64::INFINITY;
    for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
        let ra = rationalize(&pv, eps, 1000, Execution::default()).unwrap();
        let approx = build_approximation(&cs.alpha, &cs.manifold, &pv, &ra).unwrap();
        // 2 pi torus: the form shift equals the period shift
        assert!(approx.sup_distance <= eps + 1e-15);
        assert!(approx.sup_distance <= last);
        last = approx.sup_distance;
        let rep = check_transversality_preserved(&ex.system, &ex.surface, &cs.alpha, &approx.form, &zs).unwrap();
        assert!(rep.pass && rep.margin_loss.abs() <= approx.sup_distance, "{rep:?}");
    }
}

#[test]
fn rational_leaf_is_a_global_section() {
    let ex = product_example(catalog::irrational_seed()).unwrap();
    let cs = &ex.seed;
    let pv = periods(&cs.alpha, &cs.manifold, None).unwrap();
    let ra = rationalize(&pv, 1e-2, 100, Execution::default()).unwrap();
    assert_eq!((ra.d, ra.n.as_slice()), (12, &[12, 17, 0][..]));
    let leaf = extract_leaf(&ra, &cs.manifold).unwrap().extend_trailing(vec![0.0]);
    let report = verify_global(&ex.system, &leaf, &ex.surface_samples(100, 9), DEFAULT_T_MAX, TOL, Execution::default());
    assert!(report.is_global(), "{report:?}");
    // flow on Z is d_x at unit speed and F advances 12 per unit x
    assert!((report.max_return_time - TAU / 12.0).abs() < 1e-8, "{report:?}");
}

#[test]
fn tilted_approximation_loses_transversality() {
    // Reeb field d_z - 2 d_y is killed by dz + dy / 2
    let ex = product_example(catalog::suspension_seed(-2.0)).unwrap();
    let tilted = KForm::constant(3, 1, vec![0.0, 0.5, 1.0]).unwrap();
    let zs = chart_samples(&ex.seed.manifold, 50, 2);
    let rep = check_transversality_preserved(&ex.system, &ex.surface, &ex.seed.alpha, &tilted, &zs).unwrap();
    assert!(rep.original_margin > 0.5);
    assert!(!rep.pass && rep.approx_margin < 1e-8, "{rep:?}");
}
