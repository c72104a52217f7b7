//! Cross-module checks through the public API.

use dirichlet_minimax::expansion::{jeffreys_lower_bound, theorem1_expansion};
use dirichlet_minimax::model::{alpha_hat, ModelSpec, ScheduleMode};
use dirichlet_minimax::moments::moment_recurrence;
use dirichlet_minimax::risk::{coordinate_risk, risk_coordinatewise, sup_risk};
use dirichlet_minimax::{ExactMomentPoly, Prior, Schedule, Symmetric, Theta};

#[test]
fn jeffreys_excess_at_the_witness_point() {
    // at θ = (ε, 1 − ε) the second-order excess of the Jeffreys risk is already close to 1/(24 N² ε)
    let prior: Prior = Symmetric::jeffreys(2).unwrap().to_prior();
    let (n, eps) = (4096u64, 0.01);
    let theta = Theta::new(vec![eps, 1.0 - eps]).unwrap();
    let r = risk_coordinatewise(&prior, &ModelSpec::new(2, n).unwrap(), &theta).unwrap().exact_risk;
    let excess = r - 1.0 / (2.0 * n as f64);
    let bound = jeffreys_lower_bound(2, n, eps).unwrap();
    assert!(excess > 0.8 * bound, "{excess} vs {bound}");
}

#[test]
fn sup_risk_sits_at_or_above_every_grid_point() {
    let prior: Prior = Symmetric::minimax(3).unwrap().to_prior();
    let model = ModelSpec::new(3, 60).unwrap();
    let trunc = Schedule::new(1.0, 0.73, ScheduleMode::Theorem1).unwrap().simplex(60, 3).unwrap();
    let sup = sup_risk(&prior, &model, &trunc, 65).unwrap();
    let a = alpha_hat::<f64>();
    let total = 3.0 * a;
    let eps = trunc.eps;
    for i in 0..=20 {
        for j in 0..=20 - i {
            let t1 = eps + (1.0 - 3.0 * eps) * i as f64 / 20.0;
            let t2 = eps + (1.0 - 3.0 * eps) * j as f64 / 20.0;
            let t3 = 1.0 - t1 - t2;
            let r: f64 = [t1, t2, t3].iter().map(|&t| coordinate_risk(a, total, 60, t)).sum();
            assert!(r <= sup.sup_value + 1e-15);
        }
    }
}

#[test]
fn expansion_tracks_exact_risk_in_the_interior() {
    let prior = Prior::new(vec![0.7, 1.3, 2.0]).unwrap();
    let theta = Theta::new(vec![0.25, 0.35, 0.4]).unwrap();
    let mut last = f64::INFINITY;
    for n in [50u64, 100, 200, 400] {
        let model = ModelSpec::new(3, n).unwrap();
        let exact = risk_coordinatewise(&prior, &model, &theta).unwrap().exact_risk;
        let e = theorem1_expansion(&prior, &model, &theta).unwrap();
        let err = (exact - e.value()).abs();
        assert!(err < last / 16.0 || last.is_infinite(), "N = {n}: {err} after {last}");
        last = err;
    }
}

#[test]
fn exact_alias_round_trip() {
    let p: Vec<ExactMomentPoly> = moment_recurrence(6).unwrap();
    assert_eq!(p[6].powers(), vec![1, 2, 3]);
    assert!((p[2].eval_f64(10.0, 0.3) - 2.1).abs() < 1e-14);
}
