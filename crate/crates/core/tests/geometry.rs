use maxmin_core::geometry::{GeometrySetup, SetupKind};
use maxmin_core::linalg::{dist_p, norm2};
use maxmin_core::refcheck::{euclid_project_truncated_simplex, prox_objective_grad, stationarity};
use proptest::prelude::*;

const SLACK: f64 = 1e-7;

/// Points in the unit ball of `R^d`.
fn ball_point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-1.0f64..1.0, d), 0.0f64..1.0).prop_map(|(v, r)| {
        let s = norm2(&v);
        if s == 0.0 {
            v
        } else {
            v.iter().map(|x| x * r / s).collect()
        }
    })
}

/// Points of the truncated simplex `{x ∈ Δ^d : x ≥ ν}`.
fn simplex_point(d: usize, nu: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-6f64..1.0, d).prop_map(move |w| {
        let s: f64 = w.iter().sum();
        let free = 1.0 - d as f64 * nu;
        w.iter().map(|x| nu + free * x / s).collect()
    })
}

fn setups() -> Vec<GeometrySetup> {
    vec![
        GeometrySetup::ball(4).unwrap(),
        GeometrySetup::truncated_simplex(4, 0.01).unwrap(),
        GeometrySetup::truncated_simplex(4, 1e-4).unwrap(),
    ]
}

fn points(setup: GeometrySetup) -> BoxedStrategy<Vec<f64>> {
    match setup.kind() {
        SetupKind::Ball => ball_point(setup.dim()).boxed(),
        SetupKind::TruncatedSimplex => simplex_point(setup.dim(), setup.nu()).boxed(),
    }
}

fn triple(setup: GeometrySetup) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (points(setup), points(setup), points(setup))
}

fn any_triple() -> impl Strategy<Value = (usize, (Vec<f64>, Vec<f64>, Vec<f64>))> {
    (0usize..3).prop_flat_map(|i| (Just(i), triple(setups()[i])))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn bregman_is_nonnegative_and_vanishes_on_diagonal((idx, (a, b, _)) in any_triple()) {
        let setup = setups()[idx];
        prop_assert!(setup.bregman(&a, &b).unwrap() >= -1e-12);
        prop_assert!(setup.bregman(&a, &a).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn tau_triangle_ball((a, b, c) in triple(GeometrySetup::ball(4).unwrap())) {
        tau_triangle(GeometrySetup::ball(4).unwrap(), &a, &b, &c)?;
    }

    #[test]
    fn tau_triangle_simplex((a, b, c) in triple(GeometrySetup::truncated_simplex(4, 0.01).unwrap())) {
        tau_triangle(GeometrySetup::truncated_simplex(4, 0.01).unwrap(), &a, &b, &c)?;
    }

    #[test]
    fn pinsker_ball((a, b, _) in triple(GeometrySetup::ball(4).unwrap())) {
        let s = GeometrySetup::ball(4).unwrap();
        prop_assert!(s.bregman(&a, &b).unwrap() + SLACK >= 0.5 * dist_p(&a, &b, 2).powi(2));
    }

    #[test]
    fn pinsker_simplex((a, b, _) in triple(GeometrySetup::truncated_simplex(4, 1e-4).unwrap())) {
        let s = GeometrySetup::truncated_simplex(4, 1e-4).unwrap();
        prop_assert!(s.bregman(&a, &b).unwrap() + SLACK >= 0.5 * dist_p(&a, &b, 1).powi(2));
    }

    #[test]
    fn hellinger_bound((a, b, _) in triple(GeometrySetup::truncated_simplex(4, 0.01).unwrap())) {
        let s = GeometrySetup::truncated_simplex(4, 0.01).unwrap();
        let h2: f64 = 0.5 * a.iter().zip(&b).map(|(x, y)| (x.sqrt() - y.sqrt()).powi(2)).sum::<f64>();
        let sym = s.bregman(&a, &b).unwrap() + s.bregman(&b, &a).unwrap();
        prop_assert!(sym <= 6.0 * (1.0 / s.nu()).ln() * h2 + SLACK);
    }

    #[test]
    fn bregman_symmetric_on_the_ball((a, b, _) in triple(GeometrySetup::ball(4).unwrap())) {
        let s = GeometrySetup::ball(4).unwrap();
        prop_assert!((s.bregman(&a, &b).unwrap() - s.bregman(&b, &a).unwrap()).abs() <= 1e-14);
    }

    #[test]
    fn prox_step_is_feasible_and_stationary(
        (idx, (x, y, _)) in any_triple(),
        g in prop::collection::vec(-5.0f64..5.0, 4),
        log_eta in -2.0f64..1.0,
        log_lambda in prop::option::of(-2.0f64..1.0),
    ) {
        let setup = setups()[idx];
        let eta = 10f64.powf(log_eta);
        let lambda = log_lambda.map_or(0.0, |l| 10f64.powf(l));
        let w = setup.prox_step(&g, eta, lambda, &y, &x).unwrap();
        prop_assert!(setup.is_feasible(&w));
        let grad = prox_objective_grad(&setup, &g, eta, lambda, &y, &x, &w);
        prop_assert!(stationarity(&setup, &w, &grad) <= SLACK);
    }

    #[test]
    fn projection_lands_in_domain(v in prop::collection::vec(-3.0f64..3.0, 4)) {
        let positive: Vec<f64> = v.iter().map(|x| x.abs() + 1e-6).collect();
        for setup in setups() {
            let input = if setup.kind() == SetupKind::Ball { &v } else { &positive };
            let p = setup.project(input).unwrap();
            prop_assert!(setup.is_feasible(&p));
        }
        let e = euclid_project_truncated_simplex(&v, 0.01);
        prop_assert!((e.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

fn tau_triangle(setup: GeometrySetup, a: &[f64], b: &[f64], c: &[f64]) -> Result<(), TestCaseError> {
    let v = |x: &[f64], y: &[f64]| setup.bregman(x, y).unwrap();
    let lhs = v(a, c) + v(c, a);
    let rhs = setup.tau() * (v(a, b).min(v(b, a)) + v(b, c).min(v(c, b)));
    prop_assert!(lhs <= rhs + SLACK, "lhs {lhs} rhs {rhs}");
    Ok(())
}

#[test]
fn simplex_divergence_example() {
    // Σ y_i ln(y_i/x_i) at x = (½, ½), y = (¼, ¾), evaluated independently
    let s = GeometrySetup::truncated_simplex(2, 0.0).unwrap();
    let v = s.bregman(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
    assert!((v - 0.130_812_035_941_137_6).abs() < 1e-13);
}
