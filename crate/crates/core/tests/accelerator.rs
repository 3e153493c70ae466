use std::sync::Arc;

use maxmin_core::accelerator::{
    accelerate, growth_ratio, scaled_stopping_threshold, AccelParams, BallOracle, GradientSource, ProfiledOracle,
    SolverProfile,
};
use maxmin_core::apps::generate::gaussian_game;
use maxmin_core::ball_oracle::{BallOracleResult, GradFn};
use maxmin_core::error::Result;
use maxmin_core::geometry::{GeometrySetup, SetupKind};
use maxmin_core::problem::{LinearFamily, Objective};
use proptest::prelude::*;

fn game_problem(seed: u64) -> (Arc<dyn Objective>, GeometrySetup) {
    let inst = gaussian_game(8, 4, SetupKind::Ball, seed).unwrap();
    let setup = GeometrySetup::ball(4).unwrap();
    let f = LinearFamily::new(inst.matrix().clone(), &setup).unwrap().with_lipschitz(1.0).unwrap();
    (Arc::new(f), setup)
}

fn params(profile: &SolverProfile, setup: &GeometrySetup, r: f64, eps: f64) -> AccelParams {
    AccelParams {
        r,
        radius: 1.0,
        e0: 1.0,
        eps,
        gamma: profile.oracle.gamma(setup.tau()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn growth_identities_hold_every_round(seed in 0u64..1000, r in 0.1f64..0.4, sampled in any::<bool>()) {
        let (problem, setup) = game_problem(seed);
        let profile = SolverProfile::practical();
        let p = params(&profile, &setup, r, 0.2);
        let source = if sampled {
            GradientSource::Softmax { eps_prime: 0.05 }
        } else {
            GradientSource::ExactSmooth { eps_prime: 0.05 }
        };
        let x0 = vec![0.0; 4];
        let mut oracle = ProfiledOracle(profile.oracle);
        let rep = accelerate(problem, &setup, &x0, &x0, p, &profile, source, &mut oracle, seed).unwrap();

        let q = growth_ratio(p.gamma, p.r, p.radius);
        prop_assert!((rep.growth_ratio - q).abs() <= 1e-15);
        prop_assert!((rep.rho - (1.0 + 1.0 / q) * r).abs() <= 1e-12);
        let threshold = scaled_stopping_threshold(profile.stop_const, p.radius, p.e0, p.eps).unwrap();
        prop_assert_eq!(rep.stopping_threshold, threshold);
        prop_assert_eq!(rep.outer_iterations, rep.iterations.len());

        let mut big_a = p.radius * p.radius / p.e0;
        for it in &rep.iterations {
            prop_assert!(big_a < threshold);
            prop_assert!((it.a_next - q * big_a).abs() <= 1e-12 * it.a_next);
            prop_assert!(it.c > 0.0);
            let next = big_a + it.a_next / it.c;
            prop_assert!((it.big_a - next).abs() <= 1e-12 * next);
            prop_assert!(it.big_a > big_a);
            big_a = it.big_a;
        }
        prop_assert!(big_a >= threshold);
        prop_assert!(setup.is_feasible(&rep.x));
    }
}

/// Forces `c = 1` and records `z` of every call.
struct UndampedOracle {
    inner: ProfiledOracle,
    zs: Vec<Vec<f64>>,
}

impl BallOracle for UndampedOracle {
    fn call(
        &mut self,
        grad: &mut GradFn<'_>,
        setup: &GeometrySetup,
        y: &[f64],
        rho: f64,
        grad_bound: f64,
    ) -> Result<BallOracleResult> {
        let mut res = self.inner.call(grad, setup, y, rho, grad_bound)?;
        res.c = 1.0;
        self.zs.push(res.z.clone());
        Ok(res)
    }
}

#[test]
fn unit_multiplier_means_no_damping() {
    let (problem, setup) = game_problem(3);
    let profile = SolverProfile::practical();
    let p = params(&profile, &setup, 0.3, 0.2);
    let x0 = vec![0.0; 4];
    let mut oracle = UndampedOracle {
        inner: ProfiledOracle(profile.oracle),
        zs: Vec::new(),
    };
    let source = GradientSource::ExactSmooth { eps_prime: 0.05 };
    let rep = accelerate(problem, &setup, &x0, &x0, p, &profile, source, &mut oracle, 1).unwrap();
    assert!(rep.outer_iterations > 0);

    // x_{t+1} = Φ_t(z_{t+1}) = (A_t x_t + a_{t+1} z_{t+1}) / A′_{t+1} with v_t = w_t
    let mut big_a = p.radius * p.radius / p.e0;
    let mut x = x0.clone();
    for (it, z) in rep.iterations.iter().zip(&oracle.zs) {
        let a = it.a_next;
        let total = big_a + a;
        x = x.iter().zip(z).map(|(xi, zi)| (big_a * xi + a * zi) / total).collect();
        assert!((it.big_a - total).abs() <= 1e-12 * total);
        big_a = total;
    }
    for (u, v) in x.iter().zip(&rep.x) {
        assert!((u - v).abs() < 1e-12);
    }
}

#[test]
fn runs_are_reproducible_for_a_seed() {
    let run = |seed| {
        let (problem, setup) = game_problem(5);
        let profile = SolverProfile::practical();
        let p = params(&profile, &setup, 0.3, 0.2);
        let mut oracle = ProfiledOracle(profile.oracle);
        let x0 = vec![0.0; 4];
        accelerate(problem, &setup, &x0, &x0, p, &profile, GradientSource::Softmax { eps_prime: 0.05 }, &mut oracle, seed)
            .unwrap()
    };
    let (a, b) = (run(11), run(11));
    assert_eq!(a.x, b.x);
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.counters, b.counters);
}
