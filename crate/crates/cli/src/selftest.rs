//! Statistical property suites run at a configurable number of seeds.
//! Each property reports the observed statistic next to its bound.

use std::sync::Arc;

use maxmin_core::error::Result as CoreResult;
use maxmin_core::geometry::{GeometrySetup, SetupKind};
use maxmin_core::linalg::{dist_p, norm_p, Matrix};
use maxmin_core::maintain_mvm::{MvmConfig, MvmState};
use maxmin_core::problem::{LinearFamily, Objective};
use maxmin_core::refcheck::{
    empirical, exact_matvec, exact_softmax_dist, prox_objective_grad, random_point, stationarity, tv_distance,
};
use maxmin_core::rng::{stream, StreamRng};
use maxmin_core::sketch_mve::{Mve1State, Mve2State, MveBackend};
use maxmin_core::softmax_grad::{EstimatorConfig, SoftmaxEstimator};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::config::Suite;

const LABEL: u64 = 0x5e1f_7e57;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub pass: bool,
    pub observed: f64,
    pub bound: f64,
}

fn check_le(name: &str, observed: f64, bound: f64) -> PropertyResult {
    PropertyResult {
        name: name.into(),
        pass: observed <= bound,
        observed,
        bound,
    }
}

fn check_ge(name: &str, observed: f64, bound: f64) -> PropertyResult {
    PropertyResult {
        name: name.into(),
        pass: observed >= bound,
        observed,
        bound,
    }
}

fn gaussian(d: usize, rng: &mut StreamRng) -> Vec<f64> {
    (0..d).map(|_| Distribution::<f64>::sample(&StandardNormal, rng)).collect()
}

/// Rows of unit `ℓ₂` norm for `p = 2`, entries in `[−1, 1]` for `p = 1`.
fn bounded_matrix(n: usize, d: usize, p: u8, rng: &mut StreamRng) -> Matrix {
    let mut a = Matrix::zeros(n, d);
    for i in 0..n {
        let row = a.row_mut(i);
        if p == 2 {
            row.copy_from_slice(&gaussian(d, rng));
            let s = norm_p(row, 2);
            row.iter_mut().for_each(|v| *v /= s);
        } else {
            row.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
    }
    a
}

/// Allowed failure fraction over `runs` trials at failure probability `δ`.
fn failure_allowance(delta: f64, runs: usize) -> f64 {
    delta + 3.0 * (delta * (1.0 - delta) / runs as f64).sqrt()
}

fn sup_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

fn mve_suite(seeds: u64) -> CoreResult<Vec<PropertyResult>> {
    let (n, d, eps, delta) = (40, 15, 0.1, 0.1);
    let allowed = failure_allowance(delta, seeds as usize);
    let mut out = Vec::new();
    for p in [2u8, 1] {
        let mut failures = 0usize;
        for seed in 0..seeds {
            let mut rng = stream(seed, LABEL + p as u64);
            let a = bounded_matrix(n, d, p, &mut rng);
            let x = gaussian(d, &mut rng);
            let y = if p == 2 {
                Mve2State::new(&a, eps, delta, seed)?.query(&x)
            } else {
                Mve1State::new(Arc::new(a.clone()), eps, delta)?.query(&x, &mut rng)
            };
            let err = sup_err(&y, &exact_matvec(&a, &x)?);
            failures += usize::from(err > eps * norm_p(&x, p));
        }
        out.push(check_le(
            &format!("mve p={p} failure fraction"),
            failures as f64 / seeds as f64,
            allowed,
        ));
    }
    Ok(out)
}

fn mvm_suite(seeds: u64) -> CoreResult<Vec<PropertyResult>> {
    let (n, d, steps, radius, eps, delta) = (40, 15, 200, 1.0, 0.1, 0.1);
    let allowed = failure_allowance(delta, seeds as usize);
    let mut out = Vec::new();
    for (p, backend) in [(1u8, MveBackend::Sample), (2u8, MveBackend::Sketch)] {
        let mut failures = 0usize;
        let mut over_budget = 0usize;
        for seed in 0..seeds {
            let mut rng = stream(seed, LABEL + 16 + p as u64);
            let a = Arc::new(bounded_matrix(n, d, p, &mut rng));
            let mut x = vec![0.0; d];
            let cfg = MvmConfig {
                p,
                radius,
                eps,
                delta,
                backend,
                seed,
            };
            let mut mvm = MvmState::init(a.clone(), &x, cfg)?;
            let step = radius * (1.0 - 1e-9) / steps as f64;
            let mut worst: f64 = 0.0;
            for _ in 0..steps {
                let mut dir = gaussian(d, &mut rng);
                let s = norm_p(&dir, p);
                dir.iter_mut().for_each(|v| *v *= step / s);
                let y = mvm.query(&dir)?.0.to_vec();
                x.iter_mut().zip(&dir).for_each(|(xi, di)| *xi += di);
                worst = worst.max(sup_err(&y, &exact_matvec(&a, &x)?));
            }
            failures += usize::from(worst > eps);
            over_budget += mvm
                .query_counts()
                .iter()
                .zip(mvm.query_budgets())
                .filter(|(c, b)| **c as f64 > *b)
                .count();
        }
        out.push(check_le(
            &format!("mvm p={p} walk failure fraction"),
            failures as f64 / seeds as f64,
            allowed,
        ));
        out.push(check_le(&format!("mvm p={p} levels over query budget"), over_budget as f64, 0.0));
    }
    Ok(out)
}

fn sampler_suite(seeds: u64) -> CoreResult<Vec<PropertyResult>> {
    let (n, d, draws, eps_prime, r) = (10, 5, 20_000, 0.1, 0.2);
    let setup = GeometrySetup::ball(d)?;
    let mut worst_tv: f64 = 0.0;
    let mut worst_acc = f64::INFINITY;
    for seed in 0..seeds {
        let mut rng = stream(seed, LABEL + 32);
        let a = bounded_matrix(n, d, 2, &mut rng);
        let family: Arc<dyn Objective> = Arc::new(LinearFamily::new(a, &setup)?);
        let x0 = vec![0.0; d];
        let mut x = gaussian(d, &mut rng);
        let s = norm_p(&x, 2);
        x.iter_mut().for_each(|v| *v *= 0.9 * r / s);
        let cfg = EstimatorConfig {
            eps_prime,
            r,
            r_prime: 8.0 * r,
            delta: 0.01,
            backend: MveBackend::Sketch,
            mvm_seed: seed,
            rebuild_on_budget: true,
        };
        let mut est = SoftmaxEstimator::new(family.clone(), setup, &x0, cfg)?;
        let mut sampler = stream(seed, LABEL + 33);
        let mut counts = vec![0u64; n];
        for _ in 0..draws {
            counts[est.estimate(&x, &mut sampler)?.index] += 1;
        }
        let exact = exact_softmax_dist(family.as_ref(), &x, eps_prime);
        worst_tv = worst_tv.max(tv_distance(&empirical(&counts), &exact));
        let c = est.counters();
        worst_acc = worst_acc.min(c.accepted as f64 / c.draws as f64);
    }
    Ok(vec![
        check_le("sampler worst TV distance", worst_tv, 0.05),
        check_ge("sampler worst acceptance rate", worst_acc, (-4.0f64).exp()),
    ])
}

fn geometry_suite(seeds: u64) -> CoreResult<Vec<PropertyResult>> {
    const TRIALS: usize = 1_000;
    const SLACK: f64 = 1e-7;
    let setups = [
        GeometrySetup::ball(3)?,
        GeometrySetup::ball(7)?,
        GeometrySetup::truncated_simplex(3, 0.01)?,
        GeometrySetup::truncated_simplex(6, 1e-4)?,
    ];
    let mut violations = [0usize; 4];
    for seed in 0..seeds {
        let mut rng = stream(seed, LABEL + 48);
        for setup in &setups {
            let tau = setup.tau();
            let v = |x: &[f64], y: &[f64]| setup.bregman(x, y);
            for _ in 0..TRIALS {
                let pt = |rng: &mut StreamRng| {
                    let alpha = [0.3, 1.0, 3.0][rng.random_range(0..3)];
                    random_point(setup, alpha, rng)
                };
                let (a, b, c) = (pt(&mut rng), pt(&mut rng), pt(&mut rng));
                let lhs = v(&a, &c)? + v(&c, &a)?;
                let rhs = tau * (v(&a, &b)?.min(v(&b, &a)?) + v(&b, &c)?.min(v(&c, &b)?));
                violations[0] += usize::from(lhs > rhs + SLACK);

                let half = 0.5 * dist_p(&a, &b, setup.p()).powi(2);
                violations[1] += usize::from(v(&a, &b)? + SLACK < half);

                let g: Vec<f64> = gaussian(setup.dim(), &mut rng).iter().map(|x| 3.0 * x).collect();
                let eta = 10f64.powf(rng.random_range(-2.0..1.0));
                let lambda = if rng.random_bool(0.2) {
                    0.0
                } else {
                    10f64.powf(rng.random_range(-2.0..1.0))
                };
                let w = setup.prox_step(&g, eta, lambda, &b, &a)?;
                let grad = prox_objective_grad(setup, &g, eta, lambda, &b, &a, &w);
                violations[2] += usize::from(stationarity(setup, &w, &grad) > SLACK);

                if setup.kind() == SetupKind::TruncatedSimplex {
                    let h2: f64 = 0.5 * a.iter().zip(&b).map(|(x, y)| (x.sqrt() - y.sqrt()).powi(2)).sum::<f64>();
                    let sym = v(&a, &b)? + v(&b, &a)?;
                    violations[3] += usize::from(sym > 6.0 * (1.0 / setup.nu()).ln() * h2 + SLACK);
                }
            }
        }
    }
    let names = ["tau-triangle", "Pinsker", "prox-KKT", "Hellinger"];
    Ok(names
        .iter()
        .zip(violations)
        .map(|(n, v)| check_le(&format!("geometry {n} violations"), v as f64, 0.0))
        .collect())
}

pub fn run_suite(suite: Suite, seeds: u64) -> CoreResult<Vec<PropertyResult>> {
    match suite {
        Suite::Mve => mve_suite(seeds),
        Suite::Mvm => mvm_suite(seeds),
        Suite::Sampler => sampler_suite(seeds),
        Suite::Geometry => geometry_suite(seeds),
    }
}
