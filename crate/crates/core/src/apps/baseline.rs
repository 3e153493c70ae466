//! Plain mirror descent on `f_max` with a max-achieving subgradient.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::GeometrySetup;
use crate::problem::Objective;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "eta")]
pub enum StepRule {
    Constant(f64),
    /// `η_t = η₀/√t`.
    InverseSqrt(f64),
}

impl StepRule {
    pub fn eta(&self, t: u64) -> f64 {
        match *self {
            StepRule::Constant(e) => e,
            StepRule::InverseSqrt(e) => e / (t as f64).sqrt(),
        }
    }

    /// `η₀ = R/(L_f√T)`-style constant step for a horizon `T`.
    pub fn for_horizon(radius: f64, lf: f64, steps: u64) -> Self {
        StepRule::Constant(radius / (lf.max(f64::MIN_POSITIVE) * (steps as f64).sqrt()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    /// Step-size weighted average of the iterates.
    pub x: Vec<f64>,
    pub f_max: f64,
    pub best_x: Vec<f64>,
    pub best_f_max: f64,
    pub steps: u64,
    /// How often each index achieved the maximum along the run.
    pub index_counts: Vec<u64>,
    pub value_evals: u64,
    pub gradient_evals: u64,
    pub wall_time: f64,
}

pub fn subgradient_baseline(
    problem: &dyn Objective,
    setup: &GeometrySetup,
    x0: &[f64],
    steps: u64,
    rule: StepRule,
) -> Result<BaselineReport> {
    check_dim(setup.dim(), x0.len())?;
    check_dim(setup.dim(), problem.dim())?;
    setup.check_point(x0)?;
    if steps == 0 {
        return Err(Error::InvalidParams("baseline needs at least one step".into()));
    }
    let start = std::time::Instant::now();
    let d = setup.dim();
    let n = problem.n() as u64;
    let mut x = x0.to_vec();
    let mut g = vec![0.0; d];
    let mut avg = vec![0.0; d];
    let mut weight = 0.0;
    let mut best_x = x.clone();
    let mut best = f64::INFINITY;
    let mut index_counts = vec![0u64; problem.n()];
    for t in 1..=steps {
        let (v, i) = problem.f_max(&x);
        index_counts[i] += 1;
        if v < best {
            best = v;
            best_x.copy_from_slice(&x);
        }
        let eta = rule.eta(t);
        weight += eta;
        let w = eta / weight;
        for (a, xi) in avg.iter_mut().zip(&x) {
            *a += w * (xi - *a);
        }
        problem.gradient(i, &x, &mut g);
        x = setup.prox_step(&g, eta, 0.0, &x, &x)?;
    }
    let (fx, _) = problem.f_max(&avg);
    let (fl, _) = problem.f_max(&x);
    if fl < best {
        best = fl;
        best_x = x;
    }
    Ok(BaselineReport {
        x: avg,
        f_max: fx,
        best_x,
        best_f_max: best,
        steps,
        index_counts,
        value_evals: (steps + 2) * n,
        gradient_evals: steps,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::problem::LinearFamily;

    #[test]
    fn symmetric_game_converges_to_uniform() {
        let setup = GeometrySetup::truncated_simplex(2, 1e-6).unwrap();
        let f = LinearFamily::new(Matrix::identity(2), &setup).unwrap();
        let rep = subgradient_baseline(&f, &setup, &[0.9, 0.1], 20_000, StepRule::InverseSqrt(0.5)).unwrap();
        assert!((rep.x[0] - 0.5).abs() < 0.01, "{:?}", rep.x);
        assert!(rep.f_max < 0.51);
    }
}
