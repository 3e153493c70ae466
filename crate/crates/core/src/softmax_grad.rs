//! Rejection-sampling estimator of `∇f_smax(x) = Σ_i p_i(x)∇f_i(x)` with
//! `p_i(x) ∝ exp(f_i(x)/ε′)`, valid inside a ball of radius `r` around an
//! anchor `x0`.
//!
//! The linearization `f_i(x0) + ⟨∇f_i(x0), x − x0⟩` is maintained by a
//! matrix-vector maintenance structure over `A = [∇f_i(x0)/L_f]`; a proposal
//! `i ∝ exp((f_i(x0) + y_i)/ε′)` is accepted with probability
//! `min(exp((f_i(x) − f_i(x0) − y_i)/ε′ − 2), 1)`.

use std::sync::Arc;

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::geometry::GeometrySetup;
use crate::linalg::Matrix;
use crate::maintain_mvm::{MvmConfig, MvmState};
use crate::problem::Objective;
use crate::rng::{derive_seed, StreamRng};
use crate::sketch_mve::MveBackend;
use crate::sum_tree::SumTree;

/// Logit drift (in units of `ε′`) tolerated before the tree is renormalized.
const MAX_DRIFT: f64 = 30.0;
const PRECONDITION_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub eps_prime: f64,
    pub r: f64,
    pub r_prime: f64,
    pub delta: f64,
    pub backend: MveBackend,
    /// Seed of the maintenance structure's randomness.
    pub mvm_seed: u64,
    /// Rebuild the maintenance structure at the current point instead of
    /// failing when its movement budget runs out.
    pub rebuild_on_budget: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EstimatorCounters {
    pub calls: usize,
    pub draws: usize,
    pub accepted: usize,
    pub value_evals: usize,
    pub gradient_evals: usize,
    pub rebuilds: usize,
    pub renormalizations: usize,
}

impl EstimatorCounters {
    pub fn evaluations(&self) -> usize {
        self.value_evals + self.gradient_evals
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub index: usize,
    pub gradient: Vec<f64>,
    pub draws: usize,
}

pub struct SoftmaxEstimator {
    problem: Arc<dyn Objective>,
    setup: GeometrySetup,
    cfg: EstimatorConfig,
    x0: Vec<f64>,
    f0: Vec<f64>,
    lf: f64,
    a: Arc<Matrix>,
    mvm: Option<MvmState>,
    /// `L_f` times the maintained estimate of `A(x − x0)`.
    y: Vec<f64>,
    logits: Vec<f64>,
    offset: f64,
    tree: SumTree,
    x_prev: Vec<f64>,
    stall_limit: usize,
    counters: EstimatorCounters,
    mvm_queries: Vec<Vec<f64>>,
    record_queries: bool,
}

impl SoftmaxEstimator {
    /// Evaluates every `f_i(x0)` and `∇f_i(x0)` once.
    pub fn new(
        problem: Arc<dyn Objective>,
        setup: GeometrySetup,
        x0: &[f64],
        cfg: EstimatorConfig,
    ) -> Result<Self> {
        check_dim(setup.dim(), x0.len())?;
        check_dim(setup.dim(), problem.dim())?;
        let n = problem.n();
        if n == 0 {
            return Err(Error::InvalidParams("empty function family".into()));
        }
        if !(cfg.eps_prime > 0.0) || !(cfg.r > 0.0) || !(cfg.r_prime > 0.0) {
            return Err(Error::InvalidParams(format!(
                "estimator needs eps' > 0, r > 0, r' > 0; got {}, {}, {}",
                cfg.eps_prime, cfg.r, cfg.r_prime
            )));
        }
        if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
            return Err(Error::InvalidParams(format!("delta {}", cfg.delta)));
        }
        let lf = problem.lipschitz();
        let lg = problem.smoothness();
        if 0.5 * lg * cfg.r * cfg.r > cfg.eps_prime * (1.0 + PRECONDITION_SLACK) {
            return Err(Error::PreconditionViolated(format!(
                "½ L_g r² ≤ ε′ fails: ½·{lg}·{}² > {}",
                cfg.r, cfg.eps_prime
            )));
        }
        if lf > 0.0 && cfg.eps_prime > lf * cfg.r_prime / 2.0 * (1.0 + PRECONDITION_SLACK) {
            return Err(Error::PreconditionViolated(format!(
                "ε′ ≤ L_f r′/2 fails: {} > {lf}·{}/2",
                cfg.eps_prime, cfg.r_prime
            )));
        }
        let d = setup.dim();
        let f0 = problem.values(x0);
        if f0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("function values at anchor"));
        }
        let mut a = Matrix::zeros(n, d);
        let mut g = vec![0.0; d];
        for i in 0..n {
            problem.gradient(i, x0, &mut g);
            let row = a.row_mut(i);
            for (r, v) in row.iter_mut().zip(&g) {
                *r = if lf > 0.0 { v / lf } else { 0.0 };
            }
        }
        let a = Arc::new(a);
        let mvm = if lf > 0.0 {
            Some(MvmState::init(
                a.clone(),
                &vec![0.0; d],
                MvmConfig {
                    p: setup.p(),
                    radius: cfg.r_prime,
                    eps: cfg.eps_prime / lf,
                    delta: cfg.delta / 2.0,
                    backend: cfg.backend,
                    seed: cfg.mvm_seed,
                },
            )?)
        } else {
            // all gradients vanish, so the linearization is exactly f0
            None
        };
        let logits: Vec<f64> = f0.iter().map(|v| v / cfg.eps_prime).collect();
        let offset = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logits.iter().map(|l| (l - offset).exp()).collect();
        let stall_limit = (200.0 * (1.0 / cfg.delta).ln()).ceil().max(1.0) as usize;
        Ok(Self {
            problem,
            setup,
            cfg,
            x0: x0.to_vec(),
            f0,
            lf,
            a,
            mvm,
            y: vec![0.0; n],
            logits,
            offset,
            tree: SumTree::new(&weights),
            x_prev: x0.to_vec(),
            stall_limit,
            counters: EstimatorCounters {
                value_evals: n,
                gradient_evals: n,
                ..Default::default()
            },
            mvm_queries: Vec::new(),
            record_queries: false,
        })
    }

    pub fn anchor(&self) -> &[f64] {
        &self.x0
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    pub fn counters(&self) -> EstimatorCounters {
        self.counters
    }

    pub fn stall_limit(&self) -> usize {
        self.stall_limit
    }

    pub fn mvm(&self) -> Option<&MvmState> {
        self.mvm.as_ref()
    }

    /// Current maintained linearization offsets `y_i ≈ ⟨∇f_i(x0), x − x0⟩`.
    pub fn linearization(&self) -> &[f64] {
        &self.y
    }

    /// Keep a copy of every update vector handed to the maintenance structure.
    pub fn record_mvm_queries(&mut self, on: bool) {
        self.record_queries = on;
    }

    pub fn mvm_queries(&self) -> &[Vec<f64>] {
        &self.mvm_queries
    }

    /// Proposal probabilities `∝ exp((f_i(x0) + y_i)/ε′)`.
    pub fn proposal_distribution(&self) -> Vec<f64> {
        let t = self.tree.total();
        (0..self.tree.len()).map(|i| self.tree.weight(i) / t).collect()
    }

    fn renormalize(&mut self) {
        self.offset = self.logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.logits.iter().map(|l| (l - self.offset).exp()).collect();
        self.tree.rebuild(&w);
        self.counters.renormalizations += 1;
    }

    fn move_to(&mut self, x: &[f64]) -> Result<()> {
        let delta: Vec<f64> = x.iter().zip(&self.x_prev).map(|(a, b)| a - b).collect();
        if delta.iter().all(|v| *v == 0.0) {
            return Ok(());
        }
        let Some(mvm) = self.mvm.as_mut() else {
            self.x_prev.copy_from_slice(x);
            return Ok(());
        };
        if self.record_queries {
            self.mvm_queries.push(delta.clone());
        }
        let changed: Vec<usize> = match mvm.query(&delta) {
            Ok((out, info)) => {
                for &i in &info.changed {
                    self.y[i] = self.lf * out[i];
                }
                info.changed
            }
            Err(Error::BudgetExceeded { .. }) if self.cfg.rebuild_on_budget => {
                self.counters.rebuilds += 1;
                let offset_point: Vec<f64> =
                    x.iter().zip(&self.x0).map(|(a, b)| a - b).collect();
                let seed = derive_seed(self.cfg.mvm_seed, self.counters.rebuilds as u64);
                let fresh = MvmState::init(
                    self.a.clone(),
                    &offset_point,
                    MvmConfig {
                        p: self.setup.p(),
                        radius: self.cfg.r_prime,
                        eps: self.cfg.eps_prime / self.lf,
                        delta: self.cfg.delta / 2.0,
                        backend: self.cfg.backend,
                        seed,
                    },
                )?;
                for (yi, v) in self.y.iter_mut().zip(fresh.current_output()) {
                    *yi = self.lf * v;
                }
                *mvm = fresh;
                (0..self.y.len()).collect()
            }
            Err(e) => return Err(e),
        };
        self.x_prev.copy_from_slice(x);
        let mut drifted = false;
        for &i in &changed {
            self.logits[i] = (self.f0[i] + self.y[i]) / self.cfg.eps_prime;
            if self.logits[i] - self.offset > MAX_DRIFT {
                drifted = true;
            }
        }
        if drifted || changed.len() == self.y.len() {
            self.renormalize();
        } else {
            for &i in &changed {
                self.tree.update(i, (self.logits[i] - self.offset).exp());
            }
            if self.tree.total() < (-MAX_DRIFT).exp() {
                self.renormalize();
            }
        }
        Ok(())
    }

    /// Draws `i_t` and returns `∇f_{i_t}(x)`.
    pub fn estimate(&mut self, x: &[f64], sampler: &mut StreamRng) -> Result<Estimate> {
        check_dim(self.x0.len(), x.len())?;
        let dist = self.setup.dist(x, &self.x0);
        if dist > self.cfg.r * (1.0 + 1e-9) + 1e-12 {
            return Err(Error::PreconditionViolated(format!(
                "query at distance {dist} from the anchor exceeds r = {}",
                self.cfg.r
            )));
        }
        self.move_to(x)?;
        self.counters.calls += 1;
        let mut draws = 0usize;
        loop {
            let i = self.tree.sample(sampler);
            draws += 1;
            self.counters.draws += 1;
            self.counters.value_evals += 1;
            let fi = self.problem.value(i, x);
            let log_acc = (fi - self.f0[i] - self.y[i]) / self.cfg.eps_prime - 2.0;
            let accept = log_acc >= 0.0 || sampler.random::<f64>() < log_acc.exp();
            if accept {
                let mut g = vec![0.0; x.len()];
                self.problem.gradient(i, x, &mut g);
                self.counters.gradient_evals += 1;
                self.counters.accepted += 1;
                return Ok(Estimate {
                    index: i,
                    gradient: g,
                    draws,
                });
            }
            if draws > self.stall_limit {
                return Err(Error::RejectionStall(draws));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{LinearFamily, QuadraticFamily};
    use crate::rng::stream;

    fn cfg(eps_prime: f64, r: f64) -> EstimatorConfig {
        EstimatorConfig {
            eps_prime,
            r,
            r_prime: 8.0 * r,
            delta: 0.01,
            backend: MveBackend::Exact,
            mvm_seed: 1,
            rebuild_on_budget: true,
        }
    }

    #[test]
    fn single_function_always_index_zero() {
        let setup = GeometrySetup::ball(2).unwrap();
        let f = LinearFamily::new(Matrix::from_rows(&[vec![0.6, 0.8]]).unwrap(), &setup).unwrap();
        let mut est = SoftmaxEstimator::new(Arc::new(f), setup, &[0.0, 0.0], cfg(0.1, 0.5)).unwrap();
        let mut rng = stream(0, 0);
        let mut draws = 0;
        for _ in 0..2000 {
            let e = est.estimate(&[0.1, 0.0], &mut rng).unwrap();
            assert_eq!(e.index, 0);
            assert_eq!(e.gradient, vec![0.6, 0.8]);
            draws += e.draws;
        }
        // acceptance e^{-2} at exact linearization
        let rate = 2000.0 / draws as f64;
        assert!((rate - (-2f64).exp()).abs() < 0.02, "{rate}");
    }

    #[test]
    fn init_costs_two_n_evaluations() {
        let setup = GeometrySetup::ball(5).unwrap();
        let mut rng = stream(4, 4);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..5).map(|_| rng.random::<f64>() * 0.4 - 0.2).collect())
            .collect();
        let f = QuadraticFamily::new(Matrix::from_rows(&rows).unwrap(), 1.0, &setup).unwrap();
        let r = 0.2;
        let est = SoftmaxEstimator::new(Arc::new(f), setup, &[0.0; 5], cfg(r * r, r)).unwrap();
        assert_eq!(est.counters().evaluations(), 40);
    }

    #[test]
    fn preconditions_are_named() {
        let setup = GeometrySetup::ball(1).unwrap();
        let f = QuadraticFamily::new(Matrix::from_rows(&[vec![0.0]]).unwrap(), 1.0, &setup).unwrap();
        let err = SoftmaxEstimator::new(Arc::new(f.clone()), setup, &[0.0], cfg(0.001, 0.5))
            .err()
            .unwrap();
        assert!(matches!(err, Error::PreconditionViolated(ref s) if s.contains("L_g")));
        let mut c = cfg(0.5, 1.0);
        c.r_prime = 0.1;
        let err = SoftmaxEstimator::new(Arc::new(f), setup, &[0.0], c).err().unwrap();
        assert!(matches!(err, Error::PreconditionViolated(ref s) if s.contains("r′")));
    }

    #[test]
    fn far_query_is_rejected() {
        let setup = GeometrySetup::ball(1).unwrap();
        let f = LinearFamily::new(Matrix::from_rows(&[vec![1.0]]).unwrap(), &setup).unwrap();
        let mut est = SoftmaxEstimator::new(Arc::new(f), setup, &[0.0], cfg(0.1, 0.1)).unwrap();
        let mut rng = stream(0, 1);
        assert!(matches!(
            est.estimate(&[0.5], &mut rng),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn budget_rebuild_keeps_linearization_exact() {
        let setup = GeometrySetup::ball(2).unwrap();
        let f = LinearFamily::new(
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            &setup,
        )
        .unwrap();
        let mut c = cfg(0.1, 0.5);
        c.r_prime = 0.2;
        let mut est = SoftmaxEstimator::new(Arc::new(f), setup, &[0.0, 0.0], c).unwrap();
        let mut rng = stream(0, 2);
        for k in 0..20 {
            let t = k as f64 * 0.05;
            let x = [0.4 * t.cos(), 0.4 * t.sin()];
            est.estimate(&x, &mut rng).unwrap();
        }
        assert!(est.counters().rebuilds > 0);
    }
}
