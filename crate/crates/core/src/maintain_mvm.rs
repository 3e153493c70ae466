//! Maintenance of an approximate `A x_t` along a query sequence whose total
//! `ℓ_p` movement is at most `R`, using `k = ⌈log₂⌈R/ε⌉⌉ + 1` dyadic levels of
//! one-shot estimators.
//!
//! Reference chain invariant: `‖x̄_i − x̄_{i−1}‖_p ≤ ε·2^{i−2}` for
//! `i ∈ [k+1]`, with `x̄_0 = x_t` and `x̄_{k+1}` fixed at the initial point.

use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist_p, norm_p, Matrix};
use crate::rng::{substream, StreamRng};
use crate::sketch_mve::{MveBackend, MveState};

const LEVEL_SEED_LABEL: u64 = 0x3b3_0001;
const LEVEL_QUERY_LABEL: u64 = 0x3b3_0002;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvmConfig {
    pub p: u8,
    pub radius: f64,
    pub eps: f64,
    pub delta: f64,
    pub backend: MveBackend,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MvmQueryInfo {
    /// The minimal `j ∈ [k+1]` found by the query.
    pub j: usize,
    /// Coordinates of the output that changed.
    pub changed: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct MvmState {
    p: u8,
    n: usize,
    d: usize,
    k: usize,
    radius: f64,
    eps: f64,
    delta_bar: f64,
    alphas: Vec<f64>,
    level_eps: Vec<f64>,
    /// `D_1..D_k` at indices `0..k`.
    levels: Vec<MveState>,
    level_rngs: Vec<StreamRng>,
    ref_x: Vec<Vec<f64>>,
    ref_y: Vec<Vec<f64>>,
    moved: f64,
    query_counts: Vec<usize>,
    queries: usize,
    clamped_eps: bool,
}

/// `k = ⌈log₂⌈R/ε⌉⌉ + 1`.
pub fn level_count(radius: f64, eps: f64) -> usize {
    let ratio = (radius / eps).ceil().max(1.0);
    ratio.log2().ceil() as usize + 1
}

/// `α_i ∝ 2^{i/3}` normalized over `i ∈ [k]`.
pub fn level_alphas(k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (1..=k).map(|i| (i as f64 / 3.0).exp2()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

impl MvmState {
    pub fn init(a: Arc<Matrix>, x0: &[f64], cfg: MvmConfig) -> Result<Self> {
        check_dim(a.cols(), x0.len())?;
        if !(cfg.radius > 0.0) || !cfg.radius.is_finite() {
            return Err(Error::InvalidParams(format!("radius {}", cfg.radius)));
        }
        if !(cfg.eps > 0.0) {
            return Err(Error::InvalidParams(format!("eps {}", cfg.eps)));
        }
        if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
            return Err(Error::InvalidParams(format!("delta {}", cfg.delta)));
        }
        let mut eps = cfg.eps;
        let clamped_eps = eps > cfg.radius / 2.0;
        if clamped_eps {
            eps = cfg.radius / 2.0;
        }
        let k = level_count(cfg.radius, eps);
        let alphas = level_alphas(k);
        let level_eps: Vec<f64> = alphas
            .iter()
            .enumerate()
            .map(|(i, a)| a * (-((i + 1) as f64)).exp2())
            .collect();
        let delta_bar = cfg.delta * eps / cfg.radius;
        let mut levels = Vec::with_capacity(k);
        let mut level_rngs = Vec::with_capacity(k);
        for (i, &e) in level_eps.iter().enumerate() {
            let seed = crate::rng::derive_seed(cfg.seed, LEVEL_SEED_LABEL + i as u64);
            levels.push(MveState::init(&a, cfg.p, e, delta_bar, cfg.backend, seed)?);
            level_rngs.push(substream(cfg.seed, LEVEL_QUERY_LABEL, i as u64));
        }
        let y0 = a.mul_vec(x0);
        Ok(Self {
            p: cfg.p,
            n: a.rows(),
            d: a.cols(),
            k,
            radius: cfg.radius,
            eps,
            delta_bar,
            alphas,
            level_eps,
            levels,
            level_rngs,
            ref_x: vec![x0.to_vec(); k + 2],
            ref_y: vec![y0; k + 2],
            moved: 0.0,
            query_counts: vec![0; k],
            queries: 0,
            clamped_eps,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// True when the requested accuracy exceeded `R/2` and was clamped.
    pub fn eps_was_clamped(&self) -> bool {
        self.clamped_eps
    }

    pub fn delta_bar(&self) -> f64 {
        self.delta_bar
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Relative accuracies `ε_i = α_i 2^{−i}` of `D_1..D_k`.
    pub fn level_eps(&self) -> &[f64] {
        &self.level_eps
    }

    pub fn level_backend(&self) -> MveBackend {
        self.levels[0].backend()
    }

    /// Number of queries issued to `D_i`, `i = 1..k`.
    pub fn query_counts(&self) -> &[usize] {
        &self.query_counts
    }

    /// `R/(ε·2^{i−2})` for `i = 1..k`.
    pub fn query_budgets(&self) -> Vec<f64> {
        (1..=self.k)
            .map(|i| self.radius / (self.eps * (i as f64 - 2.0).exp2()))
            .collect()
    }

    pub fn moved(&self) -> f64 {
        self.moved
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    pub fn current_point(&self) -> &[f64] {
        &self.ref_x[0]
    }

    pub fn current_output(&self) -> &[f64] {
        &self.ref_y[1]
    }

    pub fn reference_points(&self) -> &[Vec<f64>] {
        &self.ref_x
    }

    /// Largest ratio `‖x̄_i − x̄_{i−1}‖_p / (ε·2^{i−2})` over the chain.
    pub fn chain_slack(&self) -> f64 {
        (1..=self.k + 1)
            .map(|i| {
                dist_p(&self.ref_x[i], &self.ref_x[i - 1], self.p)
                    / (self.eps * (i as f64 - 2.0).exp2())
            })
            .fold(0.0, f64::max)
    }

    /// Moves to `x_{t+1} = x_t + Δ` and returns the maintained estimate of
    /// `A x_{t+1}`. On `BudgetExceeded` the state is left untouched.
    pub fn query(&mut self, delta: &[f64]) -> Result<(&[f64], MvmQueryInfo)> {
        check_dim(self.d, delta.len())?;
        if delta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mvm update"));
        }
        let step = norm_p(delta, self.p);
        if self.moved + step > self.radius * (1.0 + 1e-12) {
            return Err(Error::BudgetExceeded {
                used: self.moved + step,
                budget: self.radius,
            });
        }
        self.moved += step;
        self.queries += 1;
        for (x, dx) in self.ref_x[0].iter_mut().zip(delta) {
            *x += dx;
        }
        let mut j = self.k + 1;
        for i in 1..=self.k + 1 {
            let tol = self.eps * (i as f64 - 2.0).exp2();
            if dist_p(&self.ref_x[0], &self.ref_x[i], self.p) <= tol {
                j = i;
                break;
            }
        }
        let previous = if j > 1 { self.ref_y[1].clone() } else { Vec::new() };
        for i in (1..j).rev() {
            self.query_counts[i - 1] += 1;
            let (head, tail) = self.ref_x.split_at_mut(i);
            tail[0].copy_from_slice(&head[0]);
            let est = if i + 1 == j {
                let diff: Vec<f64> = self.ref_x[i]
                    .iter()
                    .zip(&self.ref_x[i + 1])
                    .map(|(a, b)| a - b)
                    .collect();
                Some(self.levels[i - 1].query(&diff, &mut self.level_rngs[i - 1])?)
            } else {
                // x̄_i − x̄_{i+1} = 0 and every backend maps 0 to 0 exactly
                None
            };
            let (lo, hi) = self.ref_y.split_at_mut(i + 1);
            let target = &mut lo[i];
            target.copy_from_slice(&hi[0]);
            if let Some(e) = est {
                for (t, v) in target.iter_mut().zip(&e) {
                    *t += v;
                }
            }
        }
        debug_assert!(self.chain_slack() <= 1.0 + 1e-9, "reference chain broken");
        let changed = if j > 1 {
            (0..self.n)
                .filter(|&r| previous[r] != self.ref_y[1][r])
                .collect()
        } else {
            Vec::new()
        };
        Ok((&self.ref_y[1], MvmQueryInfo { j, changed }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn cfg(p: u8, radius: f64, eps: f64, backend: MveBackend) -> MvmConfig {
        MvmConfig {
            p,
            radius,
            eps,
            delta: 0.1,
            backend,
            seed: 3,
        }
    }

    #[test]
    fn level_count_examples() {
        assert_eq!(level_count(4.0, 1.0), 3);
        assert_eq!(level_count(1.0, 0.05), 6);
        let a = level_alphas(6);
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((a[3] / a[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_update_is_a_no_op() {
        let a = Arc::new(Matrix::identity(3));
        let mut m = MvmState::init(a, &[0.1, 0.0, 0.0], cfg(2, 1.0, 0.1, MveBackend::Sketch)).unwrap();
        let (y, info) = m.query(&[0.0; 3]).unwrap();
        assert_eq!(y, &[0.1, 0.0, 0.0]);
        assert_eq!(info, MvmQueryInfo { j: 1, changed: vec![] });
    }

    #[test]
    fn zero_matrix_stays_zero() {
        let a = Arc::new(Matrix::zeros(4, 2));
        let mut m = MvmState::init(a, &[0.0; 2], cfg(1, 2.0, 0.1, MveBackend::Sample)).unwrap();
        for _ in 0..10 {
            let (y, _) = m.query(&[0.1, -0.1]).unwrap();
            assert_eq!(y, &[0.0; 4]);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let a = Arc::new(Matrix::identity(2));
        let mut m = MvmState::init(a, &[0.0; 2], cfg(1, 1.0, 0.1, MveBackend::Exact)).unwrap();
        m.query(&[0.5, 0.0]).unwrap();
        assert!(matches!(m.query(&[0.3, 0.3]), Err(Error::BudgetExceeded { .. })));
        assert_eq!(m.current_point(), &[0.5, 0.0]);
    }

    #[test]
    fn eps_above_half_radius_is_clamped() {
        let a = Arc::new(Matrix::identity(2));
        let m = MvmState::init(a, &[0.0; 2], cfg(2, 1.0, 0.9, MveBackend::Exact)).unwrap();
        assert!(m.eps_was_clamped());
        assert_eq!(m.eps(), 0.5);
        assert_eq!(m.k(), 2);
    }

    #[test]
    fn exact_levels_give_deterministic_half_eps_error() {
        let mut rng = crate::rng::stream(8, 8);
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|_| {
                let r: Vec<f64> = (0..5).map(|_| rng.random::<f64>() - 0.5).collect();
                let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                r.into_iter().map(|v| v / n).collect()
            })
            .collect();
        let a = Arc::new(Matrix::from_rows(&rows).unwrap());
        let mut m = MvmState::init(a.clone(), &[0.0; 5], cfg(2, 1.0, 0.05, MveBackend::Exact)).unwrap();
        let mut x = vec![0.0; 5];
        for _ in 0..200 {
            let dlt: Vec<f64> = (0..5).map(|_| (rng.random::<f64>() - 0.5) * 0.004).collect();
            for (a, b) in x.iter_mut().zip(&dlt) {
                *a += b;
            }
            let (y, _) = m.query(&dlt).unwrap();
            let ax = a.mul_vec(&x);
            let err = y.iter().zip(&ax).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(err <= 0.025 + 1e-12, "{err}");
        }
        assert!(m.chain_slack() <= 1.0);
    }
}
