//! Ball-oracle acceleration with momentum damping.
//!
//! State per round: `A_t`, the primal iterate `x_t` and the mirror iterate
//! `v_t`. With `q = (√γ r/R)^{2/3}`, each round sets `a = qA_t`,
//! `A′ = A_t + a`, `Φ(z) = (A_t/A′)x_t + (a/A′)z` and calls the oracle on
//! `h(z) = A′f(Φ(z))` around `v_t` with the constant radius
//! `ρ = (1 + 1/q) r`, so that oracle queries satisfy `‖Φ(z) − Φ(v_t)‖ ≤ r`.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ball_oracle::{movement_bound, restricted_oracle, BallOracleResult, GradFn, OracleProfile};
use crate::error::{check_dim, Error, Result};
use crate::geometry::GeometrySetup;
use crate::problem::Objective;
use crate::refcheck::softmax;
use crate::rng::{derive_seed, substream, StreamRng};
use crate::sketch_mve::MveBackend;
use crate::softmax_grad::{EstimatorConfig, EstimatorCounters, SoftmaxEstimator};

const SAMPLER_LABEL: u64 = 0xacc_0001;
const MVM_LABEL: u64 = 0xacc_0002;

/// `40R² log(80E0/ε)/ε`.
pub fn stopping_threshold(radius: f64, e0: f64, eps: f64) -> Result<f64> {
    scaled_stopping_threshold(40.0, radius, e0, eps)
}

/// `κR² log(80E0/ε)/ε`.
pub fn scaled_stopping_threshold(kappa: f64, radius: f64, e0: f64, eps: f64) -> Result<f64> {
    if !(radius > 0.0 && e0 > 0.0 && eps > 0.0 && kappa > 0.0) {
        return Err(Error::InvalidParams(format!(
            "stopping threshold needs positive R, E0, ε; got {radius}, {e0}, {eps}"
        )));
    }
    if eps >= 80.0 * e0 {
        return Err(Error::InvalidParams(format!(
            "ε = {eps} ≥ 80·E0 = {} makes the threshold non-positive",
            80.0 * e0
        )));
    }
    Ok(kappa * radius * radius * (80.0 * e0 / eps).ln() / eps)
}

/// `(√γ r/R)^{2/3}`.
pub fn growth_ratio(gamma: f64, r: f64, radius: f64) -> f64 {
    (gamma.sqrt() * r / radius).powf(2.0 / 3.0)
}

/// `18(R/(√γ r))^{2/3} log(80E0/ε)`.
pub fn expected_iterations(gamma: f64, r: f64, radius: f64, e0: f64, eps: f64) -> f64 {
    18.0 * growth_ratio(gamma, r, radius).recip() * (80.0 * e0 / eps).ln()
}

/// How the per-round movement budget `r′` of the estimator is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum MovementBudget {
    /// The oracle movement bound mapped through `Φ`, i.e. scaled by `a/A′`.
    OracleBound,
    /// A fixed multiple of `r`.
    RadiusMultiple(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverProfile {
    pub name: ProfileName,
    pub oracle: OracleProfile,
    /// `κ` in the stopping rule `A_t < κR² log(80E0/ε)/ε`.
    pub stop_const: f64,
    /// Accelerator accuracy as a fraction of the target `ε`.
    pub accuracy_fraction: f64,
    pub movement_budget: MovementBudget,
    pub rebuild_on_budget: bool,
    pub backend: MveBackend,
    /// Failure probability handed to the estimator.
    pub estimator_delta: f64,
    pub iteration_cap_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    Theory,
    Practical,
}

impl SolverProfile {
    pub fn theory() -> Self {
        Self {
            name: ProfileName::Theory,
            oracle: OracleProfile::theory(),
            stop_const: 40.0,
            accuracy_fraction: 0.125,
            movement_budget: MovementBudget::OracleBound,
            rebuild_on_budget: true,
            backend: MveBackend::Auto,
            estimator_delta: 1e-3,
            iteration_cap_factor: 10.0,
        }
    }

    pub fn practical() -> Self {
        Self {
            name: ProfileName::Practical,
            oracle: OracleProfile::practical(),
            stop_const: 0.25,
            accuracy_fraction: 1.0,
            movement_budget: MovementBudget::RadiusMultiple(8.0),
            rebuild_on_budget: true,
            backend: MveBackend::Auto,
            estimator_delta: 1e-3,
            iteration_cap_factor: 10.0,
        }
    }

    pub fn by_name(name: ProfileName) -> Self {
        match name {
            ProfileName::Theory => Self::theory(),
            ProfileName::Practical => Self::practical(),
        }
    }
}

/// Where stochastic gradients of the smoothed objective come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientSource {
    /// The rejection-sampling estimator, rebuilt each round.
    Softmax { eps_prime: f64 },
    /// The exact softmax-weighted gradient (`n` evaluations per call).
    ExactSmooth { eps_prime: f64 },
    /// A max-achieving subgradient.
    ExactMax,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelParams {
    pub r: f64,
    pub radius: f64,
    pub e0: f64,
    pub eps: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub c: f64,
    pub a_next: f64,
    pub big_a: f64,
    pub lambda: f64,
    pub initial_check: bool,
    pub bisection_rounds: usize,
    pub grad_calls: u64,
    pub movement: f64,
    pub steps: u64,
    pub out_of_bound: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalCounters {
    pub estimate_calls: u64,
    pub value_evals: u64,
    pub gradient_evals: u64,
    pub draws: u64,
    pub accepted: u64,
    pub estimator_rebuilds: u64,
    pub mvm_rebuilds: u64,
}

impl EvalCounters {
    fn absorb(&mut self, c: &EstimatorCounters) {
        self.estimate_calls += c.calls as u64;
        self.value_evals += c.value_evals as u64;
        self.gradient_evals += c.gradient_evals as u64;
        self.draws += c.draws as u64;
        self.accepted += c.accepted as u64;
        self.mvm_rebuilds += c.rebuilds as u64;
        self.estimator_rebuilds += 1;
    }

    pub fn evaluations(&self) -> u64 {
        self.value_evals + self.gradient_evals
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub x: Vec<f64>,
    pub f_max: f64,
    pub outer_iterations: usize,
    pub stopping_threshold: f64,
    pub rho: f64,
    pub growth_ratio: f64,
    pub iterations: Vec<IterationRecord>,
    pub counters: EvalCounters,
    pub total_grad_calls: u64,
    /// Seconds spent inside gradient estimation.
    pub t_eval: f64,
    /// Seconds spent in everything else.
    pub t_md: f64,
    pub seed: u64,
    pub profile: ProfileName,
    /// Indices accepted during the last oracle call, with multiplicity.
    pub last_round_indices: Vec<u64>,
    /// Indices accepted over the whole run, with multiplicity.
    pub index_counts: Vec<u64>,
    /// `Σ_t a_t·freq_t / Σ_t a_t` over the per-round accepted frequencies.
    pub weighted_index_freq: Vec<f64>,
}

/// The scaled gradient oracle `G_t(z) = a·G(Φ(z))` for one round.
struct RoundGradient<'a> {
    source: GradientSource,
    problem: &'a Arc<dyn Objective>,
    estimator: Option<SoftmaxEstimator>,
    sampler: StreamRng,
    x_t: &'a [f64],
    wx: f64,
    wz: f64,
    scale: f64,
    index_counts: Vec<u64>,
    eval_time: f64,
    exact_evals: u64,
    exact_calls: u64,
}

impl RoundGradient<'_> {
    fn phi(&self, z: &[f64]) -> Vec<f64> {
        self.x_t
            .iter()
            .zip(z)
            .map(|(x, z)| self.wx * x + self.wz * z)
            .collect()
    }

    fn call(&mut self, z: &[f64]) -> Result<Vec<f64>> {
        let start = Instant::now();
        let p = self.phi(z);
        let mut g = match self.source {
            GradientSource::Softmax { .. } => {
                let est = self.estimator.as_mut().expect("estimator built");
                let e = est.estimate(&p, &mut self.sampler)?;
                self.index_counts[e.index] += 1;
                e.gradient
            }
            GradientSource::ExactSmooth { eps_prime } => {
                let (g, idx) = exact_smooth_gradient(self.problem.as_ref(), &p, eps_prime);
                self.index_counts[idx] += 1;
                self.exact_evals += 2 * self.problem.n() as u64;
                self.exact_calls += 1;
                g
            }
            GradientSource::ExactMax => {
                let (_, i) = self.problem.f_max(&p);
                let mut g = vec![0.0; p.len()];
                self.problem.gradient(i, &p, &mut g);
                self.index_counts[i] += 1;
                self.exact_evals += self.problem.n() as u64 + 1;
                self.exact_calls += 1;
                g
            }
        };
        g.iter_mut().for_each(|v| *v *= self.scale);
        self.eval_time += start.elapsed().as_secs_f64();
        Ok(g)
    }
}

/// `Σ_i p_i(x)∇f_i(x)` and the most likely index.
pub fn exact_smooth_gradient(problem: &dyn Objective, x: &[f64], eps_prime: f64) -> (Vec<f64>, usize) {
    let vals = problem.values(x);
    let p = softmax(&vals, eps_prime);
    let mut out = vec![0.0; x.len()];
    let mut g = vec![0.0; x.len()];
    let mut best = 0;
    for (i, &pi) in p.iter().enumerate() {
        if pi > p[best] {
            best = i;
        }
        if pi == 0.0 {
            continue;
        }
        problem.gradient(i, x, &mut g);
        for (o, v) in out.iter_mut().zip(&g) {
            *o += pi * v;
        }
    }
    (out, best)
}

/// Anything that answers ball-restricted proximal queries.
pub trait BallOracle {
    fn call(
        &mut self,
        grad: &mut GradFn<'_>,
        setup: &GeometrySetup,
        y: &[f64],
        rho: f64,
        grad_bound: f64,
    ) -> Result<BallOracleResult>;
}

/// The bisection-plus-LI-MD oracle with a fixed profile.
pub struct ProfiledOracle(pub OracleProfile);

impl BallOracle for ProfiledOracle {
    fn call(
        &mut self,
        grad: &mut GradFn<'_>,
        setup: &GeometrySetup,
        y: &[f64],
        rho: f64,
        grad_bound: f64,
    ) -> Result<BallOracleResult> {
        restricted_oracle(grad, setup, y, rho, grad_bound, &self.0)
    }
}

/// Runs the acceleration loop from `(x0, v0)` and returns the final iterate.
#[allow(clippy::too_many_arguments)]
pub fn accelerate(
    problem: Arc<dyn Objective>,
    setup: &GeometrySetup,
    x0: &[f64],
    v0: &[f64],
    params: AccelParams,
    profile: &SolverProfile,
    source: GradientSource,
    oracle: &mut dyn BallOracle,
    seed: u64,
) -> Result<SolverReport> {
    check_dim(setup.dim(), x0.len())?;
    check_dim(setup.dim(), v0.len())?;
    setup.check_point(x0)?;
    setup.check_point(v0)?;
    let AccelParams {
        r,
        radius,
        e0,
        eps,
        gamma,
    } = params;
    if !(r > 0.0) || !(gamma > 0.0 && gamma < 0.5) || !(radius > 0.0) || !(e0 > 0.0) {
        return Err(Error::InvalidParams(format!(
            "accelerator needs r > 0, R > 0, E0 > 0 and γ ∈ (0, 1/2); got {params:?}"
        )));
    }
    let threshold = scaled_stopping_threshold(profile.stop_const, radius, e0, eps)?;
    let q = growth_ratio(gamma, r, radius);
    let rho = (1.0 + q.recip()) * r;
    let cap = (profile.iteration_cap_factor * expected_iterations(gamma, r, radius, e0, eps)).ceil() as usize;
    let lf = problem.lipschitz();
    let tau = setup.tau();
    let n = problem.n();
    let start = Instant::now();

    let mut big_a = radius * radius / e0;
    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    let mut iterations = Vec::new();
    let mut counters = EvalCounters::default();
    let mut total_grad_calls = 0;
    let mut t_eval = 0.0;
    let mut last_round_indices = vec![0u64; n];
    let mut index_counts = vec![0u64; n];
    let mut weighted = vec![0.0; n];
    let mut weight_total = 0.0;
    let mut t = 0usize;
    while big_a < threshold {
        if t >= cap {
            return Err(Error::IterationCapExceeded(cap));
        }
        let a = q * big_a;
        let a_prime = big_a + a;
        let wx = big_a / a_prime;
        let wz = a / a_prime;
        let grad_bound = a * lf;
        let anchor: Vec<f64> = x.iter().zip(&v).map(|(x, v)| wx * x + wz * v).collect();
        let estimator = match source {
            GradientSource::Softmax { eps_prime } => {
                let r_prime = match profile.movement_budget {
                    MovementBudget::RadiusMultiple(m) => m * r,
                    MovementBudget::OracleBound => {
                        let delta = profile.oracle.delta_for(setup, rho, grad_bound);
                        movement_bound(&profile.oracle, tau, rho, grad_bound, delta) * wz
                    }
                };
                Some(SoftmaxEstimator::new(
                    problem.clone(),
                    *setup,
                    &anchor,
                    EstimatorConfig {
                        eps_prime,
                        r,
                        r_prime,
                        delta: profile.estimator_delta,
                        backend: profile.backend,
                        mvm_seed: derive_seed(seed, MVM_LABEL ^ ((t as u64) << 20)),
                        rebuild_on_budget: profile.rebuild_on_budget,
                    },
                )?)
            }
            _ => None,
        };
        let mut rg = RoundGradient {
            source,
            problem: &problem,
            estimator,
            sampler: substream(seed, SAMPLER_LABEL, t as u64),
            x_t: &x,
            wx,
            wz,
            scale: a,
            index_counts: vec![0; n],
            eval_time: 0.0,
            exact_evals: 0,
            exact_calls: 0,
        };
        let res = {
            let mut g = |z: &[f64]| rg.call(z);
            oracle.call(&mut g, setup, &v, rho, grad_bound)?
        };
        t_eval += rg.eval_time;
        if let Some(est) = &rg.estimator {
            counters.absorb(&est.counters());
        } else {
            counters.estimate_calls += rg.exact_calls;
            counters.value_evals += rg.exact_evals;
        }
        last_round_indices = std::mem::take(&mut rg.index_counts);
        let round_total: u64 = last_round_indices.iter().sum();
        if round_total > 0 {
            for (i, &k) in last_round_indices.iter().enumerate() {
                index_counts[i] += k;
                weighted[i] += a * k as f64 / round_total as f64;
            }
            weight_total += a;
        }
        let c = res.c;
        let phi_z = rg.phi(&res.z);
        drop(rg);
        for (xi, pz) in x.iter_mut().zip(&phi_z) {
            *xi = pz / c + (c - 1.0) / c * *xi;
        }
        big_a += a / c;
        v = res.w.clone();
        total_grad_calls += res.grad_calls;
        iterations.push(IterationRecord {
            c,
            a_next: a,
            big_a,
            lambda: res.lambda,
            initial_check: res.bisection.initial_check,
            bisection_rounds: res.bisection.rounds,
            grad_calls: res.grad_calls,
            movement: res.movement,
            steps: res.steps,
            out_of_bound: res.out_of_bound,
        });
        t += 1;
    }
    if weight_total > 0.0 {
        weighted.iter_mut().for_each(|w| *w /= weight_total);
    }
    let total = start.elapsed().as_secs_f64();
    Ok(SolverReport {
        f_max: problem.f_max(&x).0,
        x,
        outer_iterations: t,
        stopping_threshold: threshold,
        rho,
        growth_ratio: q,
        iterations,
        counters,
        total_grad_calls,
        t_eval,
        t_md: (total - t_eval).max(0.0),
        seed,
        profile: profile.name,
        last_round_indices,
        index_counts,
        weighted_index_freq: weighted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopping_threshold_examples() {
        assert!((stopping_threshold(1.0, 1.0, 0.8).unwrap() - 230.258_509_299_404_57).abs() < 1e-9);
        assert!(matches!(stopping_threshold(1.0, 1.0, 80.0), Err(Error::InvalidParams(_))));
        assert!((stopping_threshold(2.0, 0.5, 0.1).unwrap() - 9_586.343_275_372_77).abs() < 1e-9);
    }

    #[test]
    fn growth_and_radius_arithmetic() {
        // (√γ r/R)^{2/3} = 0.25 when √γ r/R = 0.125
        let q = growth_ratio(0.015_625, 1.0, 1.0);
        assert!((q - 0.25).abs() < 1e-15);
        let r = 0.3;
        let rho = (1.0 + q.recip()) * r;
        assert!((rho - 5.0 * r).abs() < 1e-15);
        let (big_a, a) = (1.0, q * 1.0);
        assert!((big_a + a - 1.25f64).abs() < 1e-15);
    }
}
