//! Ball-restricted proximal oracle: last-iterate proximal mirror descent
//! (LI-MD), the λ-bisection that tunes its regularization, and the oracle
//! that combines them into a triple `(z, w, c)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{GeometrySetup, MirrorAccumulator, SetupKind};
use crate::linalg::norm2;

/// Gradient callback: returns a (possibly stochastic) subgradient at `x`.
pub type GradFn<'a> = dyn FnMut(&[f64]) -> Result<Vec<f64>> + 'a;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum DeltaRule {
    /// `δ = ρ²/(2¹⁴(√2 RΓ + 3R²)τ⁵)`.
    TheoryCap,
    Fixed(f64),
}

/// Constants of the oracle. `theory()` reproduces the analyzed values;
/// `practical()` scales them for desk-size runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleProfile {
    /// `C` in `η = ρ²λ/(C·ln(16/δ)·τ^{tau_power}·Γ²)`.
    pub c: f64,
    pub tau_power: f64,
    /// Upper band edge `ρ²/(upper_div·τ)`, also used by the initial check.
    pub upper_div: f64,
    /// Lower band edge `ρ²/(lower_div·τ³)`.
    pub lower_div: f64,
    pub delta: DeltaRule,
    /// `γ = 1/(gamma_div·τ^{gamma_tau_power})`.
    pub gamma_div: f64,
    pub gamma_tau_power: f64,
    /// Refuse LI-MD runs longer than this many steps.
    pub max_steps: Option<u64>,
}

impl OracleProfile {
    pub fn theory() -> Self {
        Self {
            c: 66.0 * 4096.0,
            tau_power: 5.0,
            upper_div: 64.0,
            lower_div: 256.0,
            delta: DeltaRule::TheoryCap,
            gamma_div: 8192.0,
            gamma_tau_power: 5.0,
            max_steps: None,
        }
    }

    /// `γ` stays below half the lower band edge `ρ²/(256τ³)`.
    pub fn practical() -> Self {
        Self {
            c: 256.0,
            tau_power: 1.0,
            upper_div: 64.0,
            lower_div: 256.0,
            delta: DeltaRule::Fixed(1e-3),
            gamma_div: 512.0,
            gamma_tau_power: 3.0,
            max_steps: None,
        }
    }

    pub fn gamma(&self, tau: f64) -> f64 {
        1.0 / (self.gamma_div * tau.powf(self.gamma_tau_power))
    }

    /// The failure probability used for this call.
    pub fn delta_for(&self, setup: &GeometrySetup, rho: f64, grad_bound: f64) -> f64 {
        match self.delta {
            DeltaRule::Fixed(d) => d,
            DeltaRule::TheoryCap => theory_delta_cap(setup, rho, grad_bound),
        }
    }

    /// `η` for a given `λ` and per-run failure probability.
    pub fn step_size(&self, tau: f64, rho: f64, grad_bound: f64, lambda: f64, delta: f64) -> f64 {
        rho * rho * lambda
            / (self.c * (16.0 / delta).ln() * tau.powf(self.tau_power) * grad_bound * grad_bound)
    }
}

/// `ρ²/(2¹⁴(√2 RΓ + 3R²)τ⁵)` with `R² = max V` over the domain; capped at
/// `1/2`.
pub fn theory_delta_cap(setup: &GeometrySetup, rho: f64, grad_bound: f64) -> f64 {
    let r2 = setup.max_divergence();
    let r = r2.sqrt();
    let tau = setup.tau();
    let cap = rho * rho / (16384.0 * (2f64.sqrt() * r * grad_bound + 3.0 * r2) * tau.powi(5));
    cap.min(0.5)
}

/// `K_max = ⌈log₂(9600τ³Γ³/ρ³)⌉ + 1`, at least 1.
pub fn bisection_rounds(tau: f64, rho: f64, grad_bound: f64) -> usize {
    let arg = 9600.0 * (tau * grad_bound / rho).powi(3);
    let l = if arg > 0.0 { arg.log2().ceil() } else { 0.0 };
    l.max(0.0) as usize + 1
}

/// `ρ·2K_max·ln(4C·ln(16K_max²/δ)τ⁶Γ²/ρ²)`: the movement bound of one
/// oracle call. Non-positive logarithms are clamped to 1.
pub fn movement_bound(profile: &OracleProfile, tau: f64, rho: f64, grad_bound: f64, delta: f64) -> f64 {
    let k = bisection_rounds(tau, rho, grad_bound) as f64;
    let inner = 4.0 * profile.c * (16.0 * k * k / delta).ln() * tau.powi(6) * grad_bound * grad_bound
        / (rho * rho);
    rho * 2.0 * k * inner.ln().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimdParams {
    pub lambda: f64,
    pub eta: f64,
    pub steps: u64,
    pub rho: f64,
}

impl LimdParams {
    /// `T = ⌈4τ/(ηλ)⌉` and `η` lowered to `4τ/(λT)`, so that
    /// `λ + 1/(ηT) = λ(1 + 1/(4τ))` holds exactly.
    pub fn for_oracle(tau: f64, lambda: f64, eta: f64, rho: f64) -> Self {
        let raw = 4.0 * tau / (eta * lambda);
        let steps = if raw.is_finite() { raw.ceil().max(1.0) as u64 } else { 1 };
        Self {
            lambda,
            eta: 4.0 * tau / (lambda * steps as f64),
            steps,
            rho,
        }
    }

    pub fn c(&self) -> f64 {
        self.lambda + 1.0 / (self.eta * self.steps as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimdResult {
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    pub out_of_bound: bool,
    /// `Σ_t ‖x_t − x_{t−1}‖` over the queried iterates, starting at `x_0 = y`.
    pub movement: f64,
    /// `max_t ‖w_t − y‖`, the scale of the movement bound.
    pub max_w_dev: f64,
    /// `max_t ‖x_t − y‖` over the queried iterates.
    pub max_query_dist: f64,
    pub grad_calls: u64,
    pub steps_taken: u64,
}

/// Last-iterate proximal mirror descent on `h + λV_y` with queries at the
/// running average `x_t` of the mirror iterates. Aborts once `‖x_t − y‖ ≥ ρ`.
pub fn li_md(
    grad: &mut GradFn<'_>,
    setup: &GeometrySetup,
    y: &[f64],
    params: LimdParams,
) -> Result<LimdResult> {
    check_dim(setup.dim(), y.len())?;
    if !(params.eta > 0.0) || !(params.lambda >= 0.0) || params.steps == 0 || !(params.rho > 0.0)
    {
        return Err(Error::InvalidParams(format!("LI-MD parameters {params:?}")));
    }
    let d = y.len();
    let mut x = y.to_vec();
    let mut x_prev = y.to_vec();
    let mut w = y.to_vec();
    let mut acc = MirrorAccumulator::new(*setup);
    let mut movement = 0.0;
    let mut max_w_dev: f64 = 0.0;
    let mut max_query_dist: f64 = 0.0;
    let mut grad_calls = 0;
    for t in 1..=params.steps {
        let tf = t as f64;
        let mut next = vec![0.0; d];
        for i in 0..d {
            next[i] = ((tf - 1.0) * x[i] + w[i]) / tf;
        }
        let dist = setup.dist(&next, y);
        if dist >= params.rho {
            let z = match setup.kind() {
                SetupKind::Ball => {
                    let dir: Vec<f64> = (0..d).map(|i| next[i] - y[i]).collect();
                    let n = norm2(&dir);
                    let ray: Vec<f64> = (0..d).map(|i| y[i] + params.rho * dir[i] / n).collect();
                    setup.project(&ray)?
                }
                // the ray point can leave Δ_ν; the last in-domain iterate is
                // within ρ of y
                SetupKind::TruncatedSimplex => x.clone(),
            };
            return Ok(LimdResult {
                w: z.clone(),
                z,
                out_of_bound: true,
                movement,
                max_w_dev,
                max_query_dist,
                grad_calls,
                steps_taken: t - 1,
            });
        }
        x_prev.copy_from_slice(&x);
        x = next;
        movement += setup.dist(&x, &x_prev);
        max_query_dist = max_query_dist.max(dist);
        let g = grad(&x)?;
        grad_calls += 1;
        if g.len() != d || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::GradientCallbackFailed(format!(
                "gradient of length {} with finite entries expected",
                d
            )));
        }
        w = setup.prox_step(&g, params.eta, params.lambda, y, &w)?;
        max_w_dev = max_w_dev.max(setup.dist(&w, y));
        acc.push(&w)?;
    }
    let last_weight = if params.lambda > 0.0 {
        1.0 / (params.lambda * params.eta)
    } else {
        0.0
    };
    let w_tilde = acc.finish(last_weight)?;
    Ok(LimdResult {
        z: x,
        w: w_tilde,
        out_of_bound: false,
        movement,
        max_w_dev,
        max_query_dist,
        grad_calls,
        steps_taken: params.steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionTrace {
    pub lambda: f64,
    /// True when the initial check at `λ = 1` returned.
    pub initial_check: bool,
    pub rounds: usize,
    pub k_max: usize,
    pub lambdas: Vec<f64>,
    pub vy: Vec<f64>,
    pub movement: f64,
    pub grad_calls: u64,
    /// Movement of each LI-MD run, starting with the initial check.
    pub run_movements: Vec<f64>,
}

/// Finds `λ ∈ [1, 16τΓ/ρ]` whose prox point has `V_y` in the target band.
pub fn lambda_bisection(
    grad: &mut GradFn<'_>,
    setup: &GeometrySetup,
    y: &[f64],
    rho: f64,
    grad_bound: f64,
    profile: &OracleProfile,
) -> Result<BisectionTrace> {
    let tau = setup.tau();
    if !tau.is_finite() || tau < 4.0 {
        return Err(Error::InvalidParams(format!("oracle needs finite τ ≥ 4, got {tau}")));
    }
    let delta = profile.delta_for(setup, rho, grad_bound);
    let lambda_min0 = 1.0;
    let mut lambda_min = lambda_min0;
    let mut lambda_max = (16.0 * tau * grad_bound / rho).max(lambda_min0);
    let k_max = bisection_rounds(tau, rho, grad_bound);
    let upper = rho * rho / (profile.upper_div * tau);
    let lower = rho * rho / (profile.lower_div * tau.powi(3));
    let mut trace = BisectionTrace {
        lambda: lambda_min0,
        initial_check: false,
        rounds: 0,
        k_max,
        lambdas: Vec::new(),
        vy: Vec::new(),
        movement: 0.0,
        grad_calls: 0,
        run_movements: Vec::new(),
    };
    let mut run = |lambda: f64, dk: f64, trace: &mut BisectionTrace| -> Result<LimdResult> {
        let eta = profile.step_size(tau, rho, grad_bound, lambda, dk);
        let params = LimdParams::for_oracle(tau, lambda, eta, rho);
        check_steps(profile, params.steps)?;
        let res = li_md(grad, setup, y, params)?;
        trace.movement += res.movement;
        trace.grad_calls += res.grad_calls;
        trace.run_movements.push(res.movement);
        Ok(res)
    };
    let first = run(lambda_min0, delta, &mut trace)?;
    let v0 = setup.bregman(y, &first.z)?;
    trace.vy.push(v0);
    trace.lambdas.push(lambda_min0);
    if v0 < upper {
        trace.initial_check = true;
        return Ok(trace);
    }
    let mut lambda_k = lambda_min0;
    for k in 1..=k_max {
        lambda_k = 0.5 * (lambda_max + lambda_min);
        let dk = delta / (8.0 * (k * k) as f64);
        let res = run(lambda_k, dk, &mut trace)?;
        let v = setup.bregman(y, &res.z)?;
        trace.rounds = k;
        trace.lambdas.push(lambda_k);
        trace.vy.push(v);
        if res.out_of_bound || v > upper {
            lambda_min = lambda_k;
        } else if v < lower {
            lambda_max = lambda_k;
        } else {
            trace.lambda = lambda_k;
            return Ok(trace);
        }
    }
    trace.lambda = lambda_k;
    Ok(trace)
}

fn check_steps(profile: &OracleProfile, steps: u64) -> Result<()> {
    match profile.max_steps {
        Some(m) if steps > m => Err(Error::InvalidParams(format!(
            "LI-MD would run {steps} steps, above the profile cap of {m}"
        ))),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallOracleResult {
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    pub c: f64,
    pub lambda: f64,
    pub eta: f64,
    pub steps: u64,
    pub out_of_bound: bool,
    pub delta: f64,
    pub bisection: BisectionTrace,
    /// Movement summed over every LI-MD run of the call.
    pub movement: f64,
    pub grad_calls: u64,
    pub final_run: LimdResult,
}

/// `λ`-bisection followed by one fresh LI-MD run at the chosen `λ`.
pub fn restricted_oracle(
    grad: &mut GradFn<'_>,
    setup: &GeometrySetup,
    y: &[f64],
    rho: f64,
    grad_bound: f64,
    profile: &OracleProfile,
) -> Result<BallOracleResult> {
    check_dim(setup.dim(), y.len())?;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParams(format!("radius {rho}")));
    }
    if !(grad_bound >= 0.0) || !grad_bound.is_finite() {
        return Err(Error::InvalidParams(format!("gradient bound {grad_bound}")));
    }
    let tau = setup.tau();
    let bisection = lambda_bisection(grad, setup, y, rho, grad_bound, profile)?;
    let delta = profile.delta_for(setup, rho, grad_bound);
    let lambda = bisection.lambda;
    let eta = profile.step_size(tau, rho, grad_bound, lambda, delta);
    let params = LimdParams::for_oracle(tau, lambda, eta, rho);
    check_steps(profile, params.steps)?;
    let res = li_md(grad, setup, y, params)?;
    Ok(BallOracleResult {
        z: res.z.clone(),
        w: res.w.clone(),
        c: params.c(),
        lambda,
        eta: params.eta,
        steps: params.steps,
        out_of_bound: res.out_of_bound,
        delta,
        movement: bisection.movement + res.movement,
        grad_calls: bisection.grad_calls + res.grad_calls,
        bisection,
        final_run: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_objective_returns_center() {
        let setup = GeometrySetup::ball(3).unwrap();
        let y = [0.2, -0.1, 0.3];
        let mut g = |_: &[f64]| Ok(vec![0.0; 3]);
        let res = restricted_oracle(&mut g, &setup, &y, 0.5, 1.0, &OracleProfile::practical()).unwrap();
        for (a, b) in res.z.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
        for (a, b) in res.w.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(res.bisection.initial_check);
        assert!((res.c - (1.0 + 1.0 / 16.0)).abs() < 1e-15);
    }

    #[test]
    fn c_relation_holds_for_any_lambda() {
        for &(tau, lambda, eta) in &[(4.0, 1.0, 0.013), (27.6, 7.5, 1e-4), (4.0, 300.0, 0.2)] {
            let p = LimdParams::for_oracle(tau, lambda, eta, 1.0);
            assert!((p.c() - lambda * (1.0 + 1.0 / (4.0 * tau))).abs() <= 1e-12 * p.c());
            assert!(p.eta <= eta);
        }
    }

    #[test]
    fn li_md_converges_to_prox_point() {
        let setup = GeometrySetup::ball(2).unwrap();
        let b = [0.4, -0.2];
        let y = [0.0, 0.1];
        let mut g = |x: &[f64]| Ok(vec![x[0] - b[0], x[1] - b[1]]);
        let params = LimdParams {
            lambda: 1.0,
            eta: 0.01,
            steps: 2000,
            rho: 10.0,
        };
        let res = li_md(&mut g, &setup, &y, params).unwrap();
        assert!(!res.out_of_bound);
        let target = [(b[0] + y[0]) / 2.0, (b[1] + y[1]) / 2.0];
        assert!(crate::linalg::dist_p(&res.z, &target, 2) < 1e-3);
    }

    #[test]
    fn li_md_leaves_small_ball() {
        let setup = GeometrySetup::ball(2).unwrap();
        let y = [0.0, 0.0];
        let mut g = |_: &[f64]| Ok(vec![-100.0, 0.0]);
        let params = LimdParams {
            lambda: 0.0,
            eta: 1.0,
            steps: 3,
            rho: 0.01,
        };
        let res = li_md(&mut g, &setup, &y, params).unwrap();
        assert!(res.out_of_bound);
        assert!((norm2(&res.z) - 0.01).abs() < 1e-15);
        // x_1 = y, w_1 = (1, 0) after projection, x_2 = (0.5, 0) is outside
        assert_eq!(res.grad_calls, 1);
        assert_eq!(res.z, res.w);
    }

    #[test]
    fn theory_constants() {
        let t = OracleProfile::theory();
        assert!((t.gamma(4.0) - 1.0 / (8192.0 * 1024.0)).abs() < 1e-20);
        assert_eq!(bisection_rounds(4.0, 1.0, 1.0), (9600f64 * 64.0).log2().ceil() as usize + 1);
    }
}
