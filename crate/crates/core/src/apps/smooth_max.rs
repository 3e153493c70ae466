//! General front-end: softmax smoothing, truncation and the accelerated
//! ball-oracle loop.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::accelerator::{accelerate, AccelParams, GradientSource, ProfiledOracle, SolverProfile, SolverReport};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{GeometrySetup, SetupKind};
use crate::problem::Objective;

/// Where the accelerator's gradients come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    #[default]
    Sampled,
    Exact,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SmoothMaxOptions {
    /// Starting point for both `x0` and `v0`; the domain center if absent.
    pub x0: Option<Vec<f64>>,
    /// Overrides the ball radius `r`.
    pub r: Option<f64>,
    /// Overrides the distance bound `R`.
    pub radius: Option<f64>,
    pub gradients: GradientMode,
}

/// Derived solver parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothMaxPlan {
    pub eps: f64,
    pub eps_prime: f64,
    pub nu: f64,
    pub r: f64,
    pub radius: f64,
    pub e0: f64,
    pub gamma: f64,
    pub accel_eps: f64,
}

/// `ε/(2 ln n)`, or `ε/2` for a single function.
pub fn smoothing_eps(eps: f64, n: usize) -> f64 {
    if n <= 1 {
        eps / 2.0
    } else {
        eps / (2.0 * (n as f64).ln())
    }
}

/// `min{√(2ε′/L_g), ε√(2d)/L_f}`, with a vanishing term dropped.
pub fn default_radius(eps_prime: f64, eps: f64, dim: usize, lf: f64, lg: f64) -> f64 {
    let smooth = if lg > 0.0 {
        (2.0 * eps_prime / lg).sqrt()
    } else {
        f64::INFINITY
    };
    let lip = if lf > 0.0 {
        eps * (2.0 * dim as f64).sqrt() / lf
    } else {
        f64::INFINITY
    };
    smooth.min(lip)
}

/// `ε/(4dL_f)`, capped at `1/(2d)`.
pub fn truncation(eps: f64, dim: usize, lf: f64) -> f64 {
    let cap = 0.5 / dim as f64;
    if lf > 0.0 {
        (eps / (4.0 * dim as f64 * lf)).min(cap)
    } else {
        cap
    }
}

pub fn geometry_for(kind: SetupKind, dim: usize, nu: f64) -> Result<GeometrySetup> {
    match kind {
        SetupKind::Ball => GeometrySetup::ball(dim),
        SetupKind::TruncatedSimplex => GeometrySetup::truncated_simplex(dim, nu),
    }
}

pub fn plan(
    problem: &dyn Objective,
    kind: SetupKind,
    eps: f64,
    profile: &SolverProfile,
    opts: &SmoothMaxOptions,
) -> Result<(GeometrySetup, Vec<f64>, SmoothMaxPlan)> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParams(format!("ε must be positive, got {eps}")));
    }
    let d = problem.dim();
    let lf = problem.lipschitz();
    let lg = problem.smoothness();
    let nu = truncation(eps, d, lf);
    let setup = geometry_for(kind, d, nu)?;
    let x0 = match &opts.x0 {
        Some(x) => {
            check_dim(d, x.len())?;
            setup.check_point(x)?;
            x.clone()
        }
        None => setup.center(),
    };
    let eps_prime = smoothing_eps(eps, problem.n());
    let r = opts
        .r
        .unwrap_or_else(|| default_radius(eps_prime, eps, d, lf, lg));
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParams(format!(
            "ball radius r = {r}; constant families need an explicit r"
        )));
    }
    let radius = match opts.radius {
        Some(v) => v,
        None => setup.domain_radius_bound(&x0)?,
    };
    // a vanishing Lipschitz constant still needs a positive gap bound
    let e0 = (lf * radius).max(eps);
    let gamma = profile.oracle.gamma(setup.tau());
    let plan = SmoothMaxPlan {
        eps,
        eps_prime,
        nu,
        r,
        radius,
        e0,
        gamma,
        accel_eps: eps * profile.accuracy_fraction,
    };
    Ok((setup, x0, plan))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothMaxReport {
    pub plan: SmoothMaxPlan,
    pub solver: SolverReport,
}

pub fn solve_smooth_max(
    problem: Arc<dyn Objective>,
    kind: SetupKind,
    eps: f64,
    seed: u64,
    profile: &SolverProfile,
    opts: &SmoothMaxOptions,
) -> Result<SmoothMaxReport> {
    let (setup, x0, plan) = plan(problem.as_ref(), kind, eps, profile, opts)?;
    let source = match opts.gradients {
        GradientMode::Sampled => GradientSource::Softmax {
            eps_prime: plan.eps_prime,
        },
        GradientMode::Exact => GradientSource::ExactSmooth {
            eps_prime: plan.eps_prime,
        },
    };
    let mut oracle = ProfiledOracle(profile.oracle);
    let solver = accelerate(
        problem,
        &setup,
        &x0,
        &x0,
        AccelParams {
            r: plan.r,
            radius: plan.radius,
            e0: plan.e0,
            eps: plan.accel_eps,
            gamma: plan.gamma,
        },
        profile,
        source,
        &mut oracle,
        seed,
    )?;
    Ok(SmoothMaxReport { plan, solver })
}
