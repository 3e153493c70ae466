//! Matrix games `min_{x ∈ 𝒳} max_{y ∈ Δⁿ} xᵀAy`, written as `f_max` over the
//! linear functions `f_i(x) = ⟨a_i, x⟩`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::accelerator::SolverProfile;
use crate::apps::smooth_max::{solve_smooth_max, SmoothMaxOptions, SmoothMaxReport};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{GeometrySetup, SetupKind};
use crate::linalg::{dot, Matrix};
use crate::problem::LinearFamily;
use crate::refcheck::{best_response_lower_bound, empirical};

/// Norm-bound slack accepted at load.
const NORM_SLACK: f64 = 1e-9;

/// The strategy vectors `a_i` are stored as the rows of an `n × d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGameInstance {
    a: Matrix,
    kind: SetupKind,
}

impl MatrixGameInstance {
    /// Requires `max_i ‖a_i‖₂ ≤ 1` for the ball and `max |a_ij| ≤ 1` for the
    /// simplex.
    pub fn new(a: Matrix, kind: SetupKind) -> Result<Self> {
        if a.rows() == 0 || a.cols() == 0 {
            return Err(Error::InvalidParams("empty game matrix".into()));
        }
        if a.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("game matrix"));
        }
        let p = match kind {
            SetupKind::Ball => 2,
            SetupKind::TruncatedSimplex => 1,
        };
        let norm = a.norm_p_to_inf(p);
        if norm > 1.0 + NORM_SLACK {
            return Err(Error::NormBoundViolated { norm });
        }
        Ok(Self { a, kind })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn kind(&self) -> SetupKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    /// `max_i ⟨a_i, x⟩`.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok((0..self.n())
            .map(|i| dot(self.a.row(i), x))
            .fold(f64::NEG_INFINITY, f64::max))
    }
}

/// `min(1, √d ε)`.
pub fn game_radius(dim: usize, eps: f64) -> f64 {
    ((dim as f64).sqrt() * eps).min(1.0)
}

/// Which dual candidate produced the certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualSource {
    AllRounds,
    Weighted,
    LastRound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCertificate {
    pub primal_value: f64,
    pub lower_bound: f64,
    /// `primal_value − lower_bound ≥ f_max(x) − f*`.
    pub gap: f64,
    pub dual_source: DualSource,
    pub y: Vec<f64>,
}

/// Best certificate over the accepted-index frequency candidates.
pub fn certify(inst: &MatrixGameInstance, x: &[f64], report: &SmoothMaxReport) -> Result<GapCertificate> {
    let primal_value = inst.value(x)?;
    let s = &report.solver;
    let mut candidates = Vec::new();
    if s.index_counts.iter().any(|&k| k > 0) {
        candidates.push((DualSource::AllRounds, empirical(&s.index_counts)));
    }
    if s.weighted_index_freq.iter().any(|&w| w > 0.0) {
        candidates.push((DualSource::Weighted, s.weighted_index_freq.clone()));
    }
    if s.last_round_indices.iter().any(|&k| k > 0) {
        candidates.push((DualSource::LastRound, empirical(&s.last_round_indices)));
    }
    if candidates.is_empty() {
        // no round ran: fall back to the uniform mixed strategy
        candidates.push((DualSource::AllRounds, vec![1.0 / inst.n() as f64; inst.n()]));
    }
    let mut best: Option<GapCertificate> = None;
    for (src, y) in candidates {
        let lb = best_response_lower_bound(inst, &y)?;
        if best.as_ref().is_none_or(|b| lb > b.lower_bound) {
            best = Some(GapCertificate {
                primal_value,
                lower_bound: lb,
                gap: primal_value - lb,
                dual_source: src,
                y,
            });
        }
    }
    Ok(best.expect("at least one candidate"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameReport {
    pub x: Vec<f64>,
    pub certificate: GapCertificate,
    pub run: SmoothMaxReport,
}

/// Starts from `x0 = v0 = 0` on the ball and the uniform point on the simplex.
pub fn solve_matrix_game(
    inst: &MatrixGameInstance,
    eps: f64,
    seed: u64,
    profile: &SolverProfile,
) -> Result<GameReport> {
    solve_matrix_game_with(inst, eps, seed, profile, SmoothMaxOptions::default())
}

pub fn solve_matrix_game_with(
    inst: &MatrixGameInstance,
    eps: f64,
    seed: u64,
    profile: &SolverProfile,
    mut opts: SmoothMaxOptions,
) -> Result<GameReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParams(format!("game accuracy must lie in (0, 1), got {eps}")));
    }
    let shape = match inst.kind() {
        SetupKind::Ball => GeometrySetup::ball(inst.dim())?,
        SetupKind::TruncatedSimplex => GeometrySetup::truncated_simplex(inst.dim(), 0.0)?,
    };
    // the load-time bound ‖A‖ ≤ 1 stands in for the computed constant
    let family = LinearFamily::new(inst.matrix().clone(), &shape)?.with_lipschitz(1.0)?;
    if opts.r.is_none() {
        opts.r = Some(game_radius(inst.dim(), eps));
    }
    let run = solve_smooth_max(Arc::new(family), inst.kind(), eps, seed, profile, &opts)?;
    let x = run.solver.x.clone();
    let certificate = certify(inst, &x, &run)?;
    Ok(GameReport { x, certificate, run })
}
