//! The two supported domain geometries: the Euclidean unit ball with
//! `V_x(y) = ½‖x − y‖²`, and the truncated simplex `Δ_ν = {x ∈ Δ : x ≥ ν}`
//! with the KL divergence `V_x(y) = Σ y_i log(y_i / x_i)`.
//!
//! Every function here is pure; nothing caches state between calls.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist_p, norm2};

/// Relative feasibility tolerance for points.
pub const FEAS_TOL: f64 = 1e-9;

/// Points with norm at most `1 + BALL_SLACK` are left untouched by projection.
const BALL_SLACK: f64 = 1e-12;

/// Entries below this are rejected wherever a logarithm is taken.
const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetupKind {
    Ball,
    TruncatedSimplex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometrySetup {
    kind: SetupKind,
    dim: usize,
    nu: f64,
}

impl GeometrySetup {
    pub fn ball(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParams("dimension must be positive".into()));
        }
        Ok(Self {
            kind: SetupKind::Ball,
            dim,
            nu: 0.0,
        })
    }

    /// `nu = 0` gives the full simplex. It is accepted for the geometric
    /// primitives, but the oracle needs `nu > 0` for a finite `τ`.
    pub fn truncated_simplex(dim: usize, nu: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParams("dimension must be positive".into()));
        }
        if !(0.0..=1.0 / (2.0 * dim as f64)).contains(&nu) {
            return Err(Error::InvalidParams(format!(
                "truncation nu = {nu} outside [0, 1/(2d)] for d = {dim}"
            )));
        }
        Ok(Self {
            kind: SetupKind::TruncatedSimplex,
            dim,
            nu,
        })
    }

    pub fn kind(&self) -> SetupKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Primal norm index: 2 for the ball, 1 for the simplex.
    pub fn p(&self) -> u8 {
        match self.kind {
            SetupKind::Ball => 2,
            SetupKind::TruncatedSimplex => 1,
        }
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        crate::linalg::norm_p(v, self.p())
    }

    pub fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        dist_p(a, b, self.p())
    }

    /// Dual norm of a gradient: `‖·‖₂` for the ball, `‖·‖_∞` for the simplex.
    pub fn dual_norm(&self, g: &[f64]) -> f64 {
        match self.kind {
            SetupKind::Ball => norm2(g),
            SetupKind::TruncatedSimplex => crate::linalg::norm_inf(g),
        }
    }

    /// Constant in the `τ`-triangle inequality.
    pub fn tau(&self) -> f64 {
        match self.kind {
            SetupKind::Ball => 4.0,
            SetupKind::TruncatedSimplex => {
                if self.nu > 0.0 {
                    6.0 * (1.0 / self.nu).ln()
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Upper bound on `max_{x,y ∈ 𝒳} V_x(y)`.
    pub fn max_divergence(&self) -> f64 {
        match self.kind {
            SetupKind::Ball => 2.0,
            SetupKind::TruncatedSimplex => {
                if self.nu > 0.0 {
                    (1.0 / self.nu).ln()
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// The canonical starting point: the origin or the uniform distribution.
    pub fn center(&self) -> Vec<f64> {
        match self.kind {
            SetupKind::Ball => vec![0.0; self.dim],
            SetupKind::TruncatedSimplex => vec![1.0 / self.dim as f64; self.dim],
        }
    }

    pub fn is_feasible(&self, x: &[f64]) -> bool {
        self.check_point(x).is_ok()
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point"));
        }
        match self.kind {
            SetupKind::Ball => {
                let n = norm2(x);
                if n > 1.0 + FEAS_TOL {
                    return Err(Error::InfeasibleInput(format!("‖x‖₂ = {n} > 1")));
                }
            }
            SetupKind::TruncatedSimplex => {
                let s: f64 = x.iter().sum();
                if (s - 1.0).abs() > FEAS_TOL {
                    return Err(Error::InfeasibleInput(format!("Σx = {s} ≠ 1")));
                }
                let lo = self.nu - FEAS_TOL * self.nu.max(1.0 / self.dim as f64);
                if let Some(v) = x.iter().find(|&&v| v < lo) {
                    return Err(Error::InfeasibleInput(format!(
                        "coordinate {v} below truncation {}",
                        self.nu
                    )));
                }
            }
        }
        Ok(())
    }

    /// Bregman divergence `V_x(y)`.
    ///
    /// The simplex branch evaluates `Σ y log(y/x) − y + x`, which coincides
    /// with the KL divergence on the simplex and stays nonnegative when the
    /// inputs are off it by rounding.
    pub fn bregman(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, y.len())?;
        match self.kind {
            SetupKind::Ball => {
                let d = dist_p(x, y, 2);
                Ok(0.5 * d * d)
            }
            SetupKind::TruncatedSimplex => {
                let mut acc = 0.0;
                for (&xi, &yi) in x.iter().zip(y) {
                    if yi < 0.0 || !(xi >= LOG_FLOOR) {
                        return Err(Error::NonFinite("KL divergence"));
                    }
                    if yi > 0.0 {
                        if yi < LOG_FLOOR {
                            return Err(Error::NonFinite("KL divergence"));
                        }
                        acc += yi * (yi / xi).ln() - yi + xi;
                    } else {
                        acc += xi;
                    }
                }
                if acc.is_finite() {
                    Ok(acc.max(0.0))
                } else {
                    Err(Error::NonFinite("KL divergence"))
                }
            }
        }
    }

    /// `argmin_{w ∈ 𝒳} η⟨g, w⟩ + ηλ V_y(w) + V_x(w)`.
    pub fn prox_step(
        &self,
        g: &[f64],
        eta: f64,
        lambda: f64,
        y: &[f64],
        x: &[f64],
    ) -> Result<Vec<f64>> {
        check_dim(self.dim, g.len())?;
        check_dim(self.dim, y.len())?;
        check_dim(self.dim, x.len())?;
        if !(eta > 0.0) || !(lambda >= 0.0) || !eta.is_finite() || !lambda.is_finite() {
            return Err(Error::InvalidParams(format!(
                "prox step needs eta > 0 and lambda >= 0, got eta = {eta}, lambda = {lambda}"
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("prox gradient"));
        }
        let el = eta * lambda;
        match self.kind {
            SetupKind::Ball => {
                let c: Vec<f64> = (0..self.dim)
                    .map(|i| (x[i] + el * y[i] - eta * g[i]) / (1.0 + el))
                    .collect();
                Ok(project_ball(c))
            }
            SetupKind::TruncatedSimplex => {
                let mut logits = Vec::with_capacity(self.dim);
                for i in 0..self.dim {
                    if !(x[i] >= LOG_FLOOR) || !(y[i] >= LOG_FLOOR) {
                        return Err(Error::InfeasibleInput(
                            "simplex prox needs strictly positive x and y".into(),
                        ));
                    }
                    logits.push((x[i].ln() + el * y[i].ln() - eta * g[i]) / (1.0 + el));
                }
                project_logits(&logits, self.nu)
            }
        }
    }

    /// `∇φ*` of the weighted average of `∇φ(w_t)`, with weight 1 on each
    /// point and an extra `last_weight` on the final one.
    pub fn mirror_average(&self, points: &[Vec<f64>], last_weight: f64) -> Result<Vec<f64>> {
        let mut acc = MirrorAccumulator::new(*self);
        for p in points {
            acc.push(p)?;
        }
        acc.finish(last_weight)
    }

    /// Radius `R` with `max_{x ∈ 𝒳} V_{x0}(x) ≤ ½R²`.
    pub fn domain_radius_bound(&self, x0: &[f64]) -> Result<f64> {
        check_dim(self.dim, x0.len())?;
        match self.kind {
            SetupKind::Ball => Ok(1.0 + norm2(x0)),
            SetupKind::TruncatedSimplex => {
                let min = x0.iter().cloned().fold(f64::INFINITY, f64::min);
                if !(min > 0.0) {
                    return Err(Error::InfeasibleInput("x0 must be strictly positive".into()));
                }
                Ok((2.0 * (1.0 / min).ln()).sqrt())
            }
        }
    }

    /// Map an arbitrary vector into the domain (Euclidean projection for the
    /// ball, KL projection of a strictly positive vector for the simplex).
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        match self.kind {
            SetupKind::Ball => Ok(project_ball(x.to_vec())),
            SetupKind::TruncatedSimplex => {
                if x.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                    return Err(Error::InfeasibleInput(
                        "simplex projection needs strictly positive input".into(),
                    ));
                }
                let logits: Vec<f64> = x.iter().map(|v| v.ln()).collect();
                project_logits(&logits, self.nu)
            }
        }
    }
}

fn project_ball(mut c: Vec<f64>) -> Vec<f64> {
    let n = norm2(&c);
    if n > 1.0 + BALL_SLACK {
        c.iter_mut().for_each(|v| *v /= n);
    }
    c
}

/// KL projection of `exp(logits)` onto `Δ_ν` by water-filling.
///
/// Entries are sorted descending (stable, so ties keep index order); the
/// cutoff `i'` is the largest index with `ξ_{σ_i'} / Σ_{j ≤ i'} ξ_{σ_j} ≥ ν /
/// (1 − ν(d − i'))`. The top `i'` entries are rescaled, the rest pinned to `ν`.
pub fn project_logits(logits: &[f64], nu: f64) -> Result<Vec<f64>> {
    let d = logits.len();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NonFinite("water-filling logits"));
    }
    let xi: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    if nu == 0.0 {
        let s: f64 = xi.iter().sum();
        return Ok(xi.into_iter().map(|v| v / s).collect());
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| xi[b].partial_cmp(&xi[a]).unwrap_or(std::cmp::Ordering::Equal));

    let mut prefix = 0.0;
    let mut cut = 1;
    let mut cut_sum = xi[order[0]];
    for (k, &idx) in order.iter().enumerate() {
        prefix += xi[idx];
        let i = k + 1;
        let free_mass = 1.0 - nu * (d - i) as f64;
        if free_mass > 0.0 && xi[idx] * free_mass >= nu * prefix {
            cut = i;
            cut_sum = prefix;
        }
    }
    let scale = (1.0 - nu * (d - cut) as f64) / cut_sum;
    let mut w = vec![nu; d];
    for &idx in &order[..cut] {
        w[idx] = xi[idx] * scale;
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("water-filling"));
    }
    Ok(w)
}

/// Streaming form of [`GeometrySetup::mirror_average`]: keeps the running
/// sum of mirror images `∇φ(w_t)` and the last point pushed.
#[derive(Debug, Clone)]
pub struct MirrorAccumulator {
    setup: GeometrySetup,
    sum: Vec<f64>,
    last: Vec<f64>,
    count: usize,
}

impl MirrorAccumulator {
    pub fn new(setup: GeometrySetup) -> Self {
        Self {
            setup,
            sum: vec![0.0; setup.dim],
            last: vec![0.0; setup.dim],
            count: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, w: &[f64]) -> Result<()> {
        check_dim(self.setup.dim, w.len())?;
        match self.setup.kind {
            SetupKind::Ball => {
                for (s, v) in self.sum.iter_mut().zip(w) {
                    *s += v;
                }
                self.last.copy_from_slice(w);
            }
            SetupKind::TruncatedSimplex => {
                for (i, &v) in w.iter().enumerate() {
                    if !(v >= LOG_FLOOR) {
                        return Err(Error::NonFinite("mirror average of non-positive point"));
                    }
                    let l = v.ln();
                    self.sum[i] += l;
                    self.last[i] = l;
                }
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn finish(&self, last_weight: f64) -> Result<Vec<f64>> {
        if self.count == 0 {
            return Err(Error::InvalidParams("mirror average of zero points".into()));
        }
        if !(last_weight >= 0.0) || !last_weight.is_finite() {
            return Err(Error::InvalidParams(format!("last weight {last_weight}")));
        }
        let total = self.count as f64 + last_weight;
        let theta: Vec<f64> = self
            .sum
            .iter()
            .zip(&self.last)
            .map(|(s, l)| (s + last_weight * l) / total)
            .collect();
        match self.setup.kind {
            SetupKind::Ball => Ok(project_ball(theta)),
            SetupKind::TruncatedSimplex => project_logits(&theta, self.setup.nu),
        }
    }
}
