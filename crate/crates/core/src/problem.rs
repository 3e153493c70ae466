//! Function families `{f_i}` together with their Lipschitz and smoothness
//! constants, and the softmax smoothing of their maximum.

use crate::error::{check_dim, Error, Result};
use crate::geometry::{GeometrySetup, SetupKind};
use crate::linalg::{dot, norm2, norm_inf, Matrix};

/// A finite family of convex functions on `R^d`.
///
/// `lipschitz` bounds `‖∇f_i(x)‖_{p*}` over the domain the family was built
/// for; `smoothness` bounds the Lipschitz constant of `∇f_i` from the primal
/// `p`-norm to the dual norm.
pub trait Objective: Send + Sync {
    fn n(&self) -> usize;
    fn dim(&self) -> usize;
    fn value(&self, i: usize, x: &[f64]) -> f64;
    fn gradient(&self, i: usize, x: &[f64], out: &mut [f64]);
    fn lipschitz(&self) -> f64;
    fn smoothness(&self) -> f64;

    fn values(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| self.value(i, x)).collect()
    }

    /// `(max_i f_i(x), argmax)`, ties to the smallest index.
    fn f_max(&self, x: &[f64]) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for i in 0..self.n() {
            let v = self.value(i, x);
            if v > best.0 {
                best = (v, i);
            }
        }
        best
    }
}

/// `ε′ log Σ_i exp(f_i(x)/ε′)`, evaluated with max-subtraction.
pub fn f_smax(problem: &dyn Objective, x: &[f64], eps_prime: f64) -> f64 {
    let vals = problem.values(x);
    log_sum_exp_scaled(&vals, eps_prime)
}

pub(crate) fn log_sum_exp_scaled(vals: &[f64], eps_prime: f64) -> f64 {
    let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = vals.iter().map(|v| ((v - m) / eps_prime).exp()).sum();
    m + eps_prime * s.ln()
}

/// `f_i(x) = ⟨a_i, x⟩ + b_i` with the rows of `A` as the `a_i`.
#[derive(Debug, Clone)]
pub struct LinearFamily {
    a: Matrix,
    b: Vec<f64>,
    lipschitz: f64,
}

impl LinearFamily {
    /// `‖∇f_i‖_{p*}` is the dual row norm, so `L_f = ‖A‖_{p→∞}`.
    pub fn new(a: Matrix, setup: &GeometrySetup) -> Result<Self> {
        check_dim(setup.dim(), a.cols())?;
        let b = vec![0.0; a.rows()];
        Self::with_offsets(a, b, setup)
    }

    pub fn with_offsets(a: Matrix, b: Vec<f64>, setup: &GeometrySetup) -> Result<Self> {
        check_dim(setup.dim(), a.cols())?;
        check_dim(a.rows(), b.len())?;
        if a.rows() == 0 {
            return Err(Error::InvalidParams("empty function family".into()));
        }
        if a.data().iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear family"));
        }
        let lipschitz = a.norm_p_to_inf(setup.p());
        Ok(Self { a, b, lipschitz })
    }

    /// Replaces `L_f` by an upper bound, accepting `1e−9` relative shortfall.
    pub fn with_lipschitz(mut self, lf: f64) -> Result<Self> {
        if !(lf >= self.lipschitz * (1.0 - 1e-9)) || !lf.is_finite() {
            return Err(Error::InvalidParams(format!(
                "Lipschitz bound {lf} is below the computed {}",
                self.lipschitz
            )));
        }
        self.lipschitz = lf.max(self.lipschitz);
        Ok(self)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }
}

impl Objective for LinearFamily {
    fn n(&self) -> usize {
        self.a.rows()
    }

    fn dim(&self) -> usize {
        self.a.cols()
    }

    fn value(&self, i: usize, x: &[f64]) -> f64 {
        dot(self.a.row(i), x) + self.b[i]
    }

    fn gradient(&self, i: usize, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(self.a.row(i));
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn smoothness(&self) -> f64 {
        0.0
    }
}

/// `f_i(x) = ½κ‖x − b_i‖₂² + c_i`.
#[derive(Debug, Clone)]
pub struct QuadraticFamily {
    centers: Matrix,
    offsets: Vec<f64>,
    kappa: f64,
    lipschitz: f64,
    smoothness: f64,
}

impl QuadraticFamily {
    pub fn new(centers: Matrix, kappa: f64, setup: &GeometrySetup) -> Result<Self> {
        let offsets = vec![0.0; centers.rows()];
        Self::with_offsets(centers, offsets, kappa, setup)
    }

    /// Lipschitz bound over the given domain: `κ(1 + max‖b_i‖₂)` on the unit
    /// ball and `κ(1 + max‖b_i‖_∞)` on the simplex. The smoothness constant is
    /// `κ` on the ball and `κ` on the simplex too, since
    /// `‖κ(x − y)‖_∞ ≤ κ‖x − y‖₁`.
    pub fn with_offsets(
        centers: Matrix,
        offsets: Vec<f64>,
        kappa: f64,
        setup: &GeometrySetup,
    ) -> Result<Self> {
        check_dim(setup.dim(), centers.cols())?;
        check_dim(centers.rows(), offsets.len())?;
        if centers.rows() == 0 {
            return Err(Error::InvalidParams("empty function family".into()));
        }
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidParams(format!("curvature {kappa}")));
        }
        if centers.data().iter().chain(&offsets).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("quadratic family"));
        }
        let reach = (0..centers.rows())
            .map(|i| match setup.kind() {
                SetupKind::Ball => norm2(centers.row(i)),
                SetupKind::TruncatedSimplex => norm_inf(centers.row(i)),
            })
            .fold(0.0, f64::max);
        Ok(Self {
            centers,
            offsets,
            kappa,
            lipschitz: kappa * (1.0 + reach),
            smoothness: kappa,
        })
    }

    pub fn centers(&self) -> &Matrix {
        &self.centers
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

impl Objective for QuadraticFamily {
    fn n(&self) -> usize {
        self.centers.rows()
    }

    fn dim(&self) -> usize {
        self.centers.cols()
    }

    fn value(&self, i: usize, x: &[f64]) -> f64 {
        let c = self.centers.row(i);
        let s: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
        0.5 * self.kappa * s + self.offsets[i]
    }

    fn gradient(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let c = self.centers.row(i);
        for ((o, a), b) in out.iter_mut().zip(x).zip(c) {
            *o = self.kappa * (a - b);
        }
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }
}
