//! Minimum enclosing ball via `min_x max_i ½‖x − a_i‖²`, solved by a
//! shrinking sequence of domain balls.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::accelerator::SolverProfile;
use crate::apps::smooth_max::{solve_smooth_max, SmoothMaxOptions};
use crate::error::{Error, Result};
use crate::geometry::{GeometrySetup, SetupKind};
use crate::linalg::{norm2, Matrix};
use crate::problem::{Objective, QuadraticFamily};
use crate::rng::derive_seed;

/// Points translated so that `a_1 = 0` and scaled so that `max ‖a_i‖₂ = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MebInstance {
    points: Vec<Vec<f64>>,
    shift: Vec<f64>,
    scale: f64,
}

impl MebInstance {
    pub fn new(raw: Vec<Vec<f64>>) -> Result<Self> {
        let first = raw
            .first()
            .ok_or_else(|| Error::InvalidParams("empty point set".into()))?
            .clone();
        let d = first.len();
        if d == 0 {
            return Err(Error::InvalidParams("points must have positive dimension".into()));
        }
        for p in &raw {
            crate::error::check_dim(d, p.len())?;
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("point coordinates"));
            }
        }
        let mut points: Vec<Vec<f64>> = raw
            .iter()
            .map(|p| p.iter().zip(&first).map(|(a, b)| a - b).collect())
            .collect();
        let max = points.iter().map(|p| norm2(p)).fold(0.0, f64::max);
        // coincident points keep unit scale
        let scale = if max > 0.0 { max } else { 1.0 };
        for p in &mut points {
            p.iter_mut().for_each(|v| *v /= scale);
        }
        Ok(Self {
            points,
            shift: first,
            scale,
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `max_i ½‖x − a_i‖²` in normalized coordinates.
    pub fn f_max(&self, x: &[f64]) -> f64 {
        self.points
            .iter()
            .map(|p| 0.5 * p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_original(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.shift).map(|(v, s)| v * self.scale + s).collect()
    }
}

/// `⌈log₂(4/ε)⌉`.
pub fn level_count(eps: f64) -> usize {
    (4.0 / eps).log2().ceil().max(1.0) as usize
}

/// `⌈log₂(10K)⌉`.
pub fn repeats_per_level(levels: usize) -> usize {
    (10.0 * levels as f64).log2().ceil().max(1.0) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MebLevel {
    pub level: usize,
    pub domain_radius: f64,
    pub eps: f64,
    pub f_max: f64,
    pub candidates: Vec<f64>,
    pub evaluations: u64,
    pub outer_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MebReport {
    /// Center in normalized coordinates.
    pub center: Vec<f64>,
    /// `√(2 f_max(center))` in normalized coordinates.
    pub radius: f64,
    pub center_original: Vec<f64>,
    pub radius_original: f64,
    pub levels: Vec<MebLevel>,
    pub evaluations: u64,
    pub wall_time: f64,
}

/// Level `k` minimizes over the ball of radius `2^{−(k−1)/2}` around the
/// previous center to accuracy `2^{−(k+1)}`, keeping the best of
/// `⌈log₂(10K)⌉` runs.
pub fn solve_meb(inst: &MebInstance, eps: f64, seed: u64, profile: &SolverProfile) -> Result<MebReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParams(format!("MEB accuracy must lie in (0, 1), got {eps}")));
    }
    let start = std::time::Instant::now();
    let d = inst.dim();
    let mut center = vec![0.0; d];
    let mut levels = Vec::new();
    let mut evaluations = 0u64;
    let degenerate = inst.points.iter().all(|p| p.iter().all(|&v| v == 0.0));
    if !degenerate {
        let k_total = level_count(eps);
        let repeats = repeats_per_level(k_total);
        let unit = GeometrySetup::ball(d)?;
        for k in 1..=k_total {
            let rk = 2f64.powf(-((k - 1) as f64) / 2.0);
            let eps_k = 2f64.powi(-(k as i32 + 1));
            let mut centers = Matrix::zeros(inst.n(), d);
            for (i, p) in inst.points.iter().enumerate() {
                for (j, v) in centers.row_mut(i).iter_mut().enumerate() {
                    *v = (p[j] - center[j]) / rk;
                }
            }
            // f_i(c + r_k u) = ½ r_k² ‖u − (a_i − c)/r_k‖²
            let family: Arc<dyn Objective> = Arc::new(QuadraticFamily::new(centers, rk * rk, &unit)?);
            let mut best: Option<(f64, Vec<f64>)> = None;
            let mut candidates = Vec::with_capacity(repeats);
            let mut iters = 0;
            for rep in 0..repeats {
                let s = derive_seed(seed, ((k as u64) << 16) | rep as u64);
                let run = solve_smooth_max(
                    family.clone(),
                    SetupKind::Ball,
                    eps_k,
                    s,
                    profile,
                    &SmoothMaxOptions::default(),
                )?;
                evaluations += run.solver.counters.evaluations() + inst.n() as u64;
                iters += run.solver.outer_iterations;
                let x: Vec<f64> = center
                    .iter()
                    .zip(&run.solver.x)
                    .map(|(c, u)| c + rk * u)
                    .collect();
                let v = inst.f_max(&x);
                candidates.push(v);
                if best.as_ref().is_none_or(|(b, _)| v < *b) {
                    best = Some((v, x));
                }
            }
            let (v, x) = best.expect("at least one repeat");
            center = x;
            levels.push(MebLevel {
                level: k,
                domain_radius: rk,
                eps: eps_k,
                f_max: v,
                candidates,
                evaluations,
                outer_iterations: iters,
            });
        }
    }
    let radius = (2.0 * inst.f_max(&center)).sqrt();
    Ok(MebReport {
        center_original: inst.to_original(&center),
        radius_original: radius * inst.scale,
        center,
        radius,
        levels,
        evaluations,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_and_counts() {
        let inst = MebInstance::new(vec![vec![1.0, 1.0], vec![3.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(inst.points()[0], vec![0.0, 0.0]);
        assert_eq!(inst.points()[1], vec![1.0, 0.0]);
        assert_eq!(inst.points()[2], vec![0.0, 0.5]);
        assert_eq!(inst.to_original(&[0.5, 0.0]), vec![2.0, 1.0]);
        assert_eq!(level_count(0.01), 9);
        assert_eq!(repeats_per_level(9), 7);
    }

    #[test]
    fn single_point_is_its_own_ball() {
        let inst = MebInstance::new(vec![vec![0.0, 0.0, 0.0]]).unwrap();
        let rep = solve_meb(&inst, 0.1, 1, &SolverProfile::practical()).unwrap();
        assert_eq!(rep.center, vec![0.0; 3]);
        assert_eq!(rep.radius, 0.0);
    }
}
