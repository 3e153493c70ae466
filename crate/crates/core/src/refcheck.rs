//! Brute-force reference oracles and statistical helpers for tests.
//!
//! Nothing here calls into the modules it is meant to validate: projections,
//! divergences and softmax are reimplemented from scratch.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::apps::game::MatrixGameInstance;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{GeometrySetup, SetupKind};
use crate::linalg::Matrix;
use crate::problem::Objective;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceBudget {
    pub max_iters: usize,
    pub tolerance: f64,
    pub rng_seed: u64,
}

impl Default for ReferenceBudget {
    fn default() -> Self {
        Self {
            max_iters: 200_000,
            tolerance: 1e-10,
            rng_seed: 0,
        }
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let z = s - a;
    (s, (a - (s - z)) + (b - z))
}

/// Compensated dot product (twice working precision).
pub fn dot2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let p = x * y;
        let pe = x.mul_add(y, -p);
        let (t, se) = two_sum(s, p);
        s = t;
        c += se + pe;
    }
    s + c
}

/// Compensated summation.
pub fn sum2(a: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for &x in a {
        let (t, e) = two_sum(s, x);
        s = t;
        c += e;
    }
    s + c
}

pub fn exact_matvec(a: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(a.cols(), x.len())?;
    Ok((0..a.rows()).map(|i| dot2(a.row(i), x)).collect())
}

/// `p_i ∝ exp(f_i(x)/ε′)`.
pub fn exact_softmax_dist(problem: &dyn Objective, x: &[f64], eps_prime: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..problem.n()).map(|i| problem.value(i, x)).collect();
    softmax(&v, eps_prime)
}

pub fn softmax(values: &[f64], eps_prime: f64) -> Vec<f64> {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = values.iter().map(|v| ((v - m) / eps_prime).exp()).collect();
    let z = sum2(&w);
    w.into_iter().map(|v| v / z).collect()
}

/// Euclidean projection onto `{x ≥ ν, Σx = 1}` by sorting.
pub fn euclid_project_truncated_simplex(v: &[f64], nu: f64) -> Vec<f64> {
    let d = v.len();
    let mass = 1.0 - nu * d as f64;
    let shifted: Vec<f64> = v.iter().map(|x| x - nu).collect();
    let mut u = shifted.clone();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut css = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        css += uk;
        let t = (css - mass) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    shifted.iter().map(|x| (x - theta).max(0.0) + nu).collect()
}

fn euclid_project(setup: &GeometrySetup, v: &[f64]) -> Vec<f64> {
    match setup.kind() {
        SetupKind::Ball => {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1.0 {
                v.iter().map(|x| x / n).collect()
            } else {
                v.to_vec()
            }
        }
        SetupKind::TruncatedSimplex => euclid_project_truncated_simplex(v, setup.nu()),
    }
}

/// Norm of the projected-gradient map `x − Π(x − ∇F(x))`; zero exactly at
/// the constrained minimizers of a convex `F`.
pub fn stationarity(setup: &GeometrySetup, x: &[f64], grad: &[f64]) -> f64 {
    let step: Vec<f64> = x.iter().zip(grad).map(|(a, g)| a - g).collect();
    let p = euclid_project(setup, &step);
    x.iter()
        .zip(&p)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn divergence(setup: &GeometrySetup, x: &[f64], y: &[f64]) -> f64 {
    match setup.kind() {
        SetupKind::Ball => 0.5 * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
        SetupKind::TruncatedSimplex => x
            .iter()
            .zip(y)
            .map(|(a, b)| if b > &0.0 { b * (b / a).ln() - b + a } else { *a })
            .sum(),
    }
}

/// `∇_w V_x(w)`.
fn divergence_grad(setup: &GeometrySetup, x: &[f64], w: &[f64]) -> Vec<f64> {
    match setup.kind() {
        SetupKind::Ball => w.iter().zip(x).map(|(a, b)| a - b).collect(),
        SetupKind::TruncatedSimplex => w.iter().zip(x).map(|(a, b)| (a / b).ln()).collect(),
    }
}

/// Gradient of the prox objective `η⟨g, w⟩ + ηλV_y(w) + V_x(w)` at `w`.
pub fn prox_objective_grad(
    setup: &GeometrySetup,
    g: &[f64],
    eta: f64,
    lambda: f64,
    y: &[f64],
    x: &[f64],
    w: &[f64],
) -> Vec<f64> {
    let gy = divergence_grad(setup, y, w);
    let gx = divergence_grad(setup, x, w);
    (0..w.len())
        .map(|i| eta * g[i] + eta * lambda * gy[i] + gx[i])
        .collect()
}

/// `argmin_{x ∈ 𝒳} h(x) + λV_y(x)` by accelerated projected gradient with
/// backtracking and adaptive restart. `h` returns `(value, gradient)`.
pub fn exact_prox(
    setup: &GeometrySetup,
    h: &dyn Fn(&[f64]) -> (f64, Vec<f64>),
    y: &[f64],
    lambda: f64,
    budget: ReferenceBudget,
) -> Result<Vec<f64>> {
    check_dim(setup.dim(), y.len())?;
    if setup.kind() == SetupKind::TruncatedSimplex && setup.nu() <= 0.0 {
        return Err(Error::InvalidParams("exact_prox needs nu > 0".into()));
    }
    if budget.tolerance < 1e-12 {
        return Err(Error::InvalidParams("reference tolerance below 1e-12".into()));
    }
    let obj = |x: &[f64]| -> (f64, Vec<f64>) {
        let (hv, mut hg) = h(x);
        let dg = divergence_grad(setup, y, x);
        for (a, b) in hg.iter_mut().zip(&dg) {
            *a += lambda * b;
        }
        (hv + lambda * divergence(setup, y, x), hg)
    };
    let mut x = euclid_project(setup, y);
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut l = 1.0f64;
    let (mut fx, _) = obj(&x);
    for _ in 0..budget.max_iters {
        let (fz, gz) = obj(&z);
        let next = loop {
            let cand: Vec<f64> = euclid_project(
                setup,
                &z.iter().zip(&gz).map(|(a, g)| a - g / l).collect::<Vec<_>>(),
            );
            let diff: Vec<f64> = cand.iter().zip(&z).map(|(a, b)| a - b).collect();
            let lin: f64 = diff.iter().zip(&gz).map(|(a, b)| a * b).sum();
            let sq: f64 = diff.iter().map(|a| a * a).sum();
            let (fc, _) = obj(&cand);
            if fc <= fz + lin + 0.5 * l * sq + 1e-15 * fz.abs().max(1.0) || l > 1e15 {
                break (cand, fc);
            }
            l *= 2.0;
        };
        let (cand, fc) = next;
        if fc > fx {
            // restart momentum
            z = x.clone();
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        z = cand
            .iter()
            .zip(&x)
            .map(|(c, p)| c + beta * (c - p))
            .collect();
        if setup.kind() == SetupKind::TruncatedSimplex {
            z = euclid_project(setup, &z);
        }
        x = cand;
        fx = fc;
        t = t_next;
        l = (l * 0.9).max(1e-12);
        let (_, gx) = obj(&x);
        let scaled: Vec<f64> = gx.iter().map(|g| g / l).collect();
        if stationarity(setup, &x, &scaled) * l <= budget.tolerance {
            return Ok(x);
        }
    }
    Ok(x)
}

/// `f_max(x) − lower(y)` with the best-response lower bound
/// `min_{x ∈ 𝒳} Σ_i y_i f_i(x)`: `−‖Σ y_i a_i‖₂` on the ball,
/// `min_j (Σ y_i a_i)_j` on the (untruncated) simplex.
pub fn duality_gap(inst: &MatrixGameInstance, x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(inst.value(x)? - best_response_lower_bound(inst, y)?)
}

pub fn best_response_lower_bound(inst: &MatrixGameInstance, y: &[f64]) -> Result<f64> {
    let a = inst.matrix();
    check_dim(a.rows(), y.len())?;
    let mut ay = vec![0.0; a.cols()];
    for j in 0..a.cols() {
        let col: Vec<f64> = (0..a.rows()).map(|i| a.get(i, j)).collect();
        ay[j] = dot2(&col, y);
    }
    Ok(match inst.kind() {
        SetupKind::Ball => -ay.iter().map(|v| v * v).sum::<f64>().sqrt(),
        SetupKind::TruncatedSimplex => ay.iter().cloned().fold(f64::INFINITY, f64::min),
    })
}

/// Exact minimum enclosing ball by Welzl's randomized recursion.
/// Intended for `d ≤ 3`; the support solve works in any dimension.
pub fn welzl_meb(points: &[Vec<f64>], seed: u64) -> Result<(Vec<f64>, f64)> {
    let Some(first) = points.first() else {
        return Err(Error::InvalidParams("no points".into()));
    };
    let d = first.len();
    for p in points {
        check_dim(d, p.len())?;
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    let mut rng = crate::rng::stream(seed, 0x77e1);
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let pts: Vec<&[f64]> = order.iter().map(|&i| points[i].as_slice()).collect();
    let mut support = Vec::with_capacity(d + 1);
    let (c, r2) = welzl_rec(&pts, pts.len(), &mut support, d);
    Ok((c, r2.max(0.0).sqrt()))
}

fn inside(c: &[f64], r2: f64, p: &[f64]) -> bool {
    let s: f64 = c.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum();
    s <= r2 * (1.0 + 1e-12) + 1e-15
}

fn welzl_rec<'a>(
    pts: &[&'a [f64]],
    n: usize,
    support: &mut Vec<&'a [f64]>,
    d: usize,
) -> (Vec<f64>, f64) {
    if n == 0 || support.len() == d + 1 {
        return circumball(support, d);
    }
    let p = pts[n - 1];
    let (c, r2) = welzl_rec(pts, n - 1, support, d);
    if inside(&c, r2, p) {
        return (c, r2);
    }
    support.push(p);
    let out = welzl_rec(pts, n - 1, support, d);
    support.pop();
    out
}

/// Smallest ball with all of `support` on its boundary, inside their affine
/// hull. Affinely dependent points are skipped by the pivoting solve.
pub fn circumball(support: &[&[f64]], d: usize) -> (Vec<f64>, f64) {
    match support.len() {
        0 => (vec![0.0; d], -1.0),
        1 => (support[0].to_vec(), 0.0),
        k => {
            let p0 = support[0];
            let v: Vec<Vec<f64>> = support[1..]
                .iter()
                .map(|p| p.iter().zip(p0).map(|(a, b)| a - b).collect())
                .collect();
            let m = k - 1;
            let mut mat = vec![vec![0.0; m + 1]; m];
            for i in 0..m {
                for j in 0..m {
                    mat[i][j] = 2.0 * dot2(&v[i], &v[j]);
                }
                mat[i][m] = dot2(&v[i], &v[i]);
            }
            let lam = solve_pivoting(mat);
            let mut c = p0.to_vec();
            for (l, vi) in lam.iter().zip(&v) {
                for (cj, vij) in c.iter_mut().zip(vi) {
                    *cj += l * vij;
                }
            }
            let r2 = support
                .iter()
                .map(|p| c.iter().zip(*p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .fold(0.0, f64::max);
            (c, r2)
        }
    }
}

fn solve_pivoting(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let m = a.len();
    let scale = a
        .iter()
        .flat_map(|r| r[..m].iter())
        .fold(0.0f64, |s, v| s.max(v.abs()))
        .max(1e-300);
    let mut pivot_col = vec![usize::MAX; m];
    let mut row = 0;
    for col in 0..m {
        let (best, val) = (row..m)
            .map(|r| (r, a[r][col].abs()))
            .fold((row, -1.0), |b, c| if c.1 > b.1 { c } else { b });
        if row >= m || val <= 1e-12 * scale {
            continue;
        }
        a.swap(row, best);
        for r in 0..m {
            if r != row {
                let f = a[r][col] / a[row][col];
                if f != 0.0 {
                    for c in col..=m {
                        a[r][c] -= f * a[row][c];
                    }
                }
            }
        }
        pivot_col[row] = col;
        row += 1;
    }
    let mut x = vec![0.0; m];
    for r in 0..row {
        let c = pivot_col[r];
        x[c] = a[r][m] / a[r][c];
    }
    x
}

/// Uniform point in the unit ball, or `ν + (1 − dν)·Dirichlet(α)` on the
/// truncated simplex.
pub fn random_point<R: Rng + ?Sized>(setup: &GeometrySetup, alpha: f64, rng: &mut R) -> Vec<f64> {
    let d = setup.dim();
    match setup.kind() {
        SetupKind::Ball => {
            let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            let n = g.iter().map(|v: &f64| v * v).sum::<f64>().sqrt().max(1e-300);
            let r = rng.random::<f64>().powf(1.0 / d as f64);
            g.into_iter().map(|v| v / n * r).collect()
        }
        SetupKind::TruncatedSimplex => {
            let gamma = Gamma::new(alpha, 1.0).expect("positive shape");
            let mut e: Vec<f64> = (0..d).map(|_| gamma.sample(rng).max(1e-300)).collect();
            let s: f64 = e.iter().sum();
            let nu = setup.nu();
            let mass = 1.0 - nu * d as f64;
            e.iter_mut().for_each(|v| *v = nu + mass * *v / s);
            e
        }
    }
}

pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn empirical(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total.max(1) as f64).collect()
}

/// Pearson chi-square goodness-of-fit p-value.
pub fn chi_square_pvalue(counts: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&c, &p) in counts.iter().zip(probs) {
        let e = p * total as f64;
        if e > 0.0 {
            stat += (c as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if cells < 2 {
        return 1.0;
    }
    let dist = ChiSquared::new((cells - 1) as f64).expect("positive dof");
    1.0 - dist.cdf(stat)
}

/// Significance level after a Bonferroni correction over `tests` tests.
pub fn corrected_level(tests: usize) -> f64 {
    0.01 / tests.max(1) as f64
}

/// `mean + 1.645·sd/√n`, the one-sided 95% upper confidence bound.
pub fn upper_confidence_95(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    mean + 1.645 * (var / n).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn matvec_matches_reordered_sum() {
        let mut rng = stream(3, 0);
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..3).map(|_| rng.random::<f64>() - 0.5).collect())
            .collect();
        let a = Matrix::from_rows(&rows).unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
        let y = exact_matvec(&a, &x).unwrap();
        for i in 0..5 {
            let rev: f64 = (0..3).rev().map(|j| rows[i][j] * x[j]).sum();
            assert!((y[i] - rev).abs() < 1e-15);
        }
        assert_eq!(exact_matvec(&Matrix::identity(3), &[1.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn softmax_basics() {
        assert_eq!(softmax(&[3.0], 0.1), vec![1.0]);
        let p = softmax(&[1.0; 4], 0.5);
        assert!(p.iter().all(|v| (v - 0.25).abs() < 1e-16));
        // mpmath, 30 digits
        let p = softmax(&[0.1, -0.4, 0.25, 0.0, 0.3], 0.2);
        let expect = [
            0.153_282_604_375_310_04,
            0.012_582_202_369_214_948,
            0.324_499_276_008_965_4,
            0.092_970_599_154_227_39,
            0.416_665_318_092_282_2,
        ];
        for (a, b) in p.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn simplex_projection_is_feasible_and_idempotent() {
        let v = [0.9, -0.3, 0.5, 0.1];
        let p = euclid_project_truncated_simplex(&v, 0.05);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(p.iter().all(|&x| x >= 0.05 - 1e-15));
        let q = euclid_project_truncated_simplex(&p, 0.05);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_prox_closed_forms() {
        let ball = GeometrySetup::ball(3).unwrap();
        let y = [0.1, 0.2, -0.1];
        let zero = |x: &[f64]| (0.0, vec![0.0; x.len()]);
        let p = exact_prox(&ball, &zero, &y, 2.0, ReferenceBudget::default()).unwrap();
        for (a, b) in p.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
        let b = [0.3, -0.1, 0.2];
        let quad = |x: &[f64]| {
            let g: Vec<f64> = x.iter().zip(&b).map(|(a, c)| a - c).collect();
            (0.5 * g.iter().map(|v| v * v).sum::<f64>(), g)
        };
        let lambda = 1.5;
        let p = exact_prox(&ball, &quad, &y, lambda, ReferenceBudget::default()).unwrap();
        for i in 0..3 {
            let want = (b[i] + lambda * y[i]) / (1.0 + lambda);
            assert!((p[i] - want).abs() < 1e-9);
        }
    }

    #[test]
    fn welzl_small_cases() {
        let (c, r) = welzl_meb(&[vec![0.0, 0.0], vec![1.0, 0.0]], 1).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-15 && c[1].abs() < 1e-15 && (r - 0.5).abs() < 1e-15);
        let (c, r) = welzl_meb(&[vec![0.3, 0.4]], 1).unwrap();
        assert_eq!((c, r), (vec![0.3, 0.4], 0.0));
    }

    #[test]
    fn welzl_matches_support_enumeration() {
        let mut rng = stream(11, 1);
        for _ in 0..50 {
            let pts: Vec<Vec<f64>> = (0..4)
                .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
                .collect();
            let (_, r) = welzl_meb(&pts, 5).unwrap();
            let mut best = f64::INFINITY;
            for mask in 1u32..16 {
                let sub: Vec<&[f64]> = (0..4)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| pts[i].as_slice())
                    .collect();
                if sub.len() > 3 {
                    continue;
                }
                let (c, r2) = circumball(&sub, 2);
                if pts.iter().all(|p| inside(&c, r2 * (1.0 + 1e-9), p)) {
                    best = best.min(r2.sqrt());
                }
            }
            assert!((r - best).abs() < 1e-12, "{r} vs {best}");
        }
    }

    #[test]
    fn chi_square_detects_mismatch() {
        let probs = [0.25; 4];
        assert!(chi_square_pvalue(&[250, 250, 250, 250], &probs) > 0.99);
        assert!(chi_square_pvalue(&[400, 200, 200, 200], &probs) < 1e-6);
    }
}
