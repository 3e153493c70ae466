//! One-shot matrix-vector estimation: given `A` with `‖A‖_{p→∞} ≤ 1`, answer
//! a query `x` with `‖y − Ax‖_∞ ≤ ε‖x‖_p` with probability `1 − δ`.
//!
//! * `p = 2`: CountSketch with `t = ⌈8 ln(n/δ)⌉` repetitions of
//!   `b = ⌈6/ε²⌉` buckets, decoded by the median over repetitions.
//! * `p = 1`: `T_s = ⌈2ε⁻² ln(2n/δ)⌉` draws `j ~ |x_j|/‖x‖₁`, shared by all
//!   rows, each contributing `‖x‖₁ sign(x_j) a_ij / T_s`.
//! * `Exact`: the dense product, a deterministic stand-in.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm1, Matrix};
use crate::rng::{substream, StreamRng};

/// Repetitions per `ln(n/δ)`.
pub const C_REP: f64 = 8.0;
/// Buckets per `ε⁻²`.
pub const C_BUCK: f64 = 6.0;

const NORM_SLACK: f64 = 1e-9;
const HASH_LABEL: u64 = 0x5ce7_c4_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MveBackend {
    Sketch,
    Sample,
    Exact,
    /// `Sample` for `p = 1`. For `p = 2`, `Sketch` when its query cost
    /// `n·t·min(b, d)` is below the dense `n·d`, otherwise `Exact`.
    Auto,
}

pub fn sketch_shape(n: usize, eps: f64, delta: f64) -> (usize, usize) {
    let t = (C_REP * (n as f64 / delta).ln()).ceil().max(1.0) as usize;
    let b = (C_BUCK / (eps * eps)).ceil().max(1.0) as usize;
    (t, b)
}

pub fn sample_count(n: usize, eps: f64, delta: f64) -> usize {
    (2.0 / (eps * eps) * (2.0 * n as f64 / delta).ln()).ceil().max(1.0) as usize
}

fn validate(a: &Matrix, p: u8, eps: f64, delta: f64) -> Result<()> {
    if p != 1 && p != 2 {
        return Err(Error::InvalidParams(format!("p = {p} not in {{1, 2}}")));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParams(format!("eps = {eps}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParams(format!("delta = {delta}")));
    }
    if a.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    let norm = a.norm_p_to_inf(p);
    if norm > 1.0 + NORM_SLACK {
        return Err(Error::NormBoundViolated { norm });
    }
    Ok(())
}

/// CountSketch state. Each repetition touches at most `d` distinct buckets,
/// so buckets are relabeled compactly per repetition; the stored sketches and
/// decoded estimates equal those of the dense `t × b` layout.
#[derive(Debug, Clone)]
pub struct Mve2State {
    n: usize,
    d: usize,
    t: usize,
    b: usize,
    eps: f64,
    delta: f64,
    /// Per column and repetition: compact bucket id.
    bucket: Vec<u32>,
    /// Per column and repetition: ±1.
    sign: Vec<f64>,
    /// Offsets of each repetition's compact bucket range.
    rep_offset: Vec<usize>,
    /// `n × width` with `width = Σ_r (distinct buckets of r)`.
    sketch: Vec<f64>,
    width: usize,
}

impl Mve2State {
    pub fn new(a: &Matrix, eps: f64, delta: f64, seed: u64) -> Result<Self> {
        validate(a, 2, eps, delta)?;
        let (n, d) = (a.rows(), a.cols());
        let (t, b) = sketch_shape(n, eps, delta);
        let mut bucket = vec![0u32; d * t];
        let mut sign = vec![0.0; d * t];
        let mut rep_offset = Vec::with_capacity(t + 1);
        let mut width = 0usize;
        let mut relabel = std::collections::HashMap::new();
        for r in 0..t {
            rep_offset.push(width);
            relabel.clear();
            let mut rng = substream(seed, HASH_LABEL, r as u64);
            for j in 0..d {
                let raw = rng.random_range(0..b as u64);
                let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let next = relabel.len() as u32;
                let id = *relabel.entry(raw).or_insert(next);
                bucket[j * t + r] = id;
                sign[j * t + r] = s;
            }
            width += relabel.len();
        }
        rep_offset.push(width);
        let mut st = Self {
            n,
            d,
            t,
            b,
            eps,
            delta,
            bucket,
            sign,
            rep_offset,
            sketch: vec![0.0; n * width],
            width,
        };
        for i in 0..n {
            let row = st.apply_q(a.row(i));
            st.sketch[i * width..(i + 1) * width].copy_from_slice(&row);
        }
        Ok(st)
    }

    pub fn repetitions(&self) -> usize {
        self.t
    }

    pub fn buckets(&self) -> usize {
        self.b
    }

    /// Sketch dimension `s = t·b` of the dense layout.
    pub fn sketch_dim(&self) -> usize {
        self.t * self.b
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `Qx` in the compact layout.
    pub fn apply_q(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for r in 0..self.t {
                let k = self.rep_offset[r] + self.bucket[j * self.t + r] as usize;
                out[k] += self.sign[j * self.t + r] * xj;
            }
        }
        out
    }

    /// `Qx` scattered into the dense `t × b` layout.
    pub fn apply_q_dense(&self, x: &[f64], seed: u64) -> Vec<f64> {
        let mut out = vec![0.0; self.t * self.b];
        for r in 0..self.t {
            let mut rng = substream(seed, HASH_LABEL, r as u64);
            for &xj in x.iter().take(self.d) {
                let raw = rng.random_range(0..self.b as u64) as usize;
                let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                out[r * self.b + raw] += s * xj;
            }
        }
        out
    }

    pub fn query(&self, x: &[f64]) -> Vec<f64> {
        let qx = self.apply_q(x);
        let mut est = vec![0.0; self.t];
        (0..self.n)
            .map(|i| {
                let row = &self.sketch[i * self.width..(i + 1) * self.width];
                for r in 0..self.t {
                    let (lo, hi) = (self.rep_offset[r], self.rep_offset[r + 1]);
                    est[r] = dot(&row[lo..hi], &qx[lo..hi]);
                }
                median(&mut est)
            })
            .collect()
    }
}

fn median(v: &mut [f64]) -> f64 {
    let n = v.len();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sampling state over a shared copy of `A`.
#[derive(Debug, Clone)]
pub struct Mve1State {
    a: Arc<Matrix>,
    eps: f64,
    delta: f64,
    samples: usize,
}

impl Mve1State {
    pub fn new(a: Arc<Matrix>, eps: f64, delta: f64) -> Result<Self> {
        validate(&a, 1, eps, delta)?;
        let samples = sample_count(a.rows(), eps, delta);
        Ok(Self {
            a,
            eps,
            delta,
            samples,
        })
    }

    pub fn sample_count(&self) -> usize {
        self.samples
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Draws the multinomial counts of `T_s` i.i.d. indices `j ~ |x_j|/‖x‖₁`
    /// by sequential binomials, then averages the shared samples.
    pub fn query(&self, x: &[f64], rng: &mut StreamRng) -> Vec<f64> {
        let n = self.a.rows();
        let mut out = vec![0.0; n];
        let total = norm1(x);
        if total == 0.0 {
            return out;
        }
        let mut left = self.samples as u64;
        let mut mass = total;
        for (j, &xj) in x.iter().enumerate() {
            if left == 0 {
                break;
            }
            let w = xj.abs();
            if w == 0.0 {
                continue;
            }
            let p = (w / mass).min(1.0);
            let c = if p >= 1.0 {
                left
            } else {
                Binomial::new(left, p).expect("valid binomial").sample(rng)
            };
            mass -= w;
            left -= c;
            if c > 0 {
                let coef = total * xj.signum() * c as f64 / self.samples as f64;
                for (i, o) in out.iter_mut().enumerate() {
                    *o += coef * self.a.get(i, j);
                }
            }
        }
        out
    }

    /// One draw of the primitive `sample(a_i, x)` for every row: returns the
    /// sampled column and the per-row values `‖x‖₁ sign(x_j) a_ij`.
    pub fn sample_once(&self, x: &[f64], rng: &mut StreamRng) -> Option<(usize, Vec<f64>)> {
        let total = norm1(x);
        if total == 0.0 {
            return None;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = x.len() - 1;
        for (j, &xj) in x.iter().enumerate() {
            u -= xj.abs();
            if u < 0.0 && xj != 0.0 {
                pick = j;
                break;
            }
        }
        let s = total * x[pick].signum();
        Some((pick, (0..self.a.rows()).map(|i| s * self.a.get(i, pick)).collect()))
    }
}

#[derive(Debug, Clone)]
pub struct ExactMve {
    a: Arc<Matrix>,
}

impl ExactMve {
    pub fn query(&self, x: &[f64]) -> Vec<f64> {
        self.a.mul_vec(x)
    }
}

#[derive(Debug, Clone)]
pub enum MveState {
    Sketch(Mve2State),
    Sample(Mve1State),
    Exact(ExactMve),
}

impl MveState {
    pub fn init(
        a: &Arc<Matrix>,
        p: u8,
        eps: f64,
        delta: f64,
        backend: MveBackend,
        seed: u64,
    ) -> Result<Self> {
        validate(a, p, eps, delta)?;
        let backend = resolve_backend(backend, p, a.rows(), a.cols(), eps, delta);
        match backend {
            MveBackend::Sketch => {
                if p != 2 {
                    return Err(Error::InvalidParams("CountSketch backend needs p = 2".into()));
                }
                Ok(Self::Sketch(Mve2State::new(a, eps, delta, seed)?))
            }
            MveBackend::Sample => {
                if p != 1 {
                    return Err(Error::InvalidParams("sampling backend needs p = 1".into()));
                }
                Ok(Self::Sample(Mve1State::new(a.clone(), eps, delta)?))
            }
            _ => Ok(Self::Exact(ExactMve { a: a.clone() })),
        }
    }

    pub fn query(&self, x: &[f64], rng: &mut StreamRng) -> Result<Vec<f64>> {
        let d = match self {
            Self::Sketch(s) => s.d,
            Self::Sample(s) => s.a.cols(),
            Self::Exact(s) => s.a.cols(),
        };
        check_dim(d, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mve query"));
        }
        Ok(match self {
            Self::Sketch(s) => s.query(x),
            Self::Sample(s) => s.query(x, rng),
            Self::Exact(s) => s.query(x),
        })
    }

    pub fn backend(&self) -> MveBackend {
        match self {
            Self::Sketch(_) => MveBackend::Sketch,
            Self::Sample(_) => MveBackend::Sample,
            Self::Exact(_) => MveBackend::Exact,
        }
    }
}

pub fn resolve_backend(
    backend: MveBackend,
    p: u8,
    n: usize,
    d: usize,
    eps: f64,
    delta: f64,
) -> MveBackend {
    match backend {
        MveBackend::Auto if p == 1 => MveBackend::Sample,
        MveBackend::Auto => {
            let (t, b) = sketch_shape(n, eps, delta);
            if t * b.min(d) < d {
                MveBackend::Sketch
            } else {
                MveBackend::Exact
            }
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn sketch_shape_formula() {
        let (t, b) = sketch_shape(3, 0.5, 0.1);
        assert_eq!(t, (8.0 * 30f64.ln()).ceil() as usize);
        assert_eq!((t, b), (28, 24));
        let s = Mve2State::new(&Matrix::identity(3), 0.5, 0.1, 1).unwrap();
        assert_eq!(s.sketch_dim(), 28 * 24);
    }

    #[test]
    fn zero_matrix_and_zero_query() {
        let a = Arc::new(Matrix::zeros(4, 3));
        let mut rng = stream(0, 0);
        for backend in [MveBackend::Sketch, MveBackend::Exact] {
            let s = MveState::init(&a, 2, 0.3, 0.1, backend, 9).unwrap();
            assert_eq!(s.query(&[1.0, -2.0, 0.5], &mut rng).unwrap(), vec![0.0; 4]);
        }
        let s = MveState::init(&a, 1, 0.3, 0.1, MveBackend::Sample, 9).unwrap();
        assert_eq!(s.query(&[1.0, -2.0, 0.5], &mut rng).unwrap(), vec![0.0; 4]);
        let b = Arc::new(Matrix::identity(3));
        let s = MveState::init(&b, 2, 0.3, 0.1, MveBackend::Sketch, 9).unwrap();
        assert_eq!(s.query(&[0.0; 3], &mut rng).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn singleton_support_is_exact_for_sampling() {
        let a = Arc::new(Matrix::from_rows(&[vec![0.5, -0.25], vec![1.0, 0.75]]).unwrap());
        let s = Mve1State::new(a, 0.2, 0.05).unwrap();
        let mut rng = stream(1, 1);
        let y = s.query(&[0.0, 1.0], &mut rng);
        assert_eq!(y, vec![-0.25, 0.75]);
    }

    #[test]
    fn norm_bound_is_checked() {
        let a = Arc::new(Matrix::from_rows(&[vec![0.8, 0.8]]).unwrap());
        assert!(matches!(
            MveState::init(&a, 2, 0.1, 0.1, MveBackend::Sketch, 0),
            Err(Error::NormBoundViolated { .. })
        ));
        assert!(MveState::init(&a, 1, 0.1, 0.1, MveBackend::Sample, 0).is_ok());
    }

    #[test]
    fn compact_layout_matches_dense_layout() {
        let mut rng = stream(5, 2);
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..10).map(|_| rng.random::<f64>() * 0.3 - 0.15).collect())
            .collect();
        let a = Matrix::from_rows(&rows).unwrap();
        let seed = 77;
        let s = Mve2State::new(&a, 0.7, 0.2, seed).unwrap();
        let x: Vec<f64> = (0..10).map(|_| rng.random::<f64>() - 0.5).collect();
        let qx = s.apply_q_dense(&x, seed);
        let got = s.query(&x);
        for i in 0..6 {
            let qa = s.apply_q_dense(a.row(i), seed);
            let mut est: Vec<f64> = (0..s.t)
                .map(|r| dot(&qa[r * s.b..(r + 1) * s.b], &qx[r * s.b..(r + 1) * s.b]))
                .collect();
            assert!((median(&mut est) - got[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn auto_picks_exact_when_sketch_is_wider_than_d() {
        assert_eq!(resolve_backend(MveBackend::Auto, 2, 100, 80, 0.1, 1e-3), MveBackend::Exact);
        assert_eq!(
            resolve_backend(MveBackend::Auto, 2, 10, 1_000_000, 0.5, 0.1),
            MveBackend::Sketch
        );
        assert_eq!(resolve_backend(MveBackend::Auto, 1, 100, 80, 0.1, 1e-3), MveBackend::Sample);
    }
}
