//! Seeded random instances.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::apps::game::MatrixGameInstance;
use crate::apps::meb::MebInstance;
use crate::error::{Error, Result};
use crate::geometry::{GeometrySetup, SetupKind};
use crate::linalg::{norm2, Matrix};
use crate::refcheck::random_point;
use crate::rng::stream;

const GAME_LABEL: u64 = 0x6a3e;
const MEB_LABEL: u64 = 0x3eb0;
const QUAD_LABEL: u64 = 0x9a0d;

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    Matrix::from_row_major(rows, cols, data).expect("shape matches data")
}

/// Gaussian strategies `a_i`, each scaled to unit `ℓ₂` norm on the ball and
/// the whole matrix scaled to `max |a_ij| = 1` on the simplex.
pub fn gaussian_game(n: usize, d: usize, kind: SetupKind, seed: u64) -> Result<MatrixGameInstance> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParams("game needs n, d ≥ 1".into()));
    }
    let mut rng = stream(seed, GAME_LABEL);
    let mut a = gaussian_matrix(n, d, &mut rng);
    match kind {
        SetupKind::Ball => {
            for i in 0..n {
                let row = a.row_mut(i);
                let s = norm2(row);
                if s > 0.0 {
                    row.iter_mut().for_each(|v| *v /= s);
                }
            }
        }
        SetupKind::TruncatedSimplex => {
            let m = a.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if m > 0.0 {
                for i in 0..n {
                    a.row_mut(i).iter_mut().for_each(|v| *v /= m);
                }
            }
        }
    }
    MatrixGameInstance::new(a, kind)
}

/// Standard Gaussian points, normalized on construction.
pub fn gaussian_points(n: usize, d: usize, seed: u64) -> Result<MebInstance> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParams("point set needs n, d ≥ 1".into()));
    }
    let mut rng = stream(seed, MEB_LABEL);
    let pts = (0..n)
        .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    MebInstance::new(pts)
}

/// Centers drawn uniformly from the unit ball.
pub fn quadratic_centers(n: usize, d: usize, seed: u64) -> Result<Matrix> {
    let ball = GeometrySetup::ball(d)?;
    let mut rng = stream(seed, QUAD_LABEL);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| random_point(&ball, 1.0, &mut rng)).collect();
    Matrix::from_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_games_meet_norm_bounds() {
        let g = gaussian_game(30, 7, SetupKind::Ball, 3).unwrap();
        assert!((g.matrix().norm_p_to_inf(2) - 1.0).abs() < 1e-12);
        let g = gaussian_game(30, 7, SetupKind::TruncatedSimplex, 3).unwrap();
        assert!((g.matrix().norm_p_to_inf(1) - 1.0).abs() < 1e-12);
        assert_eq!(gaussian_game(5, 4, SetupKind::Ball, 9).unwrap(), gaussian_game(5, 4, SetupKind::Ball, 9).unwrap());
    }
}
