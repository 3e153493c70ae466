use std::sync::Arc;

use maxmin_core::accelerator::SolverProfile;
use maxmin_core::apps::baseline::{subgradient_baseline, StepRule};
use maxmin_core::apps::game::{solve_matrix_game, MatrixGameInstance};
use maxmin_core::apps::generate::{gaussian_game, quadratic_centers};
use maxmin_core::apps::meb::{solve_meb, MebInstance};
use maxmin_core::apps::smooth_max::{solve_smooth_max, SmoothMaxOptions};
use maxmin_core::geometry::{GeometrySetup, SetupKind};
use maxmin_core::linalg::{dist_p, norm2, Matrix};
use maxmin_core::problem::{LinearFamily, Objective, QuadraticFamily};
use maxmin_core::refcheck::welzl_meb;

fn practical() -> SolverProfile {
    SolverProfile::practical()
}

#[test]
fn single_quadratic_is_minimized_at_its_center() {
    let ball = GeometrySetup::ball(3).unwrap();
    let b = vec![0.3, -0.4, 0.2];
    let f = QuadraticFamily::new(Matrix::from_rows(&[b.clone()]).unwrap(), 1.0, &ball).unwrap();
    let eps = 0.01;
    let rep = solve_smooth_max(Arc::new(f), SetupKind::Ball, eps, 2, &practical(), &SmoothMaxOptions::default()).unwrap();
    assert!(rep.solver.f_max <= eps, "{}", rep.solver.f_max);
    assert!(dist_p(&rep.solver.x, &b, 2) <= (2.0 * eps).sqrt());
    assert_eq!(rep.plan.eps_prime, eps / 2.0);
}

#[test]
fn repeated_functions_behave_like_one() {
    let ball = GeometrySetup::ball(3).unwrap();
    let b = vec![-0.1, 0.5, 0.0];
    let f = QuadraticFamily::new(Matrix::from_rows(&vec![b.clone(); 6]).unwrap(), 1.0, &ball).unwrap();
    let rep = solve_smooth_max(Arc::new(f), SetupKind::Ball, 0.02, 4, &practical(), &SmoothMaxOptions::default()).unwrap();
    assert!(rep.solver.f_max <= 0.02);
}

#[test]
fn random_quadratics_match_long_baseline() {
    let (n, d, eps) = (10, 4, 0.05);
    let ball = GeometrySetup::ball(d).unwrap();
    let centers = quadratic_centers(n, d, 21).unwrap();
    let f = QuadraticFamily::new(centers, 1.0, &ball).unwrap();
    let steps = 1_000_000;
    let base = subgradient_baseline(&f, &ball, &vec![0.0; d], steps, StepRule::InverseSqrt(0.5)).unwrap();
    let f_star = base.best_f_max;
    for seed in 0..3 {
        let rep = solve_smooth_max(Arc::new(f.clone()), SetupKind::Ball, eps, seed, &practical(), &SmoothMaxOptions::default())
            .unwrap();
        assert!(rep.solver.f_max - f_star <= eps, "seed {seed}: {} vs {f_star}", rep.solver.f_max);
    }
}

#[test]
fn symmetric_diagonal_game() {
    let inst = MatrixGameInstance::new(Matrix::identity(2), SetupKind::TruncatedSimplex).unwrap();
    let eps = 0.05;
    let rep = solve_matrix_game(&inst, eps, 3, &practical()).unwrap();
    assert!((rep.certificate.primal_value - 0.5).abs() <= eps);
    assert!(dist_p(&rep.x, &[0.5, 0.5], 1) <= 4.0 * eps);
    assert!(rep.certificate.gap >= -1e-12);
}

#[test]
fn zero_game_has_zero_gap() {
    let inst = MatrixGameInstance::new(Matrix::zeros(3, 2), SetupKind::Ball).unwrap();
    let rep = solve_matrix_game(&inst, 0.1, 0, &practical()).unwrap();
    assert_eq!(rep.certificate.gap, 0.0);
    assert_eq!(rep.certificate.primal_value, 0.0);
}

#[test]
fn out_of_range_accuracy_is_rejected() {
    let inst = MatrixGameInstance::new(Matrix::identity(2), SetupKind::Ball).unwrap();
    assert!(solve_matrix_game(&inst, 0.0, 0, &practical()).is_err());
    assert!(solve_matrix_game(&inst, 1.0, 0, &practical()).is_err());
    assert!(MatrixGameInstance::new(Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap(), SetupKind::Ball).is_err());
}

#[test]
fn game_value_agrees_with_long_baseline() {
    let eps = 0.05;
    let inst = gaussian_game(50, 40, SetupKind::Ball, 13).unwrap();
    let ball = GeometrySetup::ball(40).unwrap();
    let f = LinearFamily::new(inst.matrix().clone(), &ball).unwrap();
    let base = subgradient_baseline(&f, &ball, &vec![0.0; 40], 1_000_000, StepRule::InverseSqrt(0.5)).unwrap();
    let rep = solve_matrix_game(&inst, eps, 13, &practical()).unwrap();
    assert!(
        (rep.certificate.primal_value - base.best_f_max).abs() <= 2.0 * eps,
        "{} vs {}",
        rep.certificate.primal_value,
        base.best_f_max
    );
}

#[test]
fn two_point_enclosing_ball() {
    let inst = MebInstance::new(vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]]).unwrap();
    let eps = 0.01;
    let rep = solve_meb(&inst, eps, 4, &practical()).unwrap();
    assert!(rep.radius_original <= 0.5 * (1.0 + eps), "{}", rep.radius_original);
    assert!(rep.radius_original >= 0.5 - 1e-12);
    assert!(0.5 * dist_p(&rep.center_original, &[0.5, 0.0, 0.0], 2).powi(2) <= eps * 0.25);
}

#[test]
fn enclosing_ball_of_shifted_points_uses_original_coordinates() {
    // a translated and scaled copy of a triangle keeps the same ball up to the map
    let pts = vec![vec![2.0, 2.0], vec![2.0, 4.0], vec![4.0, 2.0]];
    let inst = MebInstance::new(pts.clone()).unwrap();
    let (exact_c, exact_r) = welzl_meb(&pts, 0).unwrap();
    let rep = solve_meb(&inst, 0.01, 1, &practical()).unwrap();
    assert!(rep.radius_original <= exact_r * 1.01);
    assert!(dist_p(&rep.center_original, &exact_c, 2) <= (2.0 * 0.01f64).sqrt() * exact_r);
}

#[test]
fn baseline_drives_norm_to_zero() {
    // max over ±e_j is ‖x‖_∞, and ‖x‖₂ ≤ √2‖x‖_∞ in two dimensions
    let ball = GeometrySetup::ball(2).unwrap();
    let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]]).unwrap();
    let f = LinearFamily::new(a, &ball).unwrap();
    let rep = subgradient_baseline(&f, &ball, &[1.0, 0.0], 200_000, StepRule::InverseSqrt(0.5)).unwrap();
    assert!(norm2(&rep.x) <= 0.01, "{:?}", rep.x);
    assert_eq!(rep.steps, 200_000);
    assert_eq!(rep.index_counts.iter().sum::<u64>(), 200_000);
    assert_eq!(f.f_max(&rep.x).0, rep.f_max);
}
