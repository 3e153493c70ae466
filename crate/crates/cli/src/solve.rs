//! `gen` and `solve`, plus the single-run dispatcher shared with `bench`.

use std::sync::Arc;
use std::time::Instant;

use maxmin_core::accelerator::SolverProfile;
use maxmin_core::apps::baseline::{subgradient_baseline, StepRule};
use maxmin_core::apps::game::{solve_matrix_game_with, MatrixGameInstance};
use maxmin_core::apps::generate::{gaussian_game, gaussian_points, quadratic_centers};
use maxmin_core::apps::meb::{solve_meb, MebInstance};
use maxmin_core::apps::smooth_max::{solve_smooth_max, SmoothMaxOptions};
use maxmin_core::error::Error as CoreError;
use maxmin_core::geometry::{GeometrySetup, SetupKind};
use maxmin_core::linalg::Matrix;
use maxmin_core::problem::{LinearFamily, Objective, QuadraticFamily};
use maxmin_core::refcheck::{duality_gap, empirical, welzl_meb};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{Method, RunConfig};
use crate::format::{self, InstanceFile, InstanceKind};
use crate::report::{self, Failure};
use crate::CliError;

/// Largest dimension for which the exact MEB reference is computed.
const WELZL_MAX_DIM: usize = 3;

pub fn generate(kind: InstanceKind, n: usize, d: usize, setup: SetupKind, seed: u64) -> Result<InstanceFile, CliError> {
    let rows = match kind {
        InstanceKind::Game => gaussian_game(n, d, setup, seed)?.matrix().clone(),
        InstanceKind::Meb => Matrix::from_rows(gaussian_points(n, d, seed)?.points())?,
        InstanceKind::Quadratics => quadratic_centers(n, d, seed)?,
    };
    Ok(InstanceFile { kind, rows })
}

pub fn cmd_gen(cfg: &RunConfig) -> Result<std::path::PathBuf, CliError> {
    cfg.validate()?;
    let kind = cfg.kind.expect("validated");
    let inst = generate(kind, cfg.n.expect("validated"), cfg.d.expect("validated"), cfg.setup.into(), cfg.seed)?;
    let out = cfg.output.clone().expect("validated");
    format::save(&inst, &out, cfg.binary)?;
    log::info!("wrote {} instance {}x{} to {}", kind.name(), inst.rows.rows(), inst.rows.cols(), out.display());
    Ok(out)
}

/// Headline numbers of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    /// Game value or `f_max` at the output; the radius for MEB.
    pub value: f64,
    /// Certified duality gap for games, excess radius over the exact MEB.
    pub gap: Option<f64>,
    pub evaluations: u64,
    pub outer_iterations: Option<usize>,
    pub wall_time: f64,
}

pub struct RunOutput {
    pub summary: RunSummary,
    pub detail: Value,
}

#[derive(Debug, Clone, Copy)]
pub struct RunSettings {
    pub method: Method,
    pub setup: SetupKind,
    pub eps: f64,
    pub seed: u64,
    pub r: Option<f64>,
    pub baseline_steps: u64,
}

fn domain(kind: SetupKind, d: usize) -> Result<GeometrySetup, CoreError> {
    match kind {
        SetupKind::Ball => GeometrySetup::ball(d),
        SetupKind::TruncatedSimplex => GeometrySetup::truncated_simplex(d, 0.0),
    }
}

fn baseline(problem: &dyn Objective, setup: &GeometrySetup, steps: u64) -> Result<maxmin_core::apps::baseline::BaselineReport, CoreError> {
    let x0 = setup.center();
    let radius = setup.domain_radius_bound(&x0)?;
    subgradient_baseline(problem, setup, &x0, steps, StepRule::for_horizon(radius, problem.lipschitz(), steps))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

pub fn run_one(inst: &InstanceFile, profile: &SolverProfile, settings: RunSettings) -> Result<RunOutput, CoreError> {
    let start = Instant::now();
    let opts = SmoothMaxOptions {
        r: settings.r,
        ..SmoothMaxOptions::default()
    };
    let (mut summary, detail) = match (inst.kind, settings.method) {
        (InstanceKind::Game, Method::Accelerated) => {
            let game = MatrixGameInstance::new(inst.rows.clone(), settings.setup)?;
            let rep = solve_matrix_game_with(&game, settings.eps, settings.seed, profile, opts)?;
            let s = RunSummary {
                value: rep.certificate.primal_value,
                gap: Some(rep.certificate.gap),
                evaluations: rep.run.solver.counters.evaluations(),
                outer_iterations: Some(rep.run.solver.outer_iterations),
                wall_time: 0.0,
            };
            (s, to_value(&rep))
        }
        (InstanceKind::Game, Method::Subgradient) => {
            let game = MatrixGameInstance::new(inst.rows.clone(), settings.setup)?;
            let setup = domain(settings.setup, game.dim())?;
            let family = LinearFamily::new(inst.rows.clone(), &setup)?.with_lipschitz(1.0)?;
            let rep = baseline(&family, &setup, settings.baseline_steps)?;
            let y = empirical(&rep.index_counts);
            let s = RunSummary {
                value: game.value(&rep.x)?,
                gap: Some(duality_gap(&game, &rep.x, &y)?),
                evaluations: rep.value_evals + rep.gradient_evals,
                outer_iterations: None,
                wall_time: 0.0,
            };
            (s, to_value(&rep))
        }
        (InstanceKind::Meb, method) => {
            let pts: Vec<Vec<f64>> = (0..inst.rows.rows()).map(|i| inst.rows.row(i).to_vec()).collect();
            let meb = MebInstance::new(pts)?;
            let (radius, evaluations, iters, detail) = match method {
                Method::Accelerated => {
                    let rep = solve_meb(&meb, settings.eps, settings.seed, profile)?;
                    let iters = rep.levels.iter().map(|l| l.outer_iterations).sum();
                    (rep.radius_original, rep.evaluations, Some(iters), to_value(&rep))
                }
                Method::Subgradient => {
                    let ball = GeometrySetup::ball(meb.dim())?;
                    let family = QuadraticFamily::new(Matrix::from_rows(meb.points())?, 1.0, &ball)?;
                    let rep = baseline(&family, &ball, settings.baseline_steps)?;
                    let r = (2.0 * meb.f_max(&rep.x)).sqrt() * meb.scale();
                    (r, rep.value_evals + rep.gradient_evals, None, to_value(&rep))
                }
            };
            let gap = if meb.dim() <= WELZL_MAX_DIM {
                let (_, exact) = welzl_meb(meb.points(), settings.seed)?;
                Some(radius - exact * meb.scale())
            } else {
                None
            };
            let s = RunSummary {
                value: radius,
                gap,
                evaluations,
                outer_iterations: iters,
                wall_time: 0.0,
            };
            (s, detail)
        }
        (InstanceKind::Quadratics, method) => {
            let setup = domain(settings.setup, inst.rows.cols())?;
            let family = QuadraticFamily::new(inst.rows.clone(), 1.0, &setup)?;
            match method {
                Method::Accelerated => {
                    let rep = solve_smooth_max(Arc::new(family), settings.setup, settings.eps, settings.seed, profile, &opts)?;
                    let s = RunSummary {
                        value: rep.solver.f_max,
                        gap: None,
                        evaluations: rep.solver.counters.evaluations(),
                        outer_iterations: Some(rep.solver.outer_iterations),
                        wall_time: 0.0,
                    };
                    (s, to_value(&rep))
                }
                Method::Subgradient => {
                    let rep = baseline(&family, &setup, settings.baseline_steps)?;
                    let s = RunSummary {
                        value: rep.f_max,
                        gap: None,
                        evaluations: rep.value_evals + rep.gradient_evals,
                        outer_iterations: None,
                        wall_time: 0.0,
                    };
                    (s, to_value(&rep))
                }
            }
        }
    };
    summary.wall_time = start.elapsed().as_secs_f64();
    Ok(RunOutput { summary, detail })
}

fn error_kind(e: &CoreError) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string()
}

/// Writes the report and returns its path. A solver failure still writes a
/// report (with the failing seed) before the error is returned.
pub fn cmd_solve(cfg: &RunConfig) -> Result<std::path::PathBuf, CliError> {
    cfg.validate()?;
    if cfg.input.len() != 1 {
        return Err(CliError::Validation("solve takes exactly one --in".into()));
    }
    let out = cfg
        .output
        .clone()
        .ok_or_else(|| CliError::Validation("solve needs --out".into()))?;
    let inst = format::load(&cfg.input[0])?;
    let method = cfg.methods.first().copied().unwrap_or(Method::Accelerated);
    let profile = SolverProfile::by_name(cfg.profile.into());
    let settings = RunSettings {
        method,
        setup: cfg.setup.into(),
        eps: cfg.eps,
        seed: cfg.seed,
        r: cfg.r_sweep.first().copied(),
        baseline_steps: cfg.baseline_steps,
    };
    log::info!(
        "solving {} {}x{} with {:?} (eps {}, seed {})",
        inst.kind.name(),
        inst.rows.rows(),
        inst.rows.cols(),
        method,
        cfg.eps,
        cfg.seed
    );
    let mut body = Map::new();
    body.insert(
        "instance".into(),
        serde_json::json!({"kind": inst.kind, "n": inst.rows.rows(), "d": inst.rows.cols()}),
    );
    body.insert("method".into(), to_value(&method));
    body.insert("seed".into(), Value::from(cfg.seed));
    match run_one(&inst, &profile, settings) {
        Ok(run) => {
            log::info!("value {} gap {:?} evaluations {}", run.summary.value, run.summary.gap, run.summary.evaluations);
            body.insert("summary".into(), to_value(&run.summary));
            body.insert("result".into(), run.detail);
            report::write(&out, &report::envelope(cfg, body, None)?)?;
            Ok(out)
        }
        Err(e) if crate::is_solver_failure(&e) => {
            log::error!("solver failed with seed {}: {e}", cfg.seed);
            let failure = Failure {
                kind: error_kind(&e),
                message: e.to_string(),
                seed: cfg.seed,
            };
            report::write(&out, &report::envelope(cfg, body, Some(failure))?)?;
            println!("{}", out.display());
            Err(e.into())
        }
        Err(e) => Err(e.into()),
    }
}

