//! Benchmark sweeps: one CSV row per (method, instance, r, seed) cell.
//! Cells run on at most `MAXMIN_THREADS` worker threads and each owns its
//! solver state; rows are written in cell order regardless of scheduling.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use maxmin_core::accelerator::SolverProfile;
use maxmin_core::rng::derive_seed;
use serde::Serialize;

use crate::config::{Method, RunConfig};
use crate::format::{self, InstanceFile};
use crate::solve::{run_one, RunSettings};
use crate::CliError;

pub const THREADS_VAR: &str = "MAXMIN_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: Method,
    pub instance: String,
    pub seed: u64,
    pub r: Option<f64>,
    pub value: Option<f64>,
    pub gap: Option<f64>,
    pub evaluations: Option<u64>,
    pub outer_iterations: Option<usize>,
    pub wall_time: f64,
    pub error: Option<String>,
}

struct Cell {
    method: Method,
    instance: usize,
    r: Option<f64>,
    seed: u64,
}

pub fn thread_cap() -> usize {
    let default = std::thread::available_parallelism().map_or(1, |n| n.get());
    std::env::var(THREADS_VAR)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or(default)
}

fn cells(cfg: &RunConfig, instances: usize) -> Vec<Cell> {
    let methods = if cfg.methods.is_empty() {
        vec![Method::Accelerated, Method::Subgradient]
    } else {
        cfg.methods.clone()
    };
    let mut out = Vec::new();
    for &method in &methods {
        for instance in 0..instances {
            // the baseline has no ball radius to sweep
            let radii: Vec<Option<f64>> = match method {
                Method::Accelerated if !cfg.r_sweep.is_empty() => cfg.r_sweep.iter().map(|&r| Some(r)).collect(),
                _ => vec![None],
            };
            for r in radii {
                for rep in 0..cfg.repeats as u64 {
                    let seed = if rep == 0 { cfg.seed } else { derive_seed(cfg.seed, rep) };
                    out.push(Cell {
                        method,
                        instance,
                        r,
                        seed,
                    });
                }
            }
        }
    }
    out
}

pub fn cmd_bench(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    cfg.validate()?;
    let out = cfg
        .output
        .clone()
        .ok_or_else(|| CliError::Validation("bench needs --out".into()))?;
    let instances: Vec<(String, InstanceFile)> = cfg
        .input
        .iter()
        .map(|p| Ok((p.display().to_string(), format::load(p)?)))
        .collect::<Result<_, CliError>>()?;
    let profile = SolverProfile::by_name(cfg.profile.into());
    let cells = cells(cfg, instances.len());
    let threads = thread_cap().min(cells.len()).max(1);
    log::info!("bench: {} cells on {threads} threads", cells.len());
    let rows: Mutex<Vec<Option<BenchRow>>> = Mutex::new(vec![None; cells.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(cell) = cells.get(k) else { break };
                let (name, inst) = &instances[cell.instance];
                let settings = RunSettings {
                    method: cell.method,
                    setup: cfg.setup.into(),
                    eps: cfg.eps,
                    seed: cell.seed,
                    r: cell.r,
                    baseline_steps: cfg.baseline_steps,
                };
                let start = std::time::Instant::now();
                let result = run_one(inst, &profile, settings);
                let mut row = BenchRow {
                    method: cell.method,
                    instance: name.clone(),
                    seed: cell.seed,
                    r: cell.r,
                    value: None,
                    gap: None,
                    evaluations: None,
                    outer_iterations: None,
                    wall_time: start.elapsed().as_secs_f64(),
                    error: None,
                };
                match result {
                    Ok(run) => {
                        row.value = Some(run.summary.value);
                        row.gap = run.summary.gap;
                        row.evaluations = Some(run.summary.evaluations);
                        row.outer_iterations = run.summary.outer_iterations;
                        row.wall_time = run.summary.wall_time;
                    }
                    Err(e) => {
                        log::warn!("cell {k} ({name}, seed {}) failed: {e}", cell.seed);
                        row.error = Some(e.to_string());
                    }
                }
                log::info!("cell {k} done: {:?} {} r={:?}", cell.method, name, cell.r);
                rows.lock().expect("no worker panicked")[k] = Some(row);
            });
        }
    });
    let mut w = csv::Writer::from_path(&out)?;
    for row in rows.into_inner().expect("no worker panicked").into_iter().flatten() {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(out)
}
