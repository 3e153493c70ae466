use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use maxmin_cli::config::{CommandName, Method, ProfileArg, RunConfig, SetupArg, Suite};
use maxmin_cli::format::InstanceKind;
use maxmin_cli::{bench, report, selftest, solve, CliError, EXIT_OK};
use serde_json::{Map, Value};

#[derive(Parser)]
#[command(name = "maxmin", version, about = "Accelerated solver for min over a ball or simplex of max_i f_i(x)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, value_enum, default_value = "ball")]
    setup: SetupArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance file.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: InstanceKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        /// Write the binary format instead of text.
        #[arg(long)]
        binary: bool,
    },
    /// Solve one instance and write a JSON report.
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        /// Read the whole run configuration from a JSON file.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a statistical property suite and write a JSON summary.
    Selftest {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        which: Suite,
        #[arg(long, default_value_t = 20)]
        seeds: u32,
    },
    /// Sweep methods, radii and seeds over instances and write a CSV.
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 1)]
        repeats: u32,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long = "in")]
    input: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, value_enum, default_value = "practical")]
    profile: ProfileArg,
    #[arg(long, value_enum, value_delimiter = ',')]
    method: Vec<Method>,
    /// Ball radii `r` for the accelerated method, comma separated.
    #[arg(long = "r-sweep", value_delimiter = ',')]
    r_sweep: Vec<f64>,
    /// Iterations of the subgradient baseline.
    #[arg(long, default_value_t = 100_000)]
    baseline_steps: u64,
}

fn base(command: CommandName, common: &Common) -> RunConfig {
    let mut cfg = RunConfig::new(command);
    cfg.setup = common.setup;
    cfg.seed = common.seed;
    cfg.output = common.out.clone();
    cfg
}

fn apply_run(cfg: &mut RunConfig, run: RunArgs) {
    cfg.input = run.input;
    cfg.eps = run.eps;
    cfg.profile = run.profile;
    cfg.methods = run.method;
    cfg.r_sweep = run.r_sweep;
    cfg.baseline_steps = run.baseline_steps;
}

fn cmd_selftest(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    cfg.validate()?;
    let out = cfg
        .output
        .clone()
        .ok_or_else(|| CliError::Validation("selftest needs --out".into()))?;
    let suite = cfg.suite.expect("validated");
    let results = selftest::run_suite(suite, cfg.repeats as u64)?;
    let mut failed = 0;
    for r in &results {
        failed += usize::from(!r.pass);
        eprintln!(
            "{} {}: observed {:.6}, bound {:.6}",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.observed,
            r.bound
        );
    }
    let mut body = Map::new();
    body.insert("suite".into(), serde_json::to_value(suite)?);
    body.insert("properties".into(), serde_json::to_value(&results)?);
    body.insert("failed".into(), Value::from(failed));
    report::write(&out, &report::envelope(cfg, body, None)?)?;
    if failed > 0 {
        println!("{}", out.display());
        return Err(CliError::SelftestFailed(failed));
    }
    Ok(out)
}

fn dispatch(cli: Cli) -> Result<PathBuf, CliError> {
    match cli.command {
        Command::Gen {
            common,
            kind,
            n,
            d,
            binary,
        } => {
            let mut cfg = base(CommandName::Gen, &common);
            cfg.kind = Some(kind);
            cfg.n = Some(n);
            cfg.d = Some(d);
            cfg.binary = binary;
            solve::cmd_gen(&cfg)
        }
        Command::Solve { common, run, config } => {
            let cfg = match config {
                Some(path) => {
                    let cfg = RunConfig::load(&path)?;
                    if cfg.command != CommandName::Solve {
                        return Err(CliError::Validation(format!("{} is not a solve config", path.display())));
                    }
                    cfg
                }
                None => {
                    let mut cfg = base(CommandName::Solve, &common);
                    apply_run(&mut cfg, run);
                    cfg
                }
            };
            solve::cmd_solve(&cfg)
        }
        Command::Selftest { common, which, seeds } => {
            let mut cfg = base(CommandName::Selftest, &common);
            cfg.suite = Some(which);
            cfg.repeats = seeds;
            cmd_selftest(&cfg)
        }
        Command::Bench { common, run, repeats } => {
            let mut cfg = base(CommandName::Bench, &common);
            apply_run(&mut cfg, run);
            cfg.repeats = repeats;
            bench::cmd_bench(&cfg)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::from(EXIT_OK as u8)
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
