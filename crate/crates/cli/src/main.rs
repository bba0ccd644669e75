use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use fxts_overtake::config::load_config;
use fxts_overtake::experiments::{bounds_report, level_stats, monte_carlo, MonteCarloOptions};
use fxts_overtake::fxts::{FxtsParams, K2Variant, OracleOptions, DEFAULT_MARGIN};
use fxts_overtake::output::{
    write_json, write_sweep_csv, write_trajectory_csv, write_trials_csv, Experiment, RunManifest,
    RunSummary,
};
use fxts_overtake::plot::{montecarlo_svg, sweep_svg, trajectory_svg, write_svg};
use fxts_overtake::scenario::{
    estimate_c3, phase_time_budget, run_episode, EpisodeStatus, Phase, ScenarioConfig, SweepGrid,
};
use fxts_overtake::vehicle::Integrator;
use fxts_overtake::Error;

const EXIT_ERROR: u8 = 1;
const EXIT_UNSAFE: u8 = 2;
const EXIT_QP_ABORT: u8 = 3;

#[derive(Parser)]
#[command(name = "fxts-overtake", version, about = "Fixed-time CLF-CBF overtaking simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one overtaking episode.
    Run(ScenarioArgs),
    /// Repeat the episode over a range of disturbance bounds.
    Montecarlo {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 10)]
        levels: usize,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Disturbance bound reached at the top level.
        #[arg(long, default_value_t = 3.99)]
        phi_base: f64,
    },
    /// Estimate c3* over the (K, T, omega_max, a_max) grid.
    Sweep(ScenarioArgs),
    /// Print the settling-time bound and convergence domain.
    Bounds(BoundsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntegratorArg {
    Euler,
    Rk4,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Lemma,
    Theorem,
}

#[derive(Args)]
struct ScenarioArgs {
    /// JSON configuration; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed; disturbance and sensing seeds are derived from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Drop the lead-motion terms from the constraint rows.
    #[arg(long)]
    quasi_static: bool,
    #[arg(long, value_enum)]
    robust: Option<OnOff>,
    #[arg(long, value_enum)]
    integrator: Option<IntegratorArg>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    c1: f64,
    #[arg(long)]
    c2: f64,
    #[arg(long, allow_hyphen_values = true)]
    c3: f64,
    #[arg(long, default_value_t = 5.0)]
    mu: f64,
    #[arg(long, default_value_t = DEFAULT_MARGIN)]
    k: f64,
    #[arg(long, value_enum, default_value_t = VariantArg::Lemma)]
    variant: VariantArg,
    /// Initial value for the numerical oracle.
    #[arg(long, default_value_t = 1e3)]
    v0: f64,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

enum Failure {
    Error(Error),
    Exit(u8),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn resolve(args: &ScenarioArgs) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &args.config {
        Some(p) => load_config(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.reseed(seed);
    }
    if args.quasi_static {
        cfg.scenario.quasi_static = true;
    }
    if let Some(r) = args.robust {
        cfg.scenario.robust = matches!(r, OnOff::On);
    }
    if let Some(i) = args.integrator {
        cfg.scenario.integrator = match i {
            IntegratorArg::Euler => Integrator::Euler,
            IntegratorArg::Rk4 => Integrator::Rk4,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare(args: &ScenarioArgs, experiment: Experiment) -> Result<(ScenarioConfig, RunManifest, String), Error> {
    let cfg = resolve(args)?;
    fs::create_dir_all(&args.out)?;
    let manifest = RunManifest::new(experiment, args.config.as_deref(), &args.out, cfg.clone());
    let hash = manifest.hash();
    write_json(&args.out.join("manifest.json"), &manifest)?;
    Ok((cfg, manifest, hash))
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    Ok(BufWriter::new(File::create(path)?))
}

fn cmd_run(args: &ScenarioArgs) -> Result<(), Failure> {
    let (cfg, _, hash) = prepare(args, Experiment::Run)?;
    let log = run_episode(&cfg)?;
    write_trajectory_csv(create(&args.out.join("trajectory.csv"))?, &log, &hash)?;
    let summary = RunSummary::new(&log.summary, cfg.scenario.seed, &hash);
    write_json(&args.out.join("summary.json"), &summary)?;
    write_svg(&args.out.join("trajectory.svg"), &trajectory_svg(&log, &hash)?)?;
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    match log.summary.status {
        EpisodeStatus::SafetyViolation => Err(Failure::Exit(EXIT_UNSAFE)),
        EpisodeStatus::QpInfeasible | EpisodeStatus::QpDegenerate => Err(Failure::Exit(EXIT_QP_ABORT)),
        EpisodeStatus::Completed => Ok(()),
        other => {
            warn!("episode ended with {other:?}");
            Ok(())
        }
    }
}

fn cmd_montecarlo(args: &ScenarioArgs, levels: usize, trials: usize, phi_base: f64) -> Result<(), Failure> {
    if levels == 0 || trials == 0 {
        return Err(Error::Validation {
            field: "levels/trials".into(),
            reason: "must be positive".into(),
        }
        .into());
    }
    let opts = MonteCarloOptions {
        levels,
        trials,
        phi_base,
        ..MonteCarloOptions::default()
    };
    let (cfg, _, hash) = prepare(args, Experiment::MonteCarlo { levels, trials, phi_base })?;
    info!("running {} trials", levels * trials);
    let rows = monte_carlo(&cfg, &opts)?;
    write_trials_csv(create(&args.out.join("montecarlo.csv"))?, &rows, &hash)?;
    let stats = level_stats(&rows);
    let unsafe_trials = rows.iter().filter(|r| !r.safe).count();
    let report = serde_json::json!({
        "manifest_sha256": hash,
        "trials": rows.len(),
        "safety_violations": unsafe_trials,
        "levels": stats,
    });
    write_json(&args.out.join("montecarlo.json"), &report)?;
    let budgets: Vec<(Phase, f64)> = Phase::OVERTAKE
        .iter()
        .filter_map(|&p| phase_time_budget(p, &cfg).ok().flatten().map(|t| (p, t)))
        .collect();
    write_svg(&args.out.join("montecarlo.svg"), &montecarlo_svg(&rows, &budgets, &hash)?)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn cmd_sweep(args: &ScenarioArgs) -> Result<(), Failure> {
    let grid = SweepGrid::default();
    let (cfg, _, hash) = prepare(args, Experiment::Sweep { grid: grid.clone() })?;
    let (c3, rows) = estimate_c3(&cfg, &grid)?;
    write_sweep_csv(create(&args.out.join("sweep.csv"))?, &rows, &hash)?;
    let report = serde_json::json!({
        "manifest_sha256": hash,
        "c3_star": c3,
        "rows": rows,
    });
    write_json(&args.out.join("sweep.json"), &report)?;
    write_svg(&args.out.join("sweep.svg"), &sweep_svg(&rows, &hash)?)?;
    println!("c3* = {c3}");
    Ok(())
}

fn cmd_bounds(args: &BoundsArgs) -> Result<(), Failure> {
    let p = FxtsParams::with_margin(args.c1, args.c2, args.c3, args.mu, args.k)?;
    let variant = match args.variant {
        VariantArg::Lemma => K2Variant::LemmaK2,
        VariantArg::Theorem => K2Variant::TheoremK2,
    };
    let oracle = OracleOptions {
        horizon: 1e4,
        ..OracleOptions::default()
    };
    let r = bounds_report(&p, variant, args.v0, &oracle)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
        return Ok(());
    }
    println!("regime: {:?}", r.regime);
    println!("D-level: {}", r.domain_level);
    let note = if r.valid { "" } else { " (not a valid bound)" };
    println!("T <= {}{note}", r.time_bound);
    match r.oracle_time {
        Some(t) => println!("oracle time from V0 = {}: {t}", r.v0),
        None => println!("oracle time from V0 = {}: not reached within {} s", r.v0, oracle.horizon),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Montecarlo {
            scenario,
            levels,
            trials,
            phi_base,
        } => cmd_montecarlo(scenario, *levels, *trials, *phi_base),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Bounds(a) => cmd_bounds(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Exit(code)) => ExitCode::from(code),
        Err(Failure::Error(e)) => {
            let body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{body}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
