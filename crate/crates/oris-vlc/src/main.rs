//! Command-line front end: config ingestion, subcommand dispatch, seed
//! control, and CSV/JSON output.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use oris_vlc::allocation::{build_problem, verify_solution, SolverKind};
use oris_vlc::channel::GainTables;
use oris_vlc::config::{parse_config, RunConfig};
use oris_vlc::experiments::{
    run_cdf, run_heatmap, run_sum_rate, run_usage, sidecar_path, write_results, ExperimentResult,
    Records, ResultKind, SceneSpec,
};
use oris_vlc::scenario::sample_users;
use std::path::PathBuf;

/// Seed fallback consulted when `--seed` is absent; the config file value
/// and the built-in default come after it.
const SEED_ENV_VAR: &str = "ORIS_VLC_SEED";

#[derive(Parser)]
#[command(
    name = "oris-vlc",
    version,
    about = "Indoor VLC simulator with mirror ORIS crown molding and angle-diversity receivers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single-user SNR CDF samples per (FoV, tier, ORIS on/off)
    Cdf(RunArgs),
    /// SNR heat map over the floor grid for {PD, ADR} x {ORIS, no ORIS}
    Heatmap(RunArgs),
    /// Mean number of ORIS elements used per (FoV, tier)
    Usage(RunArgs),
    /// Mean sum rate vs user count under body blockage
    SumRate(RunArgs),
    /// Solve a single scenario and dump the allocation as JSON
    Solve(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file (defaults apply for omitted keys)
    #[arg(long)]
    config: Option<PathBuf>,

    /// RNG seed (overrides ORIS_VLC_SEED and the config file)
    #[arg(long)]
    seed: Option<u64>,

    /// Monte Carlo trials
    #[arg(long)]
    trials: Option<usize>,

    /// Field of view in degrees; repeat for a sweep
    #[arg(long = "fov")]
    fov: Vec<f64>,

    /// ADR tier count in 0..=3; repeat for a sweep
    #[arg(long = "tiers")]
    tiers: Vec<u32>,

    /// Disable the ORIS deployment (only oris=false rows are produced)
    #[arg(long)]
    no_oris: bool,

    /// Disable body blockage
    #[arg(long)]
    no_blockage: bool,

    /// Allocation solver
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,

    /// Output CSV path (JSON for solve); default <subcommand>.csv
    #[arg(long)]
    out: Option<PathBuf>,

    /// User counts for sum-rate sweeps / user count for solve; repeatable
    #[arg(long = "users")]
    users: Vec<usize>,

    /// Heat map grid step in meters
    #[arg(long)]
    grid_step: Option<f64>,

    /// Worker threads (default: available parallelism)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Oracle,
    Exact,
    Greedy,
}

impl From<SolverArg> for SolverKind {
    fn from(value: SolverArg) -> Self {
        match value {
            SolverArg::Oracle => SolverKind::Oracle,
            SolverArg::Exact => SolverKind::Exact,
            SolverArg::Greedy => SolverKind::Greedy,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(error) = run(cli) {
        eprintln!("error: {error:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let (kind, args) = match &cli.command {
        Command::Cdf(args) => (ResultKind::Cdf, args),
        Command::Heatmap(args) => (ResultKind::Heatmap, args),
        Command::Usage(args) => (ResultKind::Usage, args),
        Command::SumRate(args) => (ResultKind::SumRate, args),
        Command::Solve(args) => (ResultKind::SumRate, args),
    };

    let mut config = load_config(args)?;
    apply_overrides(&mut config, args)?;

    if let Command::Solve(_) = &cli.command {
        return with_pool(config.experiment.jobs, || solve_command(config, args));
    }

    let experiment = config.resolve_experiment(kind);
    let spec = config.scene_spec()?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(config.experiment.out.clone().unwrap()));
    let echo = serde_json::to_value(&config).context("serializing config echo")?;

    let jobs = config.experiment.jobs;
    let result = with_pool(jobs, || -> Result<ExperimentResult> {
        Ok(match kind {
            ResultKind::Cdf => run_cdf(&spec, &experiment, echo)?,
            ResultKind::Heatmap => run_heatmap(&spec, &experiment, echo)?,
            ResultKind::Usage => run_usage(&spec, &experiment, echo)?,
            ResultKind::SumRate => run_sum_rate(&spec, &experiment, echo)?,
        })
    })?;

    write_results(&result, &out)
        .with_context(|| format!("writing results to {}", out.display()))?;
    print_summary(&result);
    println!(
        "wrote {} rows to {} (metadata: {})",
        result.records.len(),
        out.display(),
        sidecar_path(&out).display()
    );
    Ok(())
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => String::new(),
    };
    Ok(parse_config(&text)?)
}

/// Flags override config-file values; the seed also falls back to the
/// ORIS_VLC_SEED environment variable.
fn apply_overrides(config: &mut RunConfig, args: &RunArgs) -> Result<()> {
    let experiment = &mut config.experiment;
    if let Some(seed) = args.seed {
        experiment.seed = Some(seed);
    } else if experiment.seed.is_none() {
        if let Ok(raw) = std::env::var(SEED_ENV_VAR) {
            let parsed = raw
                .parse::<u64>()
                .with_context(|| format!("parsing {SEED_ENV_VAR}='{raw}'"))?;
            experiment.seed = Some(parsed);
        }
    }
    if let Some(trials) = args.trials {
        experiment.trials = Some(trials);
    }
    if !args.fov.is_empty() {
        experiment.fov_deg = Some(args.fov.clone());
    }
    if !args.tiers.is_empty() {
        experiment.tiers = Some(args.tiers.clone());
    }
    if args.no_oris {
        experiment.oris = Some(false);
    }
    if args.no_blockage {
        experiment.blockage = Some(false);
    }
    if let Some(solver) = args.solver {
        experiment.solver = Some(solver.into());
    }
    if !args.users.is_empty() {
        experiment.user_counts = Some(args.users.clone());
    }
    if let Some(step) = args.grid_step {
        experiment.grid_step_m = Some(step);
    }
    if let Some(jobs) = args.jobs {
        experiment.jobs = Some(jobs);
    }
    if let Some(out) = &args.out {
        experiment.out = Some(out.display().to_string());
    }
    config.validate()?;
    Ok(())
}

fn with_pool<T>(jobs: Option<usize>, body: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    match jobs {
        None => body(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building worker pool")?;
            pool.install(body)
        }
    }
}

fn print_summary(result: &ExperimentResult) {
    match &result.records {
        Records::Cdf(rows) => {
            let mut keys: Vec<(u64, u32, bool)> = rows
                .iter()
                .map(|r| (r.fov_deg.to_bits(), r.tier, r.oris))
                .collect();
            keys.dedup();
            for (fov_bits, tier, oris) in keys {
                let fov = f64::from_bits(fov_bits);
                let mut samples: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.fov_deg == fov && r.tier == tier && r.oris == oris)
                    .map(|r| r.snr_db)
                    .collect();
                samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let median = samples[samples.len() / 2];
                let outages = samples.iter().filter(|s| !s.is_finite()).count();
                println!(
                    "cdf fov={fov}° tier={tier} oris={oris}: {} samples, median {median:.2} dB, {outages} outages",
                    samples.len()
                );
            }
        }
        Records::Heatmap(rows) => {
            let mut keys: Vec<(String, bool)> = rows
                .iter()
                .map(|r| (format!("{:?}", r.receiver).to_lowercase(), r.oris))
                .collect();
            keys.dedup();
            for (receiver, oris) in keys {
                let values: Vec<f64> = rows
                    .iter()
                    .filter(|r| {
                        format!("{:?}", r.receiver).to_lowercase() == receiver && r.oris == oris
                    })
                    .map(|r| r.snr_db)
                    .collect();
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                println!(
                    "heatmap receiver={receiver} oris={oris}: {} cells, mean {mean:.2} dB",
                    values.len()
                );
            }
        }
        Records::Usage(rows) => {
            for r in rows {
                println!(
                    "usage fov={}° tier={}: mean {:.2} elements",
                    r.fov_deg, r.tier, r.mean_used
                );
            }
        }
        Records::SumRate(rows) => {
            for r in rows {
                println!(
                    "sum-rate users={} receiver={:?} oris={}: {:.3} bits/s/Hz",
                    r.users,
                    r.receiver,
                    r.oris,
                    r.mean_sum_rate_bps_hz
                );
            }
        }
    }
}

/// Build one scenario, run the chosen solver, verify the constraints, and
/// dump the result (and the scene) as JSON.
fn solve_command(mut config: RunConfig, args: &RunArgs) -> Result<()> {
    let experiment = config.resolve_experiment(ResultKind::SumRate);
    let spec: SceneSpec = config.scene_spec()?;
    let users = experiment.user_counts.first().copied().unwrap_or(1);
    let fov = *experiment
        .fov_deg
        .first()
        .context("field-of-view list must not be empty")?;
    let tier = experiment.tiers.first().copied().unwrap_or(1);

    let model = spec.model(fov, tier);
    let sampled = sample_users(users, &spec.room, &model, experiment.seed);
    let scenario = spec.scenario(sampled, experiment.blockage_enabled);
    let tables = GainTables::build(&scenario)?;
    let problem = build_problem(&tables, &spec.budget);
    let result = experiment.solver.solve(&problem)?;

    let verification = verify_solution(&problem, &result);
    if !verification.satisfied {
        bail!(
            "solver output failed constraint verification: {}",
            verification.violations.join("; ")
        );
    }

    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("solve.json"));
    std::fs::write(&out, result.to_json()?)
        .with_context(|| format!("writing {}", out.display()))?;
    let scene_out = out.with_extension("scene.json");
    std::fs::write(&scene_out, scenario.to_json()?)
        .with_context(|| format!("writing {}", scene_out.display()))?;
    println!(
        "solve users={users} fov={fov}° tier={tier} solver={:?}: objective {:.6e}, status {:?}, {} elements assigned ({} used), constraints satisfied",
        experiment.solver,
        result.objective,
        result.status,
        result.allocation.assigned_count(),
        result.elements_used(&problem),
    );
    println!("wrote {} and {}", out.display(), scene_out.display());
    Ok(())
}
