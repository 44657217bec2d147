//! `tslab`: run experiments, sweeps and distribution checks from TOML configs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use tslab::distcheck::{verify_grid, Def1Report, VerifyOptions};
use tslab::experiment::{write_run, write_sweep, DistName, ExperimentConfig, SeedSpec};
use tslab::DistKind;

/// Exit code for configs that fail to parse or validate.
const EXIT_INVALID: u8 = 2;
/// Exit code for runtime failures and failed checks.
const EXIT_FAILURE: u8 = 1;

#[derive(Parser)]
#[command(name = "tslab", version, about = "Linear Thompson sampling laboratory")]
struct Cli {
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of one config; writes per-seed CSVs and summary.json.
    Run(RunArgs),
    /// Run the cross product of the config's [sweep] grid; writes sweep.csv.
    Sweep(RunArgs),
    /// Monte Carlo check of the perturbation distributions; writes verify.json.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeds (overrides the config).
    #[arg(long)]
    seeds: Option<u32>,
    /// Output directory (overrides the config).
    #[arg(long, env = "TSLAB_OUT_DIR")]
    out: Option<PathBuf>,
    /// Check the configured perturbation distribution before running.
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [2, 5, 10, 20])]
    dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values = ["gaussian", "uniform_ball", "uniform_sphere"])]
    dists: Vec<String>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; the report goes to stdout when absent.
    #[arg(long, env = "TSLAB_OUT_DIR")]
    out: Option<PathBuf>,
    /// Add a zero perturbation as a negative control (the check must fail).
    #[arg(long, hide = true)]
    break_dist: bool,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn invalid(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_INVALID,
            error: error.into(),
        }
    }

    fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_FAILURE,
            error: error.into(),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    }
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Verify(args) => cmd_verify(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::from_file(&args.config).map_err(Failure::invalid)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(n) = args.seeds {
        cfg.seeds = SeedSpec::Count(n);
    }
    cfg.validate().map_err(Failure::invalid)?;
    Ok(cfg)
}

fn out_dir(args: &RunArgs, cfg: &ExperimentConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("tslab-out"))
}

/// Builds the lane of the first seed in every cell so that instance errors
/// (bad arm files, dimension mismatches) are reported as config errors.
fn check_instances(cells: &[ExperimentConfig]) -> Outcome {
    for cell in cells {
        let seed = cell.seeds.indices()[0];
        cell.lane(seed).map_err(Failure::invalid)?;
    }
    Ok(())
}

fn verify_cells(cells: &[ExperimentConfig]) -> Outcome {
    let mut pairs: Vec<(DistName, usize)> = Vec::new();
    for c in cells {
        if !pairs.contains(&(c.policy.dist, c.dim)) {
            pairs.push((c.policy.dist, c.dim));
        }
    }
    for (dist, dim) in pairs {
        let report = verify_grid(&[dist.kind()], &[dim], &VerifyOptions::default(), 0)
            .map_err(Failure::runtime)?;
        if !report.all_pass() {
            return Err(Failure::runtime(anyhow::anyhow!(
                "distribution check failed for {dist:?} at d = {dim}"
            )));
        }
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Outcome {
    let cfg = load(args)?;
    let single = [cfg.clone()];
    check_instances(&single)?;
    if args.verify {
        verify_cells(&single)?;
    }
    let records = cfg.run().map_err(Failure::runtime)?;
    let dir = out_dir(args, &cfg);
    let summary = write_run(&dir, &cfg, &records)
        .with_context(|| format!("writing {}", dir.display()))
        .map_err(Failure::runtime)?;
    println!(
        "{} seeds, T = {}: mean cumulative regret {:.6} (std {:.6}); output in {}",
        records.len(),
        cfg.horizon,
        summary.mean_cum_regret,
        summary.std_cum_regret,
        dir.display()
    );
    for s in &summary.seeds {
        for w in &s.warnings {
            eprintln!("warning: seed {}: {w}", s.seed);
        }
    }
    Ok(())
}

fn cmd_sweep(args: &RunArgs) -> Outcome {
    let cfg = load(args)?;
    let cells = cfg.sweep_cells().map_err(Failure::invalid)?;
    check_instances(&cells)?;
    if args.verify {
        verify_cells(&cells)?;
    }
    let rows = cfg.run_sweep().map_err(Failure::runtime)?;
    let dir = out_dir(args, &cfg);
    write_sweep(&dir, &rows)
        .with_context(|| format!("writing {}", dir.display()))
        .map_err(Failure::runtime)?;
    println!(
        "{} cells; output in {}",
        rows.len(),
        dir.join("sweep.csv").display()
    );
    Ok(())
}

fn parse_dist(name: &str) -> Result<DistKind, Failure> {
    match name.trim() {
        "gaussian" => Ok(DistKind::Gaussian),
        "uniform_ball" => Ok(DistKind::UniformBall),
        "uniform_sphere" => Ok(DistKind::UniformSphere),
        other => Err(Failure::invalid(anyhow::anyhow!(
            "unknown distribution '{other}'"
        ))),
    }
}

fn cmd_verify(args: &VerifyArgs) -> Outcome {
    let mut kinds = args
        .dists
        .iter()
        .map(|d| parse_dist(d))
        .collect::<Result<Vec<_>, _>>()?;
    if args.break_dist {
        kinds.push(DistKind::Constant(Vec::new()));
    }
    if kinds.is_empty() || args.dims.is_empty() {
        return Err(Failure::invalid(anyhow::anyhow!("empty verification grid")));
    }
    let opts = VerifyOptions {
        samples: args.samples,
        ..Default::default()
    };
    let report = verify_grid(&kinds, &args.dims, &opts, args.seed).map_err(Failure::invalid)?;
    emit_report(&report, args.out.as_deref())?;
    let failed = report.entries.iter().filter(|e| !e.pass).count();
    eprintln!(
        "{} of {} checks passed",
        report.entries.len() - failed,
        report.entries.len()
    );
    if failed > 0 {
        return Err(Failure::runtime(anyhow::anyhow!("{failed} checks failed")));
    }
    Ok(())
}

fn emit_report(report: &Def1Report, out: Option<&Path>) -> Outcome {
    let json = serde_json::to_string_pretty(report).map_err(Failure::runtime)?;
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .and_then(|_| std::fs::write(dir.join("verify.json"), json + "\n"))
                .with_context(|| format!("writing {}", dir.display()))
                .map_err(Failure::runtime)?;
        }
        None => println!("{json}"),
    }
    Ok(())
}
