use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mtt_core::harness::{
    emit_report, format_summary, load_results, ospa_between, read_positions, run_experiment, write_simulation,
    ExperimentConfig, FilterKind,
};
use mtt_core::metrics::OspaParams;
use mtt_core::scenario::{simulate, NoiseMode, ScenarioSpec};

#[derive(Parser)]
#[command(name = "mtt", version, about = "Multi-target tracking experiments")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one run and write truth.csv and scans.csv.
    Sim {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        lambda: Option<f64>,
        /// Propagate truth without process noise.
        #[arg(long)]
        deterministic_truth: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo comparison of filters.
    Run {
        /// JSON experiment config; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Comma-separated: smc-phd, smc-cphd, u-aphd, u-acphd.
        #[arg(long, value_delimiter = ',')]
        filters: Option<Vec<FilterKind>>,
        #[arg(long, value_delimiter = ',')]
        lambda: Option<Vec<f64>>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_detected: Option<usize>,
        #[arg(long)]
        n_undetected: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Leave the timing columns empty so reruns are byte-identical.
        #[arg(long)]
        no_timing: bool,
    },
    /// OSPA between two CSV files with step, x and y columns.
    Ospa {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        est: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        order: f64,
        #[arg(long, default_value_t = 150.0)]
        cutoff: f64,
    },
    /// Print the summary of a results directory and redraw its plots.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Sim {
            scenario,
            seed,
            lambda,
            deterministic_truth,
            out,
        } => {
            let mut spec = match scenario {
                Some(p) => ScenarioSpec::load(&p).with_context(|| format!("loading {}", p.display()))?,
                None => ScenarioSpec::standard(),
            };
            if let Some(l) = lambda {
                spec = spec.with_clutter_rate(l);
            }
            let mode = if deterministic_truth {
                NoiseMode::Deterministic
            } else {
                NoiseMode::Stochastic
            };
            let sim = simulate(&spec, mode, &mut ChaCha8Rng::seed_from_u64(seed))?;
            for p in write_simulation(&sim, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Run {
            config,
            scenario,
            filters,
            lambda,
            runs,
            seed,
            n_detected,
            n_undetected,
            out,
            no_timing,
        } => {
            let mut cfg = match config {
                Some(p) => ExperimentConfig::load(&p).with_context(|| format!("loading {}", p.display()))?,
                None => ExperimentConfig::default(),
            };
            cfg.scenario = scenario.or(cfg.scenario);
            cfg.filters = filters.unwrap_or(cfg.filters);
            cfg.clutter_rates = lambda.unwrap_or(cfg.clutter_rates);
            cfg.runs = runs.unwrap_or(cfg.runs);
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.n_detected = n_detected.unwrap_or(cfg.n_detected);
            cfg.n_undetected = n_undetected.unwrap_or(cfg.n_undetected);
            cfg.out_dir = out.unwrap_or(cfg.out_dir);
            cfg.timing &= !no_timing;
            cfg.threads = cli.threads.or(cfg.threads);
            let results = run_experiment(&cfg)?;
            emit_report(&results, &cfg.out_dir)?;
            print!("{}", format_summary(&results));
            let excluded: usize = results.cells.iter().map(|c| c.diverged.len()).sum();
            if excluded > 0 {
                log::warn!("{excluded} run(s) excluded, see divergence.csv");
            }
        }
        Command::Ospa {
            truth,
            est,
            order,
            cutoff,
        } => {
            if !(order >= 1.0 && cutoff > 0.0) {
                bail!("need order >= 1 and cutoff > 0");
            }
            let params = OspaParams { order, cutoff };
            let per_step = ospa_between(&read_positions(&truth)?, &read_positions(&est)?, &params);
            println!("step,ospa,loc,card");
            for (k, r) in &per_step {
                println!("{k},{},{},{}", r.total, r.loc, r.card);
            }
            if !per_step.is_empty() {
                let n = per_step.len() as f64;
                let mean = per_step.iter().map(|(_, r)| r.total).sum::<f64>() / n;
                eprintln!("mean OSPA over {} steps: {mean:.4}", per_step.len());
            }
        }
        Command::Report { input } => {
            let results = load_results(&input).with_context(|| format!("reading {}", input.display()))?;
            emit_report(&results, &input)?;
            print!("{}", format_summary(&results));
        }
    }
    Ok(())
}
