use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rrnash::harness::{self, ExecOptions, HarnessError};
use rrnash::schedule::ScheduleKind;

#[derive(Parser)]
#[command(name = "rrnash", version, about = "Random-reshuffling Nash equilibrium seeking experiments")]
struct Cli {
    /// Added to every run seed in the config.
    #[arg(long, global = true, default_value_t = 0)]
    seed_offset: u64,
    /// Parallel runs (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Also write per-inner-step traces.
    #[arg(long, global = true)]
    debug_inner: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every arm and seed, write traces, aggregate and manifest.
    Run {
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve for the equilibrium and print it.
    SolveNe { config: PathBuf },
    /// Print the step-size condition report and the theoretical bounds.
    Check { config: PathBuf },
    /// Shuffling-variance study over `variance.alphas`.
    Variance {
        config: PathBuf,
        /// Write the estimates as CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, offset: u64) -> Result<harness::ExperimentConfig, HarnessError> {
    Ok(harness::load_config(path)?.with_seed_offset(offset))
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let opts = ExecOptions {
        jobs: cli.jobs,
        debug_inner: cli.debug_inner,
    };
    match cli.command {
        Command::Run { config, out } => {
            let mut cfg = load(&config, cli.seed_offset)?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let res = harness::execute(&cfg, &opts)?;
            harness::write_artifacts(&res, &cfg.output_dir)?;
            for a in &res.aggregate.arms {
                println!(
                    "{:<12} runs={:<3} final mean_e={:.4} std_e={:.4}",
                    a.arm.name(),
                    a.runs,
                    a.mean_e.last().copied().unwrap_or(0.0),
                    a.std_e.last().copied().unwrap_or(0.0)
                );
            }
            println!("wrote {}", cfg.output_dir.display());
        }
        Command::SolveNe { config } => {
            let cfg = load(&config, cli.seed_offset)?;
            let p = harness::prepare(&cfg)?;
            print!("{}", p.ne.to_text());
            print!("{}", harness::constants_text(&p.constants));
        }
        Command::Check { config } => {
            let cfg = load(&config, cli.seed_offset)?;
            let mut forced = cfg.clone();
            forced.force = true;
            let p = harness::prepare(&forced)?;
            print!("{}", p.conditions);
            if p.schedule.kind == ScheduleKind::Constant {
                let (a0, y0) = p.initial_errors();
                match p.bounds(a0, y0) {
                    Ok(b) => print!("{}", b.to_text()),
                    Err(reason) => println!("bounds unavailable: {reason}"),
                }
                if !p.conditions.pass() && !cfg.force {
                    return Err(HarnessError::ConditionsFailed("see report above".into()));
                }
            }
        }
        Command::Variance { config, out } => {
            let cfg = load(&config, cli.seed_offset)?;
            let mut forced = cfg.clone();
            forced.force = true;
            let p = harness::prepare(&forced)?;
            let study = harness::variance_study(&p)?;
            for pt in &study.points {
                println!(
                    "alpha={:<10} max sigma_shuffle^2={:.6e} (se {:.2e}) bound={:.6e}",
                    pt.alpha,
                    pt.estimate.max(),
                    pt.estimate.std_error.iter().copied().fold(0.0, f64::max),
                    pt.bound
                );
            }
            if let Some(s) = study.slope {
                println!("log-log slope = {s:.4}");
            }
            if let Some(out) = out {
                std::fs::write(&out, study.to_csv()).map_err(|e| HarnessError::Io { path: out, source: e })?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
