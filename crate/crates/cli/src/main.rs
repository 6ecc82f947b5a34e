use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adabound_core::config::{fnv1a_hex, Config};
use adabound_core::harness::{
    lr_series_to_string, read_trace, run_experiment, summary_to_string, sweep, write_trace, SweepPoint,
};
use adabound_core::problems::{derive_cycle_length_thm1, derive_cycle_length_thm2};
use adabound_core::verify::{run_all_with, run_suite};
use adabound_core::Error;
use clap::{Args, Parser, Subcommand};

/// Bounded-rate optimizer experiments.
#[derive(Parser)]
#[command(name = "adabound", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; repeatable. Applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Shorthand for `--set run.seed=N`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its trace.
    Run(ConfigArgs),
    /// Run every point of the config's `grid.*` keys and write a summary.
    Sweep {
        #[command(flatten)]
        args: ConfigArgs,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the built-in acceptance suites.
    Verify {
        /// Run a single suite.
        #[arg(long)]
        suite: Option<String>,
    },
    /// Print the smallest cycle length for an adversarial construction.
    DeriveC {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        theorem: u8,
        #[arg(long, default_value_t = 0.0)]
        beta1: f64,
        #[arg(long)]
        beta2: f64,
    },
    /// Re-emit the min/median/max learning-rate series of a stored trace.
    ExportLr {
        #[arg(long)]
        trace: PathBuf,
        /// Write `export-lr_<hash>.csv` here instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure with its exit code: 1 for run or suite failures, 2 for bad input.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::InvalidParameter { .. } | Error::Malformed { .. } => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(message: String) -> Failure {
    Failure { code: 2, message }
}

fn load_config(args: &ConfigArgs) -> Result<Config, Failure> {
    let mut cfg = match &args.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    for assignment in &args.set {
        cfg.apply_override(assignment)?;
    }
    if let Some(seed) = args.seed {
        cfg.set("run.seed", &seed.to_string())?;
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure {
        code: 1,
        message: format!("cannot create {}: {e}", dir.display()),
    })
}

fn run(args: &ConfigArgs) -> Result<(), Failure> {
    let cfg = load_config(args)?;
    let run_cfg = cfg.run_config()?;
    for w in run_cfg.optimizer.warnings() {
        eprintln!("warning: {w}");
    }
    let out = run_experiment(&run_cfg)?;
    ensure_dir(&args.out)?;
    let path = args.out.join(format!("run_{}.csv", cfg.hash()));
    write_trace(&out.records, &path)?;
    let last = out.last();
    println!("trace: {}", path.display());
    println!("seed: {}", run_cfg.seed);
    println!("final x: {:?}", out.final_x());
    println!("final loss: {}", last.loss);
    if let Some(avg) = last.avg_regret {
        println!("average regret: {avg}");
    }
    Ok(())
}

fn run_sweep(args: &ConfigArgs, threads: Option<usize>) -> Result<(), Failure> {
    let cfg = load_config(args)?;
    let points = cfg.grid_points()?;
    ensure_dir(&args.out)?;
    let points: Vec<SweepPoint> = points
        .into_iter()
        .map(|(label, point)| SweepPoint {
            label,
            trace_path: Some(args.out.join(format!("run_{}.csv", point.hash()))),
            config: point.run_config(),
        })
        .collect();
    let threads = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let rows = sweep(&points, threads)?;
    for row in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "grid point {} ({}) failed: {}",
            row.grid_point,
            row.param_values,
            row.error.as_deref().unwrap_or("")
        );
    }
    let path = args.out.join(format!("sweep_{}.csv", cfg.hash()));
    fs::write(&path, summary_to_string(&rows)).map_err(|e| Failure {
        code: 1,
        message: format!("cannot write {}: {e}", path.display()),
    })?;
    println!("summary: {}", path.display());
    Ok(())
}

fn verify(suite: Option<&str>) -> Result<(), Failure> {
    let reports = match suite {
        Some(name) => {
            let r = run_suite(name)?;
            println!("{r}");
            vec![r]
        }
        None => run_all_with(|r| println!("{r}")),
    };
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            message: format!("{failed} of {} suites failed", reports.len()),
        })
    }
}

fn derive_c(theorem: u8, beta1: f64, beta2: f64) -> Result<(), Failure> {
    let c = if theorem == 1 {
        derive_cycle_length_thm1(beta2)?
    } else {
        derive_cycle_length_thm2(beta1, beta2)?
    };
    println!("{c}");
    Ok(())
}

fn export_lr(trace: &Path, out: Option<&Path>) -> Result<(), Failure> {
    if !trace.exists() {
        return Err(input_error(format!("trace file {} does not exist", trace.display())));
    }
    let text = lr_series_to_string(&read_trace(trace)?);
    match out {
        None => {
            let mut stdout = io::stdout().lock();
            match stdout.write_all(text.as_bytes()) {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
                    return Err(Failure {
                        code: 1,
                        message: format!("cannot write to stdout: {e}"),
                    })
                }
                _ => {}
            }
        }
        Some(dir) => {
            ensure_dir(dir)?;
            let path = dir.join(format!("export-lr_{}.csv", fnv1a_hex(text.as_bytes())));
            fs::write(&path, &text).map_err(|e| Failure {
                code: 1,
                message: format!("cannot write {}: {e}", path.display()),
            })?;
            println!("lr series: {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Sweep { args, threads } => run_sweep(args, *threads),
        Command::Verify { suite } => verify(suite.as_deref()),
        Command::DeriveC { theorem, beta1, beta2 } => derive_c(*theorem, *beta1, *beta2),
        Command::ExportLr { trace, out } => export_lr(trace, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
