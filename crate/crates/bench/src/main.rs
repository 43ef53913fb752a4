use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lzqnd_bench::acceptance::{self, Context};
use lzqnd_bench::commands;
use lzqnd_bench::sweep;
use lzqnd_bench::{BenchError, Config, Result};

#[derive(Parser)]
#[command(name = "lzqnd", version, about = "Landau-Zener qubit with a QND-coupled damped meter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file; every field has a default.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set meter.kappa=2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all cores by default.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// P(t) for one configuration (one file per gamma0 with the ame engine).
    Trace(Common),
    /// Cartesian parameter sweep.
    Sweep(Common),
    /// Pulsed coupling run.
    Strobe(Common),
    /// Monte Carlo over pulse timing errors.
    NoiseMc(Common),
    /// BLP non-Markovianity measure.
    Nm(Common),
    /// Meter-dressed gap at the anticrossing.
    Gap(Common),
    /// Acceptance suite.
    Verify {
        /// `all`, `analytic`, or comma-separated ids such as `c03,c12`.
        #[arg(long, default_value = "all")]
        only: String,
        /// JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Multiply every automatic step size.
        #[arg(long, default_value_t = 1.0)]
        dt_scale: f64,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn load(c: &Common) -> Result<Config> {
    let mut cfg = Config::load(c.config.as_deref(), &c.set)?;
    if let Some(seed) = c.seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

fn out_path(c: &Common, default: &str) -> PathBuf {
    c.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn init_pool(workers: Option<usize>) -> Result<()> {
    if let Some(n) = workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| BenchError::config(format!("--workers: {e}")))?;
    }
    Ok(())
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Trace(c) => {
            init_pool(c.workers)?;
            report(&commands::cmd_trace(&load(&c)?, &out_path(&c, "trace.csv"))?);
        }
        Command::Sweep(c) => {
            report(&sweep::cmd_sweep(&load(&c)?, &out_path(&c, "sweep.csv"), c.workers)?);
        }
        Command::Strobe(c) => {
            init_pool(c.workers)?;
            report(&[commands::cmd_strobe(&load(&c)?, &out_path(&c, "strobe.csv"))?]);
        }
        Command::NoiseMc(c) => {
            init_pool(c.workers)?;
            report(&commands::cmd_noise_mc(&load(&c)?, &out_path(&c, "noise_mc.csv"))?);
        }
        Command::Nm(c) => {
            init_pool(c.workers)?;
            report(&[commands::cmd_nm(&load(&c)?, &out_path(&c, "nm.csv"))?]);
        }
        Command::Gap(c) => {
            init_pool(c.workers)?;
            report(&[commands::cmd_gap(&load(&c)?, &out_path(&c, "gap.csv"))?]);
        }
        Command::Verify { only, out, dt_scale, workers } => {
            init_pool(workers)?;
            if !(dt_scale > 0.0 && dt_scale.is_finite()) {
                return Err(BenchError::config("--dt-scale must be > 0"));
            }
            let reports = acceptance::run_suite(&only, &Context { dt_scale }, |r| println!("{}", r.render()))?;
            let path = out.unwrap_or_else(|| PathBuf::from("verify.json"));
            let text = serde_json::to_string_pretty(&reports)?;
            std::fs::write(&path, text).map_err(|e| BenchError::io(&path, e))?;
            let failed: Vec<&str> = reports.iter().filter(|r| !r.pass()).map(|r| r.id.as_str()).collect();
            println!("{} of {} passed; report in {}", reports.len() - failed.len(), reports.len(), path.display());
            if !failed.is_empty() {
                return Err(BenchError::Verification(failed.join(", ")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
