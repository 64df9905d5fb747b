//! `roslab` command line. Exit codes: 0 pass, 1 suite failure, 2 configuration
//! error, 3 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use roslab::harness::{self, ExperimentConfig, RunReport, OUTPUT_DIR_ENV};
use roslab::Error;

#[derive(Parser)]
#[command(name = "roslab", version, about = "Random-order-of-service queue with reneging: simulation, limits and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured system and write its event log and path CSVs.
    Simulate(Common),
    /// Solve the fluid model and check its residual.
    Fluid(Common),
    /// Compare fluid-scaled simulations with the fluid model across m.
    Converge(Common),
    /// Renewal, conservation, determinism, martingale and QV checks.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Check the integrity of a stored event log instead of running the suites.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Compare diffusion-scaled simulations with the SDE (advisory).
    Diffusion {
        #[command(flatten)]
        common: Common,
        /// Laplace rates; replaces the configured set.
        #[arg(long = "beta", num_args = 1..)]
        betas: Option<Vec<f64>>,
    },
    /// Build SDE coefficients along the fluid path, sample it, and run calibration checks.
    Sde(Common),
    /// Renewal identity and renewal FCLT variance.
    RenewalCheck(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory; defaults to the config value, then the environment.
    #[arg(short, long, env = OUTPUT_DIR_ENV)]
    out: Option<PathBuf>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Replications per m for the scaling suites.
    #[arg(long)]
    replications: Option<usize>,
    /// Restrict to the named checks.
    #[arg(long = "suite", num_args = 1..)]
    suites: Option<Vec<String>>,
}

impl Common {
    fn load(&self) -> roslab::Result<(ExperimentConfig, PathBuf)> {
        let text = std::fs::read_to_string(&self.config)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", self.config.display())))?;
        let mut cfg = ExperimentConfig::from_json(&text)?;
        if let Some(s) = self.master_seed {
            cfg.master_seed = s;
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        if let Some(r) = self.replications {
            cfg.schedule.replications = r;
        }
        if let Some(s) = &self.suites {
            cfg.suites = s.clone();
        }
        cfg.validate()?;
        let out = cfg.resolve_output_dir(self.out.clone());
        Ok((cfg, out))
    }
}

fn dispatch(command: Command) -> roslab::Result<(RunReport, PathBuf)> {
    let run = |common: &Common, f: fn(&ExperimentConfig, &Path) -> roslab::Result<RunReport>| {
        let (cfg, out) = common.load()?;
        Ok((f(&cfg, &out)?, out))
    };
    match command {
        Command::Simulate(c) => run(&c, harness::cmd_simulate),
        Command::Fluid(c) => run(&c, harness::cmd_fluid),
        Command::Converge(c) => run(&c, harness::cmd_converge),
        Command::Verify { common, log: None } => run(&common, harness::cmd_verify),
        Command::Verify { common, log: Some(log) } => {
            let (cfg, out) = common.load()?;
            Ok((harness::cmd_verify_log(&cfg, &log, &out)?, out))
        }
        Command::Diffusion { common, betas } => {
            let (mut cfg, out) = common.load()?;
            if let Some(b) = betas {
                cfg.betas = b;
                cfg.validate()?;
            }
            Ok((harness::cmd_diffusion(&cfg, &out)?, out))
        }
        Command::Sde(c) => run(&c, harness::cmd_sde),
        Command::RenewalCheck(c) => run(&c, harness::cmd_renewal_check),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Precondition(_) | Error::Json(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok((report, out)) => {
            for c in &report.checks {
                let v = match c.pass {
                    Some(true) => "PASS",
                    Some(false) => "FAIL",
                    None => "INFO",
                };
                println!("{v} {} ({})", c.name, c.criterion);
            }
            println!("report: {}", out.join("report.json").display());
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
