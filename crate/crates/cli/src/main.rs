//! `fnls` — command line front end for the simulator and its verification
//! probes.
//!
//! Every run subcommand reads one flat `key = value` configuration file
//! (see `fnls_core::config`), applies the flag overrides, and delegates to
//! the matching `fnls_core::app` command.  Exit codes: 0 success, 2
//! configuration error, 3 blow-up, 4 violated diagnostic.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use fnls_core::app;
use fnls_core::config::RunConfig;

#[derive(Parser)]
#[command(
    name = "fnls",
    version,
    about = "Stochastic fractional Schrodinger simulator and verification lab"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single path; emit the mass series, ledger, and snapshots.
    Simulate(RunArgs),
    /// Run an ensemble; check the expected-mass law and moment bounds.
    Ensemble(RunArgs),
    /// Print the admissible exponent pair and regime report for a triple.
    Admissible {
        /// Spatial dimension.
        n: usize,
        /// Dispersion exponent in (0, 1].
        alpha: f64,
        /// Nonlinearity power (0 = linear).
        sigma: f64,
    },
    /// Coupled dt-refinement study of the stochastic mass balance.
    VerifyMass(RunArgs),
    /// Pullback absorption probe over anchor and horizon grids.
    AbsorbProbe(RunArgs),
    /// Mixed space-time norm of one path.
    Strichartz(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file; defaults apply for every key it omits.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the global seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Override the number of sample paths.
    #[arg(long, value_name = "N")]
    paths: Option<usize>,
    /// Override the output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override the time step.
    #[arg(long, value_name = "F64")]
    dt: Option<f64>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig, fnls_core::Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(paths) = self.paths {
            cfg.paths = paths;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(dt) = self.dt {
            cfg.run.dt = dt;
        }
        Ok(cfg)
    }

    fn run(&self, f: impl FnOnce(&RunConfig) -> i32) -> i32 {
        match self.load() {
            Ok(cfg) => f(&cfg),
            Err(err) => {
                eprintln!("error: {err}");
                2
            }
        }
    }
}

fn main() {
    app::init_thread_pool();
    let cli = Cli::parse();
    let start = Instant::now();
    let code = match cli.command {
        Command::Simulate(args) => args.run(app::cmd_simulate),
        Command::Ensemble(args) => args.run(app::cmd_ensemble),
        Command::Admissible { n, alpha, sigma } => app::cmd_admissible(n, alpha, sigma),
        Command::VerifyMass(args) => args.run(app::cmd_verify_mass),
        Command::AbsorbProbe(args) => args.run(app::cmd_absorb_probe),
        Command::Strichartz(args) => args.run(app::cmd_strichartz),
    };
    eprintln!("elapsed: {:.2}s", start.elapsed().as_secs_f64());
    std::process::exit(code);
}
