use std::path::PathBuf;
use std::process::ExitCode;

use alegeo_cli::{
    cmd_decay, cmd_energy, cmd_exhaust, cmd_solve, cmd_verify, CliError, Console, Overrides,
    RunConfig,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "alegeo",
    version,
    about = "Epsilon-geodesics of ALE Kähler potentials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Drop schedule levels below this ε.
    #[arg(long)]
    eps_min: Option<f64>,
    /// Drop schedule levels above this ε.
    #[arg(long)]
    eps_max: Option<f64>,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve along the ε schedule and write the run directory.
    Solve(Common),
    /// Check every invariant of a run directory (given as DIR, or by
    /// `--out` / the config's output directory).
    Verify {
        #[command(flatten)]
        common: Common,
        dir: Option<PathBuf>,
    },
    /// K-energy scans of every level.
    Energy(Common),
    /// Uniform bounds and decay fits at one level.
    Decay(Common),
    /// Solution drift over nested domains.
    Exhaust(Common),
}

fn load(c: &Common) -> Result<RunConfig, CliError> {
    let path = c
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(&Overrides {
        out: c.out.clone(),
        eps_min: c.eps_min,
        eps_max: c.eps_max,
    })?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(c) => cmd_solve(&load(&c)?, Console { quiet: c.quiet }).map(drop),
        Command::Verify { common, dir } => {
            let out = Console {
                quiet: common.quiet,
            };
            let dir = match (dir, &common.out) {
                (Some(d), _) => d,
                (None, Some(d)) => d.clone(),
                (None, None) => load(&common)?.out_dir(),
            };
            cmd_verify(&dir, out).map(drop)
        }
        Command::Energy(c) => cmd_energy(&load(&c)?, Console { quiet: c.quiet }).map(drop),
        Command::Decay(c) => cmd_decay(&load(&c)?, Console { quiet: c.quiet }).map(drop),
        Command::Exhaust(c) => cmd_exhaust(&load(&c)?, Console { quiet: c.quiet }).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are config errors; help and version are not errors
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("alegeo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
