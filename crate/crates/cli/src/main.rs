use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use resmin::config::ExperimentConfig;
use resmin::experiments::{self, RunOptions, RunSummary};
use resmin::Error;

#[derive(Parser, Debug)]
#[command(
    name = "resmin",
    version,
    about = "Residual minimisation with certified error bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train with exact boundary values and check the H² certificate at every checkpoint.
    CertifyRun(Common),
    /// Harmonic-mode family showing why boundary penalties only control H^{1/2}.
    FailureDemo(Common),
    /// Exact boundary values versus an L² boundary penalty.
    CompareBc(Common),
    /// Space-time training on the heat equation with the X-norm ratio series.
    ParabolicRun(Common),
    /// Interior versus first-order Sobolev residual training.
    SobolevRun(Common),
    /// Analytic gradient versus finite differences.
    FdCheck(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Single seed (overrides the config's seed list).
    #[arg(long)]
    seed: Option<u64>,
    /// Threads for running seeds concurrently.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

impl Common {
    fn load(&self) -> resmin::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> resmin::Result<RunSummary> {
    let (common, runner): (
        &Common,
        fn(&ExperimentConfig, RunOptions) -> resmin::Result<RunSummary>,
    ) = match &cli.command {
        Command::CertifyRun(c) => (c, experiments::run_certified),
        Command::FailureDemo(c) => (c, |cfg, _| experiments::run_failure_demo(cfg)),
        Command::CompareBc(c) => (c, experiments::run_penalty_vs_exact),
        Command::ParabolicRun(c) => (c, experiments::run_parabolic),
        Command::SobolevRun(c) => (c, experiments::run_sobolev),
        Command::FdCheck(c) => (c, experiments::run_fd_check),
    };
    let cfg = common.load()?;
    runner(
        &cfg,
        RunOptions {
            parallel: common.parallel,
        },
    )
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::BoundViolation { .. } => 2,
        Error::Divergence { .. } => 3,
        Error::Config(_) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            for line in &summary.lines {
                println!("{line}");
            }
            for file in &summary.files {
                println!("wrote {}", file.display());
            }
            if summary.failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
