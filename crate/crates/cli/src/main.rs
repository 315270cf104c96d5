mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use conformity::prelude::*;

use commands::AschOptions;
use config::{read_text, Format, Overrides, RunConfig, SweepConfig};
use output::Artifacts;

#[derive(Debug, Parser)]
#[command(version, about = "Private and expressed opinion dynamics under pressure to conform")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Local,
    Global,
}

impl From<ModeArg> for PublicOpinion {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Local => PublicOpinion::Local,
            ModeArg::Global => PublicOpinion::Global,
        }
    }
}

#[derive(Debug, Args)]
struct Common {
    /// Output directory (overrides the config)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Random seed (overrides the config)
    #[arg(long)]
    seed: Option<u64>,

    /// Public opinion each agent conforms to
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,

    /// Format of tabular outputs
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            mode: self.mode.map(Into::into),
            format: self.format,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Iterate the dynamics and export the trajectory
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Steady-state operators, limits and the disagreement report
    Steady {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Asch-style conformity experiments
    Asch {
        /// Scenario JSON; defaults to the independent-individual corner
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run a k x k grid over (lambda1, phi1) instead of one scenario
        #[arg(long, value_name = "K")]
        grid: Option<usize>,
        /// Compare the threshold model across these thresholds
        #[arg(long, value_delimiter = ',')]
        taus: Vec<f64>,
        /// Number of consecutive seeds for the threshold comparison
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Monte-Carlo sweep over random instances
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> Result<(PathBuf, Artifacts)> {
    match cli.command {
        Command::Simulate { config, common } => {
            let cfg = RunConfig::load(&config, &common.overrides())?;
            Ok((cfg.out_dir(), commands::simulate_cmd(&cfg)?))
        }
        Command::Steady { config, common } => {
            let cfg = RunConfig::load(&config, &common.overrides())?;
            Ok((cfg.out_dir(), commands::steady_cmd(&cfg)?))
        }
        Command::Asch {
            config,
            grid,
            taus,
            seeds,
            common,
        } => {
            let mut spec = match &config {
                Some(p) => AschScenario::from_json(&read_text(p)?)?,
                None => AschScenario::new(0.1, 0.9),
            };
            if let Some(s) = common.seed {
                spec.seed = s;
            }
            if let Some(m) = common.mode {
                spec.mode = m.into();
            }
            let opts = AschOptions { grid, taus, seeds };
            let out = common.out.unwrap_or_else(|| PathBuf::from("out"));
            Ok((out, commands::asch_cmd(&spec, &opts, StopCriteria::default())?))
        }
        Command::Sweep { config, common } => {
            let cfg = SweepConfig::load(&config, &common.overrides())?;
            let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            Ok((out, commands::sweep_cmd(&cfg)?))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(cli).and_then(|(dir, artifacts)| artifacts.commit(&dir));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
