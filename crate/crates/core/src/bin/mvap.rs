use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mvap::agents::Algorithm;
use mvap::harness::{emit_outputs, emit_sweep, run_campaign, sweep_requirement, ExperimentConfig};
use mvap::Error;

#[derive(Parser)]
#[command(name = "mvap", version, about = "Train and compare offloading agents for a virtual access point")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the selected algorithms over all seeds and write the convergence results.
    Train(Common),
    /// Train at each fixed latency requirement and write the reward-vs-requirement table.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated requirements in seconds (overrides the config grid).
        #[arg(long, value_delimiter = ',')]
        t_require: Option<Vec<f64>>,
    },
    /// Parse and validate a config file, then print the resolved settings.
    ValidateConfig(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Ql,
    Dqn,
    Ddqn,
    Rm,
    All,
}

#[derive(Args)]
struct Common {
    /// TOML config file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(a) = self.algo {
            cfg.run.algorithms = match a {
                AlgoArg::Ql => vec![Algorithm::Ql],
                AlgoArg::Dqn => vec![Algorithm::Dqn],
                AlgoArg::Ddqn => vec![Algorithm::Ddqn],
                AlgoArg::Rm => vec![Algorithm::Rm],
                AlgoArg::All => Algorithm::ALL.to_vec(),
            };
        }
        if let Some(n) = self.episodes {
            cfg.run.episodes = n;
        }
        if let Some(s) = self.seed {
            cfg.run.seeds = vec![s];
        }
        if let Some(out) = &self.out {
            cfg.run.out_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train(common) => {
            let cfg = common.load()?;
            let campaign = run_campaign(&cfg)?;
            let files = emit_outputs(&campaign, &cfg.run.out_dir)?;
            for a in &campaign.summary.algorithms {
                println!(
                    "{:<5} convergence episode {:>5}  plateau {:>7.3}  final average {:>7.3}",
                    a.algorithm.label(),
                    a.convergence_episode,
                    a.plateau,
                    a.final_average
                );
            }
            println!("wrote {} files to {}", files.len(), cfg.run.out_dir.display());
        }
        Command::Sweep { common, t_require } => {
            let cfg = common.load()?;
            let grid = t_require.unwrap_or_else(|| cfg.run.sweep_t_require_s.clone());
            let sweep = sweep_requirement(&cfg, &grid)?;
            let files = emit_sweep(&sweep, &cfg.run.out_dir)?;
            for row in &sweep.table.rows {
                let cols: Vec<String> = sweep
                    .table
                    .algorithms
                    .iter()
                    .zip(&row.rewards)
                    .map(|(a, r)| format!("{} {r:.3}", a.label()))
                    .collect();
                println!("t_require {:.3} s: {}", row.t_require_s, cols.join("  "));
            }
            println!("wrote {} files to {}", files.len(), cfg.run.out_dir.display());
        }
        Command::ValidateConfig(common) => {
            let cfg = common.load()?;
            print!("{}", cfg.to_toml_string());
            eprintln!("config is valid");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config { .. } => 2,
                Error::Io { .. } => 3,
                _ => 1,
            })
        }
    }
}
