use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use maximin_norms::config::{parse_societies, ConfigFile, Scenario, SimConfig};
use maximin_norms::experiment::{load_norms, load_stats, run_experiment, ExperimentConfig};
use maximin_norms::norms::generalise;
use maximin_norms::Result;

#[derive(Parser)]
#[command(version, about = "Harvest societies with maximin reward shaping and norm mining")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate societies, writing CSVs and norm dumps.
    Run {
        #[arg(long)]
        scenario: Option<Scenario>,
        /// baseline, rawle or both.
        #[arg(long)]
        society: Option<String>,
        #[arg(long)]
        train_episodes: Option<usize>,
        #[arg(long)]
        eval_episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Independent seeds starting at --seed.
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Flat key-value file; command-line flags take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Recompute the statistics table from a result directory.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Print the generalised norm trees from a result directory.
    Norms {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            society,
            train_episodes,
            eval_episodes,
            seed,
            replicates,
            out,
            config,
        } => {
            let mut cfg = ExperimentConfig::default();
            if let Some(path) = config {
                ConfigFile::load(&path)?.apply(&mut cfg)?;
            }
            if let Some(s) = scenario {
                if s != cfg.sim.scenario {
                    let fresh = SimConfig::for_scenario(s);
                    cfg.sim.scenario = s;
                    cfg.sim.grid_width = fresh.grid_width;
                    cfg.sim.grid_height = fresh.grid_height;
                }
            }
            if let Some(s) = society {
                cfg.societies = parse_societies(&s)?;
                cfg.sim.society = cfg.societies[0];
            }
            if let Some(n) = train_episodes {
                cfg.train_episodes = n;
            }
            if let Some(n) = eval_episodes {
                cfg.eval_episodes = n;
            }
            if let Some(s) = seed {
                cfg.sim.seed = s;
            }
            if let Some(n) = replicates {
                cfg.replicates = n;
            }
            let result = run_experiment(&cfg)?;
            result.write(&out)?;
            if let Some(report) = result.stats()? {
                print!("{}", report.render());
            }
            eprintln!("results written to {}", out.display());
        }
        Command::Stats { input } => print!("{}", load_stats(&input)?.render()),
        Command::Norms { input } => {
            for (society, summary) in load_norms(&input)? {
                let tree = generalise(summary.norms.keys());
                println!("== {} ({} norms) ==", society.column(), summary.norms.len());
                print!("{}", tree.render());
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
            ExitCode::FAILURE
        }
    }
}
