use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use edgegen::cli::{cmd_compare, cmd_oracle, cmd_run, cmd_sweep, DEFAULT_OMEGAS};
use edgegen::config::{load_config, RunConfig};
use edgegen::{Result, SimError};

/// Edge text-to-image service simulator.
#[derive(Parser)]
#[command(name = "edgegen", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `workload.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one strategy over every slot.
    Run {
        #[command(flatten)]
        common: Common,
        /// A single `assignment+allocation` name.
        #[arg(long)]
        strategies: Option<String>,
    },
    /// Run several strategies on a shared workload.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated `assignment+allocation` names.
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<String>,
    },
    /// Re-run one strategy for several trade-off weights.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated, ascending weights.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        omegas: Option<Vec<f64>>,
        /// A single `assignment+allocation` name.
        #[arg(long)]
        strategies: Option<String>,
    },
    /// Solve the first slot exhaustively and report the annealer's gap.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Resource grid points per loaded model.
        #[arg(long)]
        grid: Option<usize>,
    },
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let config = load_config(&common.config)?;
    let out = common.out.clone().unwrap_or_else(|| config.output.directory.clone());
    Ok((config, out))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { common, strategies } => {
            let (config, out) = load(&common)?;
            if strategies.as_deref().is_some_and(|s| s.contains(',')) {
                return Err(SimError::Usage("run takes a single strategy; use compare for several".into()));
            }
            let report = cmd_run(&config, common.seed, &out, strategies.as_deref())?;
            println!(
                "{}: utility {:.4}, mean score {:.4}, mean delay {:.4} s over {} tasks",
                report.strategy,
                report.aggregate.utility,
                report.aggregate.mean_score,
                report.aggregate.mean_delay_s,
                report.aggregate.n_tasks
            );
        }
        Command::Compare { common, strategies } => {
            let (config, out) = load(&common)?;
            for r in cmd_compare(&config, common.seed, &out, &strategies)? {
                println!("{:<28} utility {:.4}", r.strategy, r.aggregate.utility);
            }
        }
        Command::Sweep {
            common,
            omegas,
            strategies,
        } => {
            let (config, out) = load(&common)?;
            let omegas = omegas.unwrap_or_else(|| DEFAULT_OMEGAS.to_vec());
            for p in cmd_sweep(&config, common.seed, &out, &omegas, strategies.as_deref())? {
                println!(
                    "omega {:<6} score {:.4} delay {:.4} s utility {:.4}",
                    p.omega, p.mean_score, p.mean_delay_s, p.utility
                );
            }
        }
        Command::Oracle { common, grid } => {
            let (config, out) = load(&common)?;
            let r = cmd_oracle(&config, common.seed, &out, grid)?;
            println!(
                "optimal {:.6}, anneal {:.6}, relative gap {:.3e} ({} candidates)",
                r.optimal_utility, r.anneal_utility, r.relative_gap, r.search_space_size
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
