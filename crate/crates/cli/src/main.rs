use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use regretlab::verify::{format_table, run_suite, Suite};
use regretlab_cli::analyze::analyze;
use regretlab_cli::config::Analysis;
use regretlab_cli::info::{game_info, render};
use regretlab_cli::{
    is_usage_error, run_experiment, ErrorRecord, ExperimentConfig, RunOptions, EXIT_FAILURE, EXIT_OK, EXIT_USAGE,
    SEED_ENV,
};

#[derive(Parser)]
#[command(name = "regretlab", version, about = "No-regret dynamics and fictitious play experiments")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config.
    Run {
        config: PathBuf,
        /// Output directory, replacing the config's.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the acceptance checks: static, dynamics or all.
    Verify {
        suite: String,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Inspect games.
    Game {
        #[command(subcommand)]
        command: GameCommand,
    },
    /// Analyze a trajectory CSV: hannan, equilibria, limit_set or perturbation.
    Analyze {
        csv: PathBuf,
        analysis: String,
        /// Game reference; read from the run.json next to the CSV if absent.
        #[arg(long)]
        game: Option<String>,
        /// Tail share of the rows for limit_set.
        #[arg(long, default_value_t = 0.5)]
        tail: f64,
    },
}

#[derive(Subcommand)]
enum GameCommand {
    /// Payoffs, equilibria, undominated actions and curb sets.
    Info {
        name: String,
        #[arg(long)]
        json: bool,
    },
}

fn fail(e: &regretlab::Error, code: i32) -> ExitCode {
    eprintln!("{}", ErrorRecord::new(e).to_json());
    ExitCode::from(code as u8)
}

fn classify(e: &regretlab::Error) -> ExitCode {
    fail(e, if is_usage_error(e) { EXIT_USAGE } else { EXIT_FAILURE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        if w == 0 {
            return fail(&regretlab::Error::InvalidParameter("--workers must be positive".into()), EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("warning: {e}");
        }
    }
    match cli.command {
        Command::Run { config, output } => {
            let cfg = match ExperimentConfig::load(&config).and_then(|c| c.resolve().map(|_| c)) {
                Ok(c) => c,
                Err(e) => return fail(&e, EXIT_USAGE),
            };
            let seed_override = match std::env::var(SEED_ENV) {
                Ok(v) => match v.trim().parse() {
                    Ok(s) => Some(s),
                    Err(_) => {
                        let e = regretlab::Error::InvalidParameter(format!("{SEED_ENV}='{v}' is not a u64"));
                        return fail(&e, EXIT_USAGE);
                    }
                },
                Err(_) => None,
            };
            let opts = RunOptions { workers: cli.workers, seed_override, output };
            match run_experiment(&cfg, &opts) {
                Ok(out) => {
                    println!("{}", out.dir.display());
                    match serde_json::to_string_pretty(&out.summary.aggregate) {
                        Ok(s) => println!("{s}"),
                        Err(e) => return fail(&e.into(), EXIT_FAILURE),
                    }
                    ExitCode::from(EXIT_OK as u8)
                }
                Err(e) => fail(&e, EXIT_FAILURE),
            }
        }
        Command::Verify { suite, json } => {
            let suite: Suite = match suite.parse() {
                Ok(s) => s,
                Err(e) => return fail(&e, EXIT_USAGE),
            };
            let results = run_suite(suite);
            if json {
                match serde_json::to_string_pretty(&results) {
                    Ok(s) => println!("{s}"),
                    Err(e) => return fail(&e.into(), EXIT_FAILURE),
                }
            } else {
                print!("{}", format_table(&results));
            }
            let code = if results.iter().all(|r| r.passed) { EXIT_OK } else { EXIT_FAILURE };
            ExitCode::from(code as u8)
        }
        Command::Game { command: GameCommand::Info { name, json } } => match game_info(&name) {
            Ok(info) => {
                if json {
                    match serde_json::to_string_pretty(&info) {
                        Ok(s) => println!("{s}"),
                        Err(e) => return fail(&e.into(), EXIT_FAILURE),
                    }
                } else {
                    print!("{}", render(&info));
                }
                ExitCode::from(EXIT_OK as u8)
            }
            Err(e) => classify(&e),
        },
        Command::Analyze { csv, analysis, game, tail } => {
            let analysis: Analysis = match analysis.parse() {
                Ok(a) => a,
                Err(e) => return fail(&e, EXIT_USAGE),
            };
            match analyze(&csv, analysis, game.as_deref(), tail) {
                Ok(v) => {
                    println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
                    ExitCode::from(EXIT_OK as u8)
                }
                Err(e) => classify(&e),
            }
        }
    }
}
