use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use snake::io::{read_database, write_database};
use snake::{
    calibrate_graph, emit_report, global_brute_force, parse_config, recalibrate, total_system_error, validate,
    CalibrationError, CalibrationState, RunConfig,
};

#[derive(Parser)]
#[command(name = "snake", version, about = "Graph-traversal frequency calibration on a grid processor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate the full goal and write the parameter database.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Run independent subgoals in parallel (overrides the config).
        #[arg(long)]
        parallel: bool,
    },
    /// Expire one element and re-calibrate its neighborhood.
    Recalibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        db: PathBuf,
        /// Element label, e.g. `n(2,3)` or `h(0,1)`.
        #[arg(long)]
        element: String,
        #[arg(long)]
        d_disc: Option<u32>,
        /// Output database; defaults to overwriting `--db`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact global optimum for small instances.
    Oracle {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check a database against the hard detuning bounds.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        db: PathBuf,
    },
    /// Print the report for an existing database.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        db: PathBuf,
    },
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

fn load_state(config: &Path, db: &Path) -> Result<CalibrationState> {
    let mut state = CalibrationState::new(load_config(config)?)?;
    read_database(db)?.restore_into(&mut state)?;
    Ok(state)
}

/// Reports subgoal failures without discarding the partial result.
fn settle(result: Result<snake::RunSummary, CalibrationError>) -> Result<bool> {
    match result {
        Ok(_) => Ok(true),
        Err(err @ CalibrationError::SubgoalsFailed(_)) => {
            eprintln!("warning: {err}");
            Ok(false)
        }
        Err(err) => Err(err.into()),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Calibrate { config, out, report, parallel } => {
            let mut cfg = load_config(&config)?;
            cfg.parallel |= parallel;
            let mut state = CalibrationState::new(cfg)?;
            let start = Instant::now();
            let ok = settle(calibrate_graph(&mut state))?;
            let elapsed = start.elapsed();
            write_database(&state, &out)?;
            let text = emit_report(&state, Some(elapsed));
            match report {
                Some(path) => std::fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Recalibrate { config, db, element, d_disc, out } => {
            let mut state = load_state(&config, &db)?;
            let Some(g) = state.graph().parse_label(&element) else {
                bail!("unknown element `{element}`");
            };
            let radius = d_disc.unwrap_or(state.config().d_disc());
            let before = state.step_log().len();
            let discarded = match recalibrate(&mut state, g, radius) {
                Ok(d) => d.len().to_string(),
                Err(err @ CalibrationError::SubgoalsFailed(_)) => {
                    eprintln!("warning: {err}");
                    "?".into()
                }
                Err(err) => return Err(err.into()),
            };
            write_database(&state, out.as_deref().unwrap_or(&db))?;
            println!(
                "discarded {discarded} element(s), {} new step(s), {} of {} calibrated",
                state.step_log().len() - before,
                state.status().len(),
                state.goal().len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { config } => {
            let cfg = load_config(&config)?;
            let budget = cfg.budget;
            let state = CalibrationState::new(cfg)?;
            match global_brute_force(&state, budget)? {
                Some((assignment, value)) => {
                    println!("total_system_error = {value}");
                    for (g, v) in &assignment {
                        println!("{} {}", state.graph().label(*g), v);
                    }
                }
                None => println!("no feasible assignment"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config, db } => {
            let state = load_state(&config, &db)?;
            let violations = validate(&state);
            for v in &violations {
                println!(
                    "violation {} {} distance {} detuning {} < {}",
                    state.graph().label(v.a),
                    state.graph().label(v.b),
                    v.distance,
                    v.detuning,
                    v.required
                );
            }
            if state.is_complete() {
                println!("total_system_error = {}", total_system_error(&state, &state.database())?);
            } else {
                println!("incomplete: {} of {} calibrated", state.status().len(), state.goal().len());
            }
            println!("{} violation(s)", violations.len());
            Ok(if violations.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Report { config, db } => {
            let state = load_state(&config, &db)?;
            print!("{}", emit_report(&state, None));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
