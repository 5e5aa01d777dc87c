use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use freerider::audit::{backward_induction_fixed_horizon, exploitability};
use freerider::experiment::{self, RunStatus, Suite, OUTPUT_ROOT_ENV};
use freerider::game::{MatrixGame, Slot};
use freerider::strategies::{fixed_strategy, StrategyKind};

#[derive(Parser)]
#[command(
    name = "freerider",
    version,
    about = "Free-rider game experiments: IPD learners, audits, climate commons"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a TOML experiment spec.
    Run {
        spec: PathBuf,
        /// Overrides the spec's output_dir.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Render learning-curve CSVs (or one gamma-sweep CSV) to SVG.
    Plot {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Rerun a pinned replication suite: figure2, nash_audit, horizon,
    /// commons_table1_direction, or all.
    Replicate {
        suite: String,
        #[arg(long, help = format!("Defaults to ${OUTPUT_ROOT_ENV}/replicate/<suite>"))]
        output_dir: Option<PathBuf>,
    },
    /// Exact exploitability audit of two catalog strategies.
    Audit {
        #[arg(long)]
        p1: String,
        #[arg(long)]
        p2: String,
        #[arg(long, default_value_t = 0.96)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
        /// Print the JSON report instead of the text summary.
        #[arg(long)]
        json: bool,
    },
    /// Solve the finitely repeated game by backward induction.
    BackwardInduction {
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> freerider::Result<ExitCode> {
    match cli.command {
        Command::Run { spec, output_dir } => {
            let mut parsed = experiment::ExperimentSpec::from_file(&spec)?;
            if output_dir.is_some() {
                parsed.output_dir = output_dir;
            }
            let manifest = experiment::run_spec(&parsed, None)?;
            println!("{}", serde_json::to_string_pretty(&manifest)?);
            Ok(if manifest.status == RunStatus::Complete {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Plot { csv, output } => {
            let out = experiment::plot(&csv, &output)?;
            println!("{}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Replicate { suite, output_dir } => {
            let suites: Vec<Suite> = if suite == "all" {
                Suite::ALL.to_vec()
            } else {
                vec![suite.parse()?]
            };
            let mut ok = true;
            for s in suites {
                let dir = output_dir.as_ref().map(|d| d.join(s.name()));
                let report = experiment::replicate(s, dir.as_deref())?;
                print!("{}", report.summary());
                println!(
                    "manifest: {}",
                    report.manifest.run_dir.join(experiment::MANIFEST_FILE).display()
                );
                ok &= report.passed;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Audit {
            p1,
            p2,
            gamma,
            epsilon,
            json,
        } => {
            let a = fixed_strategy(p1.parse::<StrategyKind>()?, Slot::One);
            let b = fixed_strategy(p2.parse::<StrategyKind>()?, Slot::Two);
            let report = exploitability(&MatrixGame::classic(), &a, &b, gamma, epsilon)?;
            if json {
                println!("{}", report.to_json()?);
            } else {
                print!("{}", report.summary());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::BackwardInduction { steps, json } => {
            let bi = backward_induction_fixed_horizon(&MatrixGame::classic(), steps)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&bi)?);
            } else {
                print!("{}", bi.summary());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
