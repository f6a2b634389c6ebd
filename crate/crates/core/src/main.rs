use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use spectral_cascade::interp::{solve_two_point, InterpolationProblem};
use spectral_cascade::runner::{
    self, RunOptions, TraceFormat, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK,
};
use spectral_cascade::scalar::SchurMap;
use spectral_cascade::scenario::{self, LayerSpec, ScenarioMode};
use spectral_cascade::verify::{self, Suite};

#[derive(Parser)]
#[command(
    name = "spectral-cascade",
    version,
    about = "Iterate Schur-map transforms of matrices and check their limits"
)]
struct Cli {
    /// Output directory for traces and reports.
    #[arg(
        long,
        global = true,
        env = "SPECTRAL_CASCADE_OUT",
        default_value = "out"
    )]
    out: PathBuf,
    /// Convergence tolerance (overrides the scenario).
    #[arg(long, global = true, allow_negative_numbers = true)]
    tol: Option<f64>,
    /// Stage budget (overrides the scenario).
    #[arg(long, global = true)]
    max_stages: Option<usize>,
    /// Base seed for randomized suites.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Trace file format.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: TraceFormat,
    /// Write wall_ms = 0 so repeated runs produce identical files.
    #[arg(long, global = true)]
    reproducible: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or fixture name) in its declared mode.
    Iterate { scenario: String },
    /// Run a scenario as a power iteration of the composed layer image.
    Power { scenario: String },
    /// Run a scenario as a Cesàro mean of the composed layer image.
    Cesaro { scenario: String },
    /// Riesz projections at 1 for a scenario's layers.
    Riesz { scenario: String },
    /// Solve the two-point problem s(t) = 0, s(1) = 1 with s = b_t Φ(b_t).
    Interp {
        #[arg(long)]
        t: f64,
        /// Layer descriptor for Φ as JSON; defaults to the constant 1.
        #[arg(long)]
        phi: Option<String>,
    },
    /// Run randomized property suites.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
    /// List or print the shipped fixture scenarios.
    Scenario {
        #[arg(long)]
        list: bool,
        /// Print one fixture document.
        #[arg(long)]
        show: Option<String>,
    },
}

fn config_error(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(EXIT_CONFIG as u8)
}

fn run(cli: &Cli, source: &str, mode: Option<ScenarioMode>) -> ExitCode {
    let mut s = match scenario::load(source) {
        Ok(s) => s,
        Err(e) => return config_error(e),
    };
    if let Some(mode) = mode {
        s.mode = mode;
    }
    if let Some(tol) = cli.tol {
        s.tolerance = tol;
    }
    if let Some(max) = cli.max_stages {
        s.max_stages = max;
    }
    if let Err(e) = s.validate() {
        return config_error(e);
    }
    let options = RunOptions {
        out_dir: Some(cli.out.clone()),
        format: cli.format,
        reproducible: cli.reproducible,
    };
    match runner::run_scenario(&s, &options) {
        Ok(report) => {
            println!("{}", report.to_json());
            ExitCode::from(report.exit_code as u8)
        }
        Err(e) => config_error(e),
    }
}

#[derive(Serialize)]
struct InterpOutput {
    t: f64,
    residual_at_t: f64,
    residual_at_1: f64,
    sup_estimate: f64,
    pass: bool,
}

fn interp(t: f64, phi: Option<&str>) -> ExitCode {
    let phi = match phi {
        Some(text) => match serde_json::from_str::<LayerSpec>(text) {
            Ok(spec) => match spec.to_map() {
                Ok(m) => m,
                Err(e) => return config_error(e),
            },
            Err(e) => return config_error(format!("--phi: {e}")),
        },
        None => SchurMap::Polynomial(vec![num_complex::Complex64::new(1.0, 0.0)]),
    };
    let problem = match InterpolationProblem::new(t) {
        Ok(p) => p,
        Err(e) => return config_error(e),
    };
    match solve_two_point(&problem, &phi) {
        Ok(sol) => {
            let c = sol.certificate;
            let out = InterpOutput {
                t,
                residual_at_t: c.residual_at_t,
                residual_at_1: c.residual_at_1,
                sup_estimate: c.sup_estimate,
                pass: c.passes(),
            };
            println!(
                "{}",
                serde_json::to_string_pretty(&out).expect("plain numbers serialize")
            );
            ExitCode::from(if out.pass { EXIT_OK } else { EXIT_CHECK_FAILED } as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CHECK_FAILED as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG as u8);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match &cli.command {
        Command::Iterate { scenario } => run(&cli, scenario, None),
        Command::Power { scenario } => run(&cli, scenario, Some(ScenarioMode::PowerIteration)),
        Command::Cesaro { scenario } => run(&cli, scenario, Some(ScenarioMode::Cesaro)),
        Command::Riesz { scenario } => run(&cli, scenario, Some(ScenarioMode::Riesz)),
        Command::Interp { t, phi } => interp(*t, phi.as_deref()),
        Command::Verify { suite, trials } => {
            let outcomes = verify::run_suite(*suite, cli.seed, *trials);
            for o in &outcomes {
                println!("{o}");
            }
            let ok = outcomes.iter().all(|o| o.pass);
            ExitCode::from(if ok { EXIT_OK } else { EXIT_CHECK_FAILED } as u8)
        }
        Command::Scenario { list, show } => {
            if let Some(name) = show {
                return match scenario::FIXTURES.iter().find(|(n, _)| n == name) {
                    Some((_, doc)) => {
                        print!("{doc}");
                        ExitCode::SUCCESS
                    }
                    None => config_error(format!("unknown fixture {name:?}")),
                };
            }
            if !list {
                return config_error("pass --list or --show <name>");
            }
            for (name, _) in scenario::FIXTURES {
                let description = scenario::fixture(name)
                    .ok()
                    .and_then(|s| s.description)
                    .unwrap_or_default();
                println!("{name:<20} {description}");
            }
            ExitCode::SUCCESS
        }
    }
}
