use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use rhplan::centralized::DEFAULT_CAP;
use rhplan::harness::{run_experiment, summary, Mode, RunOptions};
use rhplan::scenario::load_scenario;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Receding,
    Centralized,
    Both,
}

/// Plans and executes multi-agent LTL tasks with a receding horizon.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum, default_value = "receding")]
    mode: ModeArg,
    /// Overrides the scenario's iteration budget.
    #[arg(long)]
    iterations: Option<usize>,
    /// Intersection automaton horizon.
    #[arg(long)]
    h: Option<usize>,
    /// Product system horizon.
    #[arg(long = "H")]
    big_h: Option<usize>,
    #[arg(long = "max-h")]
    max_h: Option<usize>,
    #[arg(long = "max-H")]
    max_big_h: Option<usize>,
    /// Per-iteration metrics CSV.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Step-by-step trace log.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Window length for the progress check.
    #[arg(long)]
    window: Option<usize>,
    /// Largest team product the centralized mode builds.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let mut scenario = match load_scenario(&cli.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let c = &mut scenario.config;
    c.h = cli.h.unwrap_or(c.h);
    c.big_h = cli.big_h.unwrap_or(c.big_h);
    c.max_h = cli.max_h.unwrap_or(c.max_h.max(c.h));
    c.max_big_h = cli.max_big_h.unwrap_or(c.max_big_h.max(c.big_h));
    if c.h == 0 || c.big_h == 0 || c.max_h < c.h || c.max_big_h < c.big_h {
        eprintln!("error: horizons must be at least 1 and not above their caps");
        return ExitCode::from(1);
    }
    scenario.iterations = cli.iterations.unwrap_or(scenario.iterations);
    scenario.window = cli.window.unwrap_or(scenario.window);
    let opts = RunOptions {
        mode: match cli.mode {
            ModeArg::Receding => Mode::Receding,
            ModeArg::Centralized => Mode::Centralized,
            ModeArg::Both => Mode::Both,
        },
        metrics: cli.metrics,
        trace: cli.trace,
        cap: cli.cap,
    };
    match run_experiment(&scenario, &opts) {
        Ok(report) => {
            print!("{}", summary(&scenario, &report));
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
