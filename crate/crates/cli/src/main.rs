//! `ptpsec-sim`: run, inspect and validate PTP/PTPsec scenario files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ptpsec_core::report::emit_outputs;
use ptpsec_core::sim::RunError;
use ptpsec_core::time::format_micros;
use ptpsec_core::{parse_scenario, preflight, run_scenario, Mode, Scenario, ScenarioError};

const EXIT_ERROR: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_UNDETECTED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "ptpsec-sim", version, about = "Simulate PTP and PTPsec under delay attacks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario and write per-slave CSVs and summary.json
    Run {
        scenario: PathBuf,
        /// Output directory; defaults to the scenario's outputs.dir or out/<name>
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the protocol mode
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Override the jitter seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the edge-disjoint path set of every slave
    Paths { scenario: PathBuf },
    /// Check a scenario without running it
    Validate { scenario: PathBuf },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Ptp,
    Ptpsec,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Ptp => Mode::Ptp,
            ModeArg::Ptpsec => Mode::Ptpsec,
        }
    }
}

fn load(path: &PathBuf) -> Result<Scenario, ExitCode> {
    parse_scenario(path).map_err(|e| {
        eprintln!("error: {e}");
        match e {
            ScenarioError::Io { .. } => ExitCode::from(EXIT_ERROR),
            ScenarioError::Parse { .. } | ScenarioError::Validation(_) => ExitCode::from(EXIT_INVALID),
        }
    })
}

fn run_error(e: RunError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        RunError::NoRedundantPath(_) | RunError::Detection(_) | RunError::Topology(_) => {
            ExitCode::from(EXIT_INVALID)
        }
        _ => ExitCode::from(EXIT_ERROR),
    }
}

fn cmd_run(path: PathBuf, out: Option<PathBuf>, mode: Option<ModeArg>, seed: Option<u64>) -> ExitCode {
    let mut scenario = match load(&path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    if let Some(mode) = mode {
        scenario.set_mode(mode.into());
    }
    if let Some(seed) = seed {
        scenario.set_seed(seed);
    }
    let output = match run_scenario(&scenario) {
        Ok(o) => o,
        Err(e) => return run_error(e),
    };
    let dir = out
        .or_else(|| scenario.file.outputs.dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(if scenario.name().is_empty() { "run" } else { scenario.name() }));
    let written = match emit_outputs(&output, &dir) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: cannot write {}: {e}", dir.display());
            return ExitCode::from(EXIT_ERROR);
        }
    };

    for s in &output.summary.slaves {
        let fmt_rounds = |r: Option<u32>| r.map_or("-".to_string(), |n| n.to_string());
        println!(
            "{}: {} rounds ({} dropped), steady theta_act {} us, onset {} / clear {} rounds",
            s.slave,
            s.rounds_completed,
            s.rounds_dropped,
            s.steady_theta_act_ns.map_or("-".to_string(), format_micros),
            fmt_rounds(s.onset_latency_rounds),
            fmt_rounds(s.clear_latency_rounds),
        );
    }
    for w in &written {
        println!("wrote {}", w.display());
    }

    if scenario.file.run.assert_detection {
        let missed = output.undetected();
        if !missed.is_empty() {
            for slave in missed {
                eprintln!("error: attack never detected at slave `{slave}`");
            }
            return ExitCode::from(EXIT_UNDETECTED);
        }
    }
    ExitCode::SUCCESS
}

fn cmd_paths(path: PathBuf) -> ExitCode {
    let scenario = match load(&path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let sets = match scenario.disjoint_paths() {
        Ok(s) => s,
        Err(e) => return run_error(e.into()),
    };
    for (slave, set) in sets {
        println!("{slave}: {} edge-disjoint path(s)", set.len());
        for (i, p) in set.paths().iter().enumerate() {
            println!("  P{i}: {p}");
        }
    }
    ExitCode::SUCCESS
}

fn cmd_validate(path: PathBuf) -> ExitCode {
    let scenario = match load(&path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    if let Err(e) = preflight(&scenario) {
        return run_error(e);
    }
    println!("{}: ok", path.display());
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, out, mode, seed } => cmd_run(scenario, out, mode, seed),
        Command::Paths { scenario } => cmd_paths(scenario),
        Command::Validate { scenario } => cmd_validate(scenario),
    }
}
