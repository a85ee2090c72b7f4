//! `qka`: run protocol scenarios and inspect the encoding table and POVM.
//!
//! Exit codes: 0 on success, 1 when the request is invalid, 2 when a run
//! trips an internal invariant.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qka_sim::cluster::ClusterParams;
use qka_sim::scenario::{
    dump_povm_stats, dump_transition_table, run_scenario, ScenarioKind, ScenarioSpec,
};

#[derive(Parser, Debug)]
#[command(name = "qka", version, about = "Multiparty quantum key agreement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a batch of trials and emit a JSON report.
    Run(RunArgs),
    /// Print the 256-row transition table.
    Table(ParamsArg),
    /// Print per-family discrimination statistics and checks.
    Povm(ParamsArg),
}

#[derive(Args, Debug)]
struct ParamsArg {
    /// Cluster amplitudes a,b,c,d (must satisfy a²+b²+c²+d² = 1).
    #[arg(long, default_value = "0.5,0.5,0.5,0.5")]
    params: String,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// honest-original, honest-improved, collusion-original,
    /// collusion-improved, eve-original or eve-improved.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 4)]
    participants: usize,
    /// Cluster states per party (original protocol).
    #[arg(long, default_value_t = 8)]
    clusters: usize,
    /// Photons per party (improved protocol).
    #[arg(long, default_value_t = 32)]
    photons: usize,
    /// Decoy photons inserted on every hop.
    #[arg(long, default_value_t = 16)]
    decoys: usize,
    /// Abort when a hop's decoy error rate exceeds this.
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    #[arg(long, default_value = "0.5,0.5,0.5,0.5")]
    params: String,
    /// Hex key the colluders aim for (collusion scenarios).
    #[arg(long)]
    target_key: Option<String>,
    /// 1-based party anchoring the colluding group (collusion scenarios).
    #[arg(long)]
    colluder_anchor: Option<usize>,
    /// Fraction of photons the eavesdropper intercepts (eve scenarios).
    #[arg(long)]
    eve_fraction: Option<f64>,
    /// Encoders skip the random Hadamard (improved protocol).
    #[arg(long)]
    no_shield: bool,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include every trial's message transcript in the report.
    #[arg(long)]
    transcript: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

fn parse_params(text: &str) -> Result<ClusterParams, Failure> {
    let values: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::invalid(format!("invalid params: {e}")))?;
    let [a, b, c, d] = values[..] else {
        return Err(Failure::invalid(format!(
            "invalid params: expected four comma-separated values, got {}",
            values.len()
        )));
    };
    ClusterParams::new(a, b, c, d).map_err(|e| Failure::invalid(format!("invalid params: {e}")))
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let scenario: ScenarioKind = args.scenario.parse().map_err(|e| Failure::invalid(format!("{e}")))?;
    let params = parse_params(&args.params)?;
    let spec = ScenarioSpec {
        scenario,
        participants: args.participants,
        clusters: args.clusters,
        photons: args.photons,
        decoys: args.decoys,
        threshold: args.threshold,
        params: params.coefficients(),
        hadamard_shield: !args.no_shield,
        trials: args.trials,
        seed: args.seed,
        target_key: args.target_key,
        colluder_anchor: args.colluder_anchor,
        eve_fraction: args.eve_fraction,
        transcript: args.transcript,
    };
    let report = run_scenario(&spec).map_err(|e| Failure {
        code: e.exit_code() as u8,
        message: e.to_string(),
    })?;
    let json = report.to_json();
    match args.out {
        Some(path) => fs::write(&path, json + "\n").map_err(|e| Failure {
            code: 2,
            message: format!("cannot write {}: {e}", path.display()),
        })?,
        None => emit(&(json + "\n")),
    }
    Ok(())
}

// A closed pipe (e.g. `| head`) is not an error for the caller.
fn emit(text: &str) {
    let _ = io::stdout().lock().write_all(text.as_bytes());
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Table(p) => {
            let params = parse_params(&p.params)?;
            let text = dump_transition_table(&params).map_err(|e| Failure::invalid(e.to_string()))?;
            emit(&text);
            Ok(())
        }
        Command::Povm(p) => {
            let params = parse_params(&p.params)?;
            let text = dump_povm_stats(&params).map_err(|e| Failure::invalid(e.to_string()))?;
            emit(&text);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
