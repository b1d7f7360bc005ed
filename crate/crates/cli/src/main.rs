use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{debug, info};

use rideshare_core::agents::run_scenario;
use rideshare_core::bench::bench_zksm;
use rideshare_core::crypto::PairingContext;
use rideshare_core::report::{parse_trace, trace_to_jsonl, verify_trace};
use rideshare_core::scenario::{Scenario, ScenarioError};

const EXIT_USAGE: u8 = 1;
const EXIT_SCHEMA: u8 = 2;
const EXIT_ENGINE: u8 = 3;

/// Privacy-preserving ride-sharing simulator.
///
/// Log verbosity follows RIDESHARE_LOG (error, warn, info, debug, trace).
#[derive(Parser)]
#[command(name = "rideshare", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write report.json, trace.jsonl and timing.json.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the seed in the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Time setup, audit, prove and verify for each set size.
    BenchZksm {
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
        k: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Re-check conservation, deposit exclusivity and every arrival proof.
    VerifyTrace { path: PathBuf },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let code = match e {
            ScenarioError::Schema(_) => EXIT_SCHEMA,
            ScenarioError::Engine(_) => EXIT_ENGINE,
        };
        Failure::new(code, e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(EXIT_USAGE, format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::new(EXIT_ENGINE, format!("cannot write {}: {e}", path.display())))
}

fn cmd_run(scenario: &Path, seed: Option<u64>, out: &Path) -> Result<(), Failure> {
    let scenario = Scenario::from_json(&read(scenario)?)?;
    let seed = seed.unwrap_or(scenario.seed);
    info!("running {} trips with seed {seed}", scenario.riders.iter().map(|r| r.trips.len()).sum::<usize>());
    let run = run_scenario(&scenario, seed)?;
    fs::create_dir_all(out).map_err(|e| Failure::new(EXIT_ENGINE, format!("cannot create {}: {e}", out.display())))?;
    write(&out.join("report.json"), &(run.report.to_json_pretty() + "\n"))?;
    write(&out.join("trace.jsonl"), &trace_to_jsonl(&run.trace))?;
    let timing = serde_json::to_string_pretty(&run.timing).expect("timing always serializes");
    write(&out.join("timing.json"), &(timing + "\n"))?;
    for t in &run.report.trips {
        info!("{}/trip{}: {:?}", t.rider, t.trip, t.outcome);
        for n in &t.notes {
            debug!("  {n}");
        }
    }
    let s = &run.report.stats;
    println!(
        "{} trips, {} transactions ({} reverted), {} proofs accepted, supply {} -> {}, privacy violations {}",
        run.report.trips.len(),
        s.transactions_applied + s.transactions_reverted,
        s.transactions_reverted,
        s.proofs_accepted,
        s.genesis_supply,
        s.final_supply,
        run.report.privacy.violations()
    );
    Ok(())
}

fn cmd_bench(ks: &[usize], reps: usize, seed: u64, json: bool) -> Result<(), Failure> {
    if ks.is_empty() || ks.iter().any(|&k| k < 2) {
        return Err(Failure::new(EXIT_USAGE, "every k must be at least 2"));
    }
    let mut results = Vec::new();
    for &k in ks {
        info!("benchmarking k = {k}");
        results.push(bench_zksm(k, reps, seed).map_err(|e| Failure::new(EXIT_ENGINE, e.to_string()))?);
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&results).expect("results always serialize"));
        return Ok(());
    }
    println!("{:>4} {:>5} {:>18} {:>18} {:>18} {:>18} {:>6}", "k", "reps", "setup ms", "audit ms", "prove ms", "verify ms", "bytes");
    for r in &results {
        let cell = |p: rideshare_core::bench::PhaseStats| format!("{:.3} ± {:.3}", p.mean_ms, p.stddev_ms);
        println!(
            "{:>4} {:>5} {:>18} {:>18} {:>18} {:>18} {:>6}",
            r.k,
            r.reps,
            cell(r.setup),
            cell(r.audit),
            cell(r.prove),
            cell(r.verify),
            r.proof_bytes
        );
    }
    if results.iter().any(|r| !r.all_verified) {
        return Err(Failure::new(EXIT_ENGINE, "a benchmark proof failed to verify"));
    }
    Ok(())
}

fn cmd_verify(path: &Path) -> Result<(), Failure> {
    let events = parse_trace(&read(path)?).map_err(|e| Failure::new(EXIT_SCHEMA, e.to_string()))?;
    let summary = verify_trace(PairingContext::global(), &events).map_err(|e| Failure::new(EXIT_ENGINE, e.to_string()))?;
    println!(
        "ok: {} events, supply {}, {} proofs checked, {} deposits settled",
        summary.events, summary.genesis_supply, summary.proofs_checked, summary.deposits_settled
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RIDESHARE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run { scenario, seed, out } => cmd_run(scenario, *seed, out),
        Command::BenchZksm { k, reps, seed, json } => cmd_bench(k, *reps, *seed, *json),
        Command::VerifyTrace { path } => cmd_verify(path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
