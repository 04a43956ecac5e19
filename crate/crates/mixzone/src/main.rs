use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mixzone::sim::{self, PrimeChoice, ScenarioConfig};

#[derive(Parser)]
#[command(name = "mixzone", version, about = "Chaotic-map authenticated key establishment \
and IPv6 address configuration in a deterministic road-network simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Prime {
    Test,
    Default,
}

impl From<Prime> for PrimeChoice {
    fn from(p: Prime) -> Self {
        match p {
            Prime::Test => PrimeChoice::Test,
            Prime::Default => PrimeChoice::Default,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchPhase {
    FirstLogin,
    Consequent,
    Address,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and emit its report. Exits zero iff every
    /// honest session completed and all adversaries were blocked.
    Run {
        /// Scenario config (JSON).
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Single-bit tamper fuzzing across all message types.
    Fuzz {
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "test")]
        prime: Prime,
    },
    /// Time one protocol phase over repeated honest runs.
    Bench {
        #[arg(long, value_enum)]
        phase: BenchPhase,
        #[arg(long, default_value_t = 100)]
        iters: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "default")]
        prime: Prime,
    },
    /// Chebyshev semigroup and ladder-equivalence suites at p = 251.
    Selftest,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { scenario, seed, report, format } => run(scenario, seed, report, format),
        Command::Fuzz { trials, seed, prime } => fuzz(trials, seed, prime.into()),
        Command::Bench { phase, iters, seed, prime } => bench(phase, iters, seed, prime.into()),
        Command::Selftest => selftest(),
    }
}

fn run(
    scenario: PathBuf,
    seed: Option<u64>,
    report_path: Option<PathBuf>,
    format: Format,
) -> ExitCode {
    let text = match std::fs::read_to_string(&scenario) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", scenario.display());
            return ExitCode::from(2);
        }
    };
    let mut cfg = match ScenarioConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let report = match sim::run_scenario(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let rendered = match format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    if let Some(path) = report_path {
        if let Err(e) = std::fs::write(&path, rendered) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
        eprintln!(
            "sessions {}/{} completed, {} addresses allocated, adversaries blocked: {}",
            report.sessions_completed,
            report.sessions_attempted,
            report.addresses_allocated,
            report.adversaries_blocked(),
        );
    } else {
        print!("{rendered}");
    }
    if report.exit_ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn fuzz(trials: u64, seed: u64, prime: PrimeChoice) -> ExitCode {
    let report = sim::run_bitflip_fuzz(trials, seed, prime);
    println!("{}", serde_json::to_string_pretty(&report).expect("fuzz report serializes"));
    if report.all_blocked() {
        eprintln!("fuzz: {} trials, 0 completions", report.trials);
        ExitCode::SUCCESS
    } else {
        eprintln!(
            "fuzz: {} trials, {} COMPLETED DESPITE TAMPERING",
            report.trials, report.completions
        );
        ExitCode::FAILURE
    }
}

fn bench(phase: BenchPhase, iters: u64, seed: u64, prime: PrimeChoice) -> ExitCode {
    use sim::{run_address, run_consequent, run_first_login, RoleMeters, Testbed};

    let mut tb = Testbed::new(prime, seed);
    let mut meters = RoleMeters::default();
    let enrolled = run_first_login(&mut tb, None, &mut meters).expect("setup run");

    let mut meters = RoleMeters::default();
    let start = std::time::Instant::now();
    for _ in 0..iters {
        match phase {
            BenchPhase::FirstLogin => {
                run_first_login(&mut tb, None, &mut meters).expect("honest run");
            }
            BenchPhase::Consequent => {
                run_consequent(&mut tb, None, &mut meters).expect("honest run");
            }
            BenchPhase::Address => {
                run_address(&mut tb, &enrolled.sk_user, enrolled.cid, None, &mut meters)
                    .expect("honest run");
            }
        }
    }
    let elapsed = start.elapsed();
    let total = meters.total();
    println!(
        "{} iterations in {:.3} s ({:.3} ms each); per iteration: {:.1} hash, {:.1} cheby, \
         {:.1} sym, {:.1} rng",
        iters,
        elapsed.as_secs_f64(),
        elapsed.as_secs_f64() * 1e3 / iters as f64,
        total.hash_ops as f64 / iters as f64,
        total.cheby_evals as f64 / iters as f64,
        total.sym_ops as f64 / iters as f64,
        total.rng_draws as f64 / iters as f64,
    );
    println!("wall-clock timing is workload-defined and machine-dependent; treat operation \
counts as the portable measure");
    ExitCode::SUCCESS
}

fn selftest() -> ExitCode {
    let report = sim::run_selftest(1);
    println!(
        "semigroup: {} triples, {} failures",
        report.semigroup_triples, report.semigroup_failures
    );
    println!(
        "ladder vs recurrence: {} checks, {} failures",
        report.ladder_checks, report.ladder_failures
    );
    println!("elapsed: {} ms", report.elapsed_ms);
    if report.passed() {
        println!("selftest PASS");
        ExitCode::SUCCESS
    } else {
        println!("selftest FAIL");
        ExitCode::FAILURE
    }
}
