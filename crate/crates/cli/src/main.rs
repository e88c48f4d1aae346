//! `gasrepair` command-line front end.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use gasrepair::detect::{detect_all, VulnKind};
use gasrepair::gas::{
    compare_dominance, enumerate_paths, expected_from_paths, path_weights_from_log, reduced_compare, Rational,
};
use gasrepair::lang::{parse, typecheck, Contract};
use gasrepair::search::{repair, Mode, Outcome, RepairReport, SearchConfig};
use gasrepair::testgen::{
    generate_tests, read_jsonl, record_transactions, to_jsonl, Scenario, TestCase, TransactionRecord,
    DEFAULT_TEST_TIMEOUT,
};
use gasrepair::vm::{run_test_with_result, CostTable, TestOutcome, VmConfig};

const EXIT_USAGE: u8 = 1;
const EXIT_NEGATIVE: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "gasrepair", version, about = "Gas-aware repair of MiniSol smart contracts")]
struct Cli {
    /// Cost table (TOML) overriding the built-in gas prices.
    #[arg(long, global = true, value_name = "FILE")]
    cost_table: Option<PathBuf>,
    /// Emit JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report vulnerabilities.
    Detect {
        contract: PathBuf,
        #[arg(long, default_value = "ED,RE,IO,TOD")]
        kinds: String,
    },
    /// Execute a scenario and write its transaction log (JSONL).
    Record {
        contract: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn a transaction log into regression tests (JSONL).
    Testgen {
        contract: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-test replay timeout in milliseconds.
        #[arg(long, default_value_t = DEFAULT_TEST_TIMEOUT.as_millis() as u64)]
        timeout_ms: u64,
    },
    /// Replay regression tests on a contract.
    RunTests {
        contract: PathBuf,
        #[arg(long)]
        tests: PathBuf,
    },
    /// Compare the expected gas of two contracts.
    GasCompare {
        old: PathBuf,
        new: PathBuf,
        /// `uniform` or `log:<FILE>` (path weights from a transaction log).
        #[arg(long, default_value = "uniform")]
        weights: String,
    },
    /// Search for plausible patches.
    Repair(RepairArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Genetic,
    Urs,
}

#[derive(Args, Debug)]
struct RepairArgs {
    contract: PathBuf,
    /// Regression tests; defaults to `<contract stem>.tests.jsonl` beside the contract.
    #[arg(long)]
    tests: Option<PathBuf>,
    #[arg(long, default_value = "ED,RE,IO")]
    kinds: String,
    #[arg(long, value_enum, default_value = "on")]
    gas_objective: OnOff,
    #[arg(long, value_enum, default_value = "genetic")]
    mode: ModeArg,
    /// Wall-clock budget in seconds.
    #[arg(long, default_value_t = 3600.0)]
    timeout: f64,
    /// Per-transaction gas bound every path of the patch must respect.
    #[arg(long)]
    gas_bound: Option<u64>,
    #[arg(long, default_value_t = 20)]
    ip: usize,
    #[arg(long, default_value_t = 10)]
    gr: usize,
    #[arg(long, default_value_t = 40)]
    pop_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Serialize the generator race and evaluation for reproducible reports.
    #[arg(long)]
    deterministic: bool,
    /// Discard candidates dominated by the cheapest plausible patch early.
    #[arg(long)]
    gmax: bool,
    /// Evaluator threads (0 = available parallelism).
    #[arg(long, default_value_t = 0)]
    evaluators: usize,
    /// Write the report JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Internal(String),
}

type Res<T> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn read_text(path: &Path) -> Res<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn load_contract(path: &Path) -> Res<Contract> {
    let text = read_text(path)?;
    let c = parse(&text).map_err(|e| usage(format!("{}:{e}", path.display())))?;
    if let Err(errs) = typecheck(&c) {
        let msgs: Vec<String> = errs.iter().map(|e| format!("{}: {e}", path.display())).collect();
        return Err(usage(msgs.join("\n")));
    }
    Ok(c)
}

fn load_jsonl<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Res<Vec<T>> {
    read_jsonl(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_output(out: Option<&Path>, text: &str) -> Res<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_kinds(s: &str) -> Res<BTreeSet<VulnKind>> {
    VulnKind::parse_list(s).map_err(usage)
}

fn to_json<T: serde::Serialize>(v: &T) -> Res<String> {
    serde_json::to_string_pretty(v).map_err(|e| Failure::Internal(e.to_string()))
}

fn detect_cmd(cli_json: bool, contract: &Path, kinds: &str) -> Res<u8> {
    let c = load_contract(contract)?;
    let r = detect_all(&c, &parse_kinds(kinds)?);
    if cli_json {
        println!("{}", to_json(&json!({ "contract": c.name, "vulnerabilities": r.entries }))?);
    } else if r.is_empty() {
        println!("{}: no vulnerabilities", c.name);
    } else {
        for e in &r.entries {
            println!("{} at {}: {}", e.kind, e.location, e.note);
        }
    }
    Ok(0)
}

fn record_cmd(contract: &Path, scenario: &Path, out: Option<&Path>, vm: &VmConfig) -> Res<u8> {
    let c = load_contract(contract)?;
    let s: Scenario =
        serde_json::from_str(&read_text(scenario)?).map_err(|e| usage(format!("{}: {e}", scenario.display())))?;
    let log = record_transactions(&c, &s, vm).map_err(|e| usage(e.to_string()))?;
    write_output(out, &to_jsonl(&log))?;
    Ok(0)
}

fn testgen_cmd(
    cli_json: bool,
    contract: &Path,
    log: &Path,
    out: Option<&Path>,
    timeout_ms: u64,
    vm: &VmConfig,
) -> Res<u8> {
    let c = load_contract(contract)?;
    let log: Vec<TransactionRecord> = load_jsonl(log)?;
    let suite = generate_tests(&c, &log, Duration::from_millis(timeout_ms), vm);
    for d in &suite.discarded {
        eprintln!("discarded transaction {}: {}", d.source, d.reason);
    }
    write_output(out, &to_jsonl(&suite.tests))?;
    if cli_json && out.is_some() {
        println!("{}", to_json(&json!({ "tests": suite.tests.len(), "discarded": suite.discarded }))?);
    }
    Ok(0)
}

fn run_tests_cmd(cli_json: bool, contract: &Path, tests: &Path, vm: &VmConfig) -> Res<u8> {
    let c = load_contract(contract)?;
    let tests: Vec<TestCase> = load_jsonl(tests)?;
    let mut rows = Vec::new();
    let mut failed = 0;
    for t in &tests {
        let (outcome, res) = run_test_with_result(&c, t, vm);
        let gas = res.map(|r| r.gas_used);
        let mismatch = match outcome {
            TestOutcome::Pass => None,
            TestOutcome::Fail(m) => {
                failed += 1;
                Some(m)
            }
        };
        if !cli_json {
            match &mismatch {
                None => println!("{} pass (gas {})", t.id, gas.unwrap_or(0)),
                Some(m) => println!("{} FAIL {m:?}", t.id),
            }
        }
        rows.push(json!({ "id": t.id, "passed": mismatch.is_none(), "gas_used": gas, "mismatch": mismatch }));
    }
    if cli_json {
        println!("{}", to_json(&json!({ "total": tests.len(), "failed": failed, "tests": rows }))?);
    } else {
        println!("{} of {} tests passed", tests.len() - failed, tests.len());
    }
    Ok(if failed == 0 { 0 } else { EXIT_NEGATIVE })
}

fn weights_for(c: &Contract, spec: &str, vm: &VmConfig) -> Res<Option<Vec<Rational>>> {
    if spec == "uniform" {
        return Ok(None);
    }
    let Some(file) = spec.strip_prefix("log:") else {
        return Err(usage(format!("--weights must be `uniform` or `log:<file>`, got `{spec}`")));
    };
    let log: Vec<TransactionRecord> = load_jsonl(Path::new(file))?;
    let paths = enumerate_paths(c).map_err(|e| usage(e.to_string()))?;
    path_weights_from_log(c, &paths, &log, vm).map(Some).map_err(|e| usage(e.to_string()))
}

fn gas_compare_cmd(cli_json: bool, old: &Path, new: &Path, weights: &str, vm: &VmConfig) -> Res<u8> {
    let (a, b) = (load_contract(old)?, load_contract(new)?);
    let formula = |c: &Contract| -> Res<_> {
        let w = weights_for(c, weights, vm)?;
        let paths = enumerate_paths(c).map_err(|e| usage(e.to_string()))?;
        expected_from_paths(&paths, &vm.costs, w.as_deref()).map_err(|e| usage(e.to_string()))
    };
    let (fa, fb) = (formula(&a)?, formula(&b)?);
    let verdict = compare_dominance(&fa, &fb);
    let reduced = if weights == "uniform" { reduced_compare(&a, &b, &vm.costs).ok() } else { None };
    if cli_json {
        let v = json!({
            "old": { "contract": a.name, "expected_gas": fa.to_string() },
            "new": { "contract": b.name, "expected_gas": fb.to_string() },
            "verdict": verdict,
            "reduced_verdict": reduced,
        });
        println!("{}", to_json(&v)?);
    } else {
        println!("old: {fa}");
        println!("new: {fb}");
        println!("verdict: {verdict:?}");
        if let Some(r) = reduced {
            println!("reduced verdict: {r:?}");
        }
    }
    Ok(0)
}

fn default_tests_path(contract: &Path) -> PathBuf {
    let stem = contract.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    contract.with_file_name(format!("{stem}.tests.jsonl"))
}

fn print_summary(r: &RepairReport) {
    println!("{}: {:?}", r.contract, r.outcome);
    for (k, n) in &r.vulnerabilities_before {
        let after = r.vulnerabilities_after.as_ref().and_then(|m| m.get(k)).map_or("-".to_string(), |v| v.to_string());
        println!("  {k}: {n} -> {after}");
    }
    println!(
        "  candidates: {} generated, {} evaluated over {} generations",
        r.stats.candidates_generated, r.stats.candidates_evaluated, r.stats.generations
    );
    for p in r.plausible.iter().filter(|p| p.preferred) {
        println!(
            "  patch ({} edits, gas level {:?}, mean test gas {:.1}):",
            p.mutation_distance, p.gas_level, p.mean_test_gas
        );
        for e in &p.edits {
            println!("    {e}");
        }
    }
}

fn repair_cmd(cli_json: bool, a: &RepairArgs, costs: CostTable, stop: Arc<AtomicBool>) -> Res<u8> {
    let c = load_contract(&a.contract)?;
    let tests_path = a.tests.clone().unwrap_or_else(|| default_tests_path(&a.contract));
    let tests: Vec<TestCase> = if a.tests.is_none() && !tests_path.exists() {
        log::warn!("no tests given and {} not found; repairing without regression tests", tests_path.display());
        Vec::new()
    } else {
        load_jsonl(&tests_path)?
    };
    if !(a.timeout > 0.0 && a.timeout.is_finite()) {
        return Err(usage("--timeout must be a positive number of seconds"));
    }
    let cfg = SearchConfig {
        initial_population: a.ip,
        generation_size: a.gr,
        max_population: a.pop_size,
        max_bound: Duration::from_secs_f64(a.timeout),
        seed: a.seed,
        gas_objective: matches!(a.gas_objective, OnOff::On),
        gas_bound: a.gas_bound,
        kinds: parse_kinds(&a.kinds)?,
        mode: match a.mode {
            ModeArg::Genetic => Mode::Genetic,
            ModeArg::Urs => Mode::Urs,
        },
        gmax: a.gmax,
        deterministic: a.deterministic,
        evaluators: a.evaluators,
        costs,
        stop: Some(stop),
        ..SearchConfig::default()
    };
    cfg.validate().map_err(usage)?;
    let report = repair(&c, &tests, &cfg).map_err(|e| Failure::Internal(e.to_string()))?;
    let text = to_json(&report)? + "\n";
    if let Some(p) = &a.out {
        fs::write(p, &text).map_err(|e| usage(format!("cannot write {}: {e}", p.display())))?;
    }
    if cli_json {
        print!("{text}");
    } else {
        print_summary(&report);
    }
    Ok(match report.outcome {
        Outcome::PlausibleFound | Outcome::NoVulnerabilities => 0,
        Outcome::Timeout | Outcome::Exhausted => EXIT_NEGATIVE,
    })
}

fn dispatch(cli: Cli, stop: Arc<AtomicBool>) -> Res<u8> {
    let costs = match &cli.cost_table {
        Some(p) => CostTable::load(p).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => CostTable::default(),
    };
    let vm = VmConfig { costs: costs.clone(), ..VmConfig::default() };
    match &cli.command {
        Command::Detect { contract, kinds } => detect_cmd(cli.json, contract, kinds),
        Command::Record { contract, scenario, out } => record_cmd(contract, scenario, out.as_deref(), &vm),
        Command::Testgen { contract, log, out, timeout_ms } => {
            testgen_cmd(cli.json, contract, log, out.as_deref(), *timeout_ms, &vm)
        }
        Command::RunTests { contract, tests } => run_tests_cmd(cli.json, contract, tests, &vm),
        Command::GasCompare { old, new, weights } => gas_compare_cmd(cli.json, old, new, weights, &vm),
        Command::Repair(a) => repair_cmd(cli.json, a, costs, stop),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let stop = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&stop);
    if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::Relaxed)) {
        log::warn!("cannot install Ctrl-C handler: {e}");
    }
    let code = match dispatch(cli, stop) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            EXIT_INTERNAL
        }
    };
    let _ = std::io::stdout().flush();
    ExitCode::from(code)
}
