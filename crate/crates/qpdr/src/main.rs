use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::Parser;

use qpdr::config::{Config, Mode};
use qpdr::events::{EngineStats, EventLog};
use qpdr::oracle::ExternalConfig;
use qpdr::pdr::{validate_trace, verify_invariant, Engine, RunResult};
use qpdr::syntax::{parse_formula_with_vocab, print_formula, read_all};

/// Infer quantified inductive invariants for first-order transition systems.
#[derive(Parser, Debug)]
#[command(name = "qpdr", version)]
struct Args {
    /// Input transition system (.fol)
    file: PathBuf,

    /// Lemma logic: universal, epr (requires acyclic epr-edge
    /// declarations), or fol (no prefix restrictions)
    #[arg(long, default_value = "fol")]
    mode: String,

    /// Worker threads (default: available parallelism)
    #[arg(long)]
    threads: Option<usize>,

    /// Random seed for the heuristic task
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Per-sort universe bound for oracle queries
    #[arg(long, default_value_t = 3)]
    bound: usize,

    /// Quantifier depth cap for prefix search
    #[arg(long, default_value_t = 6)]
    max_depth: usize,

    /// Wall-clock budget in seconds (0 = none)
    #[arg(long, default_value_t = 0)]
    timeout: u64,

    /// pDNF terms for prefixes with alternations (universal prefixes
    /// always use a single clause)
    #[arg(long)]
    k: Option<usize>,

    /// Write a JSON-lines event log to this file
    #[arg(long)]
    log: Option<PathBuf>,

    /// Check the invariant conditions for the formulas in this file, then
    /// exit
    #[arg(long)]
    verify_only: Option<PathBuf>,

    /// Deterministic single-worker mode with fixed category rotation
    #[arg(long)]
    sequential: bool,

    /// External SMT-LIB2 solver command (portfolio of subprocesses)
    #[arg(long)]
    external_solver: Option<String>,

    /// Disable multi-block generalization
    #[arg(long)]
    no_multiblock: bool,

    /// Re-check the frame meta-invariants after every mutation
    #[arg(long)]
    audit: bool,

    /// Dump grounded SAT queries as DIMACS files into this directory
    #[arg(long)]
    dimacs_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(args: Args) -> Result<ExitCode, String> {
    let mode: Mode = args.mode.parse()?;
    let text = std::fs::read_to_string(&args.file)
        .map_err(|e| format!("cannot read {}: {e}", args.file.display()))?;
    let mut sys = qpdr::syntax::parse_system(&text).map_err(|e| e.to_string())?;
    sys.name = args
        .file
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned());
    let sys = Arc::new(sys);

    let cfg = Config {
        mode,
        threads: args.threads.unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(2)
        }),
        seed: args.seed,
        bound: args.bound,
        max_depth: args.max_depth,
        timeout: (args.timeout > 0).then(|| Duration::from_secs(args.timeout)),
        k: args.k,
        sequential: args.sequential,
        multiblock: !args.no_multiblock,
        audit: args.audit,
        external: args.external_solver.as_deref().map(ExternalConfig::from_command),
        dimacs_dir: args.dimacs_dir.clone(),
        ..Config::default()
    };

    if let Some(inv_file) = &args.verify_only {
        return verify_only(&sys, inv_file, &cfg);
    }

    let events = match &args.log {
        Some(path) => {
            let f = std::fs::File::create(path)
                .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
            Arc::new(EventLog::to_writer(Box::new(f), cfg.sequential))
        }
        None => Arc::new(EventLog::disabled()),
    };

    let start = Instant::now();
    let engine = Engine::new(sys.clone(), cfg, events).map_err(|e| e.to_string())?;
    let result = engine.run();
    let wall = start.elapsed().as_secs_f64();

    let stats = serde_json::json!({
        "lemmas": EngineStats::get(&engine.stats.lemmas_learned),
        "ig_queries": EngineStats::get(&engine.stats.ig_queries),
        "sep_queries": EngineStats::get(&engine.stats.sep_queries),
        "pushes": EngineStats::get(&engine.stats.pushes),
        "wall_time_s": wall,
    });
    match result {
        RunResult::Invariant(formulas) => {
            println!("; invariant");
            for f in &formulas {
                println!("{}", print_formula(f, &sys.sig));
            }
            println!("{stats}");
            Ok(ExitCode::SUCCESS)
        }
        RunResult::Unsafe(trace) => {
            println!("; unsafe: counterexample trace of {} states", trace.len());
            for (i, m) in trace.iter().enumerate() {
                println!("; state {i}: {m}");
            }
            if let Err(e) = validate_trace(&sys, &trace) {
                eprintln!("warning: trace failed validation: {e}");
            }
            println!("{stats}");
            Ok(ExitCode::from(1))
        }
        RunResult::Unknown(reason) => {
            println!("; unknown: {reason}");
            println!("{stats}");
            Ok(ExitCode::from(2))
        }
    }
}

fn verify_only(
    sys: &Arc<qpdr::syntax::TransitionSystem>,
    inv_file: &PathBuf,
    cfg: &Config,
) -> Result<ExitCode, String> {
    let text = std::fs::read_to_string(inv_file)
        .map_err(|e| format!("cannot read {}: {e}", inv_file.display()))?;
    let forms = read_all(&text).map_err(|e| e.to_string())?;
    let mut formulas = Vec::new();
    for form in forms {
        let as_text = sexpr_to_text(&form);
        let f = parse_formula_with_vocab(&as_text, &sys.sig, &sys.vocab)
            .map_err(|e| e.to_string())?;
        formulas.push(f);
    }
    match verify_invariant(sys, &formulas, cfg.bound, cfg.max_conflicts) {
        Ok(()) => {
            println!(
                "; invariant verified at bound {} ({} formulas)",
                cfg.bound,
                formulas.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(msg) => {
            println!("; invariant check failed: {msg}");
            Ok(ExitCode::from(2))
        }
    }
}

fn sexpr_to_text(form: &qpdr::syntax::SExpr) -> String {
    match form {
        qpdr::syntax::SExpr::Atom(a, _) => a.clone(),
        qpdr::syntax::SExpr::List(items, _) => {
            let parts: Vec<String> = items.iter().map(sexpr_to_text).collect();
            format!("({})", parts.join(" "))
        }
    }
}
