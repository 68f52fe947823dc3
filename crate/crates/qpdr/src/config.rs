//! Engine configuration.

use std::path::PathBuf;
use std::time::Duration;

use crate::oracle::ExternalConfig;

/// Which logic the inferred lemmas may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Universal prefixes only; matrices restricted to clauses; plain
    /// diagrams for predecessor queries.
    Universal,
    /// Prefixes filtered against the declared acyclic Skolem-edge set.
    Epr,
    /// No prefix restrictions.
    Fol,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Mode, String> {
        match s {
            "universal" => Ok(Mode::Universal),
            "epr" => Ok(Mode::Epr),
            "fol" => Ok(Mode::Fol),
            other => Err(format!("unknown mode `{other}` (universal|epr|fol)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub mode: Mode,
    pub threads: usize,
    pub seed: u64,
    /// Per-sort universe bound for oracle queries.
    pub bound: usize,
    /// Extra bound for the final invariant re-verification.
    pub verify_bound_extra: usize,
    /// Quantifier depth cap for prefix search.
    pub max_depth: usize,
    pub timeout: Option<Duration>,
    /// Overrides the default k for prefixes with alternations.
    pub k: Option<usize>,
    /// Cap on literals per cube (the negated cube is never capped).
    pub cube_literal_cap: Option<usize>,
    /// Term depth cap for the literal universe.
    pub literal_depth: usize,
    /// Deterministic single-worker mode with fixed category rotation.
    pub sequential: bool,
    /// Multi-block generalization (re-blocking new same-frame preventers
    /// with a growing negative set).
    pub multiblock: bool,
    /// Incremental assertion of frame lemmas in oracle queries.
    pub incremental: bool,
    /// Re-check frame meta-invariants after every mutation.
    pub audit: bool,
    /// SAT conflict budget per oracle query.
    pub max_conflicts: Option<u64>,
    pub external: Option<ExternalConfig>,
    /// Dump grounded SAT queries as DIMACS into this directory.
    pub dimacs_dir: Option<PathBuf>,
    /// Retry backoff base for failed obligations.
    pub backoff_base: Duration,
}

impl Default for Config {
    fn default() -> Config {
        Config {
            mode: Mode::Fol,
            threads: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(2),
            seed: 0,
            bound: 3,
            verify_bound_extra: 2,
            max_depth: 6,
            timeout: None,
            k: None,
            cube_literal_cap: None,
            literal_depth: 1,
            sequential: false,
            multiblock: true,
            incremental: true,
            audit: false,
            max_conflicts: Some(2_000_000),
            external: None,
            dimacs_dir: None,
            backoff_base: Duration::from_secs(1),
        }
    }
}

impl Config {
    /// Workers per task: half the threads each for the learning and
    /// heuristic tasks.
    pub fn workers_per_task(&self) -> usize {
        if self.sequential {
            1
        } else {
            (self.threads / 2).max(1)
        }
    }

    /// Template k for a given prefix: 1 for all-universal prefixes, the
    /// configured k (default 3) otherwise.
    pub fn k_for(&self, universal_prefix: bool) -> usize {
        if universal_prefix {
            1
        } else {
            self.k.unwrap_or(3)
        }
    }
}
