//! Satisfiability of one-state and two-state queries via a bounded built-in
//! finite-model finder, with incremental assertion and an optional external
//! SMT-LIB2 subprocess backend.

mod external;
mod ground;

pub use external::{external_check, ExternalConfig};
pub use ground::Grounder;

pub use crate::cancel::CancelToken;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::logic::{
    eval_closed, prime, Formula, Signature, Structure, TwoStateStructure, TwoVocab,
};
use crate::sat::{Budget, SatResult};
use crate::syntax::TransitionSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    OneState,
    TwoState,
}

/// A satisfiability query: assertions over the single or doubled vocabulary
/// plus per-sort universe bounds.
#[derive(Debug, Clone)]
pub struct Query {
    pub kind: QueryKind,
    pub assertions: Vec<Formula>,
    pub bounds: Vec<usize>,
}

/// A model found by the oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleModel {
    One(Structure),
    Two(TwoStateStructure),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleResult {
    Model(OracleModel),
    /// No model with universes up to the given per-sort bounds.
    UnsatAtBound(Vec<usize>),
    /// Unsatisfiable outright (reported by an external solver).
    Unsat,
    Unknown(String),
}

impl OracleResult {
    pub fn is_unsat(&self) -> bool {
        matches!(self, OracleResult::Unsat | OracleResult::UnsatAtBound(_))
    }
}

/// Shared solve options: SAT budget, cancellation, statistics.
#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub max_conflicts: Option<u64>,
    pub cancel: Option<CancelToken>,
    pub stats: Option<Arc<OracleStats>>,
    pub dimacs: Option<Arc<DimacsSink>>,
}

/// Flag-gated DIMACS dumps of grounded propositional problems.
#[derive(Debug)]
pub struct DimacsSink {
    dir: std::path::PathBuf,
    counter: AtomicU64,
}

impl DimacsSink {
    pub fn new(dir: std::path::PathBuf) -> std::io::Result<DimacsSink> {
        std::fs::create_dir_all(&dir)?;
        Ok(DimacsSink {
            dir,
            counter: AtomicU64::new(0),
        })
    }

    pub fn dump(&self, tag: &str, write: impl FnOnce(&mut std::fs::File) -> std::io::Result<()>) {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let path = self.dir.join(format!("{tag}-{n:06}.cnf"));
        if let Ok(mut f) = std::fs::File::create(path) {
            let _ = write(&mut f);
        }
    }
}

#[derive(Debug, Default)]
pub struct OracleStats {
    pub queries: AtomicU64,
    pub sat_answers: AtomicU64,
    pub unsat_answers: AtomicU64,
}

impl SolveOptions {
    fn budget(&self) -> Budget {
        Budget {
            max_conflicts: self.max_conflicts,
            cancel: self.cancel.clone(),
        }
    }

    fn cancelled(&self) -> bool {
        self.cancel.as_ref().is_some_and(|c| c.is_cancelled())
    }
}

/// All universe size vectors with `1 <= n_i <= bounds[i]`, ordered by total
/// element count ascending, ties lexicographic.
pub fn size_vectors(bounds: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &b in bounds {
        assert!(b >= 1, "bounds must be positive");
        let mut next = Vec::new();
        for v in &out {
            for n in 1..=b {
                let mut w = v.clone();
                w.push(n);
                next.push(w);
            }
        }
        out = next;
    }
    out.sort_by_key(|v| (v.iter().sum::<usize>(), v.clone()));
    out
}

/// Search universes in nondecreasing total size for a model of all
/// assertions. Returned models are re-checked against every assertion by
/// evaluation.
pub fn bounded_solve(q: &Query, sig: &Arc<Signature>, opts: &SolveOptions) -> OracleResult {
    if let Some(stats) = &opts.stats {
        stats.queries.fetch_add(1, Ordering::Relaxed);
    }
    for universe in size_vectors(&q.bounds) {
        if opts.cancelled() {
            return OracleResult::Unknown("cancelled".to_string());
        }
        let mut g = Grounder::new(sig.clone(), universe, opts.budget());
        for f in &q.assertions {
            g.assert_formula(f);
        }
        if let Some(sink) = &opts.dimacs {
            sink.dump("oracle", |w| g.dump_dimacs(w));
        }
        match g.solve() {
            SatResult::Sat => {
                let m = g.decode();
                recheck(&m, &q.assertions);
                if let Some(stats) = &opts.stats {
                    stats.sat_answers.fetch_add(1, Ordering::Relaxed);
                }
                return OracleResult::Model(wrap_model(q.kind, m));
            }
            SatResult::Unsat => continue,
            SatResult::Unknown => {
                return OracleResult::Unknown(
                    if opts.cancelled() { "cancelled" } else { "budget" }.to_string(),
                )
            }
        }
    }
    if let Some(stats) = &opts.stats {
        stats.unsat_answers.fetch_add(1, Ordering::Relaxed);
    }
    OracleResult::UnsatAtBound(q.bounds.clone())
}

fn wrap_model(kind: QueryKind, m: Structure) -> OracleModel {
    match kind {
        QueryKind::OneState => OracleModel::One(m),
        QueryKind::TwoState => OracleModel::Two(TwoStateStructure::new(m)),
    }
}

fn recheck(m: &Structure, assertions: &[Formula]) {
    for f in assertions {
        let ok = eval_closed(m, f).unwrap_or(false);
        assert!(ok, "oracle model fails to satisfy an assertion: {f:?}");
    }
}

/// Incremental solving: start from `core` asserted, solve, and on a model
/// that violates an unasserted formula, assert the first violated one and
/// repeat. An UNSAT of any asserted subset is returned immediately. The
/// SAT/UNSAT verdict equals `bounded_solve` on the full set.
pub fn incremental_solve(
    assertions: &[Formula],
    core: &[Formula],
    bounds: &[usize],
    kind: QueryKind,
    sig: &Arc<Signature>,
    opts: &SolveOptions,
) -> OracleResult {
    if let Some(stats) = &opts.stats {
        stats.queries.fetch_add(1, Ordering::Relaxed);
    }
    let sizes = size_vectors(bounds);
    // one incremental SAT instance per universe size; sizes already proven
    // UNSAT for a subset stay UNSAT for any superset and are skipped
    let mut grounders: Vec<Option<Grounder>> = (0..sizes.len()).map(|_| None).collect();
    let mut asserted: Vec<Formula> = core.to_vec();
    let mut lazy: Vec<Formula> = assertions
        .iter()
        .filter(|f| !core.contains(f))
        .cloned()
        .collect();
    let mut active = 0usize;
    // formulas asserted into each grounder so far
    let mut fed: Vec<usize> = vec![0; sizes.len()];
    loop {
        if opts.cancelled() {
            return OracleResult::Unknown("cancelled".to_string());
        }
        if active == sizes.len() {
            if let Some(stats) = &opts.stats {
                stats.unsat_answers.fetch_add(1, Ordering::Relaxed);
            }
            return OracleResult::UnsatAtBound(bounds.to_vec());
        }
        let g = grounders[active].get_or_insert_with(|| {
            Grounder::new(sig.clone(), sizes[active].clone(), opts.budget())
        });
        while fed[active] < asserted.len() {
            g.assert_formula(&asserted[fed[active]]);
            fed[active] += 1;
        }
        if let Some(sink) = &opts.dimacs {
            sink.dump("oracle-inc", |w| g.dump_dimacs(w));
        }
        match g.solve() {
            SatResult::Unsat => {
                grounders[active] = None;
                active += 1;
            }
            SatResult::Unknown => {
                return OracleResult::Unknown(
                    if opts.cancelled() { "cancelled" } else { "budget" }.to_string(),
                )
            }
            SatResult::Sat => {
                let m = g.decode();
                let violated = lazy
                    .iter()
                    .position(|f| !eval_closed(&m, f).unwrap_or(false));
                match violated {
                    None => {
                        recheck(&m, &asserted);
                        if let Some(stats) = &opts.stats {
                            stats.sat_answers.fetch_add(1, Ordering::Relaxed);
                        }
                        return OracleResult::Model(wrap_model(kind, m));
                    }
                    Some(i) => {
                        let f = lazy.remove(i);
                        asserted.push(f);
                    }
                }
            }
        }
    }
}

/// Outcome of a validity-style check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckResult<M> {
    Valid,
    Cex(M),
    Unknown(String),
}

/// Per-system oracle: owns the vocabulary, bounds, and query plumbing.
#[derive(Clone)]
pub struct Oracle {
    pub sys: Arc<TransitionSystem>,
    pub bounds: Vec<usize>,
    pub opts: SolveOptions,
    pub incremental: bool,
    pub external: Option<Arc<ExternalConfig>>,
}

impl Oracle {
    pub fn new(sys: Arc<TransitionSystem>, bound: usize, opts: SolveOptions) -> Oracle {
        let bounds = vec![bound; sys.sig.num_sorts()];
        Oracle {
            sys,
            bounds,
            opts,
            incremental: true,
            external: None,
        }
    }

    pub fn with_bounds(mut self, bounds: Vec<usize>) -> Oracle {
        self.bounds = bounds;
        self
    }

    pub fn with_cancel(&self, cancel: CancelToken) -> Oracle {
        let mut o = self.clone();
        o.opts.cancel = Some(cancel);
        o
    }

    fn vocab(&self) -> &Arc<TwoVocab> {
        &self.sys.vocab
    }

    /// One-state satisfiability of `assertions` (axioms added).
    pub fn solve_one_state(&self, mut assertions: Vec<Formula>) -> OracleResult {
        assertions.extend(self.sys.axioms.iter().cloned());
        let q = Query {
            kind: QueryKind::OneState,
            assertions,
            bounds: self.bounds.clone(),
        };
        if let Some(ext) = &self.external {
            let r = external_check(&q, &self.sys.sig, ext);
            if !matches!(r, OracleResult::Unknown(_)) {
                return r;
            }
        }
        bounded_solve(&q, &self.sys.sig, &self.opts)
    }

    /// Two-state satisfiability: `pre` formulas, the transition disjunction,
    /// axioms on both sides, and `post` formulas already primed. With
    /// incremental solving, `lazy_pre` formulas are asserted on demand.
    pub fn solve_two_state(
        &self,
        pre: Vec<Formula>,
        lazy_pre: Vec<Formula>,
        post_primed: Vec<Formula>,
    ) -> OracleResult {
        let vocab = self.vocab();
        let mut core: Vec<Formula> = Vec::new();
        core.extend(pre);
        core.extend(self.sys.axioms.iter().cloned());
        for ax in &self.sys.axioms {
            core.push(prime(ax, vocab).expect("axioms are single-vocabulary"));
        }
        core.push(self.sys.transition_disjunction());
        core.extend(post_primed);
        let mut all = core.clone();
        all.extend(lazy_pre.iter().cloned());
        if let Some(ext) = &self.external {
            let q = Query {
                kind: QueryKind::TwoState,
                assertions: all.clone(),
                bounds: self.bounds.clone(),
            };
            let r = external_check(&q, vocab.doubled(), ext);
            if !matches!(r, OracleResult::Unknown(_)) {
                return r;
            }
        }
        if self.incremental && !lazy_pre.is_empty() {
            incremental_solve(
                &all,
                &core,
                &self.bounds,
                QueryKind::TwoState,
                vocab.doubled(),
                &self.opts,
            )
        } else {
            let q = Query {
                kind: QueryKind::TwoState,
                assertions: all,
                bounds: self.bounds.clone(),
            };
            bounded_solve(&q, vocab.doubled(), &self.opts)
        }
    }

    /// Does `Init /\ Ax => p` hold at the bounds? A counterexample is an
    /// initial structure violating `p`.
    pub fn check_initiation(&self, p: &Formula) -> CheckResult<Structure> {
        let mut assertions: Vec<Formula> = self.sys.inits.clone();
        assertions.push(Formula::not(p.clone()));
        match self.solve_one_state(assertions) {
            OracleResult::Model(OracleModel::One(m)) => CheckResult::Cex(m),
            OracleResult::Model(_) => unreachable!("one-state query"),
            OracleResult::Unsat | OracleResult::UnsatAtBound(_) => CheckResult::Valid,
            OracleResult::Unknown(r) => CheckResult::Unknown(r),
        }
    }

    /// Does `frame /\ p => wp(p)` hold at the bounds? A counterexample is a
    /// transition edge whose pre-state satisfies the frame and `p` and whose
    /// post-state violates `p`.
    pub fn check_relative_induction(
        &self,
        p: &Formula,
        frame: &[Formula],
    ) -> CheckResult<TwoStateStructure> {
        let vocab = self.vocab();
        let not_p_primed =
            Formula::not(prime(p, vocab).expect("lemma is single-vocabulary"));
        match self.solve_two_state(vec![p.clone()], frame.to_vec(), vec![not_p_primed]) {
            OracleResult::Model(OracleModel::Two(t)) => CheckResult::Cex(t),
            OracleResult::Model(_) => unreachable!("two-state query"),
            OracleResult::Unsat | OracleResult::UnsatAtBound(_) => CheckResult::Valid,
            OracleResult::Unknown(r) => CheckResult::Unknown(r),
        }
    }

    /// One-state implication `premises => conclusion`.
    pub fn check_implication(
        &self,
        premises: &[Formula],
        conclusion: &Formula,
    ) -> CheckResult<Structure> {
        let mut assertions = premises.to_vec();
        assertions.push(Formula::not(conclusion.clone()));
        match self.solve_one_state(assertions) {
            OracleResult::Model(OracleModel::One(m)) => CheckResult::Cex(m),
            OracleResult::Model(_) => unreachable!(),
            OracleResult::Unsat | OracleResult::UnsatAtBound(_) => CheckResult::Valid,
            OracleResult::Unknown(r) => CheckResult::Unknown(r),
        }
    }
}
