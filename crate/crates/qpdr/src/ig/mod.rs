//! Breadth-first inductive generalization: schedule prefixes across
//! categories, run per-prefix separation refinement loops in parallel,
//! share related constraints, return the first lemma that passes the
//! initiation and relative-induction checks.

mod prefix;
mod store;

pub use prefix::{
    category_stream, prefix_of, shape_of, sub_prefixes, Category, PrefixScheduler, PrefixStatus,
    Shape,
};
pub use store::ConstraintStore;

use std::sync::Mutex;
use std::time::Instant;

use serde_json::json;

use crate::config::{Config, Mode};
use crate::epr::EdgeSet;
use crate::events::{EngineStats, EventLog};
use crate::logic::{eval_closed, Formula, PrenexFormula, Structure};
use crate::oracle::{CancelToken, CheckResult, Oracle};
use crate::sat::Budget;
use crate::separation::{minimize_matrix, PdnfTemplate, SepConstraint, SepOutcome, Separator};
use crate::syntax::print_formula;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IgOutcome {
    Lemma(PrenexFormula),
    Cancelled,
    Exhausted,
}

/// Shared context for IG queries.
pub struct IgContext<'a> {
    pub oracle: &'a Oracle,
    pub store: &'a ConstraintStore,
    pub cfg: &'a Config,
    pub events: &'a EventLog,
    pub stats: &'a EngineStats,
    /// EPR-allowed edges (None outside EPR mode).
    pub allowed: Option<EdgeSet>,
}

impl IgContext<'_> {
    fn categories(&self) -> &'static [Category] {
        match self.cfg.mode {
            Mode::Universal => Category::universal_only(),
            Mode::Epr | Mode::Fol => Category::all(),
        }
    }

    fn template_for(&self, universal_prefix: bool) -> PdnfTemplate {
        PdnfTemplate {
            terms: self.cfg.k_for(universal_prefix),
            cube_literal_cap: self.cfg.cube_literal_cap,
            depth_cap: self.cfg.literal_depth,
        }
    }
}

/// Find a lemma that is false on every state in `states`, implied by the
/// initial states, and inductive relative to `frame` (the frame below the
/// obligation). Workers take prefixes breadth-first until one solves.
pub fn ig_query(
    cx: &IgContext,
    states: &[Structure],
    frame_index: usize,
    frame: &[Formula],
    cancel: &CancelToken,
) -> IgOutcome {
    assert!(!states.is_empty());
    assert!(frame_index >= 1);
    cx.events.emit(
        "ig-query",
        json!({ "frame": frame_index, "states": states.len() }),
    );
    let sorts = cx.oracle.sys.sig.sorts().map(|(id, _)| id).collect();
    let scheduler = Mutex::new(PrefixScheduler::new(
        cx.categories(),
        sorts,
        cx.cfg.max_depth,
        cx.allowed.clone(),
        cx.cfg.sequential,
    ));
    let solution: Mutex<Option<PrenexFormula>> = Mutex::new(None);
    let workers = cx.cfg.workers_per_task();
    if workers <= 1 {
        worker(cx, states, frame, &scheduler, &solution, cancel);
    } else {
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| worker(cx, states, frame, &scheduler, &solution, cancel));
            }
        });
    }
    let found = solution.lock().unwrap().take();
    match found {
        Some(p) => {
            cx.events.emit(
                "ig-solution",
                json!({
                    "frame": frame_index,
                    "lemma": print_formula(&p.to_formula(), &cx.oracle.sys.sig),
                    "alternations": crate::separation::QPrefix::new(p.prefix.clone()).alternations(),
                }),
            );
            IgOutcome::Lemma(p)
        }
        None if cancel.is_cancelled() => IgOutcome::Cancelled,
        None => IgOutcome::Exhausted,
    }
}

fn worker(
    cx: &IgContext,
    states: &[Structure],
    frame: &[Formula],
    scheduler: &Mutex<PrefixScheduler>,
    solution: &Mutex<Option<PrenexFormula>>,
    cancel: &CancelToken,
) {
    let negatives: Vec<SepConstraint> = states
        .iter()
        .map(|s| SepConstraint::Negative(s.clone()))
        .collect();
    loop {
        if cancel.is_cancelled() || solution.lock().unwrap().is_some() {
            return;
        }
        let Some((category, qprefix)) = scheduler.lock().unwrap().next_prefix() else {
            return; // exhausted at the depth cap
        };
        let shape = shape_of(&qprefix);
        cx.events.emit(
            "prefix-taken",
            json!({ "prefix": shape_desc(&shape, cx), "category": format!("{category:?}") }),
        );
        let started = Instant::now();
        let template = cx.template_for(qprefix.is_universal());
        let mut sep = Separator::new(
            cx.oracle.sys.sig.clone(),
            qprefix,
            template,
            Budget {
                max_conflicts: cx.cfg.max_conflicts,
                cancel: Some(cancel.clone()),
            },
        );
        // C(P) starts with the negatives plus still-valid reused
        // constraints: positives always, implications only when their
        // pre-state still satisfies the frame
        let mut count = 0usize;
        for c in &negatives {
            sep.add_constraint(c);
            count += 1;
        }
        for c in cx.store.for_prefix(&shape) {
            if constraint_reusable(&c, frame) {
                sep.add_constraint(&c);
                count += 1;
            }
        }
        for m in cx.store.reachable() {
            sep.add_constraint(&SepConstraint::Positive(m));
            count += 1;
        }
        let status = refine(cx, &mut sep, &shape, frame, cancel, solution, &mut count);
        let elapsed = if cx.cfg.sequential {
            // logical cost: refinement iterations
            count as f64
        } else {
            started.elapsed().as_secs_f64()
        };
        let mut sched = scheduler.lock().unwrap();
        sched.charge(category, elapsed);
        if let Some(status) = status {
            sched.mark(&shape, status);
        }
        drop(sched);
        if solution.lock().unwrap().is_some() {
            return;
        }
    }
}

/// The per-prefix refinement loop. Returns the prefix's final status, or
/// None when the query was solved or cancelled mid-refinement.
fn refine(
    cx: &IgContext,
    sep: &mut Separator,
    shape: &Shape,
    frame: &[Formula],
    cancel: &CancelToken,
    solution: &Mutex<Option<PrenexFormula>>,
    iterations: &mut usize,
) -> Option<PrefixStatus> {
    loop {
        if cancel.is_cancelled() || solution.lock().unwrap().is_some() {
            return None;
        }
        *iterations += 1;
        EngineStats::bump(&cx.stats.sep_queries);
        if let Some(sink) = &cx.oracle.opts.dimacs {
            sink.dump("separation", |w| sep.dump_dimacs(w));
        }
        let candidate = match sep.solve() {
            SepOutcome::Unsep => {
                cx.events
                    .emit("unsep", json!({ "prefix": shape_desc(shape, cx) }));
                return Some(PrefixStatus::Unsep);
            }
            SepOutcome::Unknown(_) => return Some(PrefixStatus::Abandoned),
            SepOutcome::Separator(p) => p,
        };
        let minimized = minimize_matrix(&candidate, sep.constraints());
        let f = minimized.to_formula();
        // related constraints first: cheaper than oracle queries
        if let Some(c) = cx
            .store
            .related(shape)
            .into_iter()
            .find(|c| constraint_reusable(c, frame) && !c.satisfied_by(&f))
        {
            cx.events
                .emit("constraint-added", json!({ "source": "related" }));
            sep.add_constraint(&c);
            continue;
        }
        EngineStats::bump(&cx.stats.oracle_queries);
        match cx.oracle.check_initiation(&f) {
            CheckResult::Cex(m) => {
                let c = SepConstraint::Positive(m);
                cx.store.add(shape, c.clone());
                cx.events
                    .emit("constraint-added", json!({ "source": "initiation" }));
                sep.add_constraint(&c);
                continue;
            }
            CheckResult::Unknown(_) => return Some(PrefixStatus::Abandoned),
            CheckResult::Valid => {}
        }
        EngineStats::bump(&cx.stats.oracle_queries);
        match cx.oracle.check_relative_induction(&f, frame) {
            CheckResult::Cex(edge) => {
                let vocab = &cx.oracle.sys.vocab;
                let c = SepConstraint::Implication(edge.pre(vocab), edge.post(vocab));
                cx.store.add(shape, c.clone());
                cx.events
                    .emit("constraint-added", json!({ "source": "induction" }));
                sep.add_constraint(&c);
                continue;
            }
            CheckResult::Unknown(_) => return Some(PrefixStatus::Abandoned),
            CheckResult::Valid => {
                let mut slot = solution.lock().unwrap();
                if slot.is_none() {
                    *slot = Some(minimized);
                    cancel.cancel(); // stop sibling workers
                }
                return None;
            }
        }
    }
}

/// Positives are always reusable; an implication constraint only while its
/// pre-state still satisfies every frame lemma.
pub fn constraint_reusable(c: &SepConstraint, frame: &[Formula]) -> bool {
    match c {
        SepConstraint::Positive(_) => true,
        SepConstraint::Negative(_) => false,
        SepConstraint::Implication(pre, _) => frame
            .iter()
            .all(|l| eval_closed(pre, l).unwrap_or(false)),
    }
}

fn shape_desc(shape: &Shape, cx: &IgContext) -> String {
    shape
        .iter()
        .map(|(k, s)| {
            format!(
                "{}{}",
                match k {
                    crate::logic::QuantKind::Forall => "A",
                    crate::logic::QuantKind::Exists => "E",
                },
                cx.oracle.sys.sig.sort_name(*s)
            )
        })
        .collect::<Vec<_>>()
        .join(".")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::SolveOptions;
    use crate::syntax::parse_system;
    use std::sync::Arc;

    const MONOTONE: &str = "(sort s)(relation r (s) mutable)\
        (init (forall ((x s)) (not (r x))))\
        (transition add (exists ((x s)) (and (r' x) (forall ((y s)) (=> (not (= y x)) (= (r' y) (r y)))))))\
        (safety (and))";

    fn context(sys: &Arc<crate::syntax::TransitionSystem>, cfg: &'static Config) -> (Oracle, ConstraintStore) {
        let oracle = Oracle::new(sys.clone(), cfg.bound, SolveOptions::default());
        (oracle, ConstraintStore::new())
    }

    fn test_cfg() -> Config {
        Config {
            sequential: true,
            bound: 2,
            max_depth: 2,
            ..Config::default()
        }
    }

    #[test]
    fn blocks_a_bad_state_in_monotone_system() {
        let sys = Arc::new(parse_system(MONOTONE).unwrap());
        let cfg = Box::leak(Box::new(test_cfg()));
        let (oracle, store) = context(&sys, cfg);
        let events = EventLog::disabled();
        let stats = EngineStats::default();
        let cx = IgContext {
            oracle: &oracle,
            store: &store,
            cfg,
            events: &events,
            stats: &stats,
            allowed: None,
        };
        // state with r = {e0, e1}: both set
        let mut bad = Structure::new(sys.sig.clone(), vec![2]);
        bad.set_rel(crate::logic::RelId(0), &[0], true);
        bad.set_rel(crate::logic::RelId(0), &[1], true);
        let frame = vec![crate::syntax::parse_formula(
            "(forall ((x s)) (not (r x)))",
            &sys.sig,
        )
        .unwrap()];
        let cancel = CancelToken::new();
        match ig_query(&cx, &[bad.clone()], 1, &frame, &cancel) {
            IgOutcome::Lemma(p) => {
                let f = p.to_formula();
                // (9): excludes the blocked state
                assert_eq!(eval_closed(&bad, &f), Ok(false));
                // (10), (11): recheck with fresh oracle calls
                assert_eq!(oracle.check_initiation(&f), CheckResult::Valid);
                assert!(matches!(
                    oracle.check_relative_induction(&f, &frame),
                    CheckResult::Valid
                ));
            }
            other => panic!("expected lemma, got {other:?}"),
        }
    }

    #[test]
    fn init_state_cannot_be_blocked() {
        let sys = Arc::new(parse_system(MONOTONE).unwrap());
        let cfg = Box::leak(Box::new(test_cfg()));
        let (oracle, store) = context(&sys, cfg);
        let events = EventLog::disabled();
        let stats = EngineStats::default();
        let cx = IgContext {
            oracle: &oracle,
            store: &store,
            cfg,
            events: &events,
            stats: &stats,
            allowed: None,
        };
        // the empty-r state satisfies Init; (9) and (10) contradict
        let init_state = Structure::new(sys.sig.clone(), vec![1]);
        let cancel = CancelToken::new();
        assert_eq!(
            ig_query(&cx, &[init_state], 1, &[Formula::tt()], &cancel),
            IgOutcome::Exhausted
        );
    }

    #[test]
    fn sequential_queries_are_deterministic() {
        let sys = Arc::new(parse_system(MONOTONE).unwrap());
        let cfg = Box::leak(Box::new(test_cfg()));
        let mut results = Vec::new();
        for _ in 0..2 {
            let (oracle, store) = context(&sys, cfg);
            let events = EventLog::disabled();
            let stats = EngineStats::default();
            let cx = IgContext {
                oracle: &oracle,
                store: &store,
                cfg,
                events: &events,
                stats: &stats,
                allowed: None,
            };
            let mut bad = Structure::new(sys.sig.clone(), vec![2]);
            bad.set_rel(crate::logic::RelId(0), &[0], true);
            bad.set_rel(crate::logic::RelId(0), &[1], true);
            let frame = vec![crate::syntax::parse_formula(
                "(forall ((x s)) (not (r x)))",
                &sys.sig,
            )
            .unwrap()];
            let cancel = CancelToken::new();
            match ig_query(&cx, &[bad], 1, &frame, &cancel) {
                IgOutcome::Lemma(p) => results.push(print_formula(&p.to_formula(), &sys.sig)),
                other => panic!("expected lemma, got {other:?}"),
            }
        }
        assert_eq!(results[0], results[1]);
    }
}
