//! The PDR/IC3 main loop: pushing, must/may proof obligations, multi-block
//! generalization, reachable-state bookkeeping, and convergence detection.

use std::collections::HashMap;
use std::collections::VecDeque;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{Config, Mode};
use crate::epr::{allowed_edges, EdgeSet, EprError};
use crate::events::{EngineStats, EventLog};
use crate::ig::{ig_query, ConstraintStore, IgContext, IgOutcome};
use crate::logic::{
    diagram, eval_closed, prime, Formula, PrenexFormula, Structure, TwoStateStructure,
};
use crate::oracle::{CancelToken, CheckResult, Oracle, SolveOptions};
use crate::pdr::store::{LemmaOrigin, LemmaStore, FRAME_INF};
use crate::syntax::{print_formula, TransitionSystem};

/// Outcome of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunResult {
    /// An inductive invariant implying safety, verified at bound+extra.
    Invariant(Vec<Formula>),
    /// A concrete reachable state chain ending in an unsafe state.
    Unsafe(Vec<Structure>),
    /// Timeout, oracle failure, or bound-discrepancy diagnostics.
    Unknown(String),
}

/// What to do about a lemma that does not push.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockTarget {
    /// Deepest unblocked state and its frame (>= 1).
    Obligation(Structure, u32),
    /// A proven-reachable state chain; first state is initial.
    ReachableChain(Vec<Structure>),
    NonePending,
}

struct ActiveIg {
    states: Vec<Structure>,
    frame: u32,
    cancel: CancelToken,
}

pub struct Engine {
    pub sys: Arc<TransitionSystem>,
    pub cfg: Config,
    oracle: Oracle,
    store: RwLock<LemmaStore>,
    constraints: ConstraintStore,
    pub events: Arc<EventLog>,
    pub stats: Arc<EngineStats>,
    allowed: Option<EdgeSet>,
    cancel_all: CancelToken,
    result: Mutex<Option<RunResult>>,
    active_igs: Mutex<Vec<ActiveIg>>,
    /// failed-obligation backoff: lemma id -> (failures, next eligible
    /// step, next eligible instant); steps gate sequential runs, wall time
    /// gates parallel runs
    backoff: Mutex<HashMap<usize, (u32, u64, Instant)>>,
    /// push checks that failed at a given store generation, to avoid
    /// re-querying an unchanged frame
    push_cache: Mutex<HashMap<(usize, u32), u64>>,
    step_counter: Mutex<u64>,
    rng: Mutex<ChaCha8Rng>,
    deadline: Option<Instant>,
}

impl Engine {
    pub fn new(
        sys: Arc<TransitionSystem>,
        cfg: Config,
        events: Arc<EventLog>,
    ) -> Result<Engine, EprError> {
        let allowed = match cfg.mode {
            Mode::Epr => Some(allowed_edges(&sys.sig, &sys.epr_edges)?),
            _ => None,
        };
        let dimacs = match &cfg.dimacs_dir {
            Some(dir) => Some(Arc::new(
                crate::oracle::DimacsSink::new(dir.clone())
                    .unwrap_or_else(|e| panic!("cannot create DIMACS dir: {e}")),
            )),
            None => None,
        };
        let mut oracle = Oracle::new(sys.clone(), cfg.bound, SolveOptions {
            max_conflicts: cfg.max_conflicts,
            cancel: None,
            stats: None,
            dimacs,
        });
        oracle.incremental = cfg.incremental;
        oracle.external = cfg.external.clone().map(Arc::new);
        let deadline = cfg.timeout.map(|t| Instant::now() + t);
        Ok(Engine {
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(cfg.seed)),
            sys,
            oracle,
            store: RwLock::new(LemmaStore::new()),
            constraints: ConstraintStore::new(),
            events,
            stats: Arc::new(EngineStats::default()),
            allowed,
            cancel_all: CancelToken::new(),
            result: Mutex::new(None),
            active_igs: Mutex::new(Vec::new()),
            backoff: Mutex::new(HashMap::new()),
            push_cache: Mutex::new(HashMap::new()),
            step_counter: Mutex::new(0),
            deadline,
            cfg,
        })
    }

    pub fn store(&self) -> &RwLock<LemmaStore> {
        &self.store
    }

    pub fn constraint_store(&self) -> &ConstraintStore {
        &self.constraints
    }

    fn done(&self) -> bool {
        if self.result.lock().unwrap().is_some() {
            return true;
        }
        if let Some(d) = self.deadline {
            if Instant::now() >= d {
                self.set_result(RunResult::Unknown("timeout".to_string()));
                return true;
            }
        }
        false
    }

    fn set_result(&self, r: RunResult) {
        let mut slot = self.result.lock().unwrap();
        if slot.is_none() {
            match &r {
                RunResult::Invariant(fs) => self.events.emit(
                    "invariant-found",
                    json!({ "lemmas": fs.len() }),
                ),
                RunResult::Unsafe(trace) => self
                    .events
                    .emit("unsafe", json!({ "trace_len": trace.len() })),
                RunResult::Unknown(reason) => {
                    self.events.emit("unknown", json!({ "reason": reason }))
                }
            }
            *slot = Some(r);
            self.cancel_all.cancel();
        }
    }

    /// Split a formula into its top-level conjuncts.
    fn conjuncts(f: &Formula) -> Vec<Formula> {
        match f {
            Formula::And(fs) => fs.iter().flat_map(Self::conjuncts).collect(),
            other => vec![other.clone()],
        }
    }

    /// Load the initial and safety conjuncts into frame 0, detect
    /// immediately-unsafe systems, and push.
    pub fn init_frames(&self) -> Result<(), RunResult> {
        {
            let mut store = self.store.write().unwrap();
            let mut init_conjuncts: Vec<Formula> =
                self.sys.inits.iter().flat_map(Self::conjuncts).collect();
            if init_conjuncts.is_empty() {
                init_conjuncts.push(Formula::tt());
            }
            for c in init_conjuncts {
                let id = store.add(c.clone(), None, 0, LemmaOrigin::Init);
                self.events.emit(
                    "lemma-added",
                    json!({ "id": id, "origin": "init", "frame": 0,
                            "formula": print_formula(&c, &self.sys.sig) }),
                );
            }
            let mut safety_conjuncts: Vec<Formula> =
                self.sys.safeties.iter().flat_map(Self::conjuncts).collect();
            if safety_conjuncts.is_empty() {
                safety_conjuncts.push(Formula::tt());
            }
            for c in safety_conjuncts {
                let id = store.add(c.clone(), None, 0, LemmaOrigin::Safety);
                self.events.emit(
                    "lemma-added",
                    json!({ "id": id, "origin": "safety", "frame": 0,
                            "formula": print_formula(&c, &self.sys.sig) }),
                );
            }
        }
        // an initial state violating safety is a length-1 unsafe trace
        for s in &self.sys.safeties {
            match self.oracle.check_implication(&self.sys.inits, s) {
                CheckResult::Valid => {}
                CheckResult::Cex(m) => {
                    let r = RunResult::Unsafe(vec![m]);
                    self.set_result(r.clone());
                    return Err(r);
                }
                CheckResult::Unknown(reason) => {
                    let r = RunResult::Unknown(reason);
                    self.set_result(r.clone());
                    return Err(r);
                }
            }
        }
        self.push_fixpoint();
        Ok(())
    }

    fn frame_formulas_overlay(&self, i: u32, overlay: Option<(&Formula, u32)>) -> Vec<Formula> {
        let mut fs = self.store.read().unwrap().frame_formulas(i);
        if let Some((f, frame)) = overlay {
            if frame >= i {
                fs.push(f.clone());
            }
        }
        fs
    }

    /// A transition from `F_i` to a state violating `p`, or Valid when `p`
    /// pushes.
    fn preventer(
        &self,
        p: &Formula,
        i: u32,
        overlay: Option<(&Formula, u32)>,
    ) -> CheckResult<TwoStateStructure> {
        let not_p_primed = Formula::not(prime(p, &self.sys.vocab).expect("single-vocabulary"));
        let lazy = self.frame_formulas_overlay(i, overlay);
        match self
            .oracle
            .solve_two_state(vec![], lazy, vec![not_p_primed])
        {
            crate::oracle::OracleResult::Model(crate::oracle::OracleModel::Two(t)) => {
                CheckResult::Cex(t)
            }
            crate::oracle::OracleResult::Model(_) => unreachable!(),
            crate::oracle::OracleResult::Unsat
            | crate::oracle::OracleResult::UnsatAtBound(_) => CheckResult::Valid,
            crate::oracle::OracleResult::Unknown(r) => CheckResult::Unknown(r),
        }
    }

    /// Push lemmas to a fixpoint: a lemma at finite frame i moves to i+1
    /// when `F_i => wp(p)`; when `F_i = F_{i+1}` everything above i is
    /// mutually inductive and moves to infinity.
    pub fn push_fixpoint(&self) {
        let mut any_promoted = false;
        loop {
            let mut changed = false;
            let mut snapshot: Vec<(usize, Formula, u32)> = {
                let store = self.store.read().unwrap();
                store
                    .lemmas()
                    .iter()
                    .filter(|l| l.frame != FRAME_INF && l.frame < l.cap)
                    .map(|l| (l.id, l.formula.clone(), l.frame))
                    .collect()
            };
            snapshot.sort_by_key(|(id, _, frame)| (*frame, *id));
            for (id, formula, frame) in snapshot {
                if self.cancel_all.is_cancelled() {
                    return;
                }
                // frame may have moved since the snapshot
                let generation = {
                    let store = self.store.read().unwrap();
                    let l = store.lemma(id);
                    if l.frame != frame {
                        continue;
                    }
                    store.generation()
                };
                // an unchanged store cannot make a failed push succeed
                if self.push_cache.lock().unwrap().get(&(id, frame)) == Some(&generation) {
                    continue;
                }
                if self.store.read().unwrap().lemma(id).cap <= frame {
                    continue; // refuted above this frame
                }
                if let CheckResult::Valid = self.preventer(&formula, frame, None) {
                    self.store.write().unwrap().set_frame(id, frame + 1);
                    EngineStats::bump(&self.stats.pushes);
                    self.events
                        .emit("pushed", json!({ "id": id, "to": frame + 1 }));
                    changed = true;
                } else {
                    self.push_cache
                        .lock()
                        .unwrap()
                        .insert((id, frame), generation);
                }
            }
            // fixpoint detection: everything above an empty frame level is
            // mutually inductive, provided no refuted lemma (whose strength
            // the set may rely on) sits above the gap
            let promoted = {
                let mut store = self.store.write().unwrap();
                match store.promotion_gap() {
                    Some(i) => store.promote_from(i),
                    None => Vec::new(),
                }
            };
            for id in &promoted {
                self.events.emit("promoted-inf", json!({ "id": id }));
            }
            any_promoted |= !promoted.is_empty();
            if !changed && promoted.is_empty() {
                break;
            }
        }
        if self.cfg.audit {
            self.audit_meta_invariants();
        }
        if any_promoted {
            self.check_convergence();
        }
    }

    /// When `F_inf` implies safety, verify conditions (init, consecution,
    /// safety) at bound+extra and finish.
    fn check_convergence(&self) {
        if self.result.lock().unwrap().is_some() {
            return;
        }
        let inf = self.store.read().unwrap().f_inf();
        for s in &self.sys.safeties {
            match self.oracle.check_implication(&inf, s) {
                CheckResult::Valid => {}
                _ => return,
            }
        }
        // invariant candidate: re-verify at a strictly larger bound
        let bound = self.cfg.bound + self.cfg.verify_bound_extra;
        match verify_invariant(&self.sys, &inf, bound, self.cfg.max_conflicts) {
            Ok(()) => self.set_result(RunResult::Invariant(inf)),
            Err(msg) => {
                // sound at the configured bound but not at bound+extra
                self.events.emit("bound-discrepancy", json!({ "detail": msg }));
                self.set_result(RunResult::Unknown(format!(
                    "invariant found at bound {} failed re-verification at bound {}: {}",
                    self.cfg.bound, bound, msg
                )));
            }
        }
    }

    /// Find the pushing preventer of lemma `id` and recursively descend to
    /// the deepest unblocked state, or prove the chain reachable.
    pub fn to_block(&self, id: usize, overlay: Option<(&Formula, u32)>) -> BlockTarget {
        let (formula, frame) = {
            let store = self.store.read().unwrap();
            let l = store.lemma(id);
            if l.bad || l.frame == FRAME_INF || l.frame >= l.cap {
                return BlockTarget::NonePending;
            }
            (l.formula.clone(), l.frame)
        };
        match self.preventer(&formula, frame, overlay) {
            CheckResult::Valid | CheckResult::Unknown(_) => BlockTarget::NonePending,
            CheckResult::Cex(edge) => {
                if frame == 0 {
                    return self.initial_chain(&formula, overlay);
                }
                let exact = self.cfg.mode != Mode::Universal;
                match self.descend(edge.clone(), frame, exact, overlay) {
                    // plain-diagram chains are re-derived with exact
                    // diagrams so the trace is literal
                    BlockTarget::ReachableChain(_) if !exact => {
                        self.descend(edge, frame, true, overlay)
                    }
                    other => other,
                }
            }
        }
    }

    /// A frame-0 lemma can only yield a real chain: look for an initial
    /// preventer directly.
    fn initial_chain(&self, formula: &Formula, overlay: Option<(&Formula, u32)>) -> BlockTarget {
        let not_p_primed =
            Formula::not(prime(formula, &self.sys.vocab).expect("single-vocabulary"));
        let mut lazy = self.frame_formulas_overlay(0, overlay);
        lazy.extend(self.sys.inits.iter().cloned());
        match self.oracle.solve_two_state(vec![], lazy, vec![not_p_primed]) {
            crate::oracle::OracleResult::Model(crate::oracle::OracleModel::Two(t)) => {
                let vocab = &self.sys.vocab;
                BlockTarget::ReachableChain(vec![t.pre(vocab), t.post(vocab)])
            }
            _ => BlockTarget::NonePending,
        }
    }

    /// Walk predecessors downward from the preventer edge. `j` is the frame
    /// of the current obligation state; predecessors are sought in
    /// `F_{j-1}` (with Init asserted at the bottom level).
    fn descend(
        &self,
        top: TwoStateStructure,
        start_frame: u32,
        exact: bool,
        overlay: Option<(&Formula, u32)>,
    ) -> BlockTarget {
        let vocab = &self.sys.vocab;
        let mut edges: VecDeque<TwoStateStructure> = VecDeque::new();
        edges.push_front(top.clone());
        let mut state = top.pre(vocab);
        let mut j = start_frame;
        loop {
            if self.cancel_all.is_cancelled() {
                return BlockTarget::NonePending;
            }
            let diag = diagram(&state, exact);
            let diag_primed = prime(&diag, vocab).expect("diagram is single-vocabulary");
            let mut lazy = self.frame_formulas_overlay(j - 1, overlay);
            if j == 1 {
                lazy.extend(self.sys.inits.iter().cloned());
            }
            match self.oracle.solve_two_state(vec![], lazy, vec![diag_primed]) {
                crate::oracle::OracleResult::Unsat
                | crate::oracle::OracleResult::UnsatAtBound(_) => {
                    self.events.emit(
                        "obligation",
                        json!({ "frame": j, "state": state.to_string() }),
                    );
                    return BlockTarget::Obligation(state, j);
                }
                crate::oracle::OracleResult::Unknown(_) => return BlockTarget::NonePending,
                crate::oracle::OracleResult::Model(crate::oracle::OracleModel::Two(edge)) => {
                    let edge = if exact {
                        match remap_edge(&edge, &state, vocab) {
                            Some(e) => e,
                            None => return BlockTarget::NonePending,
                        }
                    } else {
                        edge
                    };
                    state = edge.pre(vocab);
                    edges.push_front(edge);
                    if j == 1 {
                        // the bottom pre-state satisfies Init by assertion
                        let mut chain = vec![edges[0].pre(vocab)];
                        for e in &edges {
                            chain.push(e.post(vocab));
                        }
                        return BlockTarget::ReachableChain(chain);
                    }
                    j -= 1;
                }
                crate::oracle::OracleResult::Model(_) => unreachable!(),
            }
        }
    }

    /// Register a proven-reachable chain (state k is k steps from an
    /// initial state): global positive constraints, refutation of lemmas
    /// that claim those depths (safety violations end the run as Unsafe),
    /// and frame repair.
    pub fn register_reachable(&self, chain: Vec<Structure>) {
        self.events
            .emit("reachable", json!({ "states": chain.len() }));
        // a chain state violating safety makes the whole run unsafe
        for (idx, m) in chain.iter().enumerate() {
            for s in &self.sys.safeties {
                if !eval_closed(m, s).unwrap_or(true) {
                    self.set_result(RunResult::Unsafe(chain[..=idx].to_vec()));
                    return;
                }
            }
        }
        {
            let mut store = self.store.write().unwrap();
            for (depth, m) in chain.iter().enumerate() {
                store.add_reachable(m.clone(), depth as u32);
            }
        }
        for m in &chain {
            self.constraints.add_reachable(m.clone());
        }
        // a state reachable in m steps refutes any frame claim >= m: cap
        // the lemma at m-1 (m >= 1 here; depth-0 states satisfy every
        // lemma via the initiation condition)
        let mut capped = false;
        for (depth, m) in chain.iter().enumerate() {
            let to_cap: Vec<usize> = {
                let store = self.store.read().unwrap();
                store
                    .lemmas()
                    .iter()
                    .filter(|l| !eval_closed(m, &l.formula).unwrap_or(true))
                    .filter(|l| l.cap >= depth as u32)
                    .map(|l| l.id)
                    .collect()
            };
            for id in to_cap {
                debug_assert!(depth >= 1, "initial states satisfy every lemma");
                let mut store = self.store.write().unwrap();
                store.mark_bad(id);
                store.cap_frame(id, depth as u32 - 1);
                self.events
                    .emit("bad", json!({ "id": id, "cap": depth as u32 - 1 }));
                capped = true;
            }
        }
        if capped {
            self.repair_frames();
        }
        if self.cfg.audit {
            self.audit_meta_invariants();
        }
    }

    /// After lemmas leave the frames, remaining lemmas may no longer be
    /// relatively inductive at their frame; demote until the frame
    /// conditions hold again, then re-push.
    fn repair_frames(&self) {
        loop {
            let mut changed = false;
            let snapshot: Vec<(usize, Formula, u32)> = {
                let store = self.store.read().unwrap();
                store
                    .lemmas()
                    .iter()
                    .filter(|l| l.frame >= 1)
                    .map(|l| (l.id, l.formula.clone(), l.frame))
                    .collect()
            };
            for (id, formula, frame) in snapshot {
                if self.cancel_all.is_cancelled() {
                    return;
                }
                let current = self.store.read().unwrap().lemma(id).frame;
                if current != frame {
                    continue;
                }
                let check_at = if frame == FRAME_INF {
                    FRAME_INF
                } else {
                    frame - 1
                };
                if let CheckResult::Cex(_) = self.check_frame_condition(&formula, check_at) {
                    let demoted = if frame == FRAME_INF {
                        self.store
                            .read()
                            .unwrap()
                            .max_finite_frame()
                            .map(|m| m + 1)
                            .unwrap_or(0)
                    } else {
                        frame - 1
                    };
                    self.store.write().unwrap().set_frame(id, demoted);
                    self.events
                        .emit("demoted", json!({ "id": id, "to": demoted }));
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        self.push_fixpoint();
    }

    /// `F_i => wp(p)` (for i = FRAME_INF this is consecution of `F_inf`).
    fn check_frame_condition(&self, p: &Formula, i: u32) -> CheckResult<TwoStateStructure> {
        self.preventer(p, i, None)
    }

    /// Add a learned lemma at `frame`, cancel IG queries it solves, push.
    pub fn add_lemma(&self, p: PrenexFormula, frame: u32) -> usize {
        if let Some(allowed) = &self.allowed {
            assert!(
                crate::epr::prefix_allowed(&p.prefix, allowed),
                "EPR mode admitted a lemma with disallowed Skolem edges"
            );
        }
        let formula = p.to_formula();
        let id = {
            let mut store = self.store.write().unwrap();
            store.add(formula.clone(), Some(p), frame, LemmaOrigin::Learned)
        };
        EngineStats::bump(&self.stats.lemmas_learned);
        self.events.emit(
            "lemma-added",
            json!({ "id": id, "origin": "learned", "frame": frame,
                    "formula": print_formula(&formula, &self.sys.sig) }),
        );
        self.cancel_solved_igs(&formula, frame);
        if self.cfg.audit {
            self.audit_meta_invariants();
        }
        id
    }

    /// Cancel active IG queries whose target states a lemma at `frame`
    /// already excludes.
    fn cancel_solved_igs(&self, formula: &Formula, frame: u32) {
        let igs = self.active_igs.lock().unwrap();
        for ig in igs.iter() {
            if ig.frame <= frame
                && ig
                    .states
                    .iter()
                    .all(|s| !eval_closed(s, formula).unwrap_or(true))
            {
                ig.cancel.cancel();
            }
        }
    }

    fn ig_context<'a>(&'a self, oracle: &'a Oracle) -> IgContext<'a> {
        IgContext {
            oracle,
            store: &self.constraints,
            cfg: &self.cfg,
            events: self.events.as_ref(),
            stats: self.stats.as_ref(),
            allowed: self.allowed.clone(),
        }
    }

    /// Run one IG query with registration for cross-task cancellation.
    fn blocking_query(
        &self,
        states: &[Structure],
        frame: u32,
        frame_formulas: &[Formula],
    ) -> IgOutcome {
        // skip queries that duplicate an in-flight query on an equivalent
        // target; the winner's lemma covers this state too
        {
            let igs = self.active_igs.lock().unwrap();
            let duplicate = igs.iter().any(|ig| {
                ig.frame == frame
                    && states.len() == 1
                    && ig
                        .states
                        .iter()
                        .any(|s| crate::logic::isomorphic(s, &states[0]))
            });
            if duplicate {
                drop(igs);
                std::thread::sleep(Duration::from_millis(25));
                return IgOutcome::Cancelled;
            }
        }
        // the run-level cancel propagates into this query's token
        let cancel = self.cancel_all.child();
        {
            let mut igs = self.active_igs.lock().unwrap();
            igs.push(ActiveIg {
                states: states.to_vec(),
                frame,
                cancel: cancel.clone(),
            });
        }
        let oracle = self.oracle.with_cancel(cancel.clone());
        let cx = self.ig_context(&oracle);
        let outcome = ig_query(&cx, states, frame as usize, frame_formulas, &cancel);
        {
            let mut igs = self.active_igs.lock().unwrap();
            igs.retain(|ig| ig.cancel.id() != cancel.id());
        }
        if self.cancel_all.is_cancelled() {
            return IgOutcome::Cancelled;
        }
        outcome
    }

    /// Multi-block generalization: after a successful IG query, keep
    /// re-blocking the new preventer of `lemma_id` (while it stays in the
    /// same frame) with a growing negative set, until the target moves or
    /// the generalization time exceeds the original query time.
    pub fn multiblock(&self, lemma_id: usize, state: Structure, frame: u32) {
        // a state isomorphic to a known reachable state can never be
        // separated from the reachable positives; fail fast
        let reachable_iso = {
            let store = self.store.read().unwrap();
            store
                .reachable()
                .iter()
                .any(|(m, _)| crate::logic::isomorphic(m, &state))
        };
        if reachable_iso {
            self.record_failure(lemma_id);
            return;
        }
        let mut states = vec![state];
        let mut kept: Option<PrenexFormula> = None;
        // multi-block generalization continues one IG query with a growing
        // negative set; the whole blocking attempt counts as a single
        // query once any round runs to completion
        let mut completed_rounds = 0u32;
        // generalization budget: the first round's cost; wall-clock in
        // parallel mode, separation-query count in sequential mode (so
        // sequential runs are deterministic)
        let mut original: Option<f64> = None;
        let mut generalization = 0.0f64;
        loop {
            if self.done() || self.cancel_all.is_cancelled() {
                break;
            }
            let frame_below = self.frame_formulas_overlay(frame - 1, None);
            let t0 = Instant::now();
            let seps0 = EngineStats::get(&self.stats.sep_queries);
            let outcome = self.blocking_query(&states, frame, &frame_below);
            let dt = if self.cfg.sequential {
                (EngineStats::get(&self.stats.sep_queries) - seps0) as f64
            } else {
                t0.elapsed().as_secs_f64()
            };
            match outcome {
                IgOutcome::Lemma(p) => {
                    completed_rounds += 1;
                    if original.is_none() {
                        original = Some(dt);
                    } else {
                        generalization += dt;
                    }
                    let formula = p.to_formula();
                    kept = Some(p);
                    // a learned (not yet committed) lemma already solves
                    // sibling queries aimed at states it excludes
                    self.cancel_solved_igs(&formula, frame);
                    if !self.cfg.multiblock {
                        break;
                    }
                    // does the original lemma have a suitable new preventer
                    // with this lemma speculatively in place?
                    match self.to_block(lemma_id, Some((&formula, frame))) {
                        BlockTarget::Obligation(s, i) if i == frame => {
                            if generalization >= original.unwrap_or(0.0) {
                                break; // half our time is enough
                            }
                            // this continuation subsumes concurrent queries
                            // on an equivalent single target
                            {
                                let igs = self.active_igs.lock().unwrap();
                                for ig in igs.iter() {
                                    if ig.frame == i
                                        && ig.states.len() == 1
                                        && crate::logic::isomorphic(&ig.states[0], &s)
                                    {
                                        ig.cancel.cancel();
                                    }
                                }
                            }
                            states.push(s);
                        }
                        _ => break,
                    }
                }
                IgOutcome::Cancelled => break,
                IgOutcome::Exhausted => {
                    completed_rounds += 1;
                    if kept.is_none() {
                        self.record_failure(lemma_id);
                    }
                    break;
                }
            }
        }
        if completed_rounds > 0 {
            EngineStats::bump(&self.stats.ig_queries);
        }
        if let Some(p) = kept {
            self.add_lemma(p, frame);
            self.push_fixpoint();
        }
    }

    fn record_failure(&self, lemma_id: usize) {
        let step = *self.step_counter.lock().unwrap();
        let mut backoff = self.backoff.lock().unwrap();
        let entry = backoff
            .entry(lemma_id)
            .or_insert((0, 0, Instant::now()));
        entry.0 += 1;
        let exp = 1u32 << entry.0.min(16);
        entry.1 = step + exp as u64;
        entry.2 = Instant::now() + self.cfg.backoff_base * exp;
        self.events.emit(
            "obligation-failed",
            json!({ "id": lemma_id, "retry_after_step": entry.1 }),
        );
    }

    fn eligible(&self, lemma_id: usize) -> bool {
        let backoff = self.backoff.lock().unwrap();
        let Some(&(_, next_step, next_at)) = backoff.get(&lemma_id) else {
            return true;
        };
        if self.cfg.sequential {
            *self.step_counter.lock().unwrap() >= next_step
        } else {
            Instant::now() >= next_at
        }
    }

    /// One learning-task step: block the lowest-frame safety lemma's
    /// preventer (must-proof-obligation).
    pub fn learning_step(&self) {
        *self.step_counter.lock().unwrap() += 1;
        let target = {
            let store = self.store.read().unwrap();
            store
                .lemmas()
                .iter()
                .filter(|l| !l.bad && l.origin == LemmaOrigin::Safety && l.frame != FRAME_INF)
                .map(|l| (l.frame, l.id))
                .filter(|&(_, id)| self.eligible(id))
                .min()
        };
        let Some((_, id)) = target else {
            // all safety lemmas at infinity (or in backoff)
            if self.store.read().unwrap().safety_at_inf() {
                self.check_convergence();
            }
            if !self.cfg.sequential {
                std::thread::sleep(Duration::from_millis(10));
            }
            return;
        };
        match self.to_block(id, None) {
            BlockTarget::NonePending => self.push_fixpoint(),
            BlockTarget::ReachableChain(chain) => {
                // reaching safety violations through real states: unsafe
                self.register_reachable(chain);
            }
            BlockTarget::Obligation(s, i) => self.multiblock(id, s, i),
        }
    }

    /// One heuristic-task step: sample a lemma at or below the safety
    /// frames, biased towards small matrices, and try to push or refute it
    /// (may-proof-obligation).
    pub fn heuristic_step(&self) {
        let candidates: Vec<(usize, usize)> = {
            let store = self.store.read().unwrap();
            let cap = store.min_safety_frame().unwrap_or(0);
            store
                .lemmas()
                .iter()
                .filter(|l| {
                    !l.bad
                        && l.origin != LemmaOrigin::Safety
                        && l.frame != FRAME_INF
                        && l.frame <= cap
                        && l.frame < l.cap
                })
                .map(|l| {
                    let size = l
                        .prenex
                        .as_ref()
                        .map(|p| p.matrix.literal_count())
                        .unwrap_or_else(|| l.formula.literal_count());
                    (l.id, size)
                })
                .collect()
        };
        if candidates.is_empty() {
            if !self.cfg.sequential {
                std::thread::sleep(Duration::from_millis(10));
            }
            return;
        }
        let weights: Vec<f64> = candidates
            .iter()
            .map(|(_, size)| 1.0 / (1.0 + *size as f64))
            .collect();
        let id = {
            let mut rng = self.rng.lock().unwrap();
            let dist = WeightedIndex::new(&weights).expect("nonempty weights");
            candidates[dist.sample(&mut *rng)].0
        };
        // a lemma claiming a frame at or above the depth of a known
        // reachable state that violates it is refuted without any oracle
        // call
        let refuted_at = {
            let store = self.store.read().unwrap();
            let l = store.lemma(id);
            store
                .reachable()
                .iter()
                .filter(|(m, depth)| {
                    *depth <= l.frame && !eval_closed(m, &l.formula).unwrap_or(true)
                })
                .map(|(_, depth)| *depth)
                .min()
        };
        if let Some(depth) = refuted_at {
            {
                let mut store = self.store.write().unwrap();
                store.mark_bad(id);
                store.cap_frame(id, depth.saturating_sub(1));
            }
            self.events.emit("bad", json!({ "id": id, "via": "reachable" }));
            self.repair_frames();
            return;
        }
        if !self.eligible(id) {
            return;
        }
        match self.to_block(id, None) {
            BlockTarget::NonePending => self.push_fixpoint(),
            BlockTarget::ReachableChain(chain) => self.register_reachable(chain),
            BlockTarget::Obligation(s, i) => self.multiblock(id, s, i),
        }
    }

    /// Run to completion: learning and heuristic tasks (parallel or
    /// interleaved sequentially) until an invariant, a counterexample, or a
    /// timeout.
    pub fn run(&self) -> RunResult {
        if let Err(r) = self.init_frames() {
            return r;
        }
        std::thread::scope(|scope| {
            if self.deadline.is_some() {
                // enforce the deadline even while a step is in flight
                scope.spawn(|| {
                    while !self.done() {
                        std::thread::sleep(Duration::from_millis(50));
                    }
                });
            }
            if self.cfg.sequential {
                while !self.done() {
                    self.learning_step();
                    if self.done() {
                        break;
                    }
                    self.heuristic_step();
                }
            } else {
                scope.spawn(|| {
                    while !self.done() {
                        self.learning_step();
                    }
                });
                scope.spawn(|| {
                    while !self.done() {
                        self.heuristic_step();
                    }
                });
            }
        });
        self.result
            .lock()
            .unwrap()
            .clone()
            .unwrap_or(RunResult::Unknown("no result".to_string()))
    }

    pub fn result(&self) -> Option<RunResult> {
        self.result.lock().unwrap().clone()
    }

    /// Frame meta-invariants, re-checked with fresh oracle queries:
    /// Init => F_0; frames nested (structural); F_n => F_inf (structural);
    /// F_{j-1} => wp(p) for every lemma at frame j (which implies
    /// F_i => wp(F_{i+1}) for all i since frames only grow downward); and
    /// consecution of F_inf.
    pub fn audit_meta_invariants(&self) {
        let lemmas: Vec<(usize, Formula, u32)> = {
            let store = self.store.read().unwrap();
            store
                .lemmas()
                .iter()
                .map(|l| (l.id, l.formula.clone(), l.frame))
                .collect()
        };
        for (id, f, _) in &lemmas {
            // (init => F_0): every non-bad lemma is in F_0
            let ok = matches!(
                self.oracle.check_implication(&self.sys.inits, f),
                CheckResult::Valid | CheckResult::Unknown(_)
            );
            assert!(ok, "meta-invariant Init => F_0 fails for lemma {id}");
        }
        for (id, f, frame) in &lemmas {
            if *frame == 0 {
                continue;
            }
            let below = if *frame == FRAME_INF {
                FRAME_INF
            } else {
                frame - 1
            };
            let ok = matches!(
                self.check_frame_condition(f, below),
                CheckResult::Valid | CheckResult::Unknown(_)
            );
            assert!(
                ok,
                "meta-invariant F_{below} => wp(lemma {id}) fails (frame {frame})"
            );
        }
        // a state reachable in m steps satisfies every lemma whose frame
        // claims depth m
        let store = self.store.read().unwrap();
        for (m, depth) in store.reachable() {
            for l in store.frame_lemmas(*depth) {
                assert!(
                    eval_closed(m, &l.formula).unwrap_or(false),
                    "state reachable in {depth} steps violates lemma {} at frame {}",
                    l.id,
                    l.frame
                );
            }
        }
    }
}

/// Remap a two-state edge by an isomorphism taking its post-state onto
/// `target`, so chains stitch literally. The post-state satisfies the exact
/// diagram of `target`, so an isomorphism exists.
fn remap_edge(
    edge: &TwoStateStructure,
    target: &Structure,
    vocab: &crate::logic::TwoVocab,
) -> Option<TwoStateStructure> {
    let post = edge.post(vocab);
    if post.universe() != target.universe() {
        return None;
    }
    let mut found: Option<TwoStateStructure> = None;
    crate::logic::for_each_permutation(post.universe(), |perms| {
        if crate::logic::permute(&post, perms) == *target {
            found = Some(TwoStateStructure::new(crate::logic::permute(
                edge.full(),
                perms,
            )));
            true
        } else {
            false
        }
    });
    found
}

/// Check the inductive-invariant conditions for `formulas` on `sys` at the
/// given per-sort bound: initiation, consecution, and safety.
pub fn verify_invariant(
    sys: &Arc<TransitionSystem>,
    formulas: &[Formula],
    bound: usize,
    max_conflicts: Option<u64>,
) -> Result<(), String> {
    let oracle = Oracle::new(
        sys.clone(),
        bound,
        SolveOptions {
            max_conflicts,
            cancel: None,
            stats: None,
            dimacs: None,
        },
    );
    for f in formulas {
        match oracle.check_implication(&sys.inits, f) {
            CheckResult::Valid => {}
            CheckResult::Cex(m) => {
                return Err(format!(
                    "initiation fails for {}: {}",
                    print_formula(f, &sys.sig),
                    m
                ))
            }
            CheckResult::Unknown(r) => return Err(format!("initiation unknown: {r}")),
        }
    }
    let all: Vec<Formula> = formulas.to_vec();
    for f in formulas {
        match oracle.check_relative_induction(f, &all) {
            CheckResult::Valid => {}
            CheckResult::Cex(t) => {
                return Err(format!(
                    "consecution fails for {}: pre {}",
                    print_formula(f, &sys.sig),
                    t.pre(&sys.vocab)
                ))
            }
            CheckResult::Unknown(r) => return Err(format!("consecution unknown: {r}")),
        }
    }
    for s in &sys.safeties {
        match oracle.check_implication(&all, s) {
            CheckResult::Valid => {}
            CheckResult::Cex(m) => {
                return Err(format!(
                    "safety fails for {}: {}",
                    print_formula(s, &sys.sig),
                    m
                ))
            }
            CheckResult::Unknown(r) => return Err(format!("safety unknown: {r}")),
        }
    }
    Ok(())
}

/// Validate an unsafe trace: first state initial, each adjacent pair a real
/// transition, last state violates safety.
pub fn validate_trace(sys: &Arc<TransitionSystem>, trace: &[Structure]) -> Result<(), String> {
    if trace.is_empty() {
        return Err("empty trace".to_string());
    }
    for init in &sys.inits {
        if !eval_closed(&trace[0], init).map_err(|e| e.to_string())? {
            return Err("first state does not satisfy Init".to_string());
        }
    }
    for (k, pair) in trace.windows(2).enumerate() {
        let combined = combine_two_state(sys, &pair[0], &pair[1])
            .ok_or_else(|| format!("step {k}: universes differ"))?;
        let tr = sys.transition_disjunction();
        if !eval_closed(combined.full(), &tr).map_err(|e| e.to_string())? {
            return Err(format!("step {k} is not a transition"));
        }
    }
    let last = trace.last().unwrap();
    let violates = sys
        .safeties
        .iter()
        .any(|s| !eval_closed(last, s).unwrap_or(true));
    if !violates {
        return Err("last state does not violate safety".to_string());
    }
    Ok(())
}

/// Assemble a two-state structure from a pre/post pair over one universe.
pub fn combine_two_state(
    sys: &Arc<TransitionSystem>,
    pre: &Structure,
    post: &Structure,
) -> Option<TwoStateStructure> {
    if pre.universe() != post.universe() {
        return None;
    }
    let vocab = &sys.vocab;
    let mut m = Structure::new(vocab.doubled().clone(), pre.universe().to_vec());
    let single = vocab.single();
    for c in single.const_ids() {
        m.set_const(c, pre.const_value(c));
        m.set_const(vocab.primed_const(c), post.const_value(c));
    }
    for r in single.rel_ids() {
        for t in pre.rel_tuples(r).collect::<Vec<_>>() {
            m.set_rel(r, &t, pre.rel_holds(r, &t));
            m.set_rel(vocab.primed_rel(r), &t, post.rel_holds(r, &t));
        }
    }
    for f in single.func_ids() {
        for t in pre.func_tuples(f).collect::<Vec<_>>() {
            m.set_func(f, &t, pre.func_value(f, &t));
            m.set_func(vocab.primed_func(f), &t, post.func_value(f, &t));
        }
    }
    Some(TwoStateStructure::new(m))
}
