//! Built-in CDCL SAT solver: two-watched literals, first-UIP clause
//! learning, VSIDS branching with phase saving, and Luby restarts. Clauses
//! may be added incrementally between solves; solving accepts assumptions.
//!
//! Decisions default to the negative phase, so for the separation encodings
//! (where a positive literal means "include this matrix literal") the first
//! model found tends to be a small formula.

use std::io::{self, Write};

use crate::cancel::CancelToken;

/// A propositional variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub u32);

/// A literal: variable plus sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Lit(u32);

impl Lit {
    pub fn pos(v: Var) -> Lit {
        Lit(v.0 << 1)
    }

    pub fn neg(v: Var) -> Lit {
        Lit(v.0 << 1 | 1)
    }

    pub fn new(v: Var, negated: bool) -> Lit {
        Lit(v.0 << 1 | negated as u32)
    }

    pub fn var(self) -> Var {
        Var(self.0 >> 1)
    }

    pub fn negated(self) -> bool {
        self.0 & 1 == 1
    }

    fn idx(self) -> usize {
        self.0 as usize
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LBool {
    True,
    False,
    Undef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatResult {
    Sat,
    Unsat,
    /// Budget exhausted or cancelled.
    Unknown,
}

/// The interface the separation and grounding encoders program against:
/// create variables, add clauses incrementally, solve under assumptions, and
/// read back a model. Complete for the finite encodings produced here.
pub trait SatInterface {
    fn new_var(&mut self) -> Var;
    fn add_clause(&mut self, lits: &[Lit]);
    fn solve_with(&mut self, assumptions: &[Lit]) -> SatResult;
    fn solve(&mut self) -> SatResult {
        self.solve_with(&[])
    }
    /// Value of `v` in the last model; only meaningful after `Sat`.
    fn model_value(&self, v: Var) -> bool;
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    clause: u32,
    blocker: Lit,
}

/// Resource limits and cancellation for one solver instance.
#[derive(Debug, Default, Clone)]
pub struct Budget {
    pub max_conflicts: Option<u64>,
    pub cancel: Option<CancelToken>,
}

#[derive(Debug, Default)]
pub struct Solver {
    clauses: Vec<Vec<Lit>>,
    watches: Vec<Vec<Watcher>>,
    assign: Vec<LBool>,
    polarity: Vec<bool>,
    level: Vec<u32>,
    reason: Vec<Option<u32>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    heap: VarHeap,
    seen: Vec<bool>,
    ok: bool,
    conflicts: u64,
    budget: Budget,
    model: Vec<bool>,
}

impl Solver {
    pub fn new() -> Solver {
        Solver {
            var_inc: 1.0,
            ok: true,
            ..Default::default()
        }
    }

    pub fn with_budget(budget: Budget) -> Solver {
        Solver {
            budget,
            ..Solver::new()
        }
    }

    pub fn set_budget(&mut self, budget: Budget) {
        self.budget = budget;
    }

    pub fn num_vars(&self) -> usize {
        self.assign.len()
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    fn value(&self, l: Lit) -> LBool {
        match self.assign[l.var().0 as usize] {
            LBool::Undef => LBool::Undef,
            LBool::True => {
                if l.negated() {
                    LBool::False
                } else {
                    LBool::True
                }
            }
            LBool::False => {
                if l.negated() {
                    LBool::True
                } else {
                    LBool::False
                }
            }
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, l: Lit, reason: Option<u32>) {
        debug_assert_eq!(self.value(l), LBool::Undef);
        let v = l.var().0 as usize;
        self.assign[v] = if l.negated() { LBool::False } else { LBool::True };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn propagate(&mut self) -> Option<u32> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = !p;
            let mut i = 0;
            let mut ws = std::mem::take(&mut self.watches[false_lit.idx()]);
            while i < ws.len() {
                let Watcher { clause, blocker } = ws[i];
                if self.value(blocker) == LBool::True {
                    i += 1;
                    continue;
                }
                let cidx = clause as usize;
                // ensure false_lit is at position 1
                if self.clauses[cidx][0] == false_lit {
                    self.clauses[cidx].swap(0, 1);
                }
                debug_assert_eq!(self.clauses[cidx][1], false_lit);
                let first = self.clauses[cidx][0];
                if first != blocker && self.value(first) == LBool::True {
                    ws[i] = Watcher {
                        clause,
                        blocker: first,
                    };
                    i += 1;
                    continue;
                }
                // look for a new watch
                let mut moved = false;
                for k in 2..self.clauses[cidx].len() {
                    let other = self.clauses[cidx][k];
                    if self.value(other) != LBool::False {
                        self.clauses[cidx].swap(1, k);
                        self.watches[other.idx()].push(Watcher {
                            clause,
                            blocker: first,
                        });
                        ws.swap_remove(i);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                // unit or conflict
                if self.value(first) == LBool::False {
                    self.qhead = self.trail.len();
                    self.watches[false_lit.idx()] = ws;
                    return Some(clause);
                }
                self.enqueue(first, Some(clause));
                i += 1;
            }
            self.watches[false_lit.idx()] = ws;
        }
        None
    }

    fn analyze(&mut self, conflict: u32) -> (Vec<Lit>, u32) {
        let mut learnt = vec![Lit(0)]; // slot for the asserting literal
        let mut counter = 0u32;
        let mut p: Option<Lit> = None;
        let mut clause = conflict;
        let mut index = self.trail.len();
        loop {
            let start = if p.is_none() { 0 } else { 1 };
            for k in start..self.clauses[clause as usize].len() {
                let q = self.clauses[clause as usize][k];
                let v = q.var().0 as usize;
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump(q.var());
                    if self.level[v] == self.decision_level() {
                        counter += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var().0 as usize] {
                    break;
                }
            }
            let lit = self.trail[index];
            self.seen[lit.var().0 as usize] = false;
            counter -= 1;
            if counter == 0 {
                learnt[0] = !lit;
                break;
            }
            p = Some(lit);
            clause = self.reason[lit.var().0 as usize].expect("reason on conflict path");
        }
        for l in &learnt {
            self.seen[l.var().0 as usize] = false;
        }
        // backtrack level: second-highest decision level in the clause
        let bt = if learnt.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].var().0 as usize]
                    > self.level[learnt[max_i].var().0 as usize]
                {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            self.level[learnt[1].var().0 as usize]
        };
        (learnt, bt)
    }

    fn backtrack(&mut self, to: u32) {
        if self.decision_level() <= to {
            return;
        }
        let bound = self.trail_lim[to as usize];
        for i in (bound..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var().0 as usize;
            self.polarity[v] = l.negated();
            self.assign[v] = LBool::Undef;
            self.reason[v] = None;
            self.heap.insert(l.var(), &self.activity);
        }
        self.trail.truncate(bound);
        self.trail_lim.truncate(to as usize);
        self.qhead = bound;
    }

    fn bump(&mut self, v: Var) {
        let a = &mut self.activity[v.0 as usize];
        *a += self.var_inc;
        if *a > 1e100 {
            for act in &mut self.activity {
                *act *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.update(v, &self.activity);
    }

    fn attach(&mut self, cidx: u32) {
        let c = &self.clauses[cidx as usize];
        debug_assert!(c.len() >= 2);
        let (a, b) = (c[0], c[1]);
        self.watches[a.idx()].push(Watcher {
            clause: cidx,
            blocker: b,
        });
        self.watches[b.idx()].push(Watcher {
            clause: cidx,
            blocker: a,
        });
    }

    fn cancelled(&self) -> bool {
        self.budget.cancel.as_ref().is_some_and(|c| c.is_cancelled())
    }

    /// Dump the current clause set in DIMACS format.
    pub fn dump_dimacs(&self, w: &mut impl Write) -> io::Result<()> {
        let units = self
            .trail_lim
            .first()
            .copied()
            .unwrap_or(self.trail.len());
        writeln!(
            w,
            "p cnf {} {}",
            self.num_vars(),
            self.clauses.len() + units
        )?;
        for l in &self.trail[..units] {
            writeln!(w, "{} 0", dimacs_lit(*l))?;
        }
        for c in &self.clauses {
            for l in c {
                write!(w, "{} ", dimacs_lit(*l))?;
            }
            writeln!(w, "0")?;
        }
        Ok(())
    }
}

fn dimacs_lit(l: Lit) -> i64 {
    let v = l.var().0 as i64 + 1;
    if l.negated() {
        -v
    } else {
        v
    }
}

impl SatInterface for Solver {
    fn new_var(&mut self) -> Var {
        let v = Var(self.assign.len() as u32);
        self.assign.push(LBool::Undef);
        self.polarity.push(true); // negative phase first
        self.level.push(0);
        self.reason.push(None);
        self.activity.push(0.0);
        self.seen.push(false);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.model.push(false);
        self.heap.insert(v, &self.activity);
        v
    }

    fn add_clause(&mut self, lits: &[Lit]) {
        if !self.ok {
            return;
        }
        self.backtrack(0);
        // dedup and drop tautologies / false literals
        let mut c: Vec<Lit> = Vec::with_capacity(lits.len());
        for &l in lits {
            if self.value(l) == LBool::True {
                return; // satisfied at level 0
            }
            if self.value(l) == LBool::False {
                continue;
            }
            if c.contains(&!l) {
                return; // tautology
            }
            if !c.contains(&l) {
                c.push(l);
            }
        }
        match c.len() {
            0 => self.ok = false,
            1 => {
                self.enqueue(c[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                let cidx = self.clauses.len() as u32;
                self.clauses.push(c);
                self.attach(cidx);
            }
        }
    }

    fn solve_with(&mut self, assumptions: &[Lit]) -> SatResult {
        if !self.ok {
            return SatResult::Unsat;
        }
        self.backtrack(0);
        if self.propagate().is_some() {
            self.ok = false;
            return SatResult::Unsat;
        }
        let start_conflicts = self.conflicts;
        let mut restarts = 0u32;
        loop {
            let budget = 64 * luby(restarts);
            match self.search(budget, assumptions, start_conflicts) {
                Some(r) => {
                    self.backtrack(0);
                    return r;
                }
                None => restarts += 1,
            }
        }
    }

    fn model_value(&self, v: Var) -> bool {
        self.model[v.0 as usize]
    }
}

impl Solver {
    /// Search until a result, a restart (None), or budget exhaustion.
    fn search(
        &mut self,
        conflict_budget: u64,
        assumptions: &[Lit],
        start_conflicts: u64,
    ) -> Option<SatResult> {
        let mut local_conflicts = 0u64;
        loop {
            if self.cancelled() {
                return Some(SatResult::Unknown);
            }
            if let Some(conflict) = self.propagate() {
                self.conflicts += 1;
                local_conflicts += 1;
                if let Some(max) = self.budget.max_conflicts {
                    if self.conflicts - start_conflicts >= max {
                        return Some(SatResult::Unknown);
                    }
                }
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Some(SatResult::Unsat);
                }
                let (learnt, bt) = self.analyze(conflict);
                self.backtrack(bt);
                // first-UIP: the asserting literal was assigned at the
                // conflict level, so it is unassigned after backtracking
                let asserting = learnt[0];
                if learnt.len() == 1 {
                    self.enqueue(asserting, None);
                } else {
                    let cidx = self.clauses.len() as u32;
                    self.clauses.push(learnt);
                    self.attach(cidx);
                    self.enqueue(asserting, Some(cidx));
                }
                self.var_inc /= 0.95;
            } else {
                if local_conflicts >= conflict_budget {
                    self.backtrack(0);
                    return None; // restart
                }
                // assumptions first
                let mut next: Option<Lit> = None;
                while (self.decision_level() as usize) < assumptions.len() {
                    let a = assumptions[self.decision_level() as usize];
                    match self.value(a) {
                        LBool::True => self.trail_lim.push(self.trail.len()),
                        LBool::False => return Some(SatResult::Unsat),
                        LBool::Undef => {
                            next = Some(a);
                            break;
                        }
                    }
                }
                let decision = match next {
                    Some(l) => Some(l),
                    None => self.pick_branch(),
                };
                match decision {
                    None => {
                        self.model.clear();
                        self.model
                            .extend(self.assign.iter().map(|a| *a == LBool::True));
                        return Some(SatResult::Sat);
                    }
                    Some(l) => {
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(l, None);
                    }
                }
            }
        }
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.heap.pop_max(&self.activity) {
            if self.assign[v.0 as usize] == LBool::Undef {
                return Some(Lit::new(v, self.polarity[v.0 as usize]));
            }
        }
        None
    }
}

/// Truth value of a circuit node: folded constant or a literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CVal {
    True,
    False,
    Lit(Lit),
}

impl CVal {
    pub fn negate(self) -> CVal {
        match self {
            CVal::True => CVal::False,
            CVal::False => CVal::True,
            CVal::Lit(l) => CVal::Lit(!l),
        }
    }
}

/// Tseitin conjunction with constant folding.
pub fn circuit_and(solver: &mut impl SatInterface, parts: Vec<CVal>) -> CVal {
    let mut lits = Vec::with_capacity(parts.len());
    for p in parts {
        match p {
            CVal::False => return CVal::False,
            CVal::True => {}
            CVal::Lit(l) => lits.push(l),
        }
    }
    match lits.len() {
        0 => CVal::True,
        1 => CVal::Lit(lits[0]),
        _ => {
            let out = Lit::pos(solver.new_var());
            let mut big = Vec::with_capacity(lits.len() + 1);
            for &l in &lits {
                solver.add_clause(&[!out, l]);
                big.push(!l);
            }
            big.push(out);
            solver.add_clause(&big);
            CVal::Lit(out)
        }
    }
}

/// Tseitin disjunction with constant folding.
pub fn circuit_or(solver: &mut impl SatInterface, parts: Vec<CVal>) -> CVal {
    let neg = parts.into_iter().map(CVal::negate).collect();
    circuit_and(solver, neg).negate()
}

/// The Luby restart sequence 1,1,2,1,1,2,4,... (0-indexed).
fn luby(x: u32) -> u64 {
    let x = x as u64;
    let mut size: u64 = 1;
    let mut seq: u32 = 0;
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    let mut x = x;
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    1u64 << seq
}

/// Indexed max-heap over variable activities.
#[derive(Debug, Default)]
struct VarHeap {
    heap: Vec<Var>,
    index: Vec<i32>, // -1 = absent
}

impl VarHeap {
    fn insert(&mut self, v: Var, act: &[f64]) {
        let vi = v.0 as usize;
        if self.index.len() <= vi {
            self.index.resize(vi + 1, -1);
        }
        if self.index[vi] >= 0 {
            return;
        }
        self.index[vi] = self.heap.len() as i32;
        self.heap.push(v);
        self.sift_up(self.heap.len() - 1, act);
    }

    fn update(&mut self, v: Var, act: &[f64]) {
        let vi = v.0 as usize;
        if vi < self.index.len() && self.index[vi] >= 0 {
            self.sift_up(self.index[vi] as usize, act);
        }
    }

    fn pop_max(&mut self, act: &[f64]) -> Option<Var> {
        if self.heap.is_empty() {
            return None;
        }
        let top = self.heap[0];
        let last = self.heap.pop().unwrap();
        self.index[top.0 as usize] = -1;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.index[last.0 as usize] = 0;
            self.sift_down(0, act);
        }
        Some(top)
    }

    fn sift_up(&mut self, mut i: usize, act: &[f64]) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if act[self.heap[i].0 as usize] <= act[self.heap[parent].0 as usize] {
                break;
            }
            self.swap(i, parent);
            i = parent;
        }
    }

    fn sift_down(&mut self, mut i: usize, act: &[f64]) {
        loop {
            let l = 2 * i + 1;
            let r = 2 * i + 2;
            let mut best = i;
            if l < self.heap.len() && act[self.heap[l].0 as usize] > act[self.heap[best].0 as usize]
            {
                best = l;
            }
            if r < self.heap.len() && act[self.heap[r].0 as usize] > act[self.heap[best].0 as usize]
            {
                best = r;
            }
            if best == i {
                break;
            }
            self.swap(i, best);
            i = best;
        }
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.heap.swap(a, b);
        self.index[self.heap[a].0 as usize] = a as i32;
        self.index[self.heap[b].0 as usize] = b as i32;
    }
}
