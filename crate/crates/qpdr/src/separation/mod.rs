//! Separation: given a fixed quantifier prefix, a k-term pseudo-DNF
//! template, and a set of structure constraints, find a prenex separator
//! formula or report UNSEP, via an encoding into propositional SAT.
//!
//! The matrix shape is `!c1 | c2 | ... | ck` (one negated cube plus k-1
//! cubes); equivalently free literals plus k-1 cubes. A presence variable
//! per (term, literal) selects the matrix; per structure constraint, the
//! quantifier expansion tree over that structure's universe is encoded with
//! Tseitin auxiliaries.

mod literals;

pub use literals::{literal_universe, Literal};

use std::sync::Arc;

use crate::logic::{eval, Env, Formula, PrefixItem, Signature, Structure};
use crate::sat::{circuit_and, circuit_or, Budget, CVal, Lit, SatInterface, SatResult, Solver, Var};

/// An ordered quantifier prefix with unique variable names.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QPrefix {
    items: Vec<PrefixItem>,
}

impl QPrefix {
    pub fn new(items: Vec<PrefixItem>) -> QPrefix {
        debug_assert!(
            {
                let mut names: Vec<&str> = items.iter().map(|i| i.name.as_str()).collect();
                names.sort_unstable();
                names.windows(2).all(|w| w[0] != w[1])
            },
            "prefix variable names must be unique"
        );
        QPrefix { items }
    }

    pub fn items(&self) -> &[PrefixItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_universal(&self) -> bool {
        self.items
            .iter()
            .all(|i| i.kind == crate::logic::QuantKind::Forall)
    }

    /// Number of quantifier alternations.
    pub fn alternations(&self) -> usize {
        self.items
            .windows(2)
            .filter(|w| w[0].kind != w[1].kind)
            .count()
    }
}

/// Shape of the quantifier-free matrix: `terms` (k) pDNF terms, an optional
/// cap on the literals per cube (the negated first cube is never capped),
/// and the literal-universe term depth cap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PdnfTemplate {
    pub terms: usize,
    pub cube_literal_cap: Option<usize>,
    pub depth_cap: usize,
}

impl PdnfTemplate {
    pub fn new(terms: usize) -> PdnfTemplate {
        assert!(terms >= 1, "k must be at least 1");
        PdnfTemplate {
            terms,
            cube_literal_cap: None,
            depth_cap: 1,
        }
    }
}

/// A structure constraint on the separator: it must be true on positive
/// structures, false on negative ones, and implication-consistent on pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SepConstraint {
    Positive(Structure),
    Negative(Structure),
    Implication(Structure, Structure),
}

impl SepConstraint {
    /// Does a closed formula satisfy this constraint (by evaluation)?
    pub fn satisfied_by(&self, f: &Formula) -> bool {
        let holds = |m: &Structure| eval(m, &mut Env::new(), f).unwrap_or(false);
        match self {
            SepConstraint::Positive(m) => holds(m),
            SepConstraint::Negative(m) => !holds(m),
            SepConstraint::Implication(pre, post) => !holds(pre) || holds(post),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SepOutcome {
    Separator(crate::logic::PrenexFormula),
    Unsep,
    Unknown(String),
}

/// One separation search: a prefix, a template, and an incrementally
/// growing constraint set over one SAT instance.
pub struct Separator {
    prefix: QPrefix,
    template: PdnfTemplate,
    literals: Vec<Literal>,
    /// truth tables of each literal per added structure are recomputed on
    /// demand; structures are stored for decoding-time rechecks
    constraints: Vec<SepConstraint>,
    solver: Solver,
    presence: Vec<Vec<Var>>,
}

impl Separator {
    pub fn new(
        sig: Arc<Signature>,
        prefix: QPrefix,
        template: PdnfTemplate,
        budget: Budget,
    ) -> Separator {
        let literals = literal_universe(&sig, prefix.items(), template.depth_cap);
        let mut solver = Solver::with_budget(budget);
        let presence: Vec<Vec<Var>> = (0..template.terms)
            .map(|_| literals.iter().map(|_| solver.new_var()).collect())
            .collect();
        if let Some(cap) = template.cube_literal_cap {
            for term in presence.iter().skip(1) {
                at_most(&mut solver, term, cap);
            }
        }
        Separator {
            prefix,
            template,
            literals,
            constraints: Vec::new(),
            solver,
            presence,
        }
    }

    pub fn prefix(&self) -> &QPrefix {
        &self.prefix
    }

    pub fn constraints(&self) -> &[SepConstraint] {
        &self.constraints
    }

    pub fn num_literals(&self) -> usize {
        self.literals.len()
    }

    /// Total presence variables: k per literal, the same count a k-clause
    /// CNF template would use.
    pub fn presence_var_count(&self) -> usize {
        self.template.terms * self.literals.len()
    }

    pub fn add_constraint(&mut self, c: &SepConstraint) {
        match c {
            SepConstraint::Positive(m) => {
                let root = self.encode_structure(m);
                self.assert_val(root, true);
            }
            SepConstraint::Negative(m) => {
                let root = self.encode_structure(m);
                self.assert_val(root, false);
            }
            SepConstraint::Implication(pre, post) => {
                let a = self.encode_structure(pre);
                let b = self.encode_structure(post);
                match (a, b) {
                    (CVal::False, _) | (_, CVal::True) => {}
                    (CVal::True, other) => self.assert_val(other, true),
                    (other, CVal::False) => self.assert_val(other, false),
                    (CVal::Lit(la), CVal::Lit(lb)) => self.solver.add_clause(&[!la, lb]),
                }
            }
        }
        self.constraints.push(c.clone());
    }

    fn assert_val(&mut self, v: CVal, want: bool) {
        match (v, want) {
            (CVal::True, true) | (CVal::False, false) => {}
            (CVal::True, false) | (CVal::False, true) => self.solver.add_clause(&[]),
            (CVal::Lit(l), true) => self.solver.add_clause(&[l]),
            (CVal::Lit(l), false) => self.solver.add_clause(&[!l]),
        }
    }

    /// Root truth of the (symbolic) separator on `m`: quantifiers expand
    /// over the universe, the matrix expands through presence variables.
    fn encode_structure(&mut self, m: &Structure) -> CVal {
        let mut env = Env::new();
        self.encode_node(m, 0, &mut env)
    }

    fn encode_node(&mut self, m: &Structure, pos: usize, env: &mut Env) -> CVal {
        if pos == self.prefix.len() {
            return self.encode_matrix(m, env);
        }
        let item = &self.prefix.items()[pos];
        let (kind, sort, name) = (item.kind, item.sort, item.name.clone());
        let mut parts = Vec::with_capacity(m.sort_size(sort));
        for e in 0..m.sort_size(sort) {
            env.bind(&name, e);
            parts.push(self.encode_node(m, pos + 1, env));
            env.pop();
        }
        match kind {
            crate::logic::QuantKind::Forall => circuit_and(&mut self.solver, parts),
            crate::logic::QuantKind::Exists => circuit_or(&mut self.solver, parts),
        }
    }

    fn encode_matrix(&mut self, m: &Structure, env: &mut Env) -> CVal {
        // which literals are false under this assignment
        let false_lits: Vec<usize> = (0..self.literals.len())
            .filter(|&i| {
                let f = self.literals[i].to_formula();
                !eval(m, env, &f).unwrap_or(false)
            })
            .collect();
        // viol[j]: some selected literal of term j is false here
        let viols: Vec<CVal> = (0..self.template.terms)
            .map(|j| {
                let picks: Vec<CVal> = false_lits
                    .iter()
                    .map(|&i| CVal::Lit(Lit::pos(self.presence[j][i])))
                    .collect();
                circuit_or(&mut self.solver, picks)
            })
            .collect();
        // matrix = viol_0 | !viol_1 | ... | !viol_{k-1}
        let mut parts = vec![viols[0]];
        for v in viols.iter().skip(1) {
            parts.push(v.negate());
        }
        circuit_or(&mut self.solver, parts)
    }

    /// Solve the accumulated constraints; a returned separator is rechecked
    /// against every constraint by evaluation.
    pub fn solve(&mut self) -> SepOutcome {
        match self.solver.solve() {
            SatResult::Unsat => SepOutcome::Unsep,
            SatResult::Unknown => SepOutcome::Unknown("budget".to_string()),
            SatResult::Sat => {
                let sep = self.decode();
                let f = sep.to_formula();
                for c in &self.constraints {
                    assert!(
                        c.satisfied_by(&f),
                        "separation encoding bug: decoded separator violates a constraint"
                    );
                }
                SepOutcome::Separator(sep)
            }
        }
    }

    pub fn dump_dimacs(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        self.solver.dump_dimacs(w)
    }

    /// Decode presence variables into the matrix `!c1 | c2 | ... | ck`,
    /// written as free (negated c1) literals plus cubes. An empty c1
    /// contributes false (omitted); an empty cube contributes true.
    fn decode(&self) -> crate::logic::PrenexFormula {
        let selected: Vec<Vec<&Literal>> = self
            .presence
            .iter()
            .map(|term| {
                (0..self.literals.len())
                    .filter(|&i| self.solver.model_value(term[i]))
                    .map(|i| &self.literals[i])
                    .collect()
            })
            .collect();
        let mut disjuncts: Vec<Formula> = Vec::new();
        for lit in &selected[0] {
            disjuncts.push(lit.negated());
        }
        for cube in selected.iter().skip(1) {
            disjuncts.push(Formula::and(cube.iter().map(|l| l.to_formula()).collect()));
        }
        crate::logic::PrenexFormula {
            prefix: self.prefix.items().to_vec(),
            matrix: Formula::Or(disjuncts),
        }
    }
}

/// Sequential-counter at-most-k over `vars`.
fn at_most(solver: &mut Solver, vars: &[Var], cap: usize) {
    let n = vars.len();
    if cap >= n {
        return;
    }
    if cap == 0 {
        for &v in vars {
            solver.add_clause(&[Lit::neg(v)]);
        }
        return;
    }
    // s[i][j]: at least j+1 true among the first i+1
    let mut s: Vec<Vec<Lit>> = Vec::with_capacity(n);
    for _ in 0..n {
        s.push((0..cap).map(|_| Lit::pos(solver.new_var())).collect());
    }
    solver.add_clause(&[Lit::neg(vars[0]), s[0][0]]);
    for j in 1..cap {
        solver.add_clause(&[!s[0][j]]);
    }
    for i in 1..n {
        solver.add_clause(&[Lit::neg(vars[i]), s[i][0]]);
        solver.add_clause(&[!s[i - 1][0], s[i][0]]);
        for j in 1..cap {
            solver.add_clause(&[Lit::neg(vars[i]), !s[i - 1][j - 1], s[i][j]]);
            solver.add_clause(&[!s[i - 1][j], s[i][j]]);
        }
        solver.add_clause(&[Lit::neg(vars[i]), !s[i - 1][cap - 1]]);
    }
}

/// One-shot separation over a fixed constraint set.
pub fn separate(
    sig: &Arc<Signature>,
    prefix: QPrefix,
    template: PdnfTemplate,
    constraints: &[SepConstraint],
    budget: Budget,
) -> SepOutcome {
    let mut sep = Separator::new(sig.clone(), prefix, template, budget);
    for c in constraints {
        sep.add_constraint(c);
    }
    sep.solve()
}

/// Greedily remove literals (last term first, last literal first) while all
/// constraints stay satisfied; repeats until no single removal survives.
pub fn minimize_matrix(
    sep: &crate::logic::PrenexFormula,
    constraints: &[SepConstraint],
) -> crate::logic::PrenexFormula {
    let mut disjuncts: Vec<Formula> = match &sep.matrix {
        Formula::Or(ds) => ds.clone(),
        other => vec![other.clone()],
    };
    let ok = |ds: &[Formula], prefix: &[PrefixItem]| {
        let cand = crate::logic::PrenexFormula {
            prefix: prefix.to_vec(),
            matrix: Formula::Or(ds.to_vec()),
        };
        let f = cand.to_formula();
        constraints.iter().all(|c| c.satisfied_by(&f))
    };
    loop {
        let mut changed = false;
        // walk disjuncts from the last term backwards
        let mut d = disjuncts.len();
        while d > 0 {
            d -= 1;
            match disjuncts[d].clone() {
                Formula::And(cube) => {
                    // dropping a whole cube only strengthens the matrix
                    let mut trial = disjuncts.clone();
                    trial.remove(d);
                    if ok(&trial, &sep.prefix) {
                        disjuncts = trial;
                        changed = true;
                        continue;
                    }
                    let mut cube = cube;
                    let mut l = cube.len();
                    while l > 0 {
                        l -= 1;
                        let removed = cube.remove(l);
                        let mut trial = disjuncts.clone();
                        trial[d] = Formula::and(cube.clone());
                        if ok(&trial, &sep.prefix) {
                            disjuncts = trial;
                            changed = true;
                        } else {
                            cube.insert(l, removed);
                        }
                    }
                }
                _ => {
                    // a free literal: removal drops the disjunct
                    let mut trial = disjuncts.clone();
                    trial.remove(d);
                    if ok(&trial, &sep.prefix) {
                        disjuncts = trial;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    crate::logic::PrenexFormula {
        prefix: sep.prefix.clone(),
        matrix: Formula::Or(disjuncts),
    }
}

/// Build a prefix from (kind, sort) pairs with generated variable names.
pub fn make_prefix(items: &[(crate::logic::QuantKind, crate::logic::SortId)]) -> QPrefix {
    QPrefix::new(
        items
            .iter()
            .enumerate()
            .map(|(i, &(kind, sort))| PrefixItem {
                kind,
                sort,
                name: format!("v{i}"),
            })
            .collect(),
    )
}

// re-exported for encoders built on the same contract
pub use crate::sat::SatInterface as SatBackend;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::QuantKind;
    use crate::syntax::parse_system;

    fn monotone_structures() -> (Arc<Signature>, Structure, Structure) {
        let sys = parse_system("(sort s)(relation r (s) mutable)").unwrap();
        let empty = Structure::new(sys.sig.clone(), vec![1]);
        let mut full = Structure::new(sys.sig.clone(), vec![1]);
        full.set_rel(crate::logic::RelId(0), &[0], true);
        (sys.sig.clone(), empty, full)
    }

    #[test]
    fn finds_exists_r_separator() {
        let (sig, empty, full) = monotone_structures();
        let s = sig.sort_id("s").unwrap();
        let prefix = make_prefix(&[(QuantKind::Exists, s)]);
        let constraints = vec![
            SepConstraint::Negative(empty),
            SepConstraint::Positive(full),
        ];
        match separate(&sig, prefix, PdnfTemplate::new(1), &constraints, Budget::default()) {
            SepOutcome::Separator(p) => {
                let f = p.to_formula();
                for c in &constraints {
                    assert!(c.satisfied_by(&f));
                }
            }
            other => panic!("expected separator, got {other:?}"),
        }
    }

    #[test]
    fn same_structure_positive_and_negative_is_unsep() {
        let (sig, _, full) = monotone_structures();
        let s = sig.sort_id("s").unwrap();
        let prefix = make_prefix(&[(QuantKind::Exists, s)]);
        let constraints = vec![
            SepConstraint::Positive(full.clone()),
            SepConstraint::Negative(full),
        ];
        assert_eq!(
            separate(&sig, prefix, PdnfTemplate::new(2), &constraints, Budget::default()),
            SepOutcome::Unsep
        );
    }

    #[test]
    fn implication_forces_false_on_pre() {
        let (sig, empty, full) = monotone_structures();
        let s = sig.sort_id("s").unwrap();
        let prefix = make_prefix(&[(QuantKind::Exists, s)]);
        // implication empty->full plus negative full forces separator false
        // on empty as well
        let constraints = vec![
            SepConstraint::Implication(empty.clone(), full.clone()),
            SepConstraint::Negative(full),
        ];
        match separate(&sig, prefix, PdnfTemplate::new(1), &constraints, Budget::default()) {
            SepOutcome::Separator(p) => {
                let f = p.to_formula();
                assert!(!crate::logic::eval_closed(&empty, &f).unwrap());
            }
            other => panic!("expected separator, got {other:?}"),
        }
    }

    #[test]
    fn presence_count_matches_clause_template() {
        let sys = parse_system("(sort s)(relation r (s) mutable)(constant a s immutable)").unwrap();
        let s = sys.sig.sort_id("s").unwrap();
        let prefix = make_prefix(&[(QuantKind::Forall, s)]);
        for k in 1..4 {
            let sep = Separator::new(
                sys.sig.clone(),
                prefix.clone(),
                PdnfTemplate::new(k),
                Budget::default(),
            );
            assert_eq!(sep.presence_var_count(), k * sep.num_literals());
        }
    }

    #[test]
    fn minimize_drops_redundant_literal() {
        let sys = parse_system("(sort s)(relation r (s) mutable)(constant a s immutable)").unwrap();
        let sig = sys.sig.clone();
        let s = sig.sort_id("s").unwrap();
        let r = crate::logic::RelId(0);
        let mut pos = Structure::new(sig.clone(), vec![2]);
        pos.set_rel(r, &[1], true);
        // exists x. r(x) | x = a, where the constraints only need r(x);
        // removal walks last literal first, so x = a goes
        let prefix = make_prefix(&[(QuantKind::Exists, s)]);
        let x = prefix.items()[0].name.clone();
        let r_x = Formula::Rel(r, vec![crate::logic::Term::Var(x.clone())]);
        let sep = crate::logic::PrenexFormula {
            prefix: prefix.items().to_vec(),
            matrix: Formula::Or(vec![
                r_x.clone(),
                Formula::Eq(
                    crate::logic::Term::Var(x),
                    crate::logic::Term::Const(crate::logic::ConstId(0)),
                ),
            ]),
        };
        let constraints = vec![SepConstraint::Positive(pos)];
        assert!(constraints.iter().all(|c| c.satisfied_by(&sep.to_formula())));
        let min = minimize_matrix(&sep, &constraints);
        assert_eq!(min.matrix, Formula::Or(vec![r_x]));
        // already-minimal formula is unchanged
        let again = minimize_matrix(&min, &constraints);
        assert_eq!(again, min);
    }
}
