//! Finite first-order structures and formula evaluation.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

use super::formula::{Binder, Formula, QuantKind, Term};
use super::signature::{ConstId, FuncId, RelId, Signature, SortId, TwoVocab};

/// Universe elements are small integers scoped per sort.
pub type Element = usize;

/// A finite structure: per-sort universe sizes plus interpretations for all
/// symbols. Relations and functions are stored as dense tables indexed by
/// mixed-radix tuple encoding, which makes structures cheap to hash and
/// compare (constraint stores dedup on this).
#[derive(Debug, Clone)]
pub struct Structure {
    sig: Arc<Signature>,
    universe: Vec<usize>,
    consts: Vec<Element>,
    rels: Vec<Vec<bool>>,
    funcs: Vec<Vec<Element>>,
}

impl PartialEq for Structure {
    fn eq(&self, other: &Self) -> bool {
        self.universe == other.universe
            && self.consts == other.consts
            && self.rels == other.rels
            && self.funcs == other.funcs
    }
}

impl Eq for Structure {}

impl Hash for Structure {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.universe.hash(state);
        self.consts.hash(state);
        self.rels.hash(state);
        self.funcs.hash(state);
    }
}

fn table_len(universe: &[usize], args: &[SortId]) -> usize {
    args.iter().map(|s| universe[s.0]).product()
}

/// Mixed-radix index of `tuple` where digit `i` ranges over the universe of
/// `args[i]`.
fn tuple_index(universe: &[usize], args: &[SortId], tuple: &[Element]) -> usize {
    debug_assert_eq!(args.len(), tuple.len());
    let mut idx = 0;
    for (s, &e) in args.iter().zip(tuple) {
        debug_assert!(e < universe[s.0]);
        idx = idx * universe[s.0] + e;
    }
    idx
}

/// Iterate all tuples over the given argument sorts (lexicographic order).
pub fn tuples(universe: &[usize], args: &[SortId]) -> impl Iterator<Item = Vec<Element>> {
    let radices: Vec<usize> = args.iter().map(|s| universe[s.0]).collect();
    let total: usize = radices.iter().product();
    (0..total).map(move |mut idx| {
        let mut tuple = vec![0; radices.len()];
        for i in (0..radices.len()).rev() {
            tuple[i] = idx % radices[i];
            idx /= radices[i];
        }
        tuple
    })
}

impl Structure {
    /// Fresh structure with every relation empty, every constant and
    /// function result 0. All universe sizes must be nonzero.
    pub fn new(sig: Arc<Signature>, universe: Vec<usize>) -> Structure {
        assert_eq!(universe.len(), sig.num_sorts());
        assert!(universe.iter().all(|&n| n > 0), "universes must be nonempty");
        let consts = vec![0; sig.num_consts()];
        let rels = sig
            .rel_ids()
            .map(|r| vec![false; table_len(&universe, &sig.rel_decl(r).args)])
            .collect();
        let funcs = sig
            .func_ids()
            .map(|f| vec![0; table_len(&universe, &sig.func_decl(f).args)])
            .collect();
        Structure {
            sig,
            universe,
            consts,
            rels,
            funcs,
        }
    }

    pub fn sig(&self) -> &Arc<Signature> {
        &self.sig
    }

    pub fn universe(&self) -> &[usize] {
        &self.universe
    }

    pub fn sort_size(&self, sort: SortId) -> usize {
        self.universe[sort.0]
    }

    pub fn const_value(&self, c: ConstId) -> Element {
        self.consts[c.0]
    }

    pub fn set_const(&mut self, c: ConstId, e: Element) {
        assert!(e < self.universe[self.sig.const_decl(c).sort.0]);
        self.consts[c.0] = e;
    }

    pub fn rel_holds(&self, r: RelId, tuple: &[Element]) -> bool {
        self.rels[r.0][tuple_index(&self.universe, &self.sig.rel_decl(r).args, tuple)]
    }

    pub fn set_rel(&mut self, r: RelId, tuple: &[Element], value: bool) {
        let idx = tuple_index(&self.universe, &self.sig.rel_decl(r).args, tuple);
        self.rels[r.0][idx] = value;
    }

    pub fn func_value(&self, f: FuncId, tuple: &[Element]) -> Element {
        self.funcs[f.0][tuple_index(&self.universe, &self.sig.func_decl(f).args, tuple)]
    }

    pub fn set_func(&mut self, f: FuncId, tuple: &[Element], value: Element) {
        assert!(value < self.universe[self.sig.func_decl(f).ret.0]);
        let idx = tuple_index(&self.universe, &self.sig.func_decl(f).args, tuple);
        self.funcs[f.0][idx] = value;
    }

    /// All tuples of a relation's argument sorts.
    pub fn rel_tuples(&self, r: RelId) -> impl Iterator<Item = Vec<Element>> + '_ {
        tuples(&self.universe, &self.sig.rel_decl(r).args)
    }

    pub fn func_tuples(&self, f: FuncId) -> impl Iterator<Item = Vec<Element>> + '_ {
        tuples(&self.universe, &self.sig.func_decl(f).args)
    }

    pub fn total_size(&self) -> usize {
        self.universe.iter().sum()
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (id, name) in self.sig.sorts() {
            write!(f, "{name}={{")?;
            for e in 0..self.universe[id.0] {
                if e > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{name}{e}")?;
            }
            write!(f, "}} ")?;
        }
        for c in self.sig.const_ids() {
            let d = self.sig.const_decl(c);
            write!(
                f,
                "{}={}{} ",
                d.name,
                self.sig.sort_name(d.sort),
                self.consts[c.0]
            )?;
        }
        for r in self.sig.rel_ids() {
            let d = self.sig.rel_decl(r);
            write!(f, "{}={{", d.name)?;
            let mut first = true;
            for t in tuples(&self.universe, &d.args) {
                if self.rel_holds(r, &t) {
                    if !first {
                        write!(f, ",")?;
                    }
                    first = false;
                    write!(f, "(")?;
                    for (i, (&e, &s)) in t.iter().zip(&d.args).enumerate() {
                        if i > 0 {
                            write!(f, " ")?;
                        }
                        write!(f, "{}{}", self.sig.sort_name(s), e)?;
                    }
                    write!(f, ")")?;
                }
            }
            write!(f, "}} ")?;
        }
        for fid in self.sig.func_ids() {
            let d = self.sig.func_decl(fid);
            write!(f, "{}=[", d.name)?;
            let mut first = true;
            for t in tuples(&self.universe, &d.args) {
                if !first {
                    write!(f, ",")?;
                }
                first = false;
                write!(f, "{:?}->{}", t, self.func_value(fid, &t))?;
            }
            write!(f, "] ")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound variable `{0}` during evaluation")]
    UnboundVar(String),
}

/// Variable bindings for evaluation; a scope stack of (name, element).
#[derive(Debug, Default, Clone)]
pub struct Env(Vec<(String, Element)>);

impl Env {
    pub fn new() -> Env {
        Env(Vec::new())
    }

    pub fn bind(&mut self, name: &str, e: Element) {
        self.0.push((name.to_string(), e));
    }

    pub fn pop(&mut self) {
        self.0.pop();
    }

    pub fn lookup(&self, name: &str) -> Option<Element> {
        self.0
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, e)| *e)
    }
}

impl<S: AsRef<str>> FromIterator<(S, Element)> for Env {
    fn from_iter<I: IntoIterator<Item = (S, Element)>>(iter: I) -> Env {
        Env(iter
            .into_iter()
            .map(|(n, e)| (n.as_ref().to_string(), e))
            .collect())
    }
}

pub fn eval_term(m: &Structure, env: &Env, t: &Term) -> Result<Element, EvalError> {
    match t {
        Term::Var(v) => env.lookup(v).ok_or_else(|| EvalError::UnboundVar(v.clone())),
        Term::Const(c) => Ok(m.const_value(*c)),
        Term::App(f, args) => {
            let vals = args
                .iter()
                .map(|a| eval_term(m, env, a))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(m.func_value(*f, &vals))
        }
    }
}

/// Tarskian truth of `f` in `m` under `env`; quantifiers range over the
/// finite universe.
pub fn eval(m: &Structure, env: &mut Env, f: &Formula) -> Result<bool, EvalError> {
    match f {
        Formula::And(fs) => {
            for g in fs {
                if !eval(m, env, g)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Formula::Or(fs) => {
            for g in fs {
                if eval(m, env, g)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Formula::Not(g) => Ok(!eval(m, env, g)?),
        Formula::Implies(a, b) => Ok(!eval(m, env, a)? || eval(m, env, b)?),
        Formula::Iff(a, b) => Ok(eval(m, env, a)? == eval(m, env, b)?),
        Formula::Eq(a, b) => Ok(eval_term(m, env, a)? == eval_term(m, env, b)?),
        Formula::Rel(r, args) => {
            let vals = args
                .iter()
                .map(|a| eval_term(m, env, a))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(m.rel_holds(*r, &vals))
        }
        Formula::Quant(kind, Binder { name, sort }, body) => {
            let n = m.sort_size(*sort);
            for e in 0..n {
                env.bind(name, e);
                let v = eval(m, env, body);
                env.pop();
                let v = v?;
                match kind {
                    QuantKind::Forall if !v => return Ok(false),
                    QuantKind::Exists if v => return Ok(true),
                    _ => {}
                }
            }
            Ok(*kind == QuantKind::Forall)
        }
    }
}

/// Evaluate a closed formula.
pub fn eval_closed(m: &Structure, f: &Formula) -> Result<bool, EvalError> {
    eval(m, &mut Env::new(), f)
}

/// Apply a per-sort element permutation to a structure.
pub fn permute(m: &Structure, perms: &[Vec<Element>]) -> Structure {
    let sig = m.sig().clone();
    let mut out = Structure::new(sig.clone(), m.universe().to_vec());
    for c in sig.const_ids() {
        let sort = sig.const_decl(c).sort;
        out.set_const(c, perms[sort.0][m.const_value(c)]);
    }
    for r in sig.rel_ids() {
        let args = sig.rel_decl(r).args.clone();
        for t in tuples(m.universe(), &args) {
            let mapped: Vec<Element> =
                t.iter().zip(&args).map(|(&e, &s)| perms[s.0][e]).collect();
            out.set_rel(r, &mapped, m.rel_holds(r, &t));
        }
    }
    for f in sig.func_ids() {
        let decl = sig.func_decl(f).clone();
        for t in tuples(m.universe(), &decl.args) {
            let mapped: Vec<Element> = t
                .iter()
                .zip(&decl.args)
                .map(|(&e, &s)| perms[s.0][e])
                .collect();
            out.set_func(f, &mapped, perms[decl.ret.0][m.func_value(f, &t)]);
        }
    }
    out
}

/// All permutations of `0..n`.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..n {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

/// Visit every per-sort permutation vector for the given universe.
pub fn for_each_permutation(
    universe: &[usize],
    mut f: impl FnMut(&[Vec<usize>]) -> bool,
) -> bool {
    fn rec(
        universe: &[usize],
        acc: &mut Vec<Vec<usize>>,
        f: &mut impl FnMut(&[Vec<usize>]) -> bool,
    ) -> bool {
        if acc.len() == universe.len() {
            return f(acc);
        }
        for p in permutations(universe[acc.len()]) {
            acc.push(p);
            if rec(universe, acc, f) {
                return true;
            }
            acc.pop();
        }
        false
    }
    rec(universe, &mut Vec::new(), &mut f)
}

/// Brute-force isomorphism check (universes are expected to be small).
pub fn isomorphic(a: &Structure, b: &Structure) -> bool {
    if a.universe() != b.universe() {
        return false;
    }
    for_each_permutation(a.universe(), |perms| permute(a, perms) == *b)
}

/// A structure over the doubled signature, projectable onto its pre- and
/// post-state single-vocabulary structures (sharing one universe).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TwoStateStructure {
    inner: Structure,
}

impl TwoStateStructure {
    pub fn new(inner: Structure) -> TwoStateStructure {
        TwoStateStructure { inner }
    }

    /// The full structure over the doubled signature.
    pub fn full(&self) -> &Structure {
        &self.inner
    }

    pub fn pre(&self, vocab: &TwoVocab) -> Structure {
        self.project(vocab, false)
    }

    pub fn post(&self, vocab: &TwoVocab) -> Structure {
        self.project(vocab, true)
    }

    fn project(&self, vocab: &TwoVocab, primed: bool) -> Structure {
        let single = vocab.single().clone();
        let mut out = Structure::new(single.clone(), self.inner.universe.to_vec());
        for c in single.const_ids() {
            let src = if primed { vocab.primed_const(c) } else { c };
            out.set_const(c, self.inner.const_value(src));
        }
        for r in single.rel_ids() {
            let src = if primed { vocab.primed_rel(r) } else { r };
            let decl = single.rel_decl(r).args.clone();
            for t in tuples(&self.inner.universe, &decl) {
                out.set_rel(r, &t, self.inner.rel_holds(src, &t));
            }
        }
        for f in single.func_ids() {
            let src = if primed { vocab.primed_func(f) } else { f };
            let decl = single.func_decl(f).args.clone();
            for t in tuples(&self.inner.universe, &decl) {
                out.set_func(f, &t, self.inner.func_value(src, &t));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::signature::Mutability;

    fn small() -> (Arc<Signature>, RelId, ConstId) {
        let mut sig = Signature::new();
        let s = sig.add_sort("s").unwrap();
        let r = sig.add_rel("r", vec![s], Mutability::Mutable).unwrap();
        let a = sig.add_const("a", s, Mutability::Immutable).unwrap();
        (Arc::new(sig), r, a)
    }

    #[test]
    fn eval_exists_and_forall() {
        let (sig, r, _) = small();
        let s = sig.sort_id("s").unwrap();
        let mut m = Structure::new(sig, vec![2]);
        m.set_rel(r, &[0], true);
        let ex = Formula::exists("x", s, Formula::Rel(r, vec![Term::Var("x".into())]));
        let all = Formula::forall("x", s, Formula::Rel(r, vec![Term::Var("x".into())]));
        assert_eq!(eval_closed(&m, &ex), Ok(true));
        assert_eq!(eval_closed(&m, &all), Ok(false));
    }

    #[test]
    fn eval_env_and_disjunction() {
        let (sig, r, a) = small();
        let mut m = Structure::new(sig, vec![2]);
        m.set_rel(r, &[0], true);
        m.set_const(a, 0);
        // r(x) | x = a with x bound to element 1: both disjuncts false
        let f = Formula::Or(vec![
            Formula::Rel(r, vec![Term::Var("x".into())]),
            Formula::Eq(Term::Var("x".into()), Term::Const(a)),
        ]);
        let mut env = Env::new();
        env.bind("x", 1);
        assert_eq!(eval(&m, &mut env, &f), Ok(false));
    }

    #[test]
    fn eval_unbound_var_errors() {
        let (sig, r, _) = small();
        let m = Structure::new(sig, vec![1]);
        let f = Formula::Rel(r, vec![Term::Var("z".into())]);
        assert_eq!(
            eval_closed(&m, &f),
            Err(EvalError::UnboundVar("z".to_string()))
        );
    }

    #[test]
    fn two_state_projections_share_universe() {
        let mut sig = Signature::new();
        let s = sig.add_sort("s").unwrap();
        let r = sig.add_rel("r", vec![s], Mutability::Mutable).unwrap();
        let sig = Arc::new(sig);
        let vocab = TwoVocab::new(sig.clone());
        let mut m = Structure::new(vocab.doubled().clone(), vec![2]);
        m.set_rel(r, &[0], true);
        m.set_rel(vocab.primed_rel(r), &[1], true);
        let ts = TwoStateStructure::new(m);
        let pre = ts.pre(&vocab);
        let post = ts.post(&vocab);
        assert_eq!(pre.universe(), post.universe());
        assert!(pre.rel_holds(r, &[0]) && !pre.rel_holds(r, &[1]));
        assert!(!post.rel_holds(r, &[0]) && post.rel_holds(r, &[1]));
    }

    #[test]
    fn prime_eval_equals_eval_on_post() {
        let mut sig = Signature::new();
        let s = sig.add_sort("s").unwrap();
        let r = sig.add_rel("r", vec![s], Mutability::Mutable).unwrap();
        let sig = Arc::new(sig);
        let vocab = TwoVocab::new(sig.clone());
        let mut m = Structure::new(vocab.doubled().clone(), vec![2]);
        m.set_rel(vocab.primed_rel(r), &[0], true);
        let ts = TwoStateStructure::new(m);
        let f = Formula::exists("x", s, Formula::Rel(r, vec![Term::Var("x".into())]));
        let fp = crate::logic::prime(&f, &vocab).unwrap();
        assert_eq!(
            eval_closed(ts.full(), &fp).unwrap(),
            eval_closed(&ts.post(&vocab), &f).unwrap()
        );
    }
}
