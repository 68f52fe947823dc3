//! Terms and formulas of many-sorted first-order logic with equality.

use std::collections::HashSet;

use thiserror::Error;

use super::signature::{ConstId, FuncId, Mutability, RelId, Signature, SortId, TwoVocab};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Const(ConstId),
    App(FuncId, Vec<Term>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QuantKind {
    Forall,
    Exists,
}

impl QuantKind {
    pub fn dual(self) -> QuantKind {
        match self {
            QuantKind::Forall => QuantKind::Exists,
            QuantKind::Exists => QuantKind::Forall,
        }
    }
}

/// A quantified variable: name plus sort.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Binder {
    pub name: String,
    pub sort: SortId,
}

/// Formula AST. The empty conjunction is `true` and the empty disjunction
/// is `false`; there is no separate boolean-constant node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Eq(Term, Term),
    Rel(RelId, Vec<Term>),
    Quant(QuantKind, Binder, Box<Formula>),
}

impl Formula {
    pub fn tt() -> Formula {
        Formula::And(vec![])
    }

    pub fn ff() -> Formula {
        Formula::Or(vec![])
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn quant(kind: QuantKind, name: &str, sort: SortId, body: Formula) -> Formula {
        Formula::Quant(
            kind,
            Binder {
                name: name.to_string(),
                sort,
            },
            Box::new(body),
        )
    }

    pub fn forall(name: &str, sort: SortId, body: Formula) -> Formula {
        Formula::quant(QuantKind::Forall, name, sort, body)
    }

    pub fn exists(name: &str, sort: SortId, body: Formula) -> Formula {
        Formula::quant(QuantKind::Exists, name, sort, body)
    }

    /// Conjunction of `fs`, flattening the 1-element case.
    pub fn and(mut fs: Vec<Formula>) -> Formula {
        if fs.len() == 1 {
            fs.pop().unwrap()
        } else {
            Formula::And(fs)
        }
    }

    pub fn or(mut fs: Vec<Formula>) -> Formula {
        if fs.len() == 1 {
            fs.pop().unwrap()
        } else {
            Formula::Or(fs)
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Formula::And(fs) if fs.is_empty())
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Formula::Or(fs) if fs.is_empty())
    }

    /// Free variables, in first-occurrence order.
    pub fn free_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut bound = Vec::new();
        self.free_vars_into(&mut bound, &mut out);
        out
    }

    fn free_vars_into(&self, bound: &mut Vec<String>, out: &mut Vec<String>) {
        match self {
            Formula::And(fs) | Formula::Or(fs) => {
                for f in fs {
                    f.free_vars_into(bound, out);
                }
            }
            Formula::Not(f) => f.free_vars_into(bound, out),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.free_vars_into(bound, out);
                b.free_vars_into(bound, out);
            }
            Formula::Eq(a, b) => {
                term_free_vars(a, bound, out);
                term_free_vars(b, bound, out);
            }
            Formula::Rel(_, args) => {
                for t in args {
                    term_free_vars(t, bound, out);
                }
            }
            Formula::Quant(_, binder, body) => {
                bound.push(binder.name.clone());
                body.free_vars_into(bound, out);
                bound.pop();
            }
        }
    }

    /// Count of literal (atom) occurrences; used as a size metric.
    pub fn literal_count(&self) -> usize {
        match self {
            Formula::And(fs) | Formula::Or(fs) => fs.iter().map(|f| f.literal_count()).sum(),
            Formula::Not(f) => f.literal_count(),
            Formula::Implies(a, b) | Formula::Iff(a, b) => a.literal_count() + b.literal_count(),
            Formula::Eq(..) | Formula::Rel(..) => 1,
            Formula::Quant(_, _, body) => body.literal_count(),
        }
    }

    /// True if no quantifier occurs anywhere in the formula.
    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::And(fs) | Formula::Or(fs) => fs.iter().all(|f| f.is_quantifier_free()),
            Formula::Not(f) => f.is_quantifier_free(),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.is_quantifier_free() && b.is_quantifier_free()
            }
            Formula::Eq(..) | Formula::Rel(..) => true,
            Formula::Quant(..) => false,
        }
    }
}

fn term_free_vars(t: &Term, bound: &[String], out: &mut Vec<String>) {
    match t {
        Term::Var(v) => {
            if !bound.iter().any(|b| b == v) && !out.iter().any(|o| o == v) {
                out.push(v.clone());
            }
        }
        Term::Const(_) => {}
        Term::App(_, args) => {
            for a in args {
                term_free_vars(a, bound, out);
            }
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SortError {
    #[error("unbound variable `{0}`")]
    UnboundVar(String),
    #[error("`{symbol}` expects {expected} arguments, got {actual}")]
    ArityMismatch {
        symbol: String,
        expected: usize,
        actual: usize,
    },
    #[error("in `{context}`: expected sort `{expected}`, got `{actual}`")]
    SortMismatch {
        context: String,
        expected: String,
        actual: String,
    },
    #[error("equality of differently-sorted terms: `{0}` vs `{1}`")]
    EqSortMismatch(String, String),
}

/// Sort of `t` under `sig`, with variables sorted by `env` (a scope stack).
pub fn term_sort(t: &Term, sig: &Signature, env: &[Binder]) -> Result<SortId, SortError> {
    match t {
        Term::Var(v) => env
            .iter()
            .rev()
            .find(|b| &b.name == v)
            .map(|b| b.sort)
            .ok_or_else(|| SortError::UnboundVar(v.clone())),
        Term::Const(c) => Ok(sig.const_decl(*c).sort),
        Term::App(f, args) => {
            let decl = sig.func_decl(*f);
            if decl.args.len() != args.len() {
                return Err(SortError::ArityMismatch {
                    symbol: decl.name.clone(),
                    expected: decl.args.len(),
                    actual: args.len(),
                });
            }
            for (arg, &want) in args.iter().zip(&decl.args) {
                let got = term_sort(arg, sig, env)?;
                if got != want {
                    return Err(SortError::SortMismatch {
                        context: decl.name.clone(),
                        expected: sig.sort_name(want).to_string(),
                        actual: sig.sort_name(got).to_string(),
                    });
                }
            }
            Ok(decl.ret)
        }
    }
}

/// Check that `f` is well-sorted under `sig`, with `env` giving the sorts of
/// any free variables.
pub fn sort_check_env(f: &Formula, sig: &Signature, env: &mut Vec<Binder>) -> Result<(), SortError> {
    match f {
        Formula::And(fs) | Formula::Or(fs) => {
            for g in fs {
                sort_check_env(g, sig, env)?;
            }
            Ok(())
        }
        Formula::Not(g) => sort_check_env(g, sig, env),
        Formula::Implies(a, b) | Formula::Iff(a, b) => {
            sort_check_env(a, sig, env)?;
            sort_check_env(b, sig, env)
        }
        Formula::Eq(a, b) => {
            let sa = term_sort(a, sig, env)?;
            let sb = term_sort(b, sig, env)?;
            if sa != sb {
                return Err(SortError::EqSortMismatch(
                    sig.sort_name(sa).to_string(),
                    sig.sort_name(sb).to_string(),
                ));
            }
            Ok(())
        }
        Formula::Rel(r, args) => {
            let decl = sig.rel_decl(*r);
            if decl.args.len() != args.len() {
                return Err(SortError::ArityMismatch {
                    symbol: decl.name.clone(),
                    expected: decl.args.len(),
                    actual: args.len(),
                });
            }
            for (arg, &want) in args.iter().zip(&decl.args) {
                let got = term_sort(arg, sig, env)?;
                if got != want {
                    return Err(SortError::SortMismatch {
                        context: decl.name.clone(),
                        expected: sig.sort_name(want).to_string(),
                        actual: sig.sort_name(got).to_string(),
                    });
                }
            }
            Ok(())
        }
        Formula::Quant(_, binder, body) => {
            env.push(binder.clone());
            let res = sort_check_env(body, sig, env);
            env.pop();
            res
        }
    }
}

/// Check that a closed formula is well-sorted under `sig`.
pub fn sort_check(f: &Formula, sig: &Signature) -> Result<(), SortError> {
    sort_check_env(f, sig, &mut Vec::new())
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PrimeError {
    #[error("formula already contains primed symbol `{0}`")]
    AlreadyPrimed(String),
}

/// Replace every mutable symbol occurrence by its primed counterpart.
/// Immutable symbols are unchanged. The input must mention only unprimed
/// symbols; the result is a formula over the doubled signature.
pub fn prime(f: &Formula, vocab: &TwoVocab) -> Result<Formula, PrimeError> {
    let prime_term = |t: &Term| -> Result<Term, PrimeError> { prime_term_rec(t, vocab) };
    Ok(match f {
        Formula::And(fs) => Formula::And(
            fs.iter()
                .map(|g| prime(g, vocab))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Or(fs) => Formula::Or(
            fs.iter()
                .map(|g| prime(g, vocab))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Not(g) => Formula::not(prime(g, vocab)?),
        Formula::Implies(a, b) => Formula::implies(prime(a, vocab)?, prime(b, vocab)?),
        Formula::Iff(a, b) => Formula::iff(prime(a, vocab)?, prime(b, vocab)?),
        Formula::Eq(a, b) => Formula::Eq(prime_term(a)?, prime_term(b)?),
        Formula::Rel(r, args) => {
            if vocab.is_primed_rel(*r) {
                return Err(PrimeError::AlreadyPrimed(
                    vocab.doubled().rel_decl(*r).name.clone(),
                ));
            }
            Formula::Rel(
                vocab.primed_rel(*r),
                args.iter().map(prime_term).collect::<Result<_, _>>()?,
            )
        }
        Formula::Quant(kind, binder, body) => {
            Formula::Quant(*kind, binder.clone(), Box::new(prime(body, vocab)?))
        }
    })
}

fn prime_term_rec(t: &Term, vocab: &TwoVocab) -> Result<Term, PrimeError> {
    Ok(match t {
        Term::Var(v) => Term::Var(v.clone()),
        Term::Const(c) => {
            if vocab.is_primed_const(*c) {
                return Err(PrimeError::AlreadyPrimed(
                    vocab.doubled().const_decl(*c).name.clone(),
                ));
            }
            Term::Const(vocab.primed_const(*c))
        }
        Term::App(f, args) => {
            if vocab.is_primed_func(*f) {
                return Err(PrimeError::AlreadyPrimed(
                    vocab.doubled().func_decl(*f).name.clone(),
                ));
            }
            Term::App(
                vocab.primed_func(*f),
                args.iter()
                    .map(|a| prime_term_rec(a, vocab))
                    .collect::<Result<_, _>>()?,
            )
        }
    })
}

/// True if `f` mentions any symbol outside the single-vocabulary prefix of
/// the doubled signature (i.e. any primed symbol).
pub fn mentions_primed(f: &Formula, vocab: &TwoVocab) -> bool {
    fn term_primed(t: &Term, v: &TwoVocab) -> bool {
        match t {
            Term::Var(_) => false,
            Term::Const(c) => v.is_primed_const(*c),
            Term::App(f, args) => v.is_primed_func(*f) || args.iter().any(|a| term_primed(a, v)),
        }
    }
    match f {
        Formula::And(fs) | Formula::Or(fs) => fs.iter().any(|g| mentions_primed(g, vocab)),
        Formula::Not(g) => mentions_primed(g, vocab),
        Formula::Implies(a, b) | Formula::Iff(a, b) => {
            mentions_primed(a, vocab) || mentions_primed(b, vocab)
        }
        Formula::Eq(a, b) => term_primed(a, vocab) || term_primed(b, vocab),
        Formula::Rel(r, args) => {
            vocab.is_primed_rel(*r) || args.iter().any(|a| term_primed(a, vocab))
        }
        Formula::Quant(_, _, body) => mentions_primed(body, vocab),
    }
}

/// Rename bound variables so that no two quantifiers bind the same name and
/// no bound name collides with a free variable. Fresh names are `name_N`.
pub fn freshen_bound(f: &Formula) -> Formula {
    let mut used: HashSet<String> = f.free_vars().into_iter().collect();
    let mut counter = 0usize;
    freshen_rec(f, &mut Vec::new(), &mut used, &mut counter)
}

fn fresh_name(base: &str, used: &mut HashSet<String>, counter: &mut usize) -> String {
    if used.insert(base.to_string()) {
        return base.to_string();
    }
    loop {
        *counter += 1;
        let cand = format!("{base}_{counter}");
        if used.insert(cand.clone()) {
            return cand;
        }
    }
}

fn freshen_rec(
    f: &Formula,
    renames: &mut Vec<(String, String)>,
    used: &mut HashSet<String>,
    counter: &mut usize,
) -> Formula {
    match f {
        Formula::And(fs) => Formula::And(
            fs.iter()
                .map(|g| freshen_rec(g, renames, used, counter))
                .collect(),
        ),
        Formula::Or(fs) => Formula::Or(
            fs.iter()
                .map(|g| freshen_rec(g, renames, used, counter))
                .collect(),
        ),
        Formula::Not(g) => Formula::not(freshen_rec(g, renames, used, counter)),
        Formula::Implies(a, b) => Formula::implies(
            freshen_rec(a, renames, used, counter),
            freshen_rec(b, renames, used, counter),
        ),
        Formula::Iff(a, b) => Formula::iff(
            freshen_rec(a, renames, used, counter),
            freshen_rec(b, renames, used, counter),
        ),
        Formula::Eq(a, b) => Formula::Eq(rename_term(a, renames), rename_term(b, renames)),
        Formula::Rel(r, args) => {
            Formula::Rel(*r, args.iter().map(|t| rename_term(t, renames)).collect())
        }
        Formula::Quant(kind, binder, body) => {
            let fresh = fresh_name(&binder.name, used, counter);
            renames.push((binder.name.clone(), fresh.clone()));
            let body = freshen_rec(body, renames, used, counter);
            renames.pop();
            Formula::Quant(
                *kind,
                Binder {
                    name: fresh,
                    sort: binder.sort,
                },
                Box::new(body),
            )
        }
    }
}

fn rename_term(t: &Term, renames: &[(String, String)]) -> Term {
    match t {
        Term::Var(v) => {
            for (old, new) in renames.iter().rev() {
                if old == v {
                    return Term::Var(new.clone());
                }
            }
            Term::Var(v.clone())
        }
        Term::Const(c) => Term::Const(*c),
        Term::App(f, args) => {
            Term::App(*f, args.iter().map(|a| rename_term(a, renames)).collect())
        }
    }
}

/// Substitute `var` by `t` in `f`, assuming no capture (bound names fresh).
pub fn subst_var(f: &Formula, var: &str, t: &Term) -> Formula {
    fn subst_term(u: &Term, var: &str, t: &Term) -> Term {
        match u {
            Term::Var(v) if v == var => t.clone(),
            Term::Var(v) => Term::Var(v.clone()),
            Term::Const(c) => Term::Const(*c),
            Term::App(f, args) => {
                Term::App(*f, args.iter().map(|a| subst_term(a, var, t)).collect())
            }
        }
    }
    match f {
        Formula::And(fs) => Formula::And(fs.iter().map(|g| subst_var(g, var, t)).collect()),
        Formula::Or(fs) => Formula::Or(fs.iter().map(|g| subst_var(g, var, t)).collect()),
        Formula::Not(g) => Formula::not(subst_var(g, var, t)),
        Formula::Implies(a, b) => Formula::implies(subst_var(a, var, t), subst_var(b, var, t)),
        Formula::Iff(a, b) => Formula::iff(subst_var(a, var, t), subst_var(b, var, t)),
        Formula::Eq(a, b) => Formula::Eq(subst_term(a, var, t), subst_term(b, var, t)),
        Formula::Rel(r, args) => {
            Formula::Rel(*r, args.iter().map(|a| subst_term(a, var, t)).collect())
        }
        Formula::Quant(kind, binder, body) => {
            if binder.name == var {
                f.clone()
            } else {
                Formula::Quant(*kind, binder.clone(), Box::new(subst_var(body, var, t)))
            }
        }
    }
}

pub fn is_mutable_rel(sig: &Signature, r: RelId) -> bool {
    sig.rel_decl(r).mutability == Mutability::Mutable
}
