//! The literal universe for a fixed quantifier prefix: all atoms over
//! relation applications and equalities whose terms are prefix variables,
//! constants, or function applications up to a depth cap, in both
//! polarities, in a deterministic order.

use crate::logic::{Formula, PrefixItem, Signature, SortId, Term};

/// One candidate matrix literal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub atom: Formula,
    pub positive: bool,
}

impl Literal {
    pub fn to_formula(&self) -> Formula {
        if self.positive {
            self.atom.clone()
        } else {
            Formula::not(self.atom.clone())
        }
    }

    pub fn negated(&self) -> Formula {
        if self.positive {
            Formula::not(self.atom.clone())
        } else {
            self.atom.clone()
        }
    }
}

/// Candidate terms: prefix variables in prefix order, then constants in
/// declaration order, then function applications of shallower terms
/// (by function declaration order, argument tuples lexicographic).
fn term_pool(sig: &Signature, prefix: &[PrefixItem], depth_cap: usize) -> Vec<(Term, SortId)> {
    let mut pool: Vec<(Term, SortId)> = Vec::new();
    for item in prefix {
        pool.push((Term::Var(item.name.clone()), item.sort));
    }
    for c in sig.const_ids() {
        pool.push((Term::Const(c), sig.const_decl(c).sort));
    }
    let mut frontier = pool.clone();
    for _ in 0..depth_cap {
        let mut next = Vec::new();
        for f in sig.func_ids() {
            let decl = sig.func_decl(f);
            for args in arg_tuples(&pool, &decl.args) {
                let term = Term::App(f, args);
                if !pool.iter().any(|(t, _)| *t == term)
                    && !next.iter().any(|(t, _): &(Term, SortId)| *t == term)
                {
                    next.push((term, decl.ret));
                }
            }
        }
        if next.is_empty() {
            break;
        }
        pool.extend(next.iter().cloned());
        frontier = next;
    }
    let _ = frontier;
    pool
}

/// All argument tuples drawn from the pool matching the given sorts,
/// lexicographic in pool order.
fn arg_tuples(pool: &[(Term, SortId)], sorts: &[SortId]) -> Vec<Vec<Term>> {
    let mut out: Vec<Vec<Term>> = vec![vec![]];
    for &want in sorts {
        let mut next = Vec::new();
        for partial in &out {
            for (t, s) in pool {
                if *s == want {
                    let mut ext = partial.clone();
                    ext.push(t.clone());
                    next.push(ext);
                }
            }
        }
        out = next;
    }
    out
}

/// All literals over the signature for the given prefix, each atom in
/// positive then negated polarity. Relations come before equalities;
/// equalities pair distinct same-sort pool terms (earlier term first).
pub fn literal_universe(
    sig: &Signature,
    prefix: &[PrefixItem],
    depth_cap: usize,
) -> Vec<Literal> {
    let pool = term_pool(sig, prefix, depth_cap);
    let mut atoms: Vec<Formula> = Vec::new();
    for r in sig.rel_ids() {
        for args in arg_tuples(&pool, &sig.rel_decl(r).args) {
            atoms.push(Formula::Rel(r, args));
        }
    }
    for i in 0..pool.len() {
        for j in (i + 1)..pool.len() {
            if pool[i].1 == pool[j].1 {
                atoms.push(Formula::Eq(pool[i].0.clone(), pool[j].0.clone()));
            }
        }
    }
    let mut out = Vec::with_capacity(atoms.len() * 2);
    for atom in atoms {
        out.push(Literal {
            atom: atom.clone(),
            positive: true,
        });
        out.push(Literal {
            atom,
            positive: false,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::QuantKind;
    use crate::syntax::parse_system;

    fn prefix1(sys: &crate::syntax::TransitionSystem) -> Vec<PrefixItem> {
        vec![PrefixItem {
            kind: QuantKind::Forall,
            sort: sys.sig.sort_id("s").unwrap(),
            name: "x".to_string(),
        }]
    }

    #[test]
    fn single_relation_no_constants() {
        let sys = parse_system("(sort s)(relation r (s) mutable)").unwrap();
        let lits = literal_universe(&sys.sig, &prefix1(&sys), 1);
        assert_eq!(lits.len(), 2); // r(x), !r(x)
        assert!(lits[0].positive && !lits[1].positive);
    }

    #[test]
    fn adding_a_constant_adds_equalities_and_atoms() {
        let sys = parse_system("(sort s)(relation r (s) mutable)(constant a s immutable)").unwrap();
        let lits = literal_universe(&sys.sig, &prefix1(&sys), 1);
        // atoms: r(x), r(a), x=a -> 6 literals
        assert_eq!(lits.len(), 6);
    }

    #[test]
    fn empty_prefix_nullary_relation() {
        let sys = parse_system("(sort s)(relation q () mutable)").unwrap();
        let lits = literal_universe(&sys.sig, &[], 1);
        assert_eq!(lits.len(), 2); // q, !q
    }

    #[test]
    fn function_apps_respect_depth_cap() {
        let sys =
            parse_system("(sort s)(relation r (s) mutable)(function f (s) s immutable)").unwrap();
        let prefix = prefix1(&sys);
        let lits0 = literal_universe(&sys.sig, &prefix, 0);
        // depth 0: r(x) only, no equalities (single term)
        assert_eq!(lits0.len(), 2);
        let lits1 = literal_universe(&sys.sig, &prefix, 1);
        // depth 1 adds f(x): atoms r(x), r(f(x)), x=f(x)
        assert_eq!(lits1.len(), 6);
        let lits2 = literal_universe(&sys.sig, &prefix, 2);
        // depth 2 adds f(f(x))
        assert!(lits2.len() > lits1.len());
    }
}
