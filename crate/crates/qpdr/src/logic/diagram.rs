//! Diagrams: existential formulas describing a finite structure up to
//! embedding (exact variant: up to isomorphism).

use super::formula::{Formula, Term};
use super::signature::SortId;
use super::structure::{Element, Structure};

/// The diagram of `m`: one existential variable per universe element,
/// pairwise distinctness per sort, every atomic fact positively and every
/// absent fact negatively, constants equated to their elements, and function
/// graphs as equations. A structure satisfies `diagram(m, false)` iff `m`
/// embeds into it; with `exact`, a per-sort covering clause makes
/// satisfaction equivalent to isomorphism.
pub fn diagram(m: &Structure, exact: bool) -> Formula {
    let sig = m.sig();
    // variable per (sort, element), numbered in universe order
    let mut var_of: Vec<Vec<String>> = Vec::new();
    let mut counter = 0usize;
    for (sid, _) in sig.sorts() {
        let mut names = Vec::new();
        for _ in 0..m.sort_size(sid) {
            names.push(format!("v{counter}"));
            counter += 1;
        }
        var_of.push(names);
    }
    let var = |sort: SortId, e: Element| Term::Var(var_of[sort.0][e].clone());

    let mut conjuncts = Vec::new();
    for (sid, _) in sig.sorts() {
        let n = m.sort_size(sid);
        for i in 0..n {
            for j in (i + 1)..n {
                conjuncts.push(Formula::not(Formula::Eq(var(sid, i), var(sid, j))));
            }
        }
    }
    for r in sig.rel_ids() {
        let args = sig.rel_decl(r).args.clone();
        for tuple in m.rel_tuples(r) {
            let atom = Formula::Rel(
                r,
                tuple
                    .iter()
                    .zip(&args)
                    .map(|(&e, &s)| var(s, e))
                    .collect(),
            );
            if m.rel_holds(r, &tuple) {
                conjuncts.push(atom);
            } else {
                conjuncts.push(Formula::not(atom));
            }
        }
    }
    for c in sig.const_ids() {
        let sort = sig.const_decl(c).sort;
        conjuncts.push(Formula::Eq(Term::Const(c), var(sort, m.const_value(c))));
    }
    for f in sig.func_ids() {
        let decl = sig.func_decl(f).clone();
        for tuple in m.func_tuples(f) {
            let app = Term::App(
                f,
                tuple
                    .iter()
                    .zip(&decl.args)
                    .map(|(&e, &s)| var(s, e))
                    .collect(),
            );
            conjuncts.push(Formula::Eq(app, var(decl.ret, m.func_value(f, &tuple))));
        }
    }
    if exact {
        for (sid, _) in sig.sorts() {
            let z = format!("z{}", sid.0);
            let cover = Formula::Or(
                (0..m.sort_size(sid))
                    .map(|e| Formula::Eq(Term::Var(z.clone()), var(sid, e)))
                    .collect(),
            );
            conjuncts.push(Formula::forall(&z, sid, cover));
        }
    }

    let mut body = Formula::And(conjuncts);
    for (sid, _) in sig.sorts().collect::<Vec<_>>().into_iter().rev() {
        for e in (0..m.sort_size(sid)).rev() {
            body = Formula::exists(&var_of[sid.0][e], sid, body);
        }
    }
    body
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::signature::{Mutability, Signature};
    use crate::logic::structure::eval_closed;
    use std::sync::Arc;

    #[test]
    fn diagram_satisfied_by_its_own_structure() {
        let mut sig = Signature::new();
        let s = sig.add_sort("s").unwrap();
        let r = sig.add_rel("r", vec![s], Mutability::Mutable).unwrap();
        let a = sig.add_const("a", s, Mutability::Immutable).unwrap();
        let mut m = Structure::new(Arc::new(sig), vec![2]);
        m.set_rel(r, &[0], true);
        m.set_const(a, 0);
        for exact in [false, true] {
            assert_eq!(eval_closed(&m, &diagram(&m, exact)), Ok(true));
        }
    }

    #[test]
    fn plain_diagram_holds_in_superstructure() {
        let mut sig = Signature::new();
        let s = sig.add_sort("s").unwrap();
        let r = sig.add_rel("r", vec![s], Mutability::Mutable).unwrap();
        let sig = Arc::new(sig);
        let mut m = Structure::new(sig.clone(), vec![1]);
        m.set_rel(r, &[0], true);
        // bigger structure with an extra element
        let mut big = Structure::new(sig, vec![2]);
        big.set_rel(r, &[1], true);
        assert_eq!(eval_closed(&big, &diagram(&m, false)), Ok(true));
        // exact diagram rejects it (universe sizes differ)
        assert_eq!(eval_closed(&big, &diagram(&m, true)), Ok(false));
    }

    #[test]
    fn singleton_diagram_shape() {
        let mut sig = Signature::new();
        let s = sig.add_sort("s").unwrap();
        let r = sig.add_rel("r", vec![s], Mutability::Mutable).unwrap();
        let a = sig.add_const("a", s, Mutability::Immutable).unwrap();
        let m = Structure::new(Arc::new(sig), vec![1]);
        let d = diagram(&m, false);
        // exists v0. !r(v0) & a = v0
        match d {
            Formula::Quant(crate::logic::QuantKind::Exists, binder, body) => {
                assert_eq!(binder.name, "v0");
                match *body {
                    Formula::And(cs) => {
                        assert_eq!(cs.len(), 2);
                        assert_eq!(
                            cs[0],
                            Formula::not(Formula::Rel(r, vec![Term::Var("v0".into())]))
                        );
                        assert_eq!(
                            cs[1],
                            Formula::Eq(Term::Const(a), Term::Var("v0".into()))
                        );
                    }
                    _ => panic!(),
                }
            }
            _ => panic!(),
        }
    }
}
