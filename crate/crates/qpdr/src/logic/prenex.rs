//! Negation normal form and prenexing.

use super::formula::{freshen_bound, Binder, Formula, QuantKind};
use super::signature::SortId;

/// One quantifier of a prenex prefix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PrefixItem {
    pub kind: QuantKind,
    pub sort: SortId,
    pub name: String,
}

/// A quantification prefix followed by a quantifier-free matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PrenexFormula {
    pub prefix: Vec<PrefixItem>,
    pub matrix: Formula,
}

impl PrenexFormula {
    pub fn to_formula(&self) -> Formula {
        let mut f = self.matrix.clone();
        for item in self.prefix.iter().rev() {
            f = Formula::Quant(
                item.kind,
                Binder {
                    name: item.name.clone(),
                    sort: item.sort,
                },
                Box::new(f),
            );
        }
        f
    }
}

/// Negation normal form: implications and iffs eliminated, negations pushed
/// to atoms. `positive = false` computes the NNF of the negation.
pub fn nnf(f: &Formula, positive: bool) -> Formula {
    match f {
        Formula::And(fs) => {
            let parts = fs.iter().map(|g| nnf(g, positive)).collect();
            if positive {
                Formula::And(parts)
            } else {
                Formula::Or(parts)
            }
        }
        Formula::Or(fs) => {
            let parts = fs.iter().map(|g| nnf(g, positive)).collect();
            if positive {
                Formula::Or(parts)
            } else {
                Formula::And(parts)
            }
        }
        Formula::Not(g) => nnf(g, !positive),
        Formula::Implies(a, b) => {
            if positive {
                Formula::Or(vec![nnf(a, false), nnf(b, true)])
            } else {
                Formula::And(vec![nnf(a, true), nnf(b, false)])
            }
        }
        Formula::Iff(a, b) => {
            // (a & b) | (!a & !b), or its negation (a & !b) | (!a & b)
            let (lhs_b, rhs_b) = if positive { (true, false) } else { (false, true) };
            Formula::Or(vec![
                Formula::And(vec![nnf(a, true), nnf(b, lhs_b)]),
                Formula::And(vec![nnf(a, false), nnf(b, rhs_b)]),
            ])
        }
        Formula::Eq(..) | Formula::Rel(..) => {
            if positive {
                f.clone()
            } else {
                Formula::not(f.clone())
            }
        }
        Formula::Quant(kind, binder, body) => {
            let kind = if positive { *kind } else { kind.dual() };
            Formula::Quant(kind, binder.clone(), Box::new(nnf(body, positive)))
        }
    }
}

/// Prenex `f`: eliminate implications, freshen bound variables, and hoist
/// quantifiers. Quantifiers of sibling subformulas hoist left-to-right, with
/// leading universals of later siblings moved ahead of earlier existentials
/// (always sound across siblings; order within a subformula is preserved).
pub fn to_prenex(f: &Formula) -> PrenexFormula {
    let normalized = freshen_bound(&nnf(f, true));
    let (prefix, matrix) = hoist(&normalized);
    PrenexFormula { prefix, matrix }
}

fn hoist(f: &Formula) -> (Vec<PrefixItem>, Formula) {
    match f {
        Formula::Quant(kind, binder, body) => {
            let (mut prefix, matrix) = hoist(body);
            prefix.insert(
                0,
                PrefixItem {
                    kind: *kind,
                    sort: binder.sort,
                    name: binder.name.clone(),
                },
            );
            (prefix, matrix)
        }
        Formula::And(fs) => {
            let parts: Vec<_> = fs.iter().map(hoist).collect();
            let (prefix, matrices) = merge(parts);
            (prefix, Formula::And(matrices))
        }
        Formula::Or(fs) => {
            let parts: Vec<_> = fs.iter().map(hoist).collect();
            let (prefix, matrices) = merge(parts);
            (prefix, Formula::Or(matrices))
        }
        // after NNF, negation only wraps atoms
        _ => (Vec::new(), f.clone()),
    }
}

/// Merge sibling prefixes: repeatedly take each sibling's run of leading
/// universals (in syntactic order), then the first remaining sibling's run
/// of leading existentials.
fn merge(parts: Vec<(Vec<PrefixItem>, Formula)>) -> (Vec<PrefixItem>, Vec<Formula>) {
    let mut queues: Vec<std::collections::VecDeque<PrefixItem>> = Vec::new();
    let mut matrices = Vec::new();
    for (prefix, matrix) in parts {
        queues.push(prefix.into());
        matrices.push(matrix);
    }
    let mut out = Vec::new();
    loop {
        let mut progressed = false;
        for q in queues.iter_mut() {
            while q.front().is_some_and(|i| i.kind == QuantKind::Forall) {
                out.push(q.pop_front().unwrap());
                progressed = true;
            }
        }
        if let Some(q) = queues.iter_mut().find(|q| !q.is_empty()) {
            while q.front().is_some_and(|i| i.kind == QuantKind::Exists) {
                out.push(q.pop_front().unwrap());
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    (out, matrices)
}
