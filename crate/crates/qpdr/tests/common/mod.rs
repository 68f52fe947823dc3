//! Shared generators and independent oracles for the integration and
//! acceptance suites. Everything here recomputes results by evaluation or
//! enumeration, independent of the SAT-encoded paths it checks.

#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;

use qpdr::logic::{
    Binder, Element, Env, Formula, Mutability, PrefixItem, QuantKind, Signature, SortId,
    Structure, Term,
};
use qpdr::separation::{Literal, QPrefix, SepConstraint};

/// A small two-sort test signature: r(s), p(s t), nullary q, constant a: s,
/// function f: s -> t.
pub fn test_sig() -> Arc<Signature> {
    let mut sig = Signature::new();
    let s = sig.add_sort("s").unwrap();
    let t = sig.add_sort("t").unwrap();
    sig.add_rel("r", vec![s], Mutability::Mutable).unwrap();
    sig.add_rel("p", vec![s, t], Mutability::Mutable).unwrap();
    sig.add_rel("q", vec![], Mutability::Mutable).unwrap();
    sig.add_const("a", s, Mutability::Immutable).unwrap();
    sig.add_func("f", vec![s], t, Mutability::Immutable).unwrap();
    Arc::new(sig)
}

/// A random structure over `sig` with universe sizes in `1..=max_size`.
pub fn random_structure(sig: &Arc<Signature>, max_size: usize, rng: &mut impl Rng) -> Structure {
    let universe: Vec<usize> = (0..sig.num_sorts())
        .map(|_| rng.gen_range(1..=max_size))
        .collect();
    let mut m = Structure::new(sig.clone(), universe.clone());
    for c in sig.const_ids() {
        let sort = sig.const_decl(c).sort;
        m.set_const(c, rng.gen_range(0..universe[sort.0]));
    }
    for r in sig.rel_ids() {
        let tuples: Vec<Vec<Element>> = m.rel_tuples(r).collect();
        for t in tuples {
            m.set_rel(r, &t, rng.gen_bool(0.5));
        }
    }
    for f in sig.func_ids() {
        let ret = sig.func_decl(f).ret;
        let tuples: Vec<Vec<Element>> = m.func_tuples(f).collect();
        for t in tuples {
            m.set_func(f, &t, rng.gen_range(0..universe[ret.0]));
        }
    }
    m
}

/// A random well-sorted closed formula over `sig`.
pub fn random_formula(sig: &Arc<Signature>, depth: usize, rng: &mut impl Rng) -> Formula {
    let mut counter = 0;
    gen_formula(sig, depth, &mut Vec::new(), &mut counter, rng)
}

fn gen_term(
    sig: &Arc<Signature>,
    want: SortId,
    scope: &[Binder],
    rng: &mut impl Rng,
    fuel: usize,
) -> Option<Term> {
    let mut options: Vec<Term> = scope
        .iter()
        .filter(|b| b.sort == want)
        .map(|b| Term::Var(b.name.clone()))
        .collect();
    for c in sig.const_ids() {
        if sig.const_decl(c).sort == want {
            options.push(Term::Const(c));
        }
    }
    if fuel > 0 {
        for f in sig.func_ids() {
            let decl = sig.func_decl(f);
            if decl.ret == want {
                let args: Option<Vec<Term>> = decl
                    .args
                    .iter()
                    .map(|&s| gen_term(sig, s, scope, rng, fuel - 1))
                    .collect();
                if let Some(args) = args {
                    options.push(Term::App(f, args));
                }
            }
        }
    }
    if options.is_empty() {
        None
    } else {
        Some(options[rng.gen_range(0..options.len())].clone())
    }
}

fn gen_atom(sig: &Arc<Signature>, scope: &[Binder], rng: &mut impl Rng) -> Formula {
    for _ in 0..20 {
        match rng.gen_range(0..4) {
            0 => {
                // random relation atom
                let r = qpdr::logic::RelId(rng.gen_range(0..sig.num_rels()));
                let args: Option<Vec<Term>> = sig
                    .rel_decl(r)
                    .args
                    .clone()
                    .iter()
                    .map(|&s| gen_term(sig, s, scope, rng, 1))
                    .collect();
                if let Some(args) = args {
                    return Formula::Rel(r, args);
                }
            }
            1 => {
                let sort = SortId(rng.gen_range(0..sig.num_sorts()));
                if let (Some(a), Some(b)) = (
                    gen_term(sig, sort, scope, rng, 1),
                    gen_term(sig, sort, scope, rng, 1),
                ) {
                    return Formula::Eq(a, b);
                }
            }
            2 => return Formula::tt(),
            _ => return Formula::ff(),
        }
    }
    Formula::tt()
}

fn gen_formula(
    sig: &Arc<Signature>,
    depth: usize,
    scope: &mut Vec<Binder>,
    counter: &mut usize,
    rng: &mut impl Rng,
) -> Formula {
    if depth == 0 {
        return gen_atom(sig, scope, rng);
    }
    match rng.gen_range(0..8) {
        0 | 1 => {
            let n = rng.gen_range(0..=3);
            let parts = (0..n)
                .map(|_| gen_formula(sig, depth - 1, scope, counter, rng))
                .collect();
            if rng.gen_bool(0.5) {
                Formula::And(parts)
            } else {
                Formula::Or(parts)
            }
        }
        2 => Formula::not(gen_formula(sig, depth - 1, scope, counter, rng)),
        3 => Formula::implies(
            gen_formula(sig, depth - 1, scope, counter, rng),
            gen_formula(sig, depth - 1, scope, counter, rng),
        ),
        4 => Formula::iff(
            gen_formula(sig, depth - 1, scope, counter, rng),
            gen_formula(sig, depth - 1, scope, counter, rng),
        ),
        _ => {
            let kind = if rng.gen_bool(0.5) {
                QuantKind::Forall
            } else {
                QuantKind::Exists
            };
            let sort = SortId(rng.gen_range(0..sig.num_sorts()));
            *counter += 1;
            let name = format!("x{counter}");
            scope.push(Binder {
                name: name.clone(),
                sort,
            });
            let body = gen_formula(sig, depth - 1, scope, counter, rng);
            scope.pop();
            Formula::quant(kind, &name, sort, body)
        }
    }
}

/// Truth of one literal on `m` under a prefix-variable assignment.
fn literal_true(m: &Structure, prefix: &[PrefixItem], assignment: &[Element], lit: &Literal) -> bool {
    let mut env = Env::new();
    for (item, &e) in prefix.iter().zip(assignment) {
        env.bind(&item.name, e);
    }
    qpdr::logic::eval(m, &mut env, &lit.to_formula()).unwrap_or(false)
}

/// All prefix-variable assignments over a structure's universe.
fn assignments(m: &Structure, prefix: &[PrefixItem]) -> Vec<Vec<Element>> {
    let mut out = vec![vec![]];
    for item in prefix {
        let n = m.sort_size(item.sort);
        let mut next = Vec::new();
        for a in &out {
            for e in 0..n {
                let mut b = a.clone();
                b.push(e);
                next.push(b);
            }
        }
        out = next;
    }
    out
}

/// Truth of the pDNF matrix selected by `(c1, cubes)` bitmasks under a
/// fixed literal valuation bitmask (bit i = literal i true).
fn matrix_true(c1: u64, cubes: &[u64], val: u64) -> bool {
    // !c1: some selected literal false
    if c1 & !val != 0 {
        return true;
    }
    // cube j: all selected literals true
    cubes.iter().any(|&c| c & !val == 0)
}

/// Precomputed literal valuations of one structure: one mask per
/// prefix-variable assignment in lexicographic order, plus the per-position
/// universe sizes.
struct StructureMasks {
    radices: Vec<usize>,
    kinds: Vec<QuantKind>,
    masks: Vec<u64>,
}

fn precompute(m: &Structure, prefix: &[PrefixItem], lits: &[Literal]) -> StructureMasks {
    let radices: Vec<usize> = prefix.iter().map(|i| m.sort_size(i.sort)).collect();
    let kinds: Vec<QuantKind> = prefix.iter().map(|i| i.kind).collect();
    let masks = assignments(m, prefix)
        .into_iter()
        .map(|a| {
            let mut val = 0u64;
            for (i, lit) in lits.iter().enumerate() {
                if literal_true(m, prefix, &a, lit) {
                    val |= 1 << i;
                }
            }
            val
        })
        .collect();
    StructureMasks {
        radices,
        kinds,
        masks,
    }
}

impl StructureMasks {
    fn holds(&self, c1: u64, cubes: &[u64]) -> bool {
        self.rec(0, 0, c1, cubes)
    }

    fn rec(&self, pos: usize, base: usize, c1: u64, cubes: &[u64]) -> bool {
        if pos == self.radices.len() {
            return matrix_true(c1, cubes, self.masks[base]);
        }
        let stride: usize = self.radices[pos + 1..].iter().product();
        let n = self.radices[pos];
        for e in 0..n {
            let v = self.rec(pos + 1, base + e * stride, c1, cubes);
            match self.kinds[pos] {
                QuantKind::Forall if !v => return false,
                QuantKind::Exists if v => return true,
                _ => {}
            }
        }
        self.kinds[pos] == QuantKind::Forall
    }
}

enum MaskConstraint {
    Positive(StructureMasks),
    Negative(StructureMasks),
    Implication(StructureMasks, StructureMasks),
}

impl MaskConstraint {
    fn ok(&self, c1: u64, cubes: &[u64]) -> bool {
        match self {
            MaskConstraint::Positive(m) => m.holds(c1, cubes),
            MaskConstraint::Negative(m) => !m.holds(c1, cubes),
            MaskConstraint::Implication(pre, post) => {
                !pre.holds(c1, cubes) || post.holds(c1, cubes)
            }
        }
    }
}

/// Independent separation oracle: exhaustively enumerate every k-term pDNF
/// matrix over the literal universe and report whether any satisfies all
/// constraints.
pub fn brute_force_separable(
    sig: &Arc<Signature>,
    prefix: &QPrefix,
    k: usize,
    constraints: &[SepConstraint],
) -> bool {
    let lits = qpdr::separation::literal_universe(sig, prefix.items(), 1);
    assert!(lits.len() <= 16, "brute force oracle is for tiny universes");
    let compiled: Vec<MaskConstraint> = constraints
        .iter()
        .map(|c| match c {
            SepConstraint::Positive(m) => {
                MaskConstraint::Positive(precompute(m, prefix.items(), &lits))
            }
            SepConstraint::Negative(m) => {
                MaskConstraint::Negative(precompute(m, prefix.items(), &lits))
            }
            SepConstraint::Implication(a, b) => MaskConstraint::Implication(
                precompute(a, prefix.items(), &lits),
                precompute(b, prefix.items(), &lits),
            ),
        })
        .collect();
    let subsets = 1u64 << lits.len();
    let mut cubes = vec![0u64; k - 1];
    fn walk(cubes: &mut Vec<u64>, idx: usize, subsets: u64, c1: u64, cs: &[MaskConstraint]) -> bool {
        if idx == cubes.len() {
            return cs.iter().all(|c| c.ok(c1, cubes));
        }
        for sel in 0..subsets {
            cubes[idx] = sel;
            if walk(cubes, idx + 1, subsets, c1, cs) {
                return true;
            }
        }
        false
    }
    for c1 in 0..subsets {
        if walk(&mut cubes, 0, subsets, c1, &compiled) {
            return true;
        }
    }
    false
}
