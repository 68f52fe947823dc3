//! Separation properties: soundness against evaluation, completeness
//! against exhaustive matrix enumeration, UNSEP monotonicity, and the
//! search-space parity of the pDNF template.

mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_force_separable, random_structure};
use qpdr::logic::{Mutability, QuantKind, Signature};
use qpdr::sat::Budget;
use qpdr::separation::{
    make_prefix, minimize_matrix, separate, PdnfTemplate, QPrefix, SepConstraint, SepOutcome,
    Separator,
};

/// A one-sort signature whose depth-2 literal universe has exactly six
/// literals: r(v0), r(v1), v0 = v1, in both polarities.
fn tiny_sig() -> Arc<Signature> {
    let mut sig = Signature::new();
    let s = sig.add_sort("s").unwrap();
    sig.add_rel("r", vec![s], Mutability::Mutable).unwrap();
    Arc::new(sig)
}

fn random_prefix(sig: &Arc<Signature>, rng: &mut ChaCha8Rng) -> QPrefix {
    let s = sig.sort_id("s").unwrap();
    let depth = rng.gen_range(1..=2);
    let items: Vec<(QuantKind, qpdr::logic::SortId)> = (0..depth)
        .map(|_| {
            (
                if rng.gen_bool(0.5) {
                    QuantKind::Forall
                } else {
                    QuantKind::Exists
                },
                s,
            )
        })
        .collect();
    make_prefix(&items)
}

fn random_constraints(sig: &Arc<Signature>, rng: &mut ChaCha8Rng) -> Vec<SepConstraint> {
    let n = rng.gen_range(1..=4);
    (0..n)
        .map(|_| match rng.gen_range(0..3) {
            0 => SepConstraint::Positive(random_structure(sig, 2, rng)),
            1 => SepConstraint::Negative(random_structure(sig, 2, rng)),
            _ => SepConstraint::Implication(
                random_structure(sig, 2, rng),
                random_structure(sig, 2, rng),
            ),
        })
        .collect()
}

#[test]
fn verdicts_match_brute_force_enumeration() {
    let sig = tiny_sig();
    let mut rng = ChaCha8Rng::seed_from_u64(401);
    let mut sep_count = 0;
    let mut unsep_count = 0;
    for case in 0..2_000 {
        let prefix = random_prefix(&sig, &mut rng);
        let k = rng.gen_range(1..=2);
        let constraints = random_constraints(&sig, &mut rng);
        let expected = brute_force_separable(&sig, &prefix, k, &constraints);
        match separate(
            &sig,
            prefix.clone(),
            PdnfTemplate::new(k),
            &constraints,
            Budget::default(),
        ) {
            SepOutcome::Separator(p) => {
                assert!(expected, "case {case}: SAT found separator, brute force says UNSEP");
                let f = p.to_formula();
                for c in &constraints {
                    assert!(c.satisfied_by(&f), "case {case}: separator violates constraint");
                }
                sep_count += 1;
            }
            SepOutcome::Unsep => {
                assert!(!expected, "case {case}: SAT says UNSEP, brute force found a separator");
                unsep_count += 1;
            }
            SepOutcome::Unknown(r) => panic!("case {case}: unexpected unknown: {r}"),
        }
    }
    assert!(sep_count > 100 && unsep_count > 100, "unbalanced sample: {sep_count}/{unsep_count}");
}

#[test]
fn unsep_is_monotone_under_added_constraints() {
    let sig = tiny_sig();
    let mut rng = ChaCha8Rng::seed_from_u64(402);
    let mut checked = 0;
    for _ in 0..500 {
        let prefix = random_prefix(&sig, &mut rng);
        let constraints = random_constraints(&sig, &mut rng);
        let template = PdnfTemplate::new(1);
        if separate(&sig, prefix.clone(), template.clone(), &constraints, Budget::default())
            == SepOutcome::Unsep
        {
            let mut more = constraints.clone();
            more.extend(random_constraints(&sig, &mut rng));
            assert_eq!(
                separate(&sig, prefix, template, &more, Budget::default()),
                SepOutcome::Unsep,
                "adding constraints un-UNSEP'd a query"
            );
            checked += 1;
        }
    }
    assert!(checked > 20, "too few UNSEP samples: {checked}");
}

#[test]
fn minimized_separators_still_satisfy_constraints() {
    let sig = tiny_sig();
    let mut rng = ChaCha8Rng::seed_from_u64(403);
    for _ in 0..500 {
        let prefix = random_prefix(&sig, &mut rng);
        let constraints = random_constraints(&sig, &mut rng);
        if let SepOutcome::Separator(p) = separate(
            &sig,
            prefix,
            PdnfTemplate::new(2),
            &constraints,
            Budget::default(),
        ) {
            let min = minimize_matrix(&p, &constraints);
            let f = min.to_formula();
            for c in &constraints {
                assert!(c.satisfied_by(&f));
            }
            // idempotent
            assert_eq!(minimize_matrix(&min, &constraints), min);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Presence-variable parity with k-clause CNF over the same universe.
    #[test]
    fn presence_count_parity(k in 1usize..5, depth in 1usize..3) {
        let sig = tiny_sig();
        let s = sig.sort_id("s").unwrap();
        let items: Vec<_> = (0..depth).map(|_| (QuantKind::Forall, s)).collect();
        let prefix = make_prefix(&items);
        let sep = Separator::new(sig.clone(), prefix, PdnfTemplate::new(k), Budget::default());
        prop_assert_eq!(sep.presence_var_count(), k * sep.num_literals());
    }

    /// The cube-literal cap is respected by every decoded separator.
    #[test]
    fn cube_cap_respected(seed in 0u64..200) {
        let sig = tiny_sig();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prefix = random_prefix(&sig, &mut rng);
        let constraints = random_constraints(&sig, &mut rng);
        let template = PdnfTemplate {
            terms: 2,
            cube_literal_cap: Some(1),
            depth_cap: 1,
        };
        if let SepOutcome::Separator(p) = separate(&sig, prefix, template, &constraints, Budget::default()) {
            if let qpdr::logic::Formula::Or(ds) = &p.matrix {
                for d in ds {
                    if let qpdr::logic::Formula::And(cube) = d {
                        prop_assert!(cube.len() <= 1, "cube exceeds cap: {:?}", cube);
                    }
                }
            }
        }
    }
}
