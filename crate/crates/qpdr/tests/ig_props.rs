//! Inductive-generalization properties: prefix emission order against an
//! independent enumerator, scheduler fairness under an instrumented cost
//! model, EPR filtering, constraint sharing, and lemma recheck.

mod common;

use std::sync::Arc;

use qpdr::epr::EdgeSet;
use qpdr::ig::{category_stream, Category, PrefixScheduler, Shape};
use qpdr::logic::{QuantKind, SortId};

const F: QuantKind = QuantKind::Forall;
const E: QuantKind = QuantKind::Exists;

/// Independent 20-line reference enumerator: generate all kind/sort
/// sequences per depth, filter by the category predicate, and sort by the
/// stated keys (depth, alternations, does-not-start-with-forall,
/// existential count), remaining ties by kind-then-sort sequence.
fn reference_order(
    depth_max: usize,
    sorts: &[SortId],
    category_ok: impl Fn(&Shape) -> bool,
    take: usize,
) -> Vec<Shape> {
    let mut all: Vec<Shape> = Vec::new();
    for depth in 1..=depth_max {
        let mut level: Vec<Shape> = vec![vec![]];
        for _ in 0..depth {
            level = level
                .iter()
                .flat_map(|s| {
                    [F, E].iter().flat_map(move |&k| {
                        sorts.iter().map(move |&srt| {
                            let mut v = s.clone();
                            v.push((k, srt));
                            v
                        })
                    })
                })
                .collect();
        }
        level.retain(|s| category_ok(s));
        level.sort_by_key(|s| {
            let alts = s.windows(2).filter(|w| w[0].0 != w[1].0).count();
            let not_forall_first = usize::from(s[0].0 != F);
            let exists = s.iter().filter(|(k, _)| *k == E).count();
            let lex: Vec<(u8, usize)> = s.iter().map(|&(k, srt)| (u8::from(k == E), srt.0)).collect();
            (alts, not_forall_first, exists, lex)
        });
        all.extend(level);
    }
    all.truncate(take);
    all
}

fn sort_count_ok(s: &Shape, cap: usize) -> bool {
    let mut counts = std::collections::HashMap::new();
    for &(_, srt) in s {
        *counts.entry(srt).or_insert(0usize) += 1;
    }
    counts.values().all(|&c| c <= cap)
}

fn alternations(s: &Shape) -> usize {
    s.windows(2).filter(|w| w[0].0 != w[1].0).count()
}

#[test]
fn first_twenty_prefixes_match_reference_per_category() {
    let sorts = vec![SortId(0), SortId(1)];
    let cases: Vec<(Category, Box<dyn Fn(&Shape) -> bool>)> = vec![
        (
            Category::Universal,
            Box::new(|s: &Shape| s.iter().all(|(k, _)| *k == F)),
        ),
        (
            Category::UniversalSortCap,
            Box::new(|s: &Shape| s.iter().all(|(k, _)| *k == F) && sort_count_ok(s, 2)),
        ),
        (
            Category::OneAltSortCap,
            Box::new(|s: &Shape| alternations(s) <= 1 && sort_count_ok(s, 2)),
        ),
        (
            Category::TwoAltSortCap,
            Box::new(|s: &Shape| alternations(s) <= 2 && sort_count_ok(s, 2)),
        ),
        (Category::TwoAlt, Box::new(|s: &Shape| alternations(s) <= 2)),
    ];
    for (category, predicate) in cases {
        let got: Vec<Shape> = category_stream(category, &sorts, 4).take(20).collect();
        let want = reference_order(4, &sorts, predicate, 20);
        assert_eq!(got, want, "category {category:?} order diverges");
    }
}

#[test]
fn epr_filtering_suppresses_disallowed_alternations() {
    let sorts = vec![SortId(0), SortId(1)]; // S, T
    // allowed = {}: nothing with an existential after a universal
    let mut sched = PrefixScheduler::new(
        Category::all(),
        sorts.clone(),
        2,
        Some(EdgeSet::new()),
        true,
    );
    let mut emitted = Vec::new();
    while let Some((_, p)) = sched.next_prefix() {
        emitted.push(qpdr::ig::shape_of(&p));
    }
    for shape in &emitted {
        let mut seen_forall = false;
        for (k, _) in shape {
            if *k == F {
                seen_forall = true;
            } else {
                assert!(!seen_forall, "existential after universal emitted: {shape:?}");
            }
        }
    }
    // allowed = {S -> T}: forall-S exists-T emitted, forall-T exists-T not
    let allowed = EdgeSet::from_edges([(SortId(0), SortId(1))]);
    let mut sched =
        PrefixScheduler::new(Category::all(), sorts, 2, Some(allowed), true);
    let mut emitted = Vec::new();
    while let Some((_, p)) = sched.next_prefix() {
        emitted.push(qpdr::ig::shape_of(&p));
    }
    assert!(emitted.contains(&vec![(F, SortId(0)), (E, SortId(1))]));
    assert!(!emitted.contains(&vec![(F, SortId(1)), (E, SortId(1))]));
}

#[test]
fn scheduler_time_shares_stay_balanced() {
    // instrumented cost model: every prefix costs one unit; after many
    // picks the accumulated cost across non-exhausted categories stays
    // within a small ratio
    let sorts = vec![SortId(0), SortId(1)];
    let mut sched = PrefixScheduler::new(Category::all(), sorts, 6, None, false);
    for _ in 0..200 {
        let Some((category, _)) = sched.next_prefix() else {
            break;
        };
        sched.charge(category, 1.0);
    }
    let costs = sched.category_costs();
    let live: Vec<f64> = costs
        .iter()
        .filter(|(_, _, exhausted)| !exhausted)
        .map(|(_, c, _)| *c)
        .filter(|&c| c > 0.0)
        .collect();
    assert!(live.len() >= 2, "too few live categories: {costs:?}");
    let max = live.iter().cloned().fold(f64::MIN, f64::max);
    let min = live.iter().cloned().fold(f64::MAX, f64::min);
    assert!(
        max / min <= 3.0,
        "unbalanced category time shares: {costs:?}"
    );
}

#[test]
fn related_constraints_flow_through_sub_prefixes() {
    let store = qpdr::ig::ConstraintStore::new();
    let sig = common::test_sig();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(7);
    let m = common::random_structure(&sig, 2, &mut rng);
    let s0 = SortId(0);
    let base: Shape = vec![(F, s0)];
    let one_up: Shape = vec![(F, s0), (F, s0)];
    let two_up: Shape = vec![(F, s0), (F, s0), (F, s0)];
    store.add(&base, qpdr::separation::SepConstraint::Positive(m.clone()));
    // immediate sub-prefix sees it
    assert_eq!(store.related(&one_up).len(), 1);
    // non-immediate does not, until the intermediate picks it up
    assert_eq!(store.related(&two_up).len(), 0);
    store.add(&one_up, qpdr::separation::SepConstraint::Positive(m));
    assert_eq!(store.related(&two_up).len(), 1);
}

#[test]
fn joint_query_blocks_all_given_states() {
    use qpdr::config::Config;
    use qpdr::events::{EngineStats, EventLog};
    use qpdr::ig::{ig_query, ConstraintStore, IgContext, IgOutcome};
    use qpdr::logic::eval_closed;
    use qpdr::oracle::{CancelToken, Oracle, SolveOptions};
    use qpdr::syntax::parse_system;

    let sys = Arc::new(
        parse_system(
            "(sort s)(relation r (s) mutable)\
             (init (forall ((x s)) (not (r x))))\
             (transition add (exists ((x s)) (and (r' x) (forall ((y s)) (=> (not (= y x)) (= (r' y) (r y)))))))\
             (safety (and))",
        )
        .unwrap(),
    );
    let cfg = Config {
        sequential: true,
        bound: 2,
        max_depth: 2,
        mode: qpdr::config::Mode::Universal,
        ..Config::default()
    };
    let oracle = Oracle::new(sys.clone(), cfg.bound, SolveOptions::default());
    let store = ConstraintStore::new();
    let events = EventLog::disabled();
    let stats = EngineStats::default();
    let cx = IgContext {
        oracle: &oracle,
        store: &store,
        cfg: &cfg,
        events: &events,
        stats: &stats,
        allowed: None,
    };
    // two sibling bad states, both with two facts (so neither is reachable
    // within one step and the pair is jointly blockable at frame 1)
    let r = qpdr::logic::RelId(0);
    let mut s1 = qpdr::logic::Structure::new(sys.sig.clone(), vec![2]);
    s1.set_rel(r, &[0], true);
    s1.set_rel(r, &[1], true);
    let mut s2 = qpdr::logic::Structure::new(sys.sig.clone(), vec![3]);
    s2.set_rel(r, &[0], true);
    s2.set_rel(r, &[1], true);
    let frame = vec![qpdr::syntax::parse_formula("(forall ((x s)) (not (r x)))", &sys.sig).unwrap()];
    match ig_query(&cx, &[s1.clone(), s2.clone()], 1, &frame, &CancelToken::new()) {
        IgOutcome::Lemma(p) => {
            let f = p.to_formula();
            assert_eq!(eval_closed(&s1, &f), Ok(false), "lemma true on first state");
            assert_eq!(eval_closed(&s2, &f), Ok(false), "lemma true on second state");
        }
        other => panic!("expected joint lemma, got {other:?}"),
    }
}

#[test]
fn learned_lemmas_pass_independent_recheck() {
    use qpdr::config::Config;
    use qpdr::events::{EngineStats, EventLog};
    use qpdr::ig::{ig_query, ConstraintStore, IgContext, IgOutcome};
    use qpdr::logic::eval_closed;
    use qpdr::oracle::{CancelToken, CheckResult, Oracle, SolveOptions};
    use qpdr::syntax::parse_system;

    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../corpus/lockserv.fol"
    ))
    .unwrap();
    let sys = Arc::new(parse_system(&text).unwrap());
    let cfg = Config {
        sequential: true,
        bound: 2,
        max_depth: 3,
        mode: qpdr::config::Mode::Universal,
        ..Config::default()
    };
    let oracle = Oracle::new(sys.clone(), cfg.bound, SolveOptions::default());
    let store = ConstraintStore::new();
    let events = EventLog::disabled();
    let stats = EngineStats::default();
    let cx = IgContext {
        oracle: &oracle,
        store: &store,
        cfg: &cfg,
        events: &events,
        stats: &stats,
        allowed: None,
    };
    // two clients hold the lock: must be blockable at frame 1 relative to
    // the initial frame
    let mut bad = qpdr::logic::Structure::new(sys.sig.clone(), vec![2]);
    let holds = match sys.sig.resolve("holds_lock").unwrap() {
        qpdr::logic::SymbolRef::Rel(r) => r,
        _ => unreachable!(),
    };
    bad.set_rel(holds, &[0], true);
    bad.set_rel(holds, &[1], true);
    let frame: Vec<qpdr::logic::Formula> = sys.inits.clone();
    match ig_query(&cx, &[bad.clone()], 1, &frame, &CancelToken::new()) {
        IgOutcome::Lemma(p) => {
            let f = p.to_formula();
            assert_eq!(eval_closed(&bad, &f), Ok(false), "(9) fails");
            assert_eq!(oracle.check_initiation(&f), CheckResult::Valid, "(10) fails");
            assert!(
                matches!(oracle.check_relative_induction(&f, &frame), CheckResult::Valid),
                "(11) fails"
            );
            // replay: every constraint recorded for this prefix is satisfied
            let shape = qpdr::ig::shape_of(&qpdr::separation::QPrefix::new(p.prefix.clone()));
            for c in store.for_prefix(&shape) {
                assert!(c.satisfied_by(&f), "stored constraint violated by lemma");
            }
        }
        other => panic!("expected lemma, got {other:?}"),
    }
}
