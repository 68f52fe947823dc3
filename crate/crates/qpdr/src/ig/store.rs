//! The constraint store: per-prefix positive/implication constraints from
//! oracle counterexamples plus globally reachable states, persisted across
//! IG queries.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::logic::Structure;
use crate::separation::SepConstraint;

use super::prefix::{sub_prefixes, Shape};

#[derive(Debug, Default)]
pub struct ConstraintStore {
    per_prefix: Mutex<HashMap<Shape, Vec<SepConstraint>>>,
    reachable: Mutex<Vec<Structure>>,
}

impl ConstraintStore {
    pub fn new() -> ConstraintStore {
        ConstraintStore::default()
    }

    /// Record an oracle-produced constraint for a prefix. Negatives are
    /// query-local and not persisted here.
    pub fn add(&self, shape: &Shape, c: SepConstraint) {
        debug_assert!(!matches!(c, SepConstraint::Negative(_)));
        let mut map = self.per_prefix.lock().unwrap();
        let list = map.entry(shape.clone()).or_default();
        if !list.contains(&c) {
            list.push(c);
        }
    }

    /// Stored constraints for one prefix.
    pub fn for_prefix(&self, shape: &Shape) -> Vec<SepConstraint> {
        self.per_prefix
            .lock()
            .unwrap()
            .get(shape)
            .cloned()
            .unwrap_or_default()
    }

    /// Union of stored constraints over the immediate sub-prefixes,
    /// deduplicated by structure identity.
    pub fn related(&self, shape: &Shape) -> Vec<SepConstraint> {
        let map = self.per_prefix.lock().unwrap();
        let mut out: Vec<SepConstraint> = Vec::new();
        for sub in sub_prefixes(shape) {
            if let Some(list) = map.get(&sub) {
                for c in list {
                    if !out.contains(c) {
                        out.push(c.clone());
                    }
                }
            }
        }
        out
    }

    /// Record a state proven reachable; reachable states are positive
    /// constraints for every prefix.
    pub fn add_reachable(&self, m: Structure) {
        let mut list = self.reachable.lock().unwrap();
        if !list.contains(&m) {
            list.push(m);
        }
    }

    pub fn reachable(&self) -> Vec<Structure> {
        self.reachable.lock().unwrap().clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::QuantKind;
    use crate::logic::SortId;
    use crate::syntax::parse_system;

    #[test]
    fn related_pulls_from_sub_prefixes() {
        let sys = parse_system("(sort s)(relation r (s) mutable)").unwrap();
        let store = ConstraintStore::new();
        let s0 = SortId(0);
        let one: Shape = vec![(QuantKind::Forall, s0)];
        let two: Shape = vec![(QuantKind::Forall, s0), (QuantKind::Forall, s0)];
        assert!(store.related(&two).is_empty());
        let m = Structure::new(sys.sig.clone(), vec![1]);
        store.add(&one, SepConstraint::Positive(m.clone()));
        let related = store.related(&two);
        assert_eq!(related, vec![SepConstraint::Positive(m.clone())]);
        // dedup on insert
        store.add(&one, SepConstraint::Positive(m));
        assert_eq!(store.for_prefix(&one).len(), 1);
    }
}
