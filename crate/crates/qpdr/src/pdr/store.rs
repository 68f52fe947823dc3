//! The lemma store: lemmas with frame indices (finite or infinity),
//! bad-flags, and provenance. Frame `F_i` is the view of all non-bad lemmas
//! with frame index >= i, which makes frames subsets of the prior frame by
//! construction.

use crate::logic::{Formula, PrenexFormula, Structure};

pub const FRAME_INF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LemmaOrigin {
    Init,
    Safety,
    Learned,
}

#[derive(Debug, Clone)]
pub struct Lemma {
    pub id: usize,
    pub formula: Formula,
    /// Learned lemmas keep their prenex form (prefix inspection, logging).
    pub prenex: Option<PrenexFormula>,
    pub frame: u32,
    /// Refuted as an invariant by a reachable state: stays valid at frames
    /// below its cap but is never promoted to infinity and never retried.
    pub bad: bool,
    /// Highest frame this lemma may ever occupy (a state reachable in m
    /// steps that violates it caps it at m-1).
    pub cap: u32,
    pub origin: LemmaOrigin,
}

#[derive(Debug, Default)]
pub struct LemmaStore {
    lemmas: Vec<Lemma>,
    /// proven-reachable states with their step depth from an initial state
    reachable: Vec<(Structure, u32)>,
    generation: u64,
}

impl LemmaStore {
    pub fn new() -> LemmaStore {
        LemmaStore::default()
    }

    /// Monotonic counter bumped on every lemma mutation; used to cache
    /// oracle checks against an unchanged store.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn add(
        &mut self,
        formula: Formula,
        prenex: Option<PrenexFormula>,
        frame: u32,
        origin: LemmaOrigin,
    ) -> usize {
        self.generation += 1;
        let id = self.lemmas.len();
        self.lemmas.push(Lemma {
            id,
            formula,
            prenex,
            frame,
            bad: false,
            cap: FRAME_INF,
            origin,
        });
        id
    }

    pub fn lemma(&self, id: usize) -> &Lemma {
        &self.lemmas[id]
    }

    pub fn lemmas(&self) -> &[Lemma] {
        &self.lemmas
    }

    pub fn set_frame(&mut self, id: usize, frame: u32) {
        self.generation += 1;
        self.lemmas[id].frame = frame;
    }

    pub fn mark_bad(&mut self, id: usize) {
        self.generation += 1;
        self.lemmas[id].bad = true;
    }

    /// Cap the lemma's frame at `cap`, demoting it if it currently claims
    /// more.
    pub fn cap_frame(&mut self, id: usize, cap: u32) {
        self.generation += 1;
        let l = &mut self.lemmas[id];
        l.cap = l.cap.min(cap);
        if l.frame > l.cap {
            l.frame = l.cap;
        }
    }

    /// Lemmas in `F_i` (frame >= i), discovery order. Refuted (bad)
    /// lemmas still hold below their cap and stay in finite views; they
    /// can never reach the frame at infinity.
    pub fn frame_lemmas(&self, i: u32) -> impl Iterator<Item = &Lemma> {
        self.lemmas.iter().filter(move |l| l.frame >= i)
    }

    pub fn frame_formulas(&self, i: u32) -> Vec<Formula> {
        self.frame_lemmas(i).map(|l| l.formula.clone()).collect()
    }

    /// Lemmas with frame exactly `i`.
    pub fn at_frame(&self, i: u32) -> impl Iterator<Item = &Lemma> {
        self.lemmas.iter().filter(move |l| l.frame == i)
    }

    pub fn max_finite_frame(&self) -> Option<u32> {
        self.lemmas
            .iter()
            .filter(|l| l.frame != FRAME_INF)
            .map(|l| l.frame)
            .max()
    }

    /// Formulas of the frame at infinity.
    pub fn f_inf(&self) -> Vec<Formula> {
        self.frame_formulas(FRAME_INF)
    }

    /// True iff `F_i = F_{i+1}` as lemma sets, i.e. no lemma sits at
    /// exactly frame `i`.
    pub fn frames_equal(&self, i: u32) -> bool {
        self.at_frame(i).next().is_none()
    }

    /// Promote every finite-frame lemma above `i` to infinity. The caller
    /// must ensure no refuted lemma sits above `i`: refuted lemmas supply
    /// frame strength that the promoted set may depend on, so they bound
    /// the promotion floor.
    pub fn promote_from(&mut self, i: u32) -> Vec<usize> {
        self.generation += 1;
        let mut promoted = Vec::new();
        for l in &mut self.lemmas {
            if !l.bad && l.cap == FRAME_INF && l.frame != FRAME_INF && l.frame > i {
                l.frame = FRAME_INF;
                promoted.push(l.id);
            }
        }
        promoted
    }

    /// Lowest frame index `i` with no lemma at exactly `i` and no refuted
    /// (bad or capped) lemma anywhere above `i`.
    pub fn promotion_gap(&self) -> Option<u32> {
        let max = self.max_finite_frame()?;
        let refuted_ceiling = self
            .lemmas
            .iter()
            .filter(|l| (l.bad || l.cap != FRAME_INF) && l.frame != FRAME_INF)
            .map(|l| l.frame)
            .max();
        for i in 0..=max {
            if refuted_ceiling.is_some_and(|c| c >= i) {
                continue;
            }
            if self.frames_equal(i) {
                return Some(i);
            }
        }
        None
    }

    pub fn add_reachable(&mut self, m: Structure, depth: u32) {
        match self.reachable.iter_mut().find(|(r, _)| *r == m) {
            Some((_, d)) => *d = (*d).min(depth),
            None => self.reachable.push((m, depth)),
        }
    }

    pub fn reachable(&self) -> &[(Structure, u32)] {
        &self.reachable
    }

    /// Minimum finite frame among safety lemmas.
    pub fn min_safety_frame(&self) -> Option<u32> {
        self.lemmas
            .iter()
            .filter(|l| l.origin == LemmaOrigin::Safety && l.frame != FRAME_INF)
            .map(|l| l.frame)
            .min()
    }

    /// All safety lemmas are at infinity (or none exist).
    pub fn safety_at_inf(&self) -> bool {
        self.lemmas
            .iter()
            .filter(|l| l.origin == LemmaOrigin::Safety)
            .all(|l| l.frame == FRAME_INF)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_views_are_nested() {
        let mut store = LemmaStore::new();
        let a = store.add(Formula::tt(), None, 0, LemmaOrigin::Init);
        let b = store.add(Formula::ff(), None, 2, LemmaOrigin::Learned);
        assert_eq!(store.frame_lemmas(0).count(), 2);
        assert_eq!(store.frame_lemmas(1).count(), 1);
        assert_eq!(store.frame_lemmas(3).count(), 0);
        store.set_frame(a, FRAME_INF);
        assert_eq!(store.frame_lemmas(3).count(), 1);
        assert!(store.frames_equal(1));
        assert!(!store.frames_equal(2));
        store.mark_bad(b);
        store.cap_frame(b, 1);
        // refuted lemmas stay in views below their cap
        assert_eq!(store.frame_lemmas(0).count(), 2);
        assert_eq!(store.lemma(b).frame, 1);
        // but are never promoted
        assert!(store.promote_from(0).is_empty());
    }

    #[test]
    fn promotion_moves_everything_above() {
        let mut store = LemmaStore::new();
        let a = store.add(Formula::tt(), None, 0, LemmaOrigin::Init);
        let b = store.add(Formula::tt(), None, 2, LemmaOrigin::Learned);
        let c = store.add(Formula::tt(), None, 3, LemmaOrigin::Learned);
        let promoted = store.promote_from(1);
        assert_eq!(promoted, vec![b, c]);
        assert_eq!(store.lemma(a).frame, 0);
        assert_eq!(store.lemma(b).frame, FRAME_INF);
    }
}
