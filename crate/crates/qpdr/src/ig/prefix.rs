//! Prefix categories, enumeration order, and the breadth-first scheduler.

use std::collections::HashMap;

use crate::epr::{prefix_allowed, EdgeSet};
use crate::logic::{QuantKind, SortId};
use crate::separation::{make_prefix, QPrefix};

/// A prefix shape: quantifier kinds and sorts, without variable names.
pub type Shape = Vec<(QuantKind, SortId)>;

pub fn shape_of(prefix: &QPrefix) -> Shape {
    prefix.items().iter().map(|i| (i.kind, i.sort)).collect()
}

pub fn prefix_of(shape: &Shape) -> QPrefix {
    make_prefix(shape)
}

fn alternations(shape: &Shape) -> usize {
    shape.windows(2).filter(|w| w[0].0 != w[1].0).count()
}

fn existentials(shape: &Shape) -> usize {
    shape.iter().filter(|(k, _)| *k == QuantKind::Exists).count()
}

fn sort_counts_ok(shape: &Shape, max_per_sort: usize) -> bool {
    let mut counts: HashMap<SortId, usize> = HashMap::new();
    for &(_, s) in shape {
        *counts.entry(s).or_insert(0) += 1;
    }
    counts.values().all(|&c| c <= max_per_sort)
}

/// The five built-in prefix categories. Categories may overlap; universal
/// mode uses only the first two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    /// all quantifiers universal
    Universal,
    /// universal, each sort in at most two quantifiers
    UniversalSortCap,
    /// at most one alternation, each sort in at most two quantifiers
    OneAltSortCap,
    /// at most two alternations, each sort in at most two quantifiers
    TwoAltSortCap,
    /// at most two alternations
    TwoAlt,
}

impl Category {
    pub fn all() -> &'static [Category] {
        &[
            Category::Universal,
            Category::UniversalSortCap,
            Category::OneAltSortCap,
            Category::TwoAltSortCap,
            Category::TwoAlt,
        ]
    }

    pub fn universal_only() -> &'static [Category] {
        &[Category::Universal, Category::UniversalSortCap]
    }

    pub fn matches(&self, shape: &Shape) -> bool {
        let alts = alternations(shape);
        match self {
            Category::Universal => existentials(shape) == 0,
            Category::UniversalSortCap => existentials(shape) == 0 && sort_counts_ok(shape, 2),
            Category::OneAltSortCap => alts <= 1 && sort_counts_ok(shape, 2),
            Category::TwoAltSortCap => alts <= 2 && sort_counts_ok(shape, 2),
            Category::TwoAlt => alts <= 2,
        }
    }
}

/// Ordering key within a category: smallest depth, fewest alternations,
/// starts-with-universal first, fewest existentials; remaining ties by the
/// kind sequence (universal first) then sort declaration order.
fn order_key(shape: &Shape) -> (usize, usize, usize, usize, Vec<(u8, usize)>) {
    (
        shape.len(),
        alternations(shape),
        usize::from(shape.first().map(|(k, _)| *k) != Some(QuantKind::Forall) && !shape.is_empty()),
        existentials(shape),
        shape
            .iter()
            .map(|&(k, s)| (u8::from(k == QuantKind::Exists), s.0))
            .collect(),
    )
}

/// All shapes of exactly `depth` over `sorts` matching `category`, in the
/// category's emission order.
fn shapes_at_depth(category: Category, sorts: &[SortId], depth: usize) -> Vec<Shape> {
    let kinds = [QuantKind::Forall, QuantKind::Exists];
    let mut shapes: Vec<Shape> = vec![vec![]];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(shapes.len() * 2 * sorts.len());
        for base in &shapes {
            for &k in &kinds {
                for &s in sorts {
                    let mut v = base.clone();
                    v.push((k, s));
                    next.push(v);
                }
            }
        }
        shapes = next;
    }
    let mut shapes: Vec<Shape> = shapes
        .into_iter()
        .filter(|s| category.matches(s))
        .collect();
    shapes.sort_by_key(order_key);
    shapes
}

/// The full emission stream of a category up to a depth cap (depth 1 and
/// up; the empty prefix is never emitted).
pub fn category_stream(
    category: Category,
    sorts: &[SortId],
    max_depth: usize,
) -> impl Iterator<Item = Shape> + '_ {
    (1..=max_depth).flat_map(move |d| shapes_at_depth(category, sorts, d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrefixStatus {
    Active,
    Unsep,
    Abandoned,
}

struct CategoryGen {
    category: Category,
    depth: usize,
    max_depth: usize,
    batch: Vec<Shape>,
    next: usize,
    exhausted: bool,
    /// accumulated compute time (or logical cost) spent on this category
    cost: f64,
}

/// Breadth-first scheduler: emits the least unseen prefix from the category
/// with the least accumulated time (or in fixed rotation in sequential
/// mode), skipping prefixes disallowed by the EPR edge set.
pub struct PrefixScheduler {
    sorts: Vec<SortId>,
    gens: Vec<CategoryGen>,
    seen: HashMap<Shape, PrefixStatus>,
    allowed: Option<EdgeSet>,
    rotation: Option<usize>,
}

impl PrefixScheduler {
    pub fn new(
        categories: &[Category],
        sorts: Vec<SortId>,
        max_depth: usize,
        allowed: Option<EdgeSet>,
        sequential: bool,
    ) -> PrefixScheduler {
        PrefixScheduler {
            sorts,
            gens: categories
                .iter()
                .map(|&category| CategoryGen {
                    category,
                    depth: 0,
                    max_depth,
                    batch: Vec::new(),
                    next: 0,
                    exhausted: false,
                    cost: 0.0,
                })
                .collect(),
            seen: HashMap::new(),
            allowed,
            rotation: sequential.then_some(0),
        }
    }

    /// Accumulated cost per category (for fairness checks).
    pub fn category_costs(&self) -> Vec<(Category, f64, bool)> {
        self.gens
            .iter()
            .map(|g| (g.category, g.cost, g.exhausted))
            .collect()
    }

    pub fn charge(&mut self, category: Category, cost: f64) {
        if let Some(g) = self.gens.iter_mut().find(|g| g.category == category) {
            g.cost += cost;
        }
    }

    pub fn mark(&mut self, shape: &Shape, status: PrefixStatus) {
        self.seen.insert(shape.clone(), status);
    }

    /// The next unseen prefix, or None when every category is exhausted at
    /// the depth cap.
    pub fn next_prefix(&mut self) -> Option<(Category, QPrefix)> {
        loop {
            let idx = self.pick_category()?;
            match self.pop_from(idx) {
                Some(shape) => {
                    self.seen.insert(shape.clone(), PrefixStatus::Active);
                    return Some((self.gens[idx].category, prefix_of(&shape)));
                }
                None => continue, // category just exhausted; repick
            }
        }
    }

    fn pick_category(&mut self) -> Option<usize> {
        let live: Vec<usize> = (0..self.gens.len())
            .filter(|&i| !self.gens[i].exhausted)
            .collect();
        if live.is_empty() {
            return None;
        }
        match self.rotation {
            Some(next) => {
                // fixed rotation over non-exhausted categories
                let pick = live.iter().copied().find(|&i| i >= next).unwrap_or(live[0]);
                self.rotation = Some(pick + 1);
                Some(pick)
            }
            None => live
                .into_iter()
                .min_by(|&a, &b| self.gens[a].cost.total_cmp(&self.gens[b].cost)),
        }
    }

    /// Pop the next globally-unseen, EPR-allowed shape from one category.
    fn pop_from(&mut self, idx: usize) -> Option<Shape> {
        loop {
            let g = &mut self.gens[idx];
            if g.next >= g.batch.len() {
                if g.depth >= g.max_depth {
                    g.exhausted = true;
                    return None;
                }
                g.depth += 1;
                g.batch = shapes_at_depth(g.category, &self.sorts, g.depth);
                g.next = 0;
                continue;
            }
            let shape = g.batch[g.next].clone();
            g.next += 1;
            if self.seen.contains_key(&shape) {
                continue;
            }
            if let Some(allowed) = &self.allowed {
                let prefix = prefix_of(&shape);
                if !prefix_allowed(prefix.items(), allowed) {
                    self.seen.insert(shape, PrefixStatus::Abandoned);
                    continue;
                }
            }
            return Some(shape);
        }
    }
}

/// The immediate sub-prefixes: drop exactly one quantifier, deduplicated.
pub fn sub_prefixes(shape: &Shape) -> Vec<Shape> {
    let mut out: Vec<Shape> = Vec::with_capacity(shape.len());
    for i in 0..shape.len() {
        let mut sub = shape.clone();
        sub.remove(i);
        if !out.contains(&sub) {
            out.push(sub);
        }
    }
    out
}
