//! EPR enforcement: Skolem sort edges of quantifier prefixes and filtering
//! against a declared acyclic edge set.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::logic::{PrefixItem, QuantKind, Signature, SortId};

/// A set of directed sort edges.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeSet {
    edges: BTreeSet<(SortId, SortId)>,
}

impl EdgeSet {
    pub fn new() -> EdgeSet {
        EdgeSet::default()
    }

    pub fn from_edges(edges: impl IntoIterator<Item = (SortId, SortId)>) -> EdgeSet {
        EdgeSet {
            edges: edges.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, from: SortId, to: SortId) {
        self.edges.insert((from, to));
    }

    pub fn contains(&self, from: SortId, to: SortId) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn is_subset(&self, other: &EdgeSet) -> bool {
        self.edges.is_subset(&other.edges)
    }

    pub fn union(&self, other: &EdgeSet) -> EdgeSet {
        EdgeSet {
            edges: self.edges.union(&other.edges).copied().collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (SortId, SortId)> + '_ {
        self.edges.iter().copied()
    }

    /// True if the directed graph has no cycle (self-loops included).
    pub fn is_acyclic(&self, num_sorts: usize) -> bool {
        // DFS three-color cycle check
        #[derive(Clone, Copy, PartialEq)]
        enum Color {
            White,
            Gray,
            Black,
        }
        let mut color = vec![Color::White; num_sorts];
        let adj: Vec<Vec<usize>> = {
            let mut adj = vec![Vec::new(); num_sorts];
            for &(f, t) in &self.edges {
                adj[f.0].push(t.0);
            }
            adj
        };
        fn dfs(v: usize, color: &mut [Color], adj: &[Vec<usize>]) -> bool {
            color[v] = Color::Gray;
            for &w in &adj[v] {
                match color[w] {
                    Color::Gray => return false,
                    Color::White => {
                        if !dfs(w, color, adj) {
                            return false;
                        }
                    }
                    Color::Black => {}
                }
            }
            color[v] = Color::Black;
            true
        }
        for v in 0..num_sorts {
            if color[v] == Color::White && !dfs(v, &mut color, &adj) {
                return false;
            }
        }
        true
    }
}

/// Sort edges contributed by the signature's function symbols (argument sort
/// to result sort). Constants have no argument sorts and contribute nothing.
pub fn signature_edges(sig: &Signature) -> EdgeSet {
    let mut edges = EdgeSet::new();
    for f in sig.func_ids() {
        let decl = sig.func_decl(f);
        for &arg in &decl.args {
            edges.insert(arg, decl.ret);
        }
    }
    edges
}

/// Skolem edges of a prefix: for each existential, an edge from the sort of
/// every preceding universal to the existential's sort. Leading existentials
/// (Skolem constants) contribute no edges.
pub fn skolem_edges(prefix: &[PrefixItem]) -> EdgeSet {
    let mut edges = EdgeSet::new();
    for (j, item) in prefix.iter().enumerate() {
        if item.kind == QuantKind::Exists {
            for before in &prefix[..j] {
                if before.kind == QuantKind::Forall {
                    edges.insert(before.sort, item.sort);
                }
            }
        }
    }
    edges
}

/// True iff every Skolem edge of `prefix` is in the allowed set.
pub fn prefix_allowed(prefix: &[PrefixItem], allowed: &EdgeSet) -> bool {
    skolem_edges(prefix).is_subset(allowed)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EprError {
    #[error("EPR edge set has a cycle involving sort `{0}`; EPR mode rejected")]
    Cyclic(String),
}

/// The allowed edge set for EPR mode: declared edges unioned with the
/// signature's function edges. Rejects cyclic graphs.
pub fn allowed_edges(
    sig: &Signature,
    declared: &[(SortId, SortId)],
) -> Result<EdgeSet, EprError> {
    let edges = signature_edges(sig).union(&EdgeSet::from_edges(declared.iter().copied()));
    if !edges.is_acyclic(sig.num_sorts()) {
        // name some sort on a cycle for the diagnostic
        let on_cycle = edges
            .iter()
            .map(|(f, _)| f)
            .find(|&s| {
                let mut reach = vec![false; sig.num_sorts()];
                let mut stack = vec![s];
                while let Some(v) = stack.pop() {
                    for (f, t) in edges.iter() {
                        if f == v && !reach[t.0] {
                            reach[t.0] = true;
                            stack.push(t);
                        }
                    }
                }
                reach[s.0]
            })
            .unwrap_or(SortId(0));
        return Err(EprError::Cyclic(sig.sort_name(on_cycle).to_string()));
    }
    Ok(edges)
}
