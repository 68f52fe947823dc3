//! Many-sorted signatures and the two-vocabulary (primed) view used by
//! transition formulas.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

/// Index of a sort in its [`Signature`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SortId(pub usize);

/// Index of a constant symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstId(pub usize);

/// Index of a relation symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelId(pub usize);

/// Index of a function symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FuncId(pub usize);

/// Whether a symbol may change across a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mutability {
    Mutable,
    Immutable,
}

impl Mutability {
    pub fn is_mutable(self) -> bool {
        matches!(self, Mutability::Mutable)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstDecl {
    pub name: String,
    pub sort: SortId,
    pub mutability: Mutability,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelDecl {
    pub name: String,
    pub args: Vec<SortId>,
    pub mutability: Mutability,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuncDecl {
    pub name: String,
    pub args: Vec<SortId>,
    pub ret: SortId,
    pub mutability: Mutability,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SignatureError {
    #[error("duplicate sort `{0}`")]
    DuplicateSort(String),
    #[error("duplicate symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("unknown sort `{0}`")]
    UnknownSort(String),
}

/// A finite set of sorts together with sorted constant, relation, and
/// function symbols. Symbol names are unique across all three kinds.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Signature {
    sorts: Vec<String>,
    consts: Vec<ConstDecl>,
    rels: Vec<RelDecl>,
    funcs: Vec<FuncDecl>,
    by_name: HashMap<String, SymbolRef>,
}

/// Resolution of a symbol name to its kind and index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolRef {
    Const(ConstId),
    Rel(RelId),
    Func(FuncId),
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_sort(&mut self, name: &str) -> Result<SortId, SignatureError> {
        if self.sorts.iter().any(|s| s == name) {
            return Err(SignatureError::DuplicateSort(name.to_string()));
        }
        self.sorts.push(name.to_string());
        Ok(SortId(self.sorts.len() - 1))
    }

    fn check_fresh(&self, name: &str) -> Result<(), SignatureError> {
        if self.by_name.contains_key(name) {
            return Err(SignatureError::DuplicateSymbol(name.to_string()));
        }
        Ok(())
    }

    pub fn add_const(
        &mut self,
        name: &str,
        sort: SortId,
        mutability: Mutability,
    ) -> Result<ConstId, SignatureError> {
        self.check_fresh(name)?;
        let id = ConstId(self.consts.len());
        self.consts.push(ConstDecl {
            name: name.to_string(),
            sort,
            mutability,
        });
        self.by_name.insert(name.to_string(), SymbolRef::Const(id));
        Ok(id)
    }

    pub fn add_rel(
        &mut self,
        name: &str,
        args: Vec<SortId>,
        mutability: Mutability,
    ) -> Result<RelId, SignatureError> {
        self.check_fresh(name)?;
        let id = RelId(self.rels.len());
        self.rels.push(RelDecl {
            name: name.to_string(),
            args,
            mutability,
        });
        self.by_name.insert(name.to_string(), SymbolRef::Rel(id));
        Ok(id)
    }

    pub fn add_func(
        &mut self,
        name: &str,
        args: Vec<SortId>,
        ret: SortId,
        mutability: Mutability,
    ) -> Result<FuncId, SignatureError> {
        self.check_fresh(name)?;
        let id = FuncId(self.funcs.len());
        self.funcs.push(FuncDecl {
            name: name.to_string(),
            args,
            ret,
            mutability,
        });
        self.by_name.insert(name.to_string(), SymbolRef::Func(id));
        Ok(id)
    }

    pub fn sort_id(&self, name: &str) -> Option<SortId> {
        self.sorts.iter().position(|s| s == name).map(SortId)
    }

    pub fn sort_name(&self, id: SortId) -> &str {
        &self.sorts[id.0]
    }

    pub fn num_sorts(&self) -> usize {
        self.sorts.len()
    }

    pub fn sorts(&self) -> impl Iterator<Item = (SortId, &str)> {
        self.sorts.iter().enumerate().map(|(i, s)| (SortId(i), s.as_str()))
    }

    pub fn resolve(&self, name: &str) -> Option<SymbolRef> {
        self.by_name.get(name).copied()
    }

    pub fn const_decl(&self, id: ConstId) -> &ConstDecl {
        &self.consts[id.0]
    }

    pub fn rel_decl(&self, id: RelId) -> &RelDecl {
        &self.rels[id.0]
    }

    pub fn func_decl(&self, id: FuncId) -> &FuncDecl {
        &self.funcs[id.0]
    }

    pub fn num_consts(&self) -> usize {
        self.consts.len()
    }

    pub fn num_rels(&self) -> usize {
        self.rels.len()
    }

    pub fn num_funcs(&self) -> usize {
        self.funcs.len()
    }

    pub fn const_ids(&self) -> impl Iterator<Item = ConstId> {
        (0..self.consts.len()).map(ConstId)
    }

    pub fn rel_ids(&self) -> impl Iterator<Item = RelId> {
        (0..self.rels.len()).map(RelId)
    }

    pub fn func_ids(&self) -> impl Iterator<Item = FuncId> {
        (0..self.funcs.len()).map(FuncId)
    }
}

/// The two-vocabulary view of a signature: every mutable symbol is doubled
/// with a primed copy appended after the originals, so all single-vocabulary
/// symbol ids stay valid in the doubled signature.
#[derive(Debug)]
pub struct TwoVocab {
    single: Arc<Signature>,
    doubled: Arc<Signature>,
    const_prime: Vec<ConstId>,
    rel_prime: Vec<RelId>,
    func_prime: Vec<FuncId>,
}

impl TwoVocab {
    pub fn new(single: Arc<Signature>) -> Self {
        let mut doubled = (*single).clone();
        let mut const_prime = Vec::with_capacity(single.num_consts());
        for id in single.const_ids() {
            let d = single.const_decl(id);
            if d.mutability.is_mutable() {
                let primed = doubled
                    .add_const(&format!("{}'", d.name), d.sort, d.mutability)
                    .expect("primed name collides");
                const_prime.push(primed);
            } else {
                const_prime.push(id);
            }
        }
        let mut rel_prime = Vec::with_capacity(single.num_rels());
        for id in single.rel_ids() {
            let d = single.rel_decl(id);
            if d.mutability.is_mutable() {
                let primed = doubled
                    .add_rel(&format!("{}'", d.name), d.args.clone(), d.mutability)
                    .expect("primed name collides");
                rel_prime.push(primed);
            } else {
                rel_prime.push(id);
            }
        }
        let mut func_prime = Vec::with_capacity(single.num_funcs());
        for id in single.func_ids() {
            let d = single.func_decl(id);
            if d.mutability.is_mutable() {
                let primed = doubled
                    .add_func(&format!("{}'", d.name), d.args.clone(), d.ret, d.mutability)
                    .expect("primed name collides");
                func_prime.push(primed);
            } else {
                func_prime.push(id);
            }
        }
        TwoVocab {
            single,
            doubled: Arc::new(doubled),
            const_prime,
            rel_prime,
            func_prime,
        }
    }

    pub fn single(&self) -> &Arc<Signature> {
        &self.single
    }

    pub fn doubled(&self) -> &Arc<Signature> {
        &self.doubled
    }

    pub fn primed_const(&self, id: ConstId) -> ConstId {
        self.const_prime[id.0]
    }

    pub fn primed_rel(&self, id: RelId) -> RelId {
        self.rel_prime[id.0]
    }

    pub fn primed_func(&self, id: FuncId) -> FuncId {
        self.func_prime[id.0]
    }

    /// True if the id names a primed copy (only exists in the doubled view).
    pub fn is_primed_const(&self, id: ConstId) -> bool {
        id.0 >= self.single.num_consts()
    }

    pub fn is_primed_rel(&self, id: RelId) -> bool {
        id.0 >= self.single.num_rels()
    }

    pub fn is_primed_func(&self, id: FuncId) -> bool {
        id.0 >= self.single.num_funcs()
    }
}
