//! Core representation and semantics of many-sorted first-order logic:
//! signatures, terms, formulas, finite structures, evaluation, prenexing,
//! priming, and diagrams.
//!
//! All types here are immutable after construction and safe to share
//! between threads; evaluation is reentrant.

mod diagram;
mod formula;
mod prenex;
mod signature;
mod structure;

pub use diagram::diagram;
pub use formula::{
    freshen_bound, is_mutable_rel, mentions_primed, prime, sort_check, sort_check_env, subst_var,
    term_sort, Binder, Formula, PrimeError, QuantKind, SortError, Term,
};
pub use prenex::{nnf, to_prenex, PrefixItem, PrenexFormula};
pub use signature::{
    ConstDecl, ConstId, FuncDecl, FuncId, Mutability, RelDecl, RelId, Signature, SignatureError,
    SortId, SymbolRef, TwoVocab,
};
pub use structure::{
    eval, eval_closed, eval_term, for_each_permutation, isomorphic, permutations, permute,
    tuples, Element, Env, EvalError, Structure, TwoStateStructure,
};
