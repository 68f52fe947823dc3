//! Inference of quantified inductive invariants (including quantifier
//! alternations) for many-sorted first-order transition systems.
//!
//! The engine is a PDR/IC3 variant whose inductive generalization runs a
//! breadth-first search over quantifier prefixes, synthesizing candidate
//! lemmas by separation: SAT-encoded search for a prenex formula with a
//! k-term pseudo-DNF matrix that is consistent with a growing set of
//! structure constraints.

pub mod cancel;
pub mod config;
pub mod epr;
pub mod events;
pub mod ig;
pub mod logic;
pub mod oracle;
pub mod pdr;
pub mod sat;
pub mod separation;
pub mod syntax;
