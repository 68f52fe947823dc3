//! Frame management and the main inference loop.

mod engine;
mod store;

pub use engine::{
    combine_two_state, validate_trace, verify_invariant, BlockTarget, Engine, RunResult,
};
pub use store::{Lemma, LemmaOrigin, LemmaStore, FRAME_INF};
