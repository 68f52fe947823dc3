//! Parsing and printing of the `.fol` s-expression surface language.

mod parser;
mod printer;
mod sexpr;

pub use parser::{parse_formula, parse_formula_with_vocab, parse_system, ParseError, TransitionSystem};
pub use printer::{print_formula, print_term};
pub use sexpr::{read_all, Pos, SExpr, SExprError};
