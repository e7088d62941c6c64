//! Denoting expressions, goal formulas, and their probabilistic semantics.
//!
//! Evaluation follows the independence recursion literally: `And` multiplies,
//! `Or` is inclusion-exclusion, and `Exists` is the `Or`-fold over every
//! object anchor currently in the belief. The same object appearing twice
//! (`and(green(x), green(x))`) is therefore counted twice.

mod ast;
mod eval;
mod parser;

pub use ast::{
    substitute, DenotingExpr, Fluent, GoalFormula, Phi, QuantityKind, Substitution, Term,
};
pub use eval::{
    den_prob, eval_expr, holds, holds_bool_fluent, krd, phi_prob, props_for, EvalError, PropSet,
};
pub use parser::{parse_expr, parse_goal, ParseError, ParseErrorKind, Symbols};
