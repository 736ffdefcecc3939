//! Expression grammar, comprehension grounding, and affine extraction for
//! objective and constraint strings.

mod ast;
mod ground;
mod linear;
mod parse;

pub use ast::{Comprehension, Expr, Iterable, QuantifiedRelation, RelOp, Relation};
pub use ground::{enumerate, ground, ground_expression, ground_relation, Env, GroundError, GroundRelation, VarInfo, VarInstance, VarTable};
pub use linear::{evaluate, relation_to_linear, to_linear, EvalError, LinearForm, LinearizeError, COEFF_EPS};
pub use parse::{parse_expression, parse_iteration_space, parse_relation, ParseError};
