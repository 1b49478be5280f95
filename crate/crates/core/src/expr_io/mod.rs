//! Problem files, state serialization, and proof traces.

pub mod problem;
pub mod sexp;
pub mod state_json;
pub mod trace;

pub use problem::{
    build_expr, build_state, parse_problem, BindSeed, BuiltProblem, Decl, DeclKind, Expr,
    ProblemDoc,
};
pub use sexp::{Diagnostic, Pos};
pub use state_json::{state_from_json, state_to_json};
pub use trace::{emit_trace, parse_trace, ProofTrace, TraceEnd, TraceHeader, TraceStep};

/// Parses and compiles problem text.
pub fn load_problem(text: &str, default_dim: usize) -> Result<BuiltProblem, Diagnostic> {
    build_state(&parse_problem(text)?, default_dim)
}
