//! Deliberative proof search: PUCT tree search, evolutionary search with
//! unification crossover, and an exhaustive breadth-first oracle.

pub mod bfs;
pub mod eps;
pub mod mcts;
pub mod unify;

use crate::brain::{self, BrainError, BrainParams};
use crate::hypergraph::{Action, MathState};
use crate::training::{algebraic_lift, goal_residual};

pub use bfs::{bfs_shortest, count_proofs, BfsOutcome};
pub use eps::{eps_search, EpsConfig, EpsOutcome, GenerationStats, Individual, Mutation};
pub use mcts::{mcts_search, MctsConfig, MctsOutcome, SimulationStats};
pub use unify::{canonical_signature, unify, UnifyReport};

/// Source of action priors and leaf values.
#[derive(Debug, Clone, Copy)]
pub enum Guide<'a> {
    Brain(&'a BrainParams),
    /// Uniform priors over the legal set and a leaf value of zero.
    Uniform,
}

impl Guide<'_> {
    pub fn priors(&self, state: &MathState, legal: &[Action]) -> Result<Vec<f64>, BrainError> {
        match self {
            Guide::Brain(p) => Ok(brain::policy(state, p, legal)?.probs),
            Guide::Uniform => Ok(vec![1.0 / legal.len() as f64; legal.len()]),
        }
    }

    pub fn value(&self, state: &MathState) -> Result<f64, BrainError> {
        match self {
            Guide::Brain(p) => brain::value(state, p),
            Guide::Uniform => Ok(0.0),
        }
    }
}

/// True when the goal edge is among the facts.
pub fn goal_proven(state: &MathState) -> bool {
    state.goal().is_some_and(|g| state.is_fact(g))
}

/// Witness residual of the goal against the lifted facts, or `None` when
/// the state does not lift.
pub fn lifted_residual(state: &MathState, degree_cap: u32) -> Option<f64> {
    let lifted = algebraic_lift(state).ok()?;
    goal_residual(&lifted.goal, &lifted.polys(), degree_cap).ok()
}

/// Replays `actions` from `root` and reports whether the goal ends as a
/// fact with residual below `eps`.
pub fn verify_proof(
    root: &MathState,
    actions: &[Action],
    lib: &crate::hypergraph::RuleLibrary,
    eps: f64,
    degree_cap: u32,
) -> bool {
    let mut s = root.clone();
    for a in actions {
        match crate::hypergraph::rules::apply_action(&s, a, lib) {
            Ok(n) => s = n,
            Err(_) => return false,
        }
    }
    goal_proven(&s) && lifted_residual(&s, degree_cap).is_none_or(|r| r < eps)
}
