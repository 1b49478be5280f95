//! Hypergraph attention policy and value network.
//!
//! The encoder produces one embedding per entity. The policy factors an
//! action into an operator choice (softmax over the rules present in the
//! legal set) and one pointer choice per operand slot; each pointer is
//! masked to the operands that still complete some legal action given the
//! prefix already chosen, so the induced distribution is normalized over the
//! legal set. The value head reads the mean-pooled embedding.
//!
//! Gradients are hand-written reverse mode through this fixed architecture.

pub mod encoder;
pub mod params;
pub mod policy;

use thiserror::Error;

use crate::hypergraph::{Action, EdgeId, MathState};

pub use encoder::{encode_state, positional_encoding, Encoding};
pub use params::{BrainConfig, BrainParams, CheckpointError, CHECKPOINT_VERSION};
pub use policy::{accumulate_gradient, choose_action, policy_distribution, slot_distribution, ActionDistribution, Evaluated, Objective};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BrainError {
    #[error("edge e{} has {arity} positions, more than the positional table's {max}", edge.0)]
    Arity { edge: EdgeId, arity: usize, max: usize },
    #[error("the legal action set is empty")]
    EmptyLegalSet,
    #[error("action {0} is not in the legal set for this state")]
    IllegalAction(String),
}

pub fn encode(state: &MathState, params: &BrainParams) -> Result<Encoding, BrainError> {
    encode_state(state, params)
}

pub fn policy(state: &MathState, params: &BrainParams, legal: &[Action]) -> Result<ActionDistribution, BrainError> {
    policy_distribution(state, params, legal)
}

/// Estimated probability that the state lies on a zero-energy proof path.
pub fn value(state: &MathState, params: &BrainParams) -> Result<f64, BrainError> {
    Ok(policy::Forward::new(state, params)?.value())
}

/// Gradient of `log π(action | state)` over the flat parameter vector.
pub fn grad_log_policy(
    state: &MathState,
    params: &BrainParams,
    legal: &[Action],
    action: &Action,
) -> Result<Vec<f64>, BrainError> {
    let mut g = vec![0.0; params.len()];
    accumulate_gradient(
        state,
        params,
        legal,
        Some(action),
        Objective {
            logp: 1.0,
            ..Default::default()
        },
        &mut g,
    )?;
    Ok(g)
}

/// Gradient of `(V(state) - target)²`.
pub fn grad_value_loss(state: &MathState, params: &BrainParams, target: f64) -> Result<Vec<f64>, BrainError> {
    let v = value(state, params)?;
    let mut g = vec![0.0; params.len()];
    accumulate_gradient(
        state,
        params,
        &[],
        None,
        Objective {
            value: 2.0 * (v - target),
            ..Default::default()
        },
        &mut g,
    )?;
    Ok(g)
}
