//! Behavior cloning on replayed expert traces.

use super::episode::Task;
use super::ppo::Adam;
use crate::brain::{self, BrainError, BrainParams, Objective};
use crate::config::{Config, ConfigError};
use crate::hypergraph::rules::{apply_action, legal_actions};
use crate::hypergraph::{Action, MathState, RuleLibrary};

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertTrace {
    pub task: Task,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcConfig {
    pub steps: usize,
    pub lr: f64,
    /// Stop once the mean cross-entropy falls below this.
    pub tol: f64,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            steps: 2000,
            lr: 0.01,
            tol: 0.01,
        }
    }
}

impl BcConfig {
    pub fn from_config(c: &Config) -> Result<Self, ConfigError> {
        let d = BcConfig::default();
        Ok(BcConfig {
            steps: c.get("bc.steps", d.steps)?,
            lr: c.get("bc.lr", d.lr)?,
            tol: c.get("bc.tol", d.tol)?,
        })
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum BcError {
    #[error("trace {trace} is not replayable at step {step}: {action}")]
    NotReplayable { trace: usize, step: usize, action: String },
    #[error("{0}")]
    Brain(#[from] BrainError),
}

/// One supervised example: a state, its legal set and the expert's choice.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub state: MathState,
    pub legal: Vec<Action>,
    pub action: Action,
}

pub fn replay(dataset: &[ExpertTrace], lib: &RuleLibrary) -> Result<Vec<Example>, BcError> {
    let mut out = Vec::new();
    for (i, tr) in dataset.iter().enumerate() {
        let mut s = tr.task.state.clone();
        for (k, a) in tr.actions.iter().enumerate() {
            let legal = legal_actions(&s, lib);
            let bad = || BcError::NotReplayable {
                trace: i,
                step: k,
                action: a.to_string(),
            };
            if !legal.contains(a) {
                return Err(bad());
            }
            let next = apply_action(&s, a, lib).map_err(|_| bad())?;
            out.push(Example {
                state: s,
                legal,
                action: a.clone(),
            });
            s = next;
        }
    }
    Ok(out)
}

/// Mean cross-entropy of the expert actions.
pub fn cross_entropy(examples: &[Example], params: &BrainParams) -> Result<f64, BrainError> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut sink = Vec::new();
    for ex in examples {
        total -= brain::accumulate_gradient(&ex.state, params, &ex.legal, Some(&ex.action), Objective::default(), &mut sink)?.logp;
    }
    Ok(total / examples.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcReport {
    pub updates: usize,
    /// Loss before the first update and after each update.
    pub losses: Vec<f64>,
}

impl BcReport {
    pub fn final_loss(&self) -> f64 {
        self.losses.last().copied().unwrap_or(0.0)
    }
}

/// Minimizes the mean cross-entropy. Each update takes the Adam direction
/// and backtracks its length until the loss does not increase, so the
/// recorded loss curve is non-increasing.
pub fn behavior_clone(
    dataset: &[ExpertTrace],
    params: &mut BrainParams,
    cfg: &BcConfig,
    lib: &RuleLibrary,
) -> Result<BcReport, BcError> {
    let examples = replay(dataset, lib)?;
    let mut loss = cross_entropy(&examples, params)?;
    let mut report = BcReport {
        updates: 0,
        losses: vec![loss],
    };
    if examples.is_empty() {
        return Ok(report);
    }
    let mut adam = Adam::new(params.len());
    let inv = 1.0 / examples.len() as f64;
    while report.updates < cfg.steps && loss >= cfg.tol {
        let mut grad = vec![0.0; params.len()];
        for ex in &examples {
            let obj = Objective {
                logp: inv,
                ..Default::default()
            };
            brain::accumulate_gradient(&ex.state, params, &ex.legal, Some(&ex.action), obj, &mut grad)?;
        }
        let mut trial = params.data.clone();
        adam.ascend(&mut trial, &grad, cfg.lr);
        let dir: Vec<f64> = trial.iter().zip(&params.data).map(|(a, b)| a - b).collect();
        let mut scale = 1.0;
        for _ in 0..20 {
            let mut cand = params.clone();
            for (x, d) in cand.data.iter_mut().zip(&dir) {
                *x += scale * d;
            }
            let l = cross_entropy(&examples, &cand)?;
            if l <= loss {
                *params = cand;
                loss = l;
                break;
            }
            scale *= 0.5;
        }
        report.updates += 1;
        report.losses.push(loss);
    }
    Ok(report)
}
