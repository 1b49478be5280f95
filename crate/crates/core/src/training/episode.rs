//! Energy-guided episodes: the witness residual of the goal against the
//! lifted fact set is the state's energy, and each step is rewarded by how
//! much it lowers that energy.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::lift::{algebraic_lift, LiftError};
use crate::brain::{self, BrainError, BrainParams};
use crate::config::{Config, ConfigError, VERSION};
use crate::expr_io::{ProofTrace, TraceEnd, TraceHeader, TraceStep};
use crate::hypergraph::rules::{apply_action, legal_actions};
use crate::hypergraph::{Action, MathState, RuleLibrary};
use crate::ideal::{solve_witness_capped, IdealError, Polynomial, witness::DEFAULT_BASIS_CAP};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub gamma: f64,
    pub lambda_cost: f64,
    pub r_success: f64,
    pub eps_tol: f64,
    pub t_max: usize,
    pub clip: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_episodes: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Cap on witness degree when scoring states; small caps keep episodes
    /// cheap and are exact for linear facts.
    pub witness_degree_cap: u32,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.99,
            lambda_cost: 0.01,
            r_success: 1.0,
            eps_tol: 1e-6,
            t_max: 30,
            clip: 0.2,
            lr: 3e-3,
            epochs: 4,
            batch_episodes: 8,
            value_coef: 0.5,
            entropy_coef: 0.0,
            witness_degree_cap: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn from_config(c: &Config, seed: u64) -> Result<Self, ConfigError> {
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            gamma: c.get("train.gamma", d.gamma)?,
            lambda_cost: c.get("train.lambda_cost", d.lambda_cost)?,
            r_success: c.get("train.r_success", d.r_success)?,
            eps_tol: c.get("train.eps_tol", d.eps_tol)?,
            t_max: c.get("train.t_max", d.t_max)?,
            clip: c.get("train.clip", d.clip)?,
            lr: c.get("train.lr", d.lr)?,
            epochs: c.get("train.epochs", d.epochs)?,
            batch_episodes: c.get("train.batch_episodes", d.batch_episodes)?,
            value_coef: c.get("train.value_coef", d.value_coef)?,
            entropy_coef: c.get("train.entropy_coef", d.entropy_coef)?,
            witness_degree_cap: c.get("train.witness_degree_cap", d.witness_degree_cap)?,
            seed,
        };
        let bad = |m: &str| ConfigError {
            line: None,
            message: m.to_string(),
        };
        if !(cfg.gamma > 0.0 && cfg.gamma <= 1.0) {
            return Err(bad("train.gamma must lie in (0, 1]"));
        }
        if !(cfg.clip > 0.0 && cfg.clip < 1.0) {
            return Err(bad("train.clip must lie in (0, 1)"));
        }
        if cfg.lr <= 0.0 || cfg.eps_tol <= 0.0 || cfg.batch_episodes == 0 {
            return Err(bad("train.lr, train.eps_tol and train.batch_episodes must be positive"));
        }
        Ok(cfg)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EpisodeError {
    #[error("{0}")]
    Lift(#[from] LiftError),
    #[error("{0}")]
    Ideal(#[from] IdealError),
    #[error("{0}")]
    Brain(#[from] BrainError),
}

/// A named problem state whose goal edge is set.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub name: String,
    pub state: MathState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Index of the pre-action state in [`Episode::states`]; the next state
    /// is at `t + 1`.
    pub t: usize,
    pub legal: Vec<Action>,
    pub action: Action,
    pub reward: f64,
    pub e_t: f64,
    pub e_next: f64,
    pub done: bool,
    pub success: bool,
    /// Log-probability and value estimate under the acting parameters.
    pub old_logp: f64,
    pub old_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub states: Vec<MathState>,
    pub transitions: Vec<Transition>,
    pub trace: ProofTrace,
}

impl Episode {
    pub fn success(&self) -> bool {
        self.trace.end.success
    }

    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }
}

/// How actions are chosen during an episode.
#[derive(Debug, Clone, Copy)]
pub enum Actor<'a> {
    Sample(&'a BrainParams),
    Greedy(&'a BrainParams),
    Uniform,
}

impl Actor<'_> {
    pub fn method(&self) -> &'static str {
        match self {
            Actor::Sample(_) => "sample",
            Actor::Greedy(_) => "greedy",
            Actor::Uniform => "uniform",
        }
    }
}

/// Residual energy of `h` against `facts` with witness degree at most `cap`.
pub fn goal_residual(h: &Polynomial, facts: &[Polynomial], cap: u32) -> Result<f64, IdealError> {
    let max_f = facts.iter().map(Polynomial::degree).max().unwrap_or(0);
    let bound = cap.min(h.degree() + max_f + 1);
    Ok(solve_witness_capped(h, facts, bound, DEFAULT_BASIS_CAP)?.energy)
}

/// Identification written into trace headers.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub seed: u64,
    pub config_hash: String,
}

pub fn run_episode(
    task: &Task,
    actor: Actor<'_>,
    lib: &RuleLibrary,
    cfg: &TrainConfig,
    meta: &TraceMeta,
    rng: &mut ChaCha8Rng,
) -> Result<Episode, EpisodeError> {
    let lifted = algebraic_lift(&task.state)?;
    let h = lifted.goal.clone();
    let mut polys = lifted.polys();
    // No witness exists before the first action.
    let e0 = h.norm_sq();
    let header = TraceHeader {
        problem: task.name.clone(),
        seed: meta.seed,
        method: actor.method().into(),
        config_hash: meta.config_hash.clone(),
        version: VERSION.into(),
        e0,
    };
    let mut states = vec![task.state.clone()];
    let mut transitions = Vec::new();
    let mut steps = Vec::new();
    let mut e = e0;
    let mut success = e0 < cfg.eps_tol;
    let mut stuck = false;
    for t in 0..cfg.t_max {
        if success {
            break;
        }
        let state = &states[t];
        let legal = legal_actions(state, lib);
        if legal.is_empty() {
            stuck = true;
            break;
        }
        let (action, old_logp, old_value) = match actor {
            Actor::Uniform => {
                let a = legal[rng.gen_range(0..legal.len())].clone();
                (a, -(legal.len() as f64).ln(), 0.0)
            }
            Actor::Sample(p) | Actor::Greedy(p) => {
                let a = match actor {
                    Actor::Sample(_) => brain::choose_action(state, p, &legal, Some(&mut *rng))?,
                    _ => brain::choose_action::<ChaCha8Rng>(state, p, &legal, None)?,
                };
                let mut sink = Vec::new();
                let ev = if matches!(actor, Actor::Sample(_)) {
                    sink.resize(p.len(), 0.0);
                    Some(brain::accumulate_gradient(state, p, &legal, Some(&a), Default::default(), &mut sink)?)
                } else {
                    None
                };
                (a, ev.map_or(0.0, |x| x.logp), ev.map_or(0.0, |x| x.value))
            }
        };
        let next = apply_action(state, &action, lib).expect("legal actions apply");
        // Re-lift from the whole fact set; a state that no longer lifts
        // keeps the previous basis.
        let mut e_next = e;
        if let Ok(l) = algebraic_lift(&next) {
            let fresh = l.polys();
            if fresh != polys {
                polys = fresh;
                e_next = goal_residual(&h, &polys, cfg.witness_degree_cap)?.min(e);
            }
        }
        success = e_next < cfg.eps_tol;
        let done = success || t + 1 == cfg.t_max;
        let reward = (e - e_next) - cfg.lambda_cost + if success { cfg.r_success } else { 0.0 };
        steps.push(TraceStep {
            t,
            action: action.to_string(),
            e: e_next,
            r: reward,
        });
        transitions.push(Transition {
            t,
            legal,
            action,
            reward,
            e_t: e,
            e_next,
            done,
            success,
            old_logp,
            old_value,
        });
        states.push(next);
        e = e_next;
    }
    let end = TraceEnd {
        done: success || stuck || transitions.len() == cfg.t_max,
        e_final: e,
        success,
    };
    Ok(Episode {
        states,
        transitions,
        trace: ProofTrace { header, steps, end },
    })
}
