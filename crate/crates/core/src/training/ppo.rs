//! Clipped-surrogate policy update and the Adam optimizer it uses.

use super::episode::{Episode, TrainConfig};
use crate::brain::{self, BrainError, BrainParams, Objective};
use crate::brain::params::CheckpointError;

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One ascent step along `grad`.
    pub fn ascend(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t as i32);
        let c2 = 1.0 - Self::B2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] += lr * mh / (vh.sqrt() + Self::EPS);
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 16 * self.m.len());
        out.extend_from_slice(&self.t.to_le_bytes());
        out.extend_from_slice(&(self.m.len() as u64).to_le_bytes());
        for x in self.m.iter().chain(&self.v) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize), CheckpointError> {
        let mut r = crate::brain::params::Reader { b: bytes, at: 0 };
        let t = r.u64()?;
        let n = r.u64()? as usize;
        if n.checked_mul(16).is_none_or(|need| need > bytes.len()) {
            return Err(CheckpointError::Malformed);
        }
        let mut a = Adam::new(n);
        a.t = t;
        for i in 0..n {
            a.m[i] = r.f64()?;
        }
        for i in 0..n {
            a.v[i] = r.f64()?;
        }
        Ok((a, r.at))
    }
}

/// Discounted returns `G_t = r_t + γ G_{t+1}` within one episode.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for i in (0..rewards.len()).rev() {
        acc = rewards[i] + gamma * acc;
        out[i] = acc;
    }
    out
}

/// One training sample drawn from a recorded transition.
#[derive(Debug, Clone)]
pub struct Sample<'a> {
    pub state: &'a crate::hypergraph::MathState,
    pub legal: &'a [crate::hypergraph::Action],
    pub action: &'a crate::hypergraph::Action,
    pub old_logp: f64,
    pub advantage: f64,
    /// Value regression target, clamped into the value head's range.
    pub value_target: f64,
}

pub fn samples<'a>(episodes: &'a [Episode], gamma: f64) -> Vec<Sample<'a>> {
    let mut out = Vec::new();
    for ep in episodes {
        let rewards: Vec<f64> = ep.transitions.iter().map(|t| t.reward).collect();
        let g = discounted_returns(&rewards, gamma);
        for (tr, ret) in ep.transitions.iter().zip(g) {
            out.push(Sample {
                state: &ep.states[tr.t],
                legal: &tr.legal,
                action: &tr.action,
                old_logp: tr.old_logp,
                advantage: ret - tr.old_value,
                value_target: ret.clamp(0.0, 1.0),
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub samples: usize,
    pub clipped: usize,
    pub mean_surrogate: f64,
    pub mean_value_loss: f64,
}

/// Gradient of the batch objective
/// `mean(min(ρA, clip(ρ)A)) − c_v·mean((V − target)²) + c_e·mean(H_op)`.
pub fn objective_gradient(
    batch: &[Sample<'_>],
    params: &BrainParams,
    cfg: &TrainConfig,
    grad: &mut [f64],
) -> Result<UpdateStats, BrainError> {
    let inv = 1.0 / batch.len().max(1) as f64;
    let mut stats = UpdateStats {
        samples: batch.len(),
        clipped: 0,
        mean_surrogate: 0.0,
        mean_value_loss: 0.0,
    };
    for s in batch {
        // First pass evaluates the current ratio without accumulating.
        let mut sink = Vec::new();
        let probe = brain::accumulate_gradient(s.state, params, s.legal, Some(s.action), Objective::default(), &mut sink)?;
        let ratio = (probe.logp - s.old_logp).exp();
        let a = s.advantage;
        let clipped = (a > 0.0 && ratio > 1.0 + cfg.clip) || (a < 0.0 && ratio < 1.0 - cfg.clip);
        let surrogate = (ratio * a).min(ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * a);
        stats.mean_surrogate += surrogate * inv;
        stats.mean_value_loss += (probe.value - s.value_target).powi(2) * inv;
        if clipped {
            stats.clipped += 1;
        }
        let obj = Objective {
            // d(ρA)/dθ = ρA ∇log π; zero on the clipped plateau.
            logp: if clipped { 0.0 } else { ratio * a * inv },
            value: -cfg.value_coef * 2.0 * (probe.value - s.value_target) * inv,
            op_entropy: cfg.entropy_coef * inv,
        };
        brain::accumulate_gradient(s.state, params, s.legal, Some(s.action), obj, grad)?;
    }
    Ok(stats)
}

/// Runs the configured number of epochs of clipped-surrogate ascent.
pub fn policy_update(
    episodes: &[Episode],
    params: &mut BrainParams,
    adam: &mut Adam,
    cfg: &TrainConfig,
) -> Result<Option<UpdateStats>, BrainError> {
    let batch = samples(episodes, cfg.gamma);
    if batch.is_empty() {
        return Ok(None);
    }
    let mut last = None;
    for _ in 0..cfg.epochs {
        let mut grad = vec![0.0; params.len()];
        let stats = objective_gradient(&batch, params, cfg, &mut grad)?;
        adam.ascend(&mut params.data, &grad, cfg.lr);
        last = Some(stats);
    }
    Ok(last)
}
