//! Energy-guided policy training, behavior cloning, and the algebraic lift
//! they share.

pub mod bc;
pub mod episode;
pub mod family;
pub mod lift;
pub mod ppo;

use serde::{Deserialize, Serialize};

use crate::brain::params::{CheckpointError, Reader};
use crate::brain::BrainParams;
use crate::config::{stream, VERSION};
use crate::hypergraph::RuleLibrary;

pub use bc::{behavior_clone, cross_entropy, replay, BcConfig, BcError, BcReport, ExpertTrace};
pub use episode::{goal_residual, run_episode, Actor, Episode, EpisodeError, Task, TraceMeta, TrainConfig, Transition};
pub use family::{ladder, Ladder, LadderConfig, LABELS};
pub use lift::{algebraic_lift, LiftError, Lifted};
pub use ppo::{discounted_returns, policy_update, Adam, UpdateStats};

pub const TRAINER_MAGIC: &[u8; 8] = b"MTHSTRN1";
pub const TRAINER_VERSION: u32 = 1;

/// Everything needed to continue a training run exactly where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct Trainer {
    pub params: BrainParams,
    pub adam: Adam,
    pub episodes_done: u64,
    pub seed: u64,
    pub config_hash: String,
}

/// One metrics record per update batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMetrics {
    pub episode: u64,
    pub window: usize,
    pub success_rate: f64,
    pub mean_return: f64,
    pub mean_steps: f64,
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
}

impl Trainer {
    pub fn new(params: BrainParams, seed: u64, config_hash: &str) -> Self {
        Trainer {
            adam: Adam::new(params.len()),
            params,
            episodes_done: 0,
            seed,
            config_hash: config_hash.to_string(),
        }
    }

    /// Runs `episodes` more episodes in batches, updating after each batch.
    /// Episode `i` draws its task from `tasks(i)` and its actions from the
    /// seeded stream for index `i`, so a resumed run replays identically.
    pub fn train(
        &mut self,
        episodes: u64,
        tasks: &dyn Fn(u64) -> Task,
        lib: &RuleLibrary,
        cfg: &TrainConfig,
        mut on_batch: impl FnMut(&BatchMetrics, &[Episode]),
    ) -> Result<Vec<BatchMetrics>, EpisodeError> {
        let meta = TraceMeta {
            seed: self.seed,
            config_hash: self.config_hash.clone(),
        };
        let end = self.episodes_done + episodes;
        let mut metrics = Vec::new();
        while self.episodes_done < end {
            let n = (cfg.batch_episodes as u64).min(end - self.episodes_done);
            let mut batch = Vec::with_capacity(n as usize);
            for i in self.episodes_done..self.episodes_done + n {
                let task = tasks(i);
                let mut rng = stream(self.seed, "episode", i);
                batch.push(run_episode(&task, Actor::Sample(&self.params), lib, cfg, &meta, &mut rng)?);
            }
            policy_update(&batch, &mut self.params, &mut self.adam, cfg)?;
            self.episodes_done += n;
            let m = BatchMetrics {
                episode: self.episodes_done,
                window: batch.len(),
                success_rate: batch.iter().filter(|e| e.success()).count() as f64 / batch.len() as f64,
                mean_return: batch.iter().map(Episode::total_reward).sum::<f64>() / batch.len() as f64,
                mean_steps: batch.iter().map(|e| e.transitions.len() as f64).sum::<f64>() / batch.len() as f64,
                seed: self.seed,
                config_hash: self.config_hash.clone(),
                version: VERSION.to_string(),
            };
            on_batch(&m, &batch);
            metrics.push(m);
        }
        Ok(metrics)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(TRAINER_MAGIC);
        out.extend_from_slice(&TRAINER_VERSION.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.episodes_done.to_le_bytes());
        out.extend_from_slice(&(self.config_hash.len() as u32).to_le_bytes());
        out.extend_from_slice(self.config_hash.as_bytes());
        out.extend_from_slice(&(VERSION.len() as u32).to_le_bytes());
        out.extend_from_slice(VERSION.as_bytes());
        out.extend_from_slice(&self.params.to_bytes());
        out.extend_from_slice(&self.adam.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { b: bytes, at: 0 };
        if r.take(8)? != TRAINER_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let v = r.u32()?;
        if v != TRAINER_VERSION {
            return Err(CheckpointError::Version(v));
        }
        let seed = r.u64()?;
        let episodes_done = r.u64()?;
        let n = r.u32()? as usize;
        let config_hash = String::from_utf8(r.take(n)?.to_vec()).map_err(|_| CheckpointError::Malformed)?;
        let n = r.u32()? as usize;
        r.take(n)?;
        let (params, used) = BrainParams::from_bytes(&bytes[r.at..])?;
        r.at += used;
        let (adam, used) = Adam::from_bytes(&bytes[r.at..])?;
        if adam.m.len() != params.len() || r.at + used != bytes.len() {
            return Err(CheckpointError::Malformed);
        }
        Ok(Trainer {
            params,
            adam,
            episodes_done,
            seed,
            config_hash,
        })
    }
}

/// Fraction of tasks solved within the step budget.
pub fn success_rate(
    tasks: &[Task],
    actor: Actor<'_>,
    lib: &RuleLibrary,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<f64, EpisodeError> {
    if tasks.is_empty() {
        return Ok(0.0);
    }
    let meta = TraceMeta {
        seed,
        config_hash: String::new(),
    };
    let mut wins = 0;
    for (i, t) in tasks.iter().enumerate() {
        let mut rng = stream(seed, "evaluate", i as u64);
        if run_episode(t, actor, lib, cfg, &meta, &mut rng)?.success() {
            wins += 1;
        }
    }
    Ok(wins as f64 / tasks.len() as f64)
}
