//! Operator head, autoregressive pointer head and value head.

use std::collections::BTreeMap;

use rand::Rng;

use super::encoder::{dot, encode_state, matvec, matvec_t_acc, outer_acc, softmax, Encoding};
use super::params::{BrainParams, MAX_SLOTS};
use super::BrainError;
use crate::hypergraph::{Action, EntityRef, MathState, RuleKind};

/// Distribution over a legal action set, factored as an operator choice
/// followed by one pointer choice per operand slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    /// Operators present in the legal set with their probabilities.
    pub operators: Vec<(RuleKind, f64)>,
    /// The legal actions, in the order given.
    pub actions: Vec<Action>,
    /// Probability of each legal action.
    pub probs: Vec<f64>,
}

impl ActionDistribution {
    pub fn prob(&self, action: &Action) -> f64 {
        self.actions
            .iter()
            .position(|a| a == action)
            .map_or(0.0, |i| self.probs[i])
    }

    pub fn operator_prob(&self, rule: RuleKind) -> f64 {
        self.operators
            .iter()
            .find(|(r, _)| *r == rule)
            .map_or(0.0, |x| x.1)
    }
}

/// Loss coefficients for one backward pass: the gradient accumulated is
/// `logp * ∇log π(a) + value * ∇V + op_entropy * ∇H(operator head)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Objective {
    pub logp: f64,
    pub value: f64,
    pub op_entropy: f64,
}

/// Scalars read off during a backward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluated {
    pub logp: f64,
    pub value: f64,
    pub op_entropy: f64,
}

pub(crate) struct Forward<'a> {
    pub params: &'a BrainParams,
    pub enc: Encoding,
    pub g: Vec<f64>,
    keys: Vec<Vec<f64>>,
}

impl<'a> Forward<'a> {
    pub fn new(state: &MathState, params: &'a BrainParams) -> Result<Self, BrainError> {
        let enc = encode_state(state, params)?;
        let g = enc.pooled();
        let d = params.cfg.d_model;
        let l = &params.layout;
        let keys = (0..enc.n)
            .map(|i| matvec(&params.data[l.ptr_k..l.ptr_k + d * d], enc.row(i), d))
            .collect();
        Ok(Forward { params, enc, g, keys })
    }

    fn d(&self) -> usize {
        self.params.cfg.d_model
    }

    pub fn value(&self) -> f64 {
        let l = &self.params.layout;
        let d = self.d();
        let pre = dot(&self.params.data[l.val_w..l.val_w + d], &self.g) + self.params.data[l.val_b];
        sigmoid(pre)
    }

    fn op_logits(&self, rules: &[RuleKind]) -> Vec<f64> {
        let l = &self.params.layout;
        let d = self.d();
        rules
            .iter()
            .map(|r| {
                let i = r.index();
                dot(&self.params.data[l.op_w + i * d..l.op_w + (i + 1) * d], &self.g) + self.params.data[l.op_b + i]
            })
            .collect()
    }

    fn slot_input(&self, rule: RuleKind, slot: usize, prefix: &[usize]) -> Vec<f64> {
        let l = &self.params.layout;
        let d = self.d();
        let off = l.slot + (rule.index() * MAX_SLOTS + slot) * d;
        let mut z: Vec<f64> = self.params.data[off..off + d]
            .iter()
            .zip(&self.g)
            .map(|(a, b)| a + b)
            .collect();
        for &p in prefix {
            for (a, b) in z.iter_mut().zip(self.enc.row(p)) {
                *a += b;
            }
        }
        z
    }

    /// Pointer probabilities over `candidates` (entity indices).
    fn pointer(&self, rule: RuleKind, slot: usize, prefix: &[usize], candidates: &[usize]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let l = &self.params.layout;
        let d = self.d();
        let z = self.slot_input(rule, slot, prefix);
        let q = matvec(&self.params.data[l.ptr_q..l.ptr_q + d * d], &z, d);
        let scale = 1.0 / (d as f64).sqrt();
        let scores: Vec<f64> = candidates.iter().map(|&c| dot(&q, &self.keys[c]) * scale).collect();
        (softmax(&scores), q, z)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Legal actions as entity indices, validated against the state.
fn index_actions(state: &MathState, legal: &[Action]) -> Result<Vec<(RuleKind, Vec<usize>)>, BrainError> {
    if legal.is_empty() {
        return Err(BrainError::EmptyLegalSet);
    }
    legal
        .iter()
        .map(|a| {
            if a.operands.len() > MAX_SLOTS || a.operands.len() != a.rule.arity() {
                return Err(BrainError::IllegalAction(a.to_string()));
            }
            let ops = a
                .operands
                .iter()
                .map(|&e| {
                    if state.contains(e) {
                        Ok(state.entity_index(e))
                    } else {
                        Err(BrainError::IllegalAction(a.to_string()))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((a.rule, ops))
        })
        .collect()
}

fn legal_rules(indexed: &[(RuleKind, Vec<usize>)]) -> Vec<RuleKind> {
    let mut rules: Vec<RuleKind> = indexed.iter().map(|a| a.0).collect();
    rules.sort_by_key(|r| r.index());
    rules.dedup();
    rules
}

/// Operands that extend `prefix` for `rule`, ascending and distinct.
fn candidates(indexed: &[(RuleKind, Vec<usize>)], rule: RuleKind, prefix: &[usize]) -> Vec<usize> {
    let mut c: Vec<usize> = indexed
        .iter()
        .filter(|(r, ops)| *r == rule && ops.len() > prefix.len() && ops[..prefix.len()] == *prefix)
        .map(|(_, ops)| ops[prefix.len()])
        .collect();
    c.sort_unstable();
    c.dedup();
    c
}

/// Every `(rule, prefix)` reachable in the legal set mapped to its
/// ascending distinct continuations.
fn candidate_map(indexed: &[(RuleKind, Vec<usize>)]) -> BTreeMap<(usize, Vec<usize>), Vec<usize>> {
    let mut map: BTreeMap<(usize, Vec<usize>), Vec<usize>> = BTreeMap::new();
    for (rule, ops) in indexed {
        for slot in 0..ops.len() {
            map.entry((rule.index(), ops[..slot].to_vec())).or_default().push(ops[slot]);
        }
    }
    for c in map.values_mut() {
        c.sort_unstable();
        c.dedup();
    }
    map
}

pub fn policy_distribution(
    state: &MathState,
    params: &BrainParams,
    legal: &[Action],
) -> Result<ActionDistribution, BrainError> {
    let indexed = index_actions(state, legal)?;
    let fwd = Forward::new(state, params)?;
    let rules = legal_rules(&indexed);
    let op_p = softmax(&fwd.op_logits(&rules));
    let trie = candidate_map(&indexed);
    let mut memo: BTreeMap<(usize, &[usize]), Vec<(usize, f64)>> = BTreeMap::new();
    let mut probs = Vec::with_capacity(indexed.len());
    for (rule, ops) in &indexed {
        let ri = rules.iter().position(|r| r == rule).expect("rule listed");
        let mut p = op_p[ri];
        for slot in 0..ops.len() {
            let prefix = &ops[..slot];
            let dist = memo.entry((rule.index(), prefix)).or_insert_with(|| {
                let cands = &trie[&(rule.index(), prefix.to_vec())];
                let (pp, _, _) = fwd.pointer(*rule, slot, prefix, cands);
                cands.iter().copied().zip(pp).collect()
            });
            p *= dist.iter().find(|(c, _)| *c == ops[slot]).map_or(0.0, |x| x.1);
        }
        probs.push(p);
    }
    Ok(ActionDistribution {
        operators: rules.into_iter().zip(op_p).collect(),
        actions: legal.to_vec(),
        probs,
    })
}

/// Pointer distribution of one slot given a rule and chosen prefix, as
/// `(entity, probability)`; every entity not listed has probability zero.
pub fn slot_distribution(
    state: &MathState,
    params: &BrainParams,
    legal: &[Action],
    rule: RuleKind,
    prefix: &[EntityRef],
) -> Result<Vec<(EntityRef, f64)>, BrainError> {
    let indexed = index_actions(state, legal)?;
    let fwd = Forward::new(state, params)?;
    let prefix: Vec<usize> = prefix.iter().map(|&e| state.entity_index(e)).collect();
    let cands = candidates(&indexed, rule, &prefix);
    if cands.is_empty() {
        return Ok(Vec::new());
    }
    let (p, _, _) = fwd.pointer(rule, prefix.len(), &prefix, &cands);
    Ok(cands.into_iter().map(|c| state.entity_at(c)).zip(p).collect())
}

/// Picks an action slot by slot, sampling from `rng` or taking the most
/// probable choice (lowest index on ties) when `rng` is `None`.
pub fn choose_action<R: Rng>(
    state: &MathState,
    params: &BrainParams,
    legal: &[Action],
    mut rng: Option<&mut R>,
) -> Result<Action, BrainError> {
    let indexed = index_actions(state, legal)?;
    let fwd = Forward::new(state, params)?;
    let rules = legal_rules(&indexed);
    let op_p = softmax(&fwd.op_logits(&rules));
    let mut pick = |p: &[f64]| -> usize {
        match rng.as_deref_mut() {
            Some(r) => {
                let u: f64 = r.gen();
                let mut acc = 0.0;
                for (i, x) in p.iter().enumerate() {
                    acc += x;
                    if u < acc {
                        return i;
                    }
                }
                p.len() - 1
            }
            None => {
                let mut best = 0;
                for (i, x) in p.iter().enumerate() {
                    if *x > p[best] {
                        best = i;
                    }
                }
                best
            }
        }
    };
    let rule = rules[pick(&op_p)];
    let mut prefix = Vec::new();
    for slot in 0..rule.arity() {
        let cands = candidates(&indexed, rule, &prefix);
        let (p, _, _) = fwd.pointer(rule, slot, &prefix, &cands);
        prefix.push(cands[pick(&p)]);
    }
    Ok(Action::new(rule, prefix.into_iter().map(|i| state.entity_at(i)).collect()))
}

/// Accumulates the gradient of the weighted objective into `grad` and
/// returns the evaluated scalars. `action` may be `None` when only value
/// and entropy terms are wanted.
pub fn accumulate_gradient(
    state: &MathState,
    params: &BrainParams,
    legal: &[Action],
    action: Option<&Action>,
    obj: Objective,
    grad: &mut [f64],
) -> Result<Evaluated, BrainError> {
    let d = params.cfg.d_model;
    let l = &params.layout;
    let w = &params.data;
    let fwd = Forward::new(state, params)?;
    let n = fwd.enc.n;
    let mut dh = vec![0.0; n * d];
    let mut dg = vec![0.0; d];
    let scale = 1.0 / (d as f64).sqrt();

    let value = fwd.value();
    if obj.value != 0.0 {
        let dpre = obj.value * value * (1.0 - value);
        for i in 0..d {
            grad[l.val_w + i] += dpre * fwd.g[i];
            dg[i] += dpre * w[l.val_w + i];
        }
        grad[l.val_b] += dpre;
    }

    let mut logp = 0.0;
    let mut entropy = 0.0;
    if action.is_some() || !legal.is_empty() {
        let indexed = index_actions(state, legal)?;
        let rules = legal_rules(&indexed);
        let op_p = softmax(&fwd.op_logits(&rules));
        entropy = -op_p.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>();
        let mut dlogit = vec![0.0; rules.len()];
        if obj.op_entropy != 0.0 {
            for (k, &p) in op_p.iter().enumerate() {
                if p > 0.0 {
                    dlogit[k] -= obj.op_entropy * p * (p.ln() + entropy);
                }
            }
        }
        if let Some(a) = action {
            let pos = legal
                .iter()
                .position(|x| x == a)
                .ok_or_else(|| BrainError::IllegalAction(a.to_string()))?;
            let (rule, ops) = &indexed[pos];
            let ri = rules.iter().position(|r| r == rule).expect("rule listed");
            logp += op_p[ri].ln();
            for (k, &p) in op_p.iter().enumerate() {
                dlogit[k] += obj.logp * ((k == ri) as u8 as f64 - p);
            }
            for slot in 0..ops.len() {
                let prefix = &ops[..slot];
                let cands = candidates(&indexed, *rule, prefix);
                let (p, q, z) = fwd.pointer(*rule, slot, prefix, &cands);
                let chosen = cands.iter().position(|&c| c == ops[slot]).expect("operand listed");
                logp += p[chosen].ln();
                if obj.logp == 0.0 {
                    continue;
                }
                let mut dq = vec![0.0; d];
                for (j, &c) in cands.iter().enumerate() {
                    let ds = obj.logp * ((j == chosen) as u8 as f64 - p[j]) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    for (a, b) in dq.iter_mut().zip(&fwd.keys[c]) {
                        *a += ds * b;
                    }
                    let dk: Vec<f64> = q.iter().map(|x| x * ds).collect();
                    outer_acc(&mut grad[l.ptr_k..l.ptr_k + d * d], &dk, fwd.enc.row(c), d);
                    matvec_t_acc(&w[l.ptr_k..l.ptr_k + d * d], &dk, &mut dh[c * d..(c + 1) * d], d);
                }
                outer_acc(&mut grad[l.ptr_q..l.ptr_q + d * d], &dq, &z, d);
                let mut dz = vec![0.0; d];
                matvec_t_acc(&w[l.ptr_q..l.ptr_q + d * d], &dq, &mut dz, d);
                let off = l.slot + (rule.index() * MAX_SLOTS + slot) * d;
                for i in 0..d {
                    grad[off + i] += dz[i];
                    dg[i] += dz[i];
                }
                for &pi in prefix {
                    for (a, b) in dh[pi * d..(pi + 1) * d].iter_mut().zip(&dz) {
                        *a += b;
                    }
                }
            }
        }
        for (k, r) in rules.iter().enumerate() {
            let i = r.index();
            if dlogit[k] == 0.0 {
                continue;
            }
            grad[l.op_b + i] += dlogit[k];
            for j in 0..d {
                grad[l.op_w + i * d + j] += dlogit[k] * fwd.g[j];
                dg[j] += dlogit[k] * w[l.op_w + i * d + j];
            }
        }
    }

    let inv = 1.0 / n.max(1) as f64;
    for i in 0..n {
        for (a, b) in dh[i * d..(i + 1) * d].iter_mut().zip(&dg) {
            *a += b * inv;
        }
    }
    if dh.iter().any(|&x| x != 0.0) {
        fwd.enc.backward(params, dh, grad);
    }
    Ok(Evaluated {
        logp,
        value,
        op_entropy: entropy,
    })
}
