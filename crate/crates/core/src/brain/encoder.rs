//! Two-phase ordered attention over the hypergraph.
//!
//! Each layer first lets every edge attend over its relation (arguments in
//! order, positional encodings added to keys and values), then lets every
//! entity attend over the parent edges it appears in, with the encoding of
//! its position inside that parent. Both phases use `LN(h + Attn(h, ...))`.

use super::params::{BrainParams, PhaseLayout};
use super::BrainError;
use crate::hypergraph::{EntityRef, MathState, NodeType};

/// Sinusoidal encoding of argument position `pos`.
pub fn positional_encoding(pos: usize, d: usize) -> Vec<f64> {
    (0..d)
        .map(|i| {
            let freq = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let a = pos as f64 * freq;
            if i % 2 == 0 {
                a.sin()
            } else {
                a.cos()
            }
        })
        .collect()
}

pub(crate) fn matvec(w: &[f64], x: &[f64], d: usize) -> Vec<f64> {
    (0..d)
        .map(|i| w[i * d..(i + 1) * d].iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// `out += Wᵀ y`.
pub(crate) fn matvec_t_acc(w: &[f64], y: &[f64], out: &mut [f64], d: usize) {
    for (i, &yi) in y.iter().enumerate() {
        if yi == 0.0 {
            continue;
        }
        for (o, &wij) in out.iter_mut().zip(&w[i * d..(i + 1) * d]) {
            *o += wij * yi;
        }
    }
}

/// `dW += y xᵀ`.
pub(crate) fn outer_acc(dw: &mut [f64], y: &[f64], x: &[f64], d: usize) {
    for (i, &yi) in y.iter().enumerate() {
        if yi == 0.0 {
            continue;
        }
        for (g, &xj) in dw[i * d..(i + 1) * d].iter_mut().zip(x) {
            *g += yi * xj;
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
struct LnCache {
    xhat: Vec<f64>,
    rstd: f64,
}

fn layer_norm(z: &[f64], gain: &[f64], bias: &[f64]) -> (Vec<f64>, LnCache) {
    let d = z.len() as f64;
    let mean = z.iter().sum::<f64>() / d;
    let var = z.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / d;
    let rstd = 1.0 / (var + LN_EPS).sqrt();
    let xhat: Vec<f64> = z.iter().map(|x| (x - mean) * rstd).collect();
    let out = xhat.iter().zip(gain).zip(bias).map(|((x, g), b)| x * g + b).collect();
    (out, LnCache { xhat, rstd })
}

/// Returns dz; accumulates gain and bias gradients.
fn layer_norm_back(c: &LnCache, gain: &[f64], dout: &[f64], dgain: &mut [f64], dbias: &mut [f64]) -> Vec<f64> {
    let d = dout.len() as f64;
    let mut dxhat = vec![0.0; dout.len()];
    for i in 0..dout.len() {
        dgain[i] += dout[i] * c.xhat[i];
        dbias[i] += dout[i];
        dxhat[i] = dout[i] * gain[i];
    }
    let m1 = dxhat.iter().sum::<f64>() / d;
    let m2 = dxhat.iter().zip(&c.xhat).map(|(a, b)| a * b).sum::<f64>() / d;
    dxhat
        .iter()
        .zip(&c.xhat)
        .map(|(dx, x)| c.rstd * (dx - m1 - x * m2))
        .collect()
}

/// One attention update of a target entity over ordered sources.
#[derive(Debug, Clone)]
struct AttnCache {
    target: usize,
    sources: Vec<(usize, usize)>,
    ht: Vec<f64>,
    u: Vec<Vec<f64>>,
    q: Vec<f64>,
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    a: Vec<f64>,
    c: Vec<f64>,
    ln: LnCache,
}

#[derive(Debug, Clone)]
struct PhaseCache {
    updates: Vec<AttnCache>,
}

/// Forward pass with everything the backward pass needs.
#[derive(Debug, Clone)]
pub struct Encoding {
    pub n: usize,
    pub d: usize,
    /// Final entity embeddings, row `entity_index`.
    pub h: Vec<f64>,
    tokens: Vec<Vec<usize>>,
    ln_in: Vec<LnCache>,
    phases: Vec<[PhaseCache; 2]>,
}

impl Encoding {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.h[i * self.d..(i + 1) * self.d]
    }

    pub fn get(&self, state: &MathState, e: EntityRef) -> &[f64] {
        self.row(state.entity_index(e))
    }

    /// Mean over all entity embeddings.
    pub fn pooled(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.d];
        for i in 0..self.n {
            for (a, b) in g.iter_mut().zip(self.row(i)) {
                *a += b;
            }
        }
        let inv = 1.0 / self.n.max(1) as f64;
        g.iter_mut().for_each(|x| *x *= inv);
        g
    }

    /// Reverse pass from gradients on the final embeddings into `grad`.
    pub fn backward(&self, params: &BrainParams, dh: Vec<f64>, grad: &mut [f64]) {
        let d = self.d;
        let l = &params.layout;
        let mut dh = dh;
        for (li, caches) in self.phases.iter().enumerate().rev() {
            for ph in (0..2).rev() {
                dh = phase_backward(params, &l.layers[li].phase[ph], &caches[ph], dh, grad, d);
            }
        }
        let (gain, rest) = grad[l.ln_in..l.ln_in + 2 * d].split_at_mut(d);
        let mut dgain = gain.to_vec();
        let mut dbias = rest.to_vec();
        let g = &params.data[l.ln_in..l.ln_in + d];
        let mut dx = Vec::with_capacity(self.n);
        for i in 0..self.n {
            dx.push(layer_norm_back(&self.ln_in[i], g, &dh[i * d..(i + 1) * d], &mut dgain, &mut dbias));
        }
        grad[l.ln_in..l.ln_in + d].copy_from_slice(&dgain);
        grad[l.ln_in + d..l.ln_in + 2 * d].copy_from_slice(&dbias);
        for (i, toks) in self.tokens.iter().enumerate() {
            for &t in toks {
                for (g, x) in grad[l.embed + t * d..l.embed + (t + 1) * d].iter_mut().zip(&dx[i]) {
                    *g += x;
                }
            }
        }
    }
}

fn entity_tokens(state: &MathState, params: &BrainParams, e: EntityRef) -> Vec<usize> {
    match e {
        EntityRef::Node(id) => {
            let n = state.node(id).expect("entity in state");
            let head = match n.node_type {
                NodeType::CompoundTerm => {
                    let def = state.defining_edge(id).and_then(|x| state.edge(x)).expect("compound defined");
                    format!("term:{}", def.operator.name())
                }
                _ => format!("sym:{}", n.label),
            };
            vec![params.token(&head), params.token(&format!("sort:{:?}", n.sort))]
        }
        EntityRef::Edge(id) => {
            let edge = state.edge(id).expect("entity in state");
            let mut t = vec![params.token(&format!("edge:{}", edge.operator.name()))];
            if state.is_fact(id) {
                t.push(params.token("flag:fact"));
            }
            if state.goal() == Some(id) {
                t.push(params.token("flag:goal"));
            }
            t
        }
    }
}

fn attend(
    params: &BrainParams,
    ph: &PhaseLayout,
    h: &[f64],
    target: usize,
    sources: Vec<(usize, usize)>,
    pe: &[Vec<f64>],
    d: usize,
) -> (Vec<f64>, AttnCache) {
    let w = &params.data;
    let ht = &h[target * d..(target + 1) * d];
    let q = matvec(&w[ph.q..ph.q + d * d], ht, d);
    let scale = 1.0 / (d as f64).sqrt();
    let mut u = Vec::with_capacity(sources.len());
    let mut k = Vec::with_capacity(sources.len());
    let mut v = Vec::with_capacity(sources.len());
    let mut scores = Vec::with_capacity(sources.len());
    for &(s, pos) in &sources {
        let us: Vec<f64> = h[s * d..(s + 1) * d].iter().zip(&pe[pos]).map(|(a, b)| a + b).collect();
        let ks = matvec(&w[ph.k..ph.k + d * d], &us, d);
        scores.push(dot(&q, &ks) * scale);
        v.push(matvec(&w[ph.v..ph.v + d * d], &us, d));
        k.push(ks);
        u.push(us);
    }
    let a = softmax(&scores);
    let mut c = vec![0.0; d];
    for (aj, vj) in a.iter().zip(&v) {
        for (ci, x) in c.iter_mut().zip(vj) {
            *ci += aj * x;
        }
    }
    let m = matvec(&w[ph.o..ph.o + d * d], &c, d);
    let z: Vec<f64> = ht.iter().zip(&m).map(|(a, b)| a + b).collect();
    let (out, ln) = layer_norm(&z, &w[ph.ln..ph.ln + d], &w[ph.ln + d..ph.ln + 2 * d]);
    (
        out,
        AttnCache {
            target,
            sources,
            ht: ht.to_vec(),
            u,
            q,
            k,
            v,
            a,
            c,
            ln,
        },
    )
}

pub(crate) fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn phase_backward(
    params: &BrainParams,
    ph: &PhaseLayout,
    cache: &PhaseCache,
    dout: Vec<f64>,
    grad: &mut [f64],
    d: usize,
) -> Vec<f64> {
    let w = &params.data;
    let scale = 1.0 / (d as f64).sqrt();
    // Entities that were not updated pass their gradient straight through.
    let mut din = dout.clone();
    for up in &cache.updates {
        din[up.target * d..(up.target + 1) * d].fill(0.0);
    }
    let mut dgain = vec![0.0; d];
    let mut dbias = vec![0.0; d];
    for up in &cache.updates {
        let t = up.target;
        let dz = layer_norm_back(&up.ln, &w[ph.ln..ph.ln + d], &dout[t * d..(t + 1) * d], &mut dgain, &mut dbias);
        for (x, y) in din[t * d..(t + 1) * d].iter_mut().zip(&dz) {
            *x += y;
        }
        outer_acc(&mut grad[ph.o..ph.o + d * d], &dz, &up.c, d);
        let mut dc = vec![0.0; d];
        matvec_t_acc(&w[ph.o..ph.o + d * d], &dz, &mut dc, d);
        let da: Vec<f64> = up.v.iter().map(|vj| dot(&dc, vj)).collect();
        let mean: f64 = up.a.iter().zip(&da).map(|(a, b)| a * b).sum();
        let mut dq = vec![0.0; d];
        for j in 0..up.sources.len() {
            let ds = up.a[j] * (da[j] - mean) * scale;
            let dv: Vec<f64> = dc.iter().map(|x| x * up.a[j]).collect();
            let dk: Vec<f64> = up.q.iter().map(|x| x * ds).collect();
            for (a, b) in dq.iter_mut().zip(&up.k[j]) {
                *a += ds * b;
            }
            outer_acc(&mut grad[ph.k..ph.k + d * d], &dk, &up.u[j], d);
            outer_acc(&mut grad[ph.v..ph.v + d * d], &dv, &up.u[j], d);
            let mut du = vec![0.0; d];
            matvec_t_acc(&w[ph.k..ph.k + d * d], &dk, &mut du, d);
            matvec_t_acc(&w[ph.v..ph.v + d * d], &dv, &mut du, d);
            let s = up.sources[j].0;
            for (x, y) in din[s * d..(s + 1) * d].iter_mut().zip(&du) {
                *x += y;
            }
        }
        outer_acc(&mut grad[ph.q..ph.q + d * d], &dq, &up.ht, d);
        matvec_t_acc(&w[ph.q..ph.q + d * d], &dq, &mut din[t * d..(t + 1) * d], d);
    }
    for i in 0..d {
        grad[ph.ln + i] += dgain[i];
        grad[ph.ln + d + i] += dbias[i];
    }
    din
}

fn run_phase(
    params: &BrainParams,
    ph: &PhaseLayout,
    h: &[f64],
    plan: &[(usize, Vec<(usize, usize)>)],
    pe: &[Vec<f64>],
    d: usize,
) -> (Vec<f64>, PhaseCache) {
    let mut out = h.to_vec();
    let mut updates = Vec::with_capacity(plan.len());
    for (target, sources) in plan {
        let (row, cache) = attend(params, ph, h, *target, sources.clone(), pe, d);
        out[target * d..(target + 1) * d].copy_from_slice(&row);
        updates.push(cache);
    }
    (out, PhaseCache { updates })
}

/// Runs the encoder on `state`.
pub fn encode_state(state: &MathState, params: &BrainParams) -> Result<Encoding, BrainError> {
    let d = params.cfg.d_model;
    let n = state.entity_count();
    let l = &params.layout;
    let max_arity = params.cfg.max_arity;
    let pe: Vec<Vec<f64>> = (0..max_arity).map(|p| positional_encoding(p, d)).collect();

    // Composition: each edge over its relation in order.
    let mut compose = Vec::with_capacity(state.edges().len());
    // Contextualization: each entity over the parents it appears in, tagged
    // with its first position inside each parent.
    let mut context: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for e in state.edges() {
        let rel = e.relation();
        if rel.len() > max_arity {
            return Err(BrainError::Arity {
                edge: e.id,
                arity: rel.len(),
                max: max_arity,
            });
        }
        let ei = state.entity_index(EntityRef::Edge(e.id));
        let srcs: Vec<(usize, usize)> = rel.iter().enumerate().map(|(p, r)| (state.entity_index(*r), p)).collect();
        for (p, r) in rel.iter().enumerate() {
            let ri = state.entity_index(*r);
            if !context[ri].iter().any(|&(pi, _)| pi == ei) {
                context[ri].push((ei, p));
            }
        }
        compose.push((ei, srcs));
    }
    let context: Vec<(usize, Vec<(usize, usize)>)> =
        context.into_iter().enumerate().filter(|(_, s)| !s.is_empty()).collect();

    let mut tokens = Vec::with_capacity(n);
    let mut h = vec![0.0; n * d];
    let mut ln_in = Vec::with_capacity(n);
    let (g, b) = (&params.data[l.ln_in..l.ln_in + d], &params.data[l.ln_in + d..l.ln_in + 2 * d]);
    for i in 0..n {
        let toks = entity_tokens(state, params, state.entity_at(i));
        let mut x = vec![0.0; d];
        for &t in &toks {
            for (a, w) in x.iter_mut().zip(&params.data[l.embed + t * d..l.embed + (t + 1) * d]) {
                *a += w;
            }
        }
        let (row, c) = layer_norm(&x, g, b);
        h[i * d..(i + 1) * d].copy_from_slice(&row);
        ln_in.push(c);
        tokens.push(toks);
    }

    let mut phases = Vec::with_capacity(l.layers.len());
    for layer in &l.layers {
        let (half, c1) = run_phase(params, &layer.phase[0], &h, &compose, &pe, d);
        let (full, c2) = run_phase(params, &layer.phase[1], &half, &context, &pe, d);
        h = full;
        phases.push([c1, c2]);
    }
    Ok(Encoding {
        n,
        d,
        h,
        tokens,
        ln_in,
        phases,
    })
}
