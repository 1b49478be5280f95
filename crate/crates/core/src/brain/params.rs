//! Network parameters: one flat vector with named views.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::hypergraph::{Operator, RuleKind, Sort};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MTHSBRN1";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const MAX_SLOTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BrainConfig {
    pub d_model: usize,
    pub layers: usize,
    pub max_arity: usize,
}

impl Default for BrainConfig {
    fn default() -> Self {
        BrainConfig {
            d_model: 32,
            layers: 2,
            max_arity: 8,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckpointError {
    #[error("not a parameter checkpoint")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("truncated or malformed checkpoint")]
    Malformed,
}

/// Offsets of each parameter block inside the flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub embed: usize,
    pub ln_in: usize,
    pub layers: Vec<LayerLayout>,
    pub op_w: usize,
    pub op_b: usize,
    pub slot: usize,
    pub ptr_q: usize,
    pub ptr_k: usize,
    pub val_w: usize,
    pub val_b: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerLayout {
    /// Query, key, value, output projections and layer norm of the
    /// composition phase, then the same for contextualization.
    pub phase: [PhaseLayout; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseLayout {
    pub q: usize,
    pub k: usize,
    pub v: usize,
    pub o: usize,
    /// Gain followed by bias.
    pub ln: usize,
}

impl Layout {
    fn new(cfg: &BrainConfig, vocab: usize) -> Self {
        let d = cfg.d_model;
        let mut at = 0;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let embed = take(vocab * d);
        let ln_in = take(2 * d);
        let layers = (0..cfg.layers)
            .map(|_| {
                let mut phase = || PhaseLayout {
                    q: take(d * d),
                    k: take(d * d),
                    v: take(d * d),
                    o: take(d * d),
                    ln: take(2 * d),
                };
                LayerLayout {
                    phase: [phase(), phase()],
                }
            })
            .collect();
        let r = RuleKind::ALL.len();
        let op_w = take(r * d);
        let op_b = take(r);
        let slot = take(r * MAX_SLOTS * d);
        let ptr_q = take(d * d);
        let ptr_k = take(d * d);
        let val_w = take(d);
        let val_b = take(1);
        Layout {
            embed,
            ln_in,
            layers,
            op_w,
            op_b,
            slot,
            ptr_q,
            ptr_k,
            val_w,
            val_b,
            total: at,
        }
    }
}

/// Structural tokens shared by every vocabulary.
pub fn structural_tokens() -> Vec<String> {
    let mut t = vec!["oov".to_string(), "flag:fact".into(), "flag:goal".into()];
    for s in [Sort::Scalar, Sort::Matrix, Sort::Point, Sort::Line] {
        t.push(format!("sort:{s:?}"));
    }
    for op in Operator::ALL {
        if op.edge_type() == crate::hypergraph::EdgeType::Constructor {
            t.push(format!("term:{}", op.name()));
        }
    }
    for op in Operator::ALL {
        t.push(format!("edge:{}", op.name()));
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrainParams {
    pub cfg: BrainConfig,
    /// Token strings; leaf labels appear as `sym:<label>`.
    pub symbols: Vec<String>,
    index: HashMap<String, usize>,
    pub layout: Layout,
    pub data: Vec<f64>,
}

impl BrainParams {
    /// Fresh parameters for a vocabulary of leaf labels.
    pub fn new(cfg: BrainConfig, labels: &[&str], seed: u64) -> Self {
        let mut symbols = structural_tokens();
        for l in labels {
            let t = format!("sym:{l}");
            if !symbols.contains(&t) {
                symbols.push(t);
            }
        }
        let mut p = Self::zeroed(cfg, symbols);
        p.initialize(seed);
        p
    }

    fn zeroed(cfg: BrainConfig, symbols: Vec<String>) -> Self {
        let layout = Layout::new(&cfg, symbols.len());
        let index = symbols.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        BrainParams {
            cfg,
            data: vec![0.0; layout.total],
            symbols,
            index,
            layout,
        }
    }

    fn initialize(&mut self, seed: u64) {
        let d = self.cfg.d_model;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = Normal::new(0.0, 1.0).expect("valid");
        let proj = Normal::new(0.0, 1.0 / (d as f64).sqrt()).expect("valid");
        let l = self.layout.clone();
        for x in &mut self.data[l.embed..l.embed + self.symbols.len() * d] {
            *x = unit.sample(&mut rng);
        }
        self.data[l.ln_in..l.ln_in + d].fill(1.0);
        for layer in &l.layers {
            for ph in &layer.phase {
                for block in [ph.q, ph.k, ph.v, ph.o] {
                    for x in &mut self.data[block..block + d * d] {
                        *x = proj.sample(&mut rng);
                    }
                }
                self.data[ph.ln..ph.ln + d].fill(1.0);
            }
        }
        for x in &mut self.data[l.slot..l.slot + RuleKind::ALL.len() * MAX_SLOTS * d] {
            *x = unit.sample(&mut rng);
        }
        for block in [l.ptr_q, l.ptr_k] {
            for x in &mut self.data[block..block + d * d] {
                *x = proj.sample(&mut rng);
            }
        }
        for x in &mut self.data[l.op_w..l.op_w + RuleKind::ALL.len() * d] {
            *x = proj.sample(&mut rng);
        }
        // Biases and the value head start at zero, so the value is ½.
    }

    pub fn token(&self, name: &str) -> usize {
        self.index.get(name).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.data.len() * 8);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        for v in [
            CHECKPOINT_VERSION,
            self.cfg.d_model as u32,
            self.cfg.layers as u32,
            self.cfg.max_arity as u32,
            self.symbols.len() as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for s in &self.symbols {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        out.extend_from_slice(&(self.data.len() as u64).to_le_bytes());
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    /// Parses a checkpoint, returning the parameters and the number of bytes
    /// consumed.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize), CheckpointError> {
        let mut r = Reader { b: bytes, at: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(version));
        }
        let cfg = BrainConfig {
            d_model: r.u32()? as usize,
            layers: r.u32()? as usize,
            max_arity: r.u32()? as usize,
        };
        let n = r.u32()? as usize;
        let mut symbols = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let len = r.u32()? as usize;
            let s = std::str::from_utf8(r.take(len)?).map_err(|_| CheckpointError::Malformed)?;
            symbols.push(s.to_string());
        }
        let mut p = Self::zeroed(cfg, symbols);
        let count = r.u64()? as usize;
        if count != p.data.len() {
            return Err(CheckpointError::Malformed);
        }
        for x in p.data.iter_mut() {
            *x = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        }
        Ok((p, r.at))
    }
}

pub(crate) struct Reader<'a> {
    pub b: &'a [u8],
    pub at: usize,
}

impl<'a> Reader<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.at.checked_add(n).ok_or(CheckpointError::Malformed)?;
        let s = self.b.get(self.at..end).ok_or(CheckpointError::Malformed)?;
        self.at = end;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    #[allow(dead_code)]
    pub fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_roundtrip() {
        let p = BrainParams::new(BrainConfig::default(), &["x", "y"], 3);
        let bytes = p.to_bytes();
        let (q, used) = BrainParams::from_bytes(&bytes).unwrap();
        assert_eq!(used, bytes.len());
        assert_eq!(p, q);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(BrainParams::from_bytes(&bad).unwrap_err(), CheckpointError::BadMagic);
        let mut old = bytes.clone();
        old[8] = 9;
        assert_eq!(BrainParams::from_bytes(&old).unwrap_err(), CheckpointError::Version(9));
        assert!(BrainParams::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn layout_is_contiguous() {
        let p = BrainParams::new(BrainConfig::default(), &[], 0);
        let l = &p.layout;
        assert_eq!(l.val_b + 1, l.total);
        assert_eq!(p.data.len(), l.total);
        assert_eq!(p.token("sym:nope"), 0);
        assert!(p.data[l.op_b..l.slot].iter().all(|&x| x == 0.0));
        assert!(p.data[l.val_w..].iter().all(|&x| x == 0.0));
    }
}
