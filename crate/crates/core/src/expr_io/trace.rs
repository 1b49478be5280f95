//! Line-oriented JSON proof traces: a header record, one record per step,
//! and a closing record.

use serde::{Deserialize, Serialize};

use super::sexp::Diagnostic;
use crate::hypergraph::Action;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub problem: String,
    pub seed: u64,
    pub method: String,
    pub config_hash: String,
    pub version: String,
    /// Residual energy before the first action.
    pub e0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: usize,
    pub action: String,
    /// Residual energy after the action.
    pub e: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEnd {
    pub done: bool,
    pub e_final: f64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProofTrace {
    pub header: TraceHeader,
    pub steps: Vec<TraceStep>,
    pub end: TraceEnd,
}

impl ProofTrace {
    pub fn actions(&self) -> Result<Vec<Action>, Diagnostic> {
        self.steps
            .iter()
            .map(|s| s.action.parse().map_err(|e: String| Diagnostic::global(format!("step {}: {e}", s.t))))
            .collect()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.r).sum()
    }
}

pub fn emit_trace(trace: &ProofTrace) -> String {
    let mut out = serde_json::to_string(&trace.header).expect("serializable");
    out.push('\n');
    for s in &trace.steps {
        out.push_str(&serde_json::to_string(s).expect("serializable"));
        out.push('\n');
    }
    out.push_str(&serde_json::to_string(&trace.end).expect("serializable"));
    out.push('\n');
    out
}

pub fn parse_trace(text: &str) -> Result<ProofTrace, Diagnostic> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.len() < 2 {
        return Err(Diagnostic::global("trace needs a header and a closing record"));
    }
    let err = |i: usize, e: serde_json::Error| Diagnostic::global(format!("trace line {}: {e}", i + 1));
    let header: TraceHeader = serde_json::from_str(lines[0]).map_err(|e| err(0, e))?;
    let last = lines.len() - 1;
    let end: TraceEnd = serde_json::from_str(lines[last]).map_err(|e| err(last, e))?;
    let steps = lines[1..last]
        .iter()
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| err(i + 1, e)))
        .collect::<Result<Vec<TraceStep>, _>>()?;
    Ok(ProofTrace { header, steps, end })
}
