//! JSON form of a `MathState`.

use serde::{Deserialize, Serialize};

use super::sexp::Diagnostic;
use crate::hypergraph::{EdgeId, EntityRef, MathState, NodeId, NodeType, Operator, Sort};

#[derive(Debug, Serialize, Deserialize)]
struct NodeDoc {
    id: u32,
    node_type: NodeType,
    sort: Sort,
    label: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeDoc {
    id: u32,
    operator: Operator,
    args: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    bound_vars: Vec<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StateDoc {
    nodes: Vec<NodeDoc>,
    edges: Vec<EdgeDoc>,
    facts: Vec<u32>,
    goal: Option<u32>,
}

pub fn state_to_json(state: &MathState) -> String {
    let doc = StateDoc {
        nodes: state
            .nodes()
            .iter()
            .map(|n| NodeDoc {
                id: n.id.0,
                node_type: n.node_type,
                sort: n.sort,
                label: n.label.clone(),
            })
            .collect(),
        edges: state
            .edges()
            .iter()
            .map(|e| EdgeDoc {
                id: e.id.0,
                operator: e.operator,
                args: e.args.iter().map(ToString::to_string).collect(),
                output: e.output.map(|n| n.0),
                bound_vars: e.bound_vars.iter().map(|v| v.0).collect(),
            })
            .collect(),
        facts: state.facts().iter().map(|f| f.0).collect(),
        goal: state.goal().map(|g| g.0),
    };
    serde_json::to_string(&doc).expect("state documents serialize")
}

/// Rebuilds a state by replaying its construction in id order; every typing
/// rule is re-checked along the way.
pub fn state_from_json(text: &str) -> Result<MathState, Diagnostic> {
    let doc: StateDoc = serde_json::from_str(text).map_err(|e| Diagnostic::global(format!("state json: {e}")))?;
    let bad = |m: String| Diagnostic::global(format!("state json: {m}"));
    let mut s = MathState::new();
    let mut next_edge = 0usize;
    let add_edge = |s: &mut MathState, k: usize| -> Result<(), Diagnostic> {
        let e = &doc.edges[k];
        let args = e
            .args
            .iter()
            .map(|a| a.parse::<EntityRef>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(bad)?;
        let bound = e.bound_vars.iter().map(|&v| NodeId(v)).collect();
        let id = s.add_edge(e.operator, args, bound).map_err(|x| bad(x.to_string()))?;
        if id.0 != e.id || s.edge(id).and_then(|x| x.output).map(|n| n.0) != e.output {
            return Err(bad(format!("edge e{} does not replay to the same ids", e.id)));
        }
        Ok(())
    };
    for (i, n) in doc.nodes.iter().enumerate() {
        if n.id as usize != i {
            return Err(bad(format!("node ids must be dense, found n{} at {i}", n.id)));
        }
        if n.node_type == NodeType::CompoundTerm {
            let def = doc
                .edges
                .iter()
                .position(|e| e.output == Some(n.id))
                .ok_or_else(|| bad(format!("compound n{} has no constructor", n.id)))?;
            if def < next_edge {
                return Err(bad(format!("compound n{} out of order", n.id)));
            }
            while next_edge <= def {
                add_edge(&mut s, next_edge)?;
                next_edge += 1;
            }
        } else {
            s.add_node(n.node_type, n.sort, &n.label).map_err(|x| bad(x.to_string()))?;
        }
    }
    while next_edge < doc.edges.len() {
        add_edge(&mut s, next_edge)?;
        next_edge += 1;
    }
    for &f in &doc.facts {
        s.assert_fact(EdgeId(f)).map_err(|x| bad(x.to_string()))?;
    }
    if let Some(g) = doc.goal {
        if s.edge(EdgeId(g)).is_none() {
            return Err(bad(format!("goal e{g} does not exist")));
        }
        s.set_goal(Some(EdgeId(g)));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr_io::{build_state, parse_problem};

    #[test]
    fn roundtrip_is_byte_identical() {
        let text = "(problem (decl a var) (decl b var) (decl c var) (decl P point)
            (premise (Equals (Sum a b) c)) (premise (forall (a) (Equals a a)))
            (goal (Equals c (Sum b a))))";
        let s = build_state(&parse_problem(text).unwrap(), 2).unwrap().state;
        let j = state_to_json(&s);
        let back = state_from_json(&j).unwrap();
        assert_eq!(back, s);
        assert_eq!(state_to_json(&back), j);
    }

    #[test]
    fn same_text_same_bytes() {
        let text = "(problem (decl x var) (decl y var) (premise (Equals x y)) (goal (Equals y x)))";
        let a = state_to_json(&build_state(&parse_problem(text).unwrap(), 2).unwrap().state);
        let b = state_to_json(&build_state(&parse_problem(text).unwrap(), 2).unwrap().state);
        assert_eq!(a, b);
    }
}
