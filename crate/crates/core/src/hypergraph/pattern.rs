//! Goal patterns and exact structural matching.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EdgeId, EdgeType, EntityRef, MathState, NodeType, Operator};

/// Template term. `Var` matches any entity in its position (consistently across
/// repeated uses); `Symbol` matches the declared variable or constant with
/// that label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PatternTerm {
    Var(String),
    Symbol(String),
    Apply {
        op: Operator,
        args: Vec<PatternTerm>,
    },
    ForAll {
        vars: Vec<String>,
        body: Box<PatternTerm>,
    },
}

impl PatternTerm {
    pub fn is_formula(&self) -> bool {
        match self {
            PatternTerm::Apply { op, .. } => op.edge_type() != EdgeType::Constructor,
            PatternTerm::ForAll { .. } => true,
            _ => false,
        }
    }

    pub fn has_vars(&self) -> bool {
        match self {
            PatternTerm::Var(_) => true,
            PatternTerm::Symbol(_) => false,
            PatternTerm::Apply { args, .. } => args.iter().any(PatternTerm::has_vars),
            PatternTerm::ForAll { body, .. } => body.has_vars(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalPattern {
    pub root: PatternTerm,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalMatch {
    pub root: EdgeId,
    pub bindings: BTreeMap<String, EntityRef>,
}

impl GoalPattern {
    pub fn new(root: PatternTerm) -> Result<Self, String> {
        if !root.is_formula() {
            return Err("goal root must be a formula".into());
        }
        Ok(GoalPattern { root })
    }

    /// All edges matching the pattern root, ascending by edge id.
    pub fn matches(&self, state: &MathState) -> Vec<GoalMatch> {
        state
            .edges()
            .iter()
            .filter_map(|e| {
                let mut bindings = BTreeMap::new();
                match_term(state, &self.root, EntityRef::Edge(e.id), &mut bindings).then(|| {
                    GoalMatch {
                        root: e.id,
                        bindings,
                    }
                })
            })
            .collect()
    }

    /// First matching edge that is also a fact.
    pub fn proven_by(&self, state: &MathState) -> Option<EdgeId> {
        state.facts().iter().copied().find(|&f| {
            let mut bindings = BTreeMap::new();
            match_term(state, &self.root, EntityRef::Edge(f), &mut bindings)
        })
    }
}

/// Exact-structural matches of `pattern` in `state`.
pub fn match_goal(state: &MathState, pattern: &GoalPattern) -> Vec<GoalMatch> {
    pattern.matches(state)
}

fn match_term(
    state: &MathState,
    pat: &PatternTerm,
    ent: EntityRef,
    bindings: &mut BTreeMap<String, EntityRef>,
) -> bool {
    match pat {
        PatternTerm::Var(name) => match bindings.get(name) {
            Some(&bound) => bound == ent,
            None => {
                bindings.insert(name.clone(), ent);
                true
            }
        },
        PatternTerm::Symbol(label) => match ent {
            EntityRef::Node(n) => {
                let node = &state.nodes()[n.index()];
                node.node_type != NodeType::CompoundTerm && &node.label == label
            }
            EntityRef::Edge(_) => false,
        },
        PatternTerm::Apply { op, args } => {
            let edge = match (op.edge_type(), ent) {
                (EdgeType::Constructor, EntityRef::Node(n)) => match state.defining_edge(n) {
                    Some(e) => &state.edges()[e.index()],
                    None => return false,
                },
                (EdgeType::Constructor, EntityRef::Edge(_)) => return false,
                (_, EntityRef::Edge(e)) => &state.edges()[e.index()],
                (_, EntityRef::Node(_)) => return false,
            };
            edge.operator == *op
                && edge.args.len() == args.len()
                && edge
                    .args
                    .iter()
                    .zip(args)
                    .all(|(&a, p)| match_term(state, p, a, bindings))
        }
        PatternTerm::ForAll { vars, body } => {
            let EntityRef::Edge(e) = ent else {
                return false;
            };
            let edge = &state.edges()[e.index()];
            if edge.operator != Operator::ForAll {
                return false;
            }
            let mut labels: Vec<&str> = edge
                .bound_vars
                .iter()
                .map(|v| state.nodes()[v.index()].label.as_str())
                .collect();
            let mut want: Vec<&str> = vars.iter().map(String::as_str).collect();
            labels.sort();
            want.sort();
            labels == want && match_term(state, body, edge.args[0], bindings)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::{NodeId, Sort};

    fn eq_pattern(a: PatternTerm, b: PatternTerm) -> GoalPattern {
        GoalPattern::new(PatternTerm::Apply {
            op: Operator::Equals,
            args: vec![a, b],
        })
        .unwrap()
    }

    fn v(s: &str) -> PatternTerm {
        PatternTerm::Var(s.into())
    }

    fn state_with(labels: &[&str]) -> (MathState, Vec<NodeId>) {
        let mut s = MathState::new();
        let ids = labels
            .iter()
            .map(|l| s.add_node(NodeType::Variable, Sort::Scalar, l).unwrap())
            .collect();
        (s, ids)
    }

    fn eq(s: &mut MathState, a: NodeId, b: NodeId) -> EdgeId {
        s.add_edge(Operator::Equals, vec![EntityRef::Node(a), EntityRef::Node(b)], vec![])
            .unwrap()
    }

    #[test]
    fn repeated_var_matches_reflexive_equality() {
        let (mut s, ids) = state_with(&["x"]);
        let e = eq(&mut s, ids[0], ids[0]);
        let m = match_goal(&s, &eq_pattern(v("?a"), v("?a")));
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].root, e);
        assert_eq!(m[0].bindings["?a"], EntityRef::Node(ids[0]));
    }

    #[test]
    fn empty_graph_has_no_matches() {
        let s = MathState::new();
        assert!(match_goal(&s, &eq_pattern(v("?a"), v("?b"))).is_empty());
    }

    #[test]
    fn two_matches_agree_with_brute_force() {
        let (mut s, ids) = state_with(&["x", "y", "z"]);
        eq(&mut s, ids[0], ids[1]);
        eq(&mut s, ids[1], ids[2]);
        let pat = eq_pattern(v("?a"), v("?b"));
        let got = match_goal(&s, &pat);
        // brute force: every edge, every assignment of ?a, ?b over all nodes
        let mut oracle = Vec::new();
        for e in s.edges() {
            for &a in &ids {
                for &b in &ids {
                    if e.operator == Operator::Equals
                        && e.args == vec![EntityRef::Node(a), EntityRef::Node(b)]
                    {
                        oracle.push((e.id, a, b));
                    }
                }
            }
        }
        assert_eq!(got.len(), 2);
        assert_eq!(got.len(), oracle.len());
        for (m, (e, a, b)) in got.iter().zip(&oracle) {
            assert_eq!(m.root, *e);
            assert_eq!(m.bindings["?a"], EntityRef::Node(*a));
            assert_eq!(m.bindings["?b"], EntityRef::Node(*b));
        }
        assert!(got[0].root < got[1].root);
    }

    #[test]
    fn symbols_and_facts() {
        let (mut s, ids) = state_with(&["x", "y"]);
        let e = eq(&mut s, ids[0], ids[1]);
        let pat = eq_pattern(PatternTerm::Symbol("x".into()), PatternTerm::Symbol("y".into()));
        assert_eq!(pat.matches(&s).len(), 1);
        assert_eq!(pat.proven_by(&s), None);
        s.assert_fact(e).unwrap();
        assert_eq!(pat.proven_by(&s), Some(e));
        let flipped = eq_pattern(PatternTerm::Symbol("y".into()), PatternTerm::Symbol("x".into()));
        assert!(flipped.matches(&s).is_empty());
    }

    #[test]
    fn constructor_patterns_match_compound_nodes() {
        let (mut s, ids) = state_with(&["a", "b", "c"]);
        let sum = s
            .add_edge(Operator::Sum, vec![EntityRef::Node(ids[0]), EntityRef::Node(ids[1])], vec![])
            .unwrap();
        let out = s.edge(sum).unwrap().output.unwrap();
        eq(&mut s, out, ids[2]);
        let pat = eq_pattern(
            PatternTerm::Apply {
                op: Operator::Sum,
                args: vec![v("?x"), v("?y")],
            },
            PatternTerm::Symbol("c".into()),
        );
        let m = pat.matches(&s);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].bindings["?y"], EntityRef::Node(ids[1]));
    }

    #[test]
    fn non_formula_root_rejected() {
        assert!(GoalPattern::new(v("?a")).is_err());
    }
}
