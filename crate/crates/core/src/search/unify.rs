//! Semantic unification of two proof states.
//!
//! The disjoint union of both graphs is formed, then every set of entities
//! with one canonical hash is collapsed onto its earliest member and
//! incident edges are redirected to it. Passes repeat until no entity
//! shares a hash with another (at most [`MAX_PASSES`]).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::hypergraph::canon::CanonicalHashes;
use crate::hypergraph::{EdgeId, EntityRef, Hyperedge, HypergraphError, MathState, Node, NodeId, NodeType, Operator};

pub const MAX_PASSES: usize = 10;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UnifyReport {
    /// Entities removed by merging, relative to the disjoint union.
    pub merged: usize,
    pub passes: usize,
    /// Equal-hash pairs that could not be merged without breaking typing.
    pub collisions: Vec<String>,
    /// The pass cap was reached before a fixpoint.
    pub capped: bool,
}

/// Entity multisets and fact set of a state, keyed by canonical hash.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub nodes: Vec<u64>,
    pub edges: Vec<u64>,
    pub facts: Vec<u64>,
    pub goal: Option<u64>,
}

pub fn canonical_signature(state: &MathState, commutative: &BTreeSet<Operator>) -> Signature {
    let h = CanonicalHashes::compute(state, commutative);
    let sorted = |mut v: Vec<u64>| {
        v.sort_unstable();
        v
    };
    Signature {
        nodes: sorted(h.nodes.clone()),
        edges: sorted(h.edges.clone()),
        facts: sorted(state.facts().iter().map(|f| h.edges[f.index()]).collect()),
        goal: state.goal().map(|g| h.edges[g.index()]),
    }
}

/// Both graphs side by side with disjoint ids.
struct Union {
    nodes: Vec<Node>,
    edges: Vec<Hyperedge>,
    facts: Vec<usize>,
    goal: Option<usize>,
    node_hash: Vec<u64>,
    edge_hash: Vec<u64>,
}

impl Union {
    fn of(parts: &[&MathState], commutative: &BTreeSet<Operator>) -> Self {
        let mut u = Union {
            nodes: Vec::new(),
            edges: Vec::new(),
            facts: Vec::new(),
            goal: None,
            node_hash: Vec::new(),
            edge_hash: Vec::new(),
        };
        for s in parts {
            let (dn, de) = (u.nodes.len() as u32, u.edges.len() as u32);
            let shift = |r: EntityRef| match r {
                EntityRef::Node(n) => EntityRef::Node(NodeId(n.0 + dn)),
                EntityRef::Edge(e) => EntityRef::Edge(EdgeId(e.0 + de)),
            };
            for n in s.nodes() {
                u.nodes.push(Node {
                    id: NodeId(n.id.0 + dn),
                    ..n.clone()
                });
            }
            for e in s.edges() {
                u.edges.push(Hyperedge {
                    id: EdgeId(e.id.0 + de),
                    args: e.args.iter().map(|&a| shift(a)).collect(),
                    output: e.output.map(|o| NodeId(o.0 + dn)),
                    bound_vars: e.bound_vars.iter().map(|v| NodeId(v.0 + dn)).collect(),
                    ..e.clone()
                });
            }
            u.facts.extend(s.facts().iter().map(|f| f.index() + de as usize));
            if u.goal.is_none() {
                u.goal = s.goal().map(|g| g.index() + de as usize);
            }
            // Hashes are structural, so each part's hashes are its hashes
            // inside the union.
            let h = CanonicalHashes::compute(s, commutative);
            u.node_hash.extend(h.nodes);
            u.edge_hash.extend(h.edges);
        }
        u
    }

    /// Representative of every node and edge, plus collision messages.
    fn classes(&self) -> (Vec<usize>, Vec<usize>, Vec<String>) {
        let mut collisions = Vec::new();
        let mut first: HashMap<u64, EntityRef> = HashMap::new();
        let mut node_rep: Vec<usize> = (0..self.nodes.len()).collect();
        let mut edge_rep: Vec<usize> = (0..self.edges.len()).collect();
        for (i, n) in self.nodes.iter().enumerate() {
            match first.get(&self.node_hash[i]) {
                None => {
                    first.insert(self.node_hash[i], EntityRef::Node(n.id));
                }
                Some(&EntityRef::Node(r)) => {
                    let m = &self.nodes[r.index()];
                    if m.node_type == n.node_type && m.sort == n.sort {
                        node_rep[i] = r.index();
                    } else {
                        collisions.push(format!("{} and {} share a hash but differ in type", m.label, n.label));
                    }
                }
                Some(&EntityRef::Edge(_)) => collisions.push(format!("node {} collides with an edge", n.label)),
            }
        }
        for (j, e) in self.edges.iter().enumerate() {
            match first.get(&self.edge_hash[j]) {
                None => {
                    first.insert(self.edge_hash[j], EntityRef::Edge(e.id));
                }
                Some(&EntityRef::Edge(r)) => {
                    let m = &self.edges[r.index()];
                    if m.operator == e.operator && m.edge_type == e.edge_type && m.args.len() == e.args.len() {
                        edge_rep[j] = r.index();
                    } else {
                        collisions.push(format!("{} and {} edges share a hash", m.operator, e.operator));
                    }
                }
                Some(&EntityRef::Node(_)) => collisions.push(format!("{} edge collides with a node", e.operator)),
            }
        }
        (node_rep, edge_rep, collisions)
    }

    fn materialize(&self, node_rep: &[usize], edge_rep: &[usize]) -> Result<MathState, HypergraphError> {
        let mut out = MathState::new();
        let mut node_map: BTreeMap<usize, NodeId> = BTreeMap::new();
        let mut edge_map: BTreeMap<usize, EdgeId> = BTreeMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.node_type == NodeType::CompoundTerm || node_rep[i] != i {
                continue;
            }
            // A label reused with another sort cannot share the symbol table
            // entry, so the later one is primed.
            let mut label = n.label.clone();
            let id = loop {
                match out.add_node(n.node_type, n.sort, &label) {
                    Ok(id) => break id,
                    Err(HypergraphError::DuplicateSymbol(_)) => label.push('\''),
                    Err(e) => return Err(e),
                }
            };
            node_map.insert(i, id);
        }
        for (j, e) in self.edges.iter().enumerate() {
            if edge_rep[j] != j {
                continue;
            }
            let map = |r: EntityRef| -> EntityRef {
                match r {
                    EntityRef::Node(n) => EntityRef::Node(node_map[&node_rep[n.index()]]),
                    EntityRef::Edge(x) => EntityRef::Edge(edge_map[&edge_rep[x.index()]]),
                }
            };
            let args: Vec<EntityRef> = e.args.iter().map(|&a| map(a)).collect();
            let bound: Vec<NodeId> = e.bound_vars.iter().map(|v| node_map[&node_rep[v.index()]]).collect();
            let id = out.add_edge(e.operator, args, bound)?;
            edge_map.insert(j, id);
            if let Some(o) = e.output {
                let new_out = out.edge(id).and_then(|x| x.output).expect("constructors have outputs");
                node_map.entry(node_rep[o.index()]).or_insert(new_out);
            }
        }
        for &f in &self.facts {
            out.assert_fact(edge_map[&edge_rep[f]])?;
        }
        out.set_goal(self.goal.map(|g| edge_map[&edge_rep[g]]));
        Ok(out)
    }
}

/// Merges `g1` and `g2`. Callers are responsible for only unifying states
/// with compatible assumptions.
pub fn unify(g1: &MathState, g2: &MathState, commutative: &BTreeSet<Operator>) -> Result<(MathState, UnifyReport), HypergraphError> {
    let mut report = UnifyReport::default();
    let mut union = Union::of(&[g1, g2], commutative);
    let start = union.nodes.len() + union.edges.len();
    loop {
        let (node_rep, edge_rep, collisions) = union.classes();
        report.passes += 1;
        for c in collisions {
            if !report.collisions.contains(&c) {
                report.collisions.push(c);
            }
        }
        let merges = node_rep.iter().enumerate().any(|(i, &r)| r != i) || edge_rep.iter().enumerate().any(|(j, &r)| r != j);
        let state = union.materialize(&node_rep, &edge_rep)?;
        if !merges || report.passes == MAX_PASSES {
            report.capped = merges;
            report.merged = start - state.entity_count();
            return Ok((state, report));
        }
        union = Union::of(&[&state], commutative);
    }
}
