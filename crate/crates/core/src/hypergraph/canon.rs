//! Structural canonical hashing of terms and formulas.
//!
//! Hashes depend on labels, operators and shape only, never on entity ids, so
//! the same subterm built in two different states hashes identically.
//! Children of commutative operators are combined as a sorted multiset.

use std::collections::BTreeSet;

use super::{EdgeType, EntityRef, MathState, NodeType, Operator, Sort};

const TAG_LEAF: u64 = 0x6c65_6166_0000_0001;
const TAG_COMPOUND: u64 = 0x636f_6d70_0000_0002;
const TAG_EDGE: u64 = 0x6564_6765_0000_0003;
const TAG_BOUND: u64 = 0x626f_756e_0000_0004;

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn combine(acc: u64, x: u64) -> u64 {
    mix(acc.rotate_left(23) ^ x)
}

fn hash_str(s: &str) -> u64 {
    // FNV-1a, then finalized.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix(h)
}

fn combine_children(seed: u64, children: &mut [u64], commutative: bool) -> u64 {
    if commutative {
        children.sort_unstable();
    }
    children.iter().fold(seed, |acc, &c| combine(acc, c))
}

fn node_type_code(t: NodeType) -> u64 {
    match t {
        NodeType::Variable => 1,
        NodeType::Constant => 2,
        NodeType::CompoundTerm => 3,
    }
}

fn sort_code(s: Sort) -> u64 {
    match s {
        Sort::Scalar => 1,
        Sort::Matrix => 2,
        Sort::Point => 3,
        Sort::Line => 4,
    }
}

fn edge_type_code(t: EdgeType) -> u64 {
    match t {
        EdgeType::Constructor => 1,
        EdgeType::Predicate => 2,
        EdgeType::Connective => 3,
        EdgeType::Quantifier => 4,
    }
}

/// Canonical hashes for every entity of a state, computed in one id-ordered
/// pass (id order is topological).
#[derive(Debug, Clone)]
pub struct CanonicalHashes {
    pub nodes: Vec<u64>,
    pub edges: Vec<u64>,
}

impl CanonicalHashes {
    pub fn compute(state: &MathState, commutative: &BTreeSet<Operator>) -> Self {
        let mut nodes = vec![0u64; state.nodes().len()];
        let mut edges = vec![0u64; state.edges().len()];
        // Leaves first; compound nodes get their hash when their constructor
        // is visited, which precedes any edge that uses them.
        for n in state.nodes() {
            if n.node_type != NodeType::CompoundTerm {
                let mut h = combine(TAG_LEAF, node_type_code(n.node_type));
                h = combine(h, sort_code(n.sort));
                h = combine(h, hash_str(&n.label));
                nodes[n.id.index()] = h;
            }
        }
        for e in state.edges() {
            let mut children: Vec<u64> = e
                .args
                .iter()
                .map(|a| match a {
                    EntityRef::Node(n) => nodes[n.index()],
                    EntityRef::Edge(x) => edges[x.index()],
                })
                .collect();
            let mut h = combine(TAG_EDGE, edge_type_code(e.edge_type));
            h = combine(h, hash_str(e.operator.name()));
            h = combine(h, children.len() as u64);
            h = combine_children(h, &mut children, commutative.contains(&e.operator));
            if !e.bound_vars.is_empty() {
                let mut bound: Vec<u64> = e.bound_vars.iter().map(|v| nodes[v.index()]).collect();
                h = combine_children(combine(h, TAG_BOUND), &mut bound, true);
            }
            edges[e.id.index()] = h;
            if let Some(out) = e.output {
                nodes[out.index()] = combine(TAG_COMPOUND, h);
            }
        }
        CanonicalHashes { nodes, edges }
    }

    pub fn get(&self, entity: EntityRef) -> u64 {
        match entity {
            EntityRef::Node(n) => self.nodes[n.index()],
            EntityRef::Edge(e) => self.edges[e.index()],
        }
    }
}

/// Canonical hash of a single entity.
pub fn canonical_hash(
    state: &MathState,
    entity: EntityRef,
    commutative: &BTreeSet<Operator>,
) -> u64 {
    CanonicalHashes::compute(state, commutative).get(entity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::{RuleLibrary, Sort};

    fn comm() -> BTreeSet<Operator> {
        RuleLibrary::standard().commutative.clone()
    }

    fn binop(s: &mut MathState, op: Operator, a: &str, b: &str) -> EntityRef {
        let get = |s: &mut MathState, l: &str| match s.lookup_symbol(l) {
            Some(n) => n,
            None => s.add_node(NodeType::Variable, Sort::Scalar, l).unwrap(),
        };
        let x = get(s, a);
        let y = get(s, b);
        let e = s.add_edge(op, vec![EntityRef::Node(x), EntityRef::Node(y)], vec![]).unwrap();
        EntityRef::Node(s.edge(e).unwrap().output.unwrap())
    }

    #[test]
    fn commutative_sum_is_order_insensitive() {
        let mut s = MathState::new();
        let xy = binop(&mut s, Operator::Sum, "x", "y");
        let yx = binop(&mut s, Operator::Sum, "y", "x");
        assert_ne!(xy, yx);
        assert_eq!(canonical_hash(&s, xy, &comm()), canonical_hash(&s, yx, &comm()));
    }

    #[test]
    fn sub_is_order_sensitive() {
        let mut s = MathState::new();
        let xy = binop(&mut s, Operator::Sub, "x", "y");
        let yx = binop(&mut s, Operator::Sub, "y", "x");
        assert_ne!(canonical_hash(&s, xy, &comm()), canonical_hash(&s, yx, &comm()));
    }

    #[test]
    fn ordered_combination_separates_permutations() {
        // Every permutation of distinct seeded child hashes combines to a
        // distinct value under the order-sensitive fold.
        let seeds: Vec<u64> = (0..5u64).map(|i| mix(i * 7919 + 13)).collect();
        let mut seen = std::collections::HashSet::new();
        let mut perm = seeds.clone();
        fn heap(k: usize, a: &mut Vec<u64>, out: &mut std::collections::HashSet<u64>) {
            if k == 1 {
                let mut c = a.clone();
                out.insert(combine_children(7, &mut c, false));
                return;
            }
            heap(k - 1, a, out);
            for i in 0..k - 1 {
                if k % 2 == 0 {
                    a.swap(i, k - 1);
                } else {
                    a.swap(0, k - 1);
                }
                heap(k - 1, a, out);
            }
        }
        heap(perm.len(), &mut perm, &mut seen);
        assert_eq!(seen.len(), 120);
    }

    #[test]
    fn hash_is_id_independent_across_states() {
        let mut s1 = MathState::new();
        s1.add_node(NodeType::Variable, Sort::Scalar, "pad").unwrap();
        let a = binop(&mut s1, Operator::Product, "x", "y");
        let mut s2 = MathState::new();
        let b = binop(&mut s2, Operator::Product, "x", "y");
        assert_ne!(a, b);
        assert_eq!(canonical_hash(&s1, a, &comm()), canonical_hash(&s2, b, &comm()));
    }

    #[test]
    fn node_and_edge_hashes_differ() {
        let mut s = MathState::new();
        let n = binop(&mut s, Operator::Sum, "x", "y");
        let e = EntityRef::Edge(s.defining_edge(n.as_node().unwrap()).unwrap());
        assert_ne!(canonical_hash(&s, n, &comm()), canonical_hash(&s, e, &comm()));
    }
}
