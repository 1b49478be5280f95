//! Concrete numeric values attached to graph nodes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::hypergraph::{MathState, NodeId, NodeType, Sort};
use crate::matrix::Mat;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Scalar(f64),
    Point(Point),
    Matrix(Mat),
}

impl Value {
    pub fn len(&self) -> usize {
        match self {
            Value::Scalar(_) => 1,
            Value::Point(_) => 2,
            Value::Matrix(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sort(&self) -> Sort {
        match self {
            Value::Scalar(_) => Sort::Scalar,
            Value::Point(_) => Sort::Point,
            Value::Matrix(_) => Sort::Matrix,
        }
    }

    /// Entries in flat order (matrices row-major).
    pub fn flat(&self) -> Vec<f64> {
        match self {
            Value::Scalar(x) => vec![*x],
            Value::Point(p) => p.to_vec(),
            Value::Matrix(m) => {
                let mut v = Vec::with_capacity(m.len());
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        v.push(m[(i, j)]);
                    }
                }
                v
            }
        }
    }

    pub fn set_flat(&mut self, xs: &[f64]) {
        match self {
            Value::Scalar(x) => *x = xs[0],
            Value::Point(p) => p.copy_from_slice(&xs[..2]),
            Value::Matrix(m) => {
                let c = m.ncols();
                for i in 0..m.nrows() {
                    for j in 0..c {
                        m[(i, j)] = xs[i * c + j];
                    }
                }
            }
        }
    }

    pub fn zeros_like(&self) -> Value {
        match self {
            Value::Scalar(_) => Value::Scalar(0.0),
            Value::Point(_) => Value::Point([0.0; 2]),
            Value::Matrix(m) => Value::Matrix(Mat::zeros(m.nrows(), m.ncols())),
        }
    }

    /// `self += other`; both must have the same shape.
    pub fn accumulate(&mut self, other: &Value) {
        match (self, other) {
            (Value::Scalar(a), Value::Scalar(b)) => *a += b,
            (Value::Point(a), Value::Point(b)) => {
                a[0] += b[0];
                a[1] += b[1];
            }
            (Value::Matrix(a), Value::Matrix(b)) => *a += b,
            _ => panic!("accumulating values of different kinds"),
        }
    }

    pub fn scaled(&self, s: f64) -> Value {
        match self {
            Value::Scalar(a) => Value::Scalar(a * s),
            Value::Point(p) => Value::Point([p[0] * s, p[1] * s]),
            Value::Matrix(m) => Value::Matrix(m * s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub value: Value,
    pub frozen: bool,
}

/// Position of one free slot inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRange {
    pub node: NodeId,
    pub offset: usize,
    pub len: usize,
}

/// Point on the parameter manifold. Slots are keyed by node id, which fixes
/// the flat ordering of free parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub dim: usize,
    slots: BTreeMap<NodeId, Slot>,
}

impl Binding {
    pub fn new(dim: usize) -> Self {
        Binding {
            dim,
            slots: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, node: NodeId, value: Value, frozen: bool) {
        self.slots.insert(node, Slot { value, frozen });
    }

    pub fn get(&self, node: NodeId) -> Option<&Slot> {
        self.slots.get(&node)
    }

    pub fn value(&self, node: NodeId) -> Option<&Value> {
        self.slots.get(&node).map(|s| &s.value)
    }

    pub fn set_frozen(&mut self, node: NodeId, frozen: bool) {
        if let Some(s) = self.slots.get_mut(&node) {
            s.frozen = frozen;
        }
    }

    pub fn slots(&self) -> impl Iterator<Item = (NodeId, &Slot)> {
        self.slots.iter().map(|(&n, s)| (n, s))
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Free slots in ascending node order with their flat offsets.
    pub fn free_layout(&self) -> Vec<SlotRange> {
        let mut offset = 0;
        self.slots
            .iter()
            .filter(|(_, s)| !s.frozen)
            .map(|(&node, s)| {
                let len = s.value.len();
                let r = SlotRange { node, offset, len };
                offset += len;
                r
            })
            .collect()
    }

    pub fn free_len(&self) -> usize {
        self.slots.values().filter(|s| !s.frozen).map(|s| s.value.len()).sum()
    }

    pub fn free_vector(&self) -> Vec<f64> {
        self.slots
            .values()
            .filter(|s| !s.frozen)
            .flat_map(|s| s.value.flat())
            .collect()
    }

    pub fn set_free_vector(&mut self, x: &[f64]) {
        let mut offset = 0;
        for s in self.slots.values_mut().filter(|s| !s.frozen) {
            let len = s.value.len();
            s.value.set_flat(&x[offset..offset + len]);
            offset += len;
        }
    }

    /// Fills every unbound variable or constant of a value sort with a
    /// default: zero scalars, origin points, identity matrices. Constants
    /// are frozen.
    pub fn fill_defaults(&mut self, state: &MathState) {
        for n in state.nodes() {
            if n.node_type == NodeType::CompoundTerm || self.slots.contains_key(&n.id) {
                continue;
            }
            let value = match n.sort {
                Sort::Scalar => Value::Scalar(0.0),
                Sort::Point => Value::Point([0.0; 2]),
                Sort::Matrix => Value::Matrix(Mat::identity(self.dim, self.dim)),
                Sort::Line => continue,
            };
            self.set(n.id, value, n.node_type == NodeType::Constant);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_layout_skips_frozen_slots() {
        let mut b = Binding::new(2);
        b.set(NodeId(3), Value::Point([1.0, 2.0]), false);
        b.set(NodeId(1), Value::Scalar(5.0), true);
        b.set(NodeId(0), Value::Matrix(Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0])), false);
        assert_eq!(b.free_vector(), vec![1.0, 2.0, 3.0, 4.0, 1.0, 2.0]);
        let layout = b.free_layout();
        assert_eq!(layout[1], SlotRange { node: NodeId(3), offset: 4, len: 2 });
        b.set_free_vector(&[0.0, 0.0, 0.0, 9.0, 7.0, 8.0]);
        assert_eq!(b.value(NodeId(3)), Some(&Value::Point([7.0, 8.0])));
        match b.value(NodeId(0)).unwrap() {
            Value::Matrix(m) => assert_eq!(m[(1, 1)], 9.0),
            _ => unreachable!(),
        }
        assert_eq!(b.value(NodeId(1)), Some(&Value::Scalar(5.0)));
    }
}
