//! Per-edge energy dispatch and aggregation over the fact set.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::binding::{Binding, Value};
use crate::geometry::{self, GeoTerm, Point};
use crate::hypergraph::{EdgeId, EdgeType, EntityRef, MathState, NodeId, Operator, Sort};
use crate::matrix::{self, Mat, MatrixError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Domain {
    Matrix,
    Ideal,
    Geometry,
    NonEnergetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainWeights {
    pub matrix: f64,
    pub ideal: f64,
    pub geometry: f64,
}

impl Default for DomainWeights {
    fn default() -> Self {
        DomainWeights {
            matrix: 1.0,
            ideal: 1.0,
            geometry: 1.0,
        }
    }
}

impl DomainWeights {
    pub fn weight(&self, d: Domain) -> f64 {
        match d {
            Domain::Matrix => self.matrix,
            Domain::Ideal => self.ideal,
            Domain::Geometry => self.geometry,
            Domain::NonEnergetic => 0.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("unknown edge e{}", .0 .0)]
    UnknownEdge(EdgeId),
    #[error("edge e{}: Equals between {left:?} and {right:?}", .edge.0)]
    MixedDomain { edge: EdgeId, left: Sort, right: Sort },
    #[error("node n{} has no binding slot", .0 .0)]
    MissingSlot(NodeId),
    #[error("node n{} is bound to a {found:?} value but has sort {expected:?}", .node.0)]
    SlotKind {
        node: NodeId,
        expected: Sort,
        found: Sort,
    },
    #[error("node n{} inverts a singular matrix", .0 .0)]
    Singular(NodeId),
    #[error("node n{} has no numeric value", .0 .0)]
    NotEvaluable(NodeId),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEnergy {
    pub domain: Domain,
    /// Weighted contribution to the total.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub total: f64,
    pub per_edge: BTreeMap<EdgeId, EdgeEnergy>,
    /// Gradient over the binding's free parameters, in `free_layout` order.
    pub gradient: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Unweighted energy of one edge with gradients keyed by bound node.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTerm {
    pub domain: Domain,
    pub value: f64,
    pub grads: BTreeMap<NodeId, Value>,
    pub degenerate: bool,
}

pub fn classify_edge(state: &MathState, edge: EdgeId) -> Result<Domain, EnergyError> {
    let e = state.edge(edge).ok_or(EnergyError::UnknownEdge(edge))?;
    if e.edge_type != EdgeType::Predicate {
        return Ok(Domain::NonEnergetic);
    }
    Ok(match e.operator {
        Operator::Symmetric | Operator::Orthogonal | Operator::InverseOf => Domain::Matrix,
        Operator::Collinear
        | Operator::Parallel
        | Operator::Perpendicular
        | Operator::Congruent
        | Operator::Ratio => Domain::Geometry,
        Operator::Equals => {
            let left = state.sort_of(e.args[0]).expect("predicate args are nodes");
            let right = state.sort_of(e.args[1]).expect("predicate args are nodes");
            match (left, right) {
                (Sort::Matrix, Sort::Matrix) => Domain::Matrix,
                (Sort::Scalar, Sort::Scalar) => Domain::Ideal,
                (Sort::Point, Sort::Point) | (Sort::Line, Sort::Line) => Domain::Geometry,
                _ => return Err(EnergyError::MixedDomain { edge, left, right }),
            }
        }
        _ => Domain::NonEnergetic,
    })
}

/// Evaluates node values through constructors and pushes gradients back to
/// bound nodes.
struct Evaluator<'a> {
    state: &'a MathState,
    binding: &'a Binding,
    cache: HashMap<NodeId, Value>,
}

impl<'a> Evaluator<'a> {
    fn new(state: &'a MathState, binding: &'a Binding) -> Self {
        Evaluator {
            state,
            binding,
            cache: HashMap::new(),
        }
    }

    fn children(&self, n: NodeId) -> Option<(Operator, Vec<NodeId>)> {
        let e = self.state.edge(self.state.defining_edge(n)?)?;
        Some((
            e.operator,
            e.args.iter().map(|a| a.as_node().expect("constructor args are nodes")).collect(),
        ))
    }

    fn value(&mut self, n: NodeId) -> Result<Value, EnergyError> {
        if let Some(v) = self.cache.get(&n) {
            return Ok(v.clone());
        }
        let sort = self.state.nodes()[n.index()].sort;
        let v = if let Some(v) = self.binding.value(n) {
            if v.sort() != sort {
                return Err(EnergyError::SlotKind {
                    node: n,
                    expected: sort,
                    found: v.sort(),
                });
            }
            v.clone()
        } else if let Some((op, args)) = self.children(n) {
            let vals: Vec<Value> = args.iter().map(|&a| self.value(a)).collect::<Result<_, _>>()?;
            match (op, &vals[..]) {
                (Operator::Sum, [Value::Scalar(a), Value::Scalar(b)]) => Value::Scalar(a + b),
                (Operator::Sub, [Value::Scalar(a), Value::Scalar(b)]) => Value::Scalar(a - b),
                (Operator::Product, [Value::Scalar(a), Value::Scalar(b)]) => Value::Scalar(a * b),
                (Operator::Sum, [Value::Matrix(a), Value::Matrix(b)]) => {
                    check_dims(a, b)?;
                    Value::Matrix(a + b)
                }
                (Operator::Sub, [Value::Matrix(a), Value::Matrix(b)]) => {
                    check_dims(a, b)?;
                    Value::Matrix(a - b)
                }
                (Operator::Product, [Value::Matrix(a), Value::Matrix(b)]) => {
                    check_dims(a, b)?;
                    Value::Matrix(a * b)
                }
                (Operator::Transpose, [Value::Matrix(a)]) => Value::Matrix(a.transpose()),
                (Operator::Inverse, [Value::Matrix(a)]) => {
                    Value::Matrix(a.clone().try_inverse().ok_or(EnergyError::Singular(n))?)
                }
                (Operator::Midpoint, [Value::Point(a), Value::Point(b)]) => {
                    Value::Point([(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0])
                }
                _ => return Err(EnergyError::NotEvaluable(n)),
            }
        } else {
            return Err(EnergyError::MissingSlot(n));
        };
        self.cache.insert(n, v.clone());
        Ok(v)
    }

    fn matrix(&mut self, n: NodeId) -> Result<Mat, EnergyError> {
        match self.value(n)? {
            Value::Matrix(m) => Ok(m),
            _ => Err(EnergyError::NotEvaluable(n)),
        }
    }

    fn point(&mut self, n: NodeId) -> Result<Point, EnergyError> {
        match self.value(n)? {
            Value::Point(p) => Ok(p),
            _ => Err(EnergyError::NotEvaluable(n)),
        }
    }

    fn scalar(&mut self, n: NodeId) -> Result<f64, EnergyError> {
        match self.value(n)? {
            Value::Scalar(x) => Ok(x),
            _ => Err(EnergyError::NotEvaluable(n)),
        }
    }

    fn backprop(
        &mut self,
        n: NodeId,
        g: Value,
        out: &mut BTreeMap<NodeId, Value>,
    ) -> Result<(), EnergyError> {
        if self.binding.value(n).is_some() {
            match out.get_mut(&n) {
                Some(acc) => acc.accumulate(&g),
                None => {
                    out.insert(n, g);
                }
            }
            return Ok(());
        }
        let (op, args) = self.children(n).ok_or(EnergyError::MissingSlot(n))?;
        match (op, g) {
            (Operator::Sum, g) => {
                self.backprop(args[0], g.clone(), out)?;
                self.backprop(args[1], g, out)?;
            }
            (Operator::Sub, g) => {
                self.backprop(args[0], g.clone(), out)?;
                self.backprop(args[1], g.scaled(-1.0), out)?;
            }
            (Operator::Product, Value::Scalar(g)) => {
                let a = self.scalar(args[0])?;
                let b = self.scalar(args[1])?;
                self.backprop(args[0], Value::Scalar(g * b), out)?;
                self.backprop(args[1], Value::Scalar(g * a), out)?;
            }
            (Operator::Product, Value::Matrix(g)) => {
                let a = self.matrix(args[0])?;
                let b = self.matrix(args[1])?;
                self.backprop(args[0], Value::Matrix(&g * b.transpose()), out)?;
                self.backprop(args[1], Value::Matrix(a.transpose() * &g), out)?;
            }
            (Operator::Transpose, Value::Matrix(g)) => {
                self.backprop(args[0], Value::Matrix(g.transpose()), out)?;
            }
            (Operator::Inverse, Value::Matrix(g)) => {
                let xt = self.matrix(n)?.transpose();
                self.backprop(args[0], Value::Matrix(-(&xt * g * &xt)), out)?;
            }
            (Operator::Midpoint, g) => {
                let half = g.scaled(0.5);
                self.backprop(args[0], half.clone(), out)?;
                self.backprop(args[1], half, out)?;
            }
            _ => return Err(EnergyError::NotEvaluable(n)),
        }
        Ok(())
    }

    /// Endpoints of a point operand or of a `Line` operand.
    fn endpoints(&self, n: NodeId) -> Result<Vec<NodeId>, EnergyError> {
        match self.state.nodes()[n.index()].sort {
            Sort::Point => Ok(vec![n]),
            Sort::Line => match self.children(n) {
                Some((Operator::Line, args)) => Ok(args),
                _ => Err(EnergyError::NotEvaluable(n)),
            },
            _ => Err(EnergyError::NotEvaluable(n)),
        }
    }
}

fn check_dims(a: &Mat, b: &Mat) -> Result<(), EnergyError> {
    if a.shape() != b.shape() {
        return Err(MatrixError::Dim(a.shape(), b.shape()).into());
    }
    Ok(())
}

/// Unweighted energy and gradients of one edge; `None` for non-energetic
/// edges.
pub fn edge_term(state: &MathState, binding: &Binding, edge: EdgeId) -> Result<Option<EdgeTerm>, EnergyError> {
    let domain = classify_edge(state, edge)?;
    if domain == Domain::NonEnergetic {
        return Ok(None);
    }
    let e = state.edge(edge).expect("classified");
    let nodes: Vec<NodeId> = e.args.iter().map(|a| a.as_node().expect("predicate args")).collect();
    let mut ev = Evaluator::new(state, binding);
    let mut grads = BTreeMap::new();
    let mut degenerate = false;
    let value = match domain {
        Domain::Matrix => {
            let mats: Vec<Mat> = nodes.iter().map(|&n| ev.matrix(n)).collect::<Result<_, _>>()?;
            let t = match e.operator {
                Operator::Equals => matrix::e_eq(&mats[0], &mats[1])?,
                Operator::Symmetric => matrix::e_sym(&mats[0])?,
                Operator::Orthogonal => matrix::e_orth(&mats[0])?,
                Operator::InverseOf => matrix::e_inv(&mats[0], &mats[1])?,
                _ => unreachable!("matrix predicates"),
            };
            for (&n, g) in nodes.iter().zip(t.grads) {
                ev.backprop(n, Value::Matrix(g), &mut grads)?;
            }
            t.value
        }
        Domain::Ideal => {
            let r = ev.scalar(nodes[0])? - ev.scalar(nodes[1])?;
            ev.backprop(nodes[0], Value::Scalar(2.0 * r), &mut grads)?;
            ev.backprop(nodes[1], Value::Scalar(-2.0 * r), &mut grads)?;
            r * r
        }
        Domain::Geometry => {
            let mut pts_nodes = Vec::new();
            for &n in &nodes {
                pts_nodes.extend(ev.endpoints(n)?);
            }
            let pts: Vec<Point> = pts_nodes.iter().map(|&n| ev.point(n)).collect::<Result<_, _>>()?;
            let t: GeoTerm = match (e.operator, pts.len()) {
                (Operator::Equals, 2) => geometry::e_point_eq(pts[0], pts[1]),
                (Operator::Equals, 4) => {
                    // Two lines coincide when both endpoints of the second lie
                    // on the first.
                    let a = geometry::e_coll(pts[0], pts[1], pts[2]);
                    let b = geometry::e_coll(pts[0], pts[1], pts[3]);
                    GeoTerm {
                        value: a.value + b.value,
                        grads: vec![
                            add_pt(a.grads[0], b.grads[0]),
                            add_pt(a.grads[1], b.grads[1]),
                            a.grads[2],
                            b.grads[2],
                        ],
                        degenerate: geometry::d_sq(pts[0], pts[1]) < 1e-24,
                    }
                }
                (Operator::Collinear, 3) => geometry::e_coll(pts[0], pts[1], pts[2]),
                (Operator::Parallel, 4) => geometry::e_para(pts[0], pts[1], pts[2], pts[3]),
                (Operator::Perpendicular, 4) => geometry::e_perp(pts[0], pts[1], pts[2], pts[3]),
                (Operator::Congruent, 4) => geometry::e_cong(pts[0], pts[1], pts[2], pts[3]),
                (Operator::Ratio, 8) => {
                    geometry::e_ratio(&pts[..].try_into().expect("eight points"))
                }
                _ => return Err(EnergyError::NotEvaluable(nodes[0])),
            };
            degenerate = t.degenerate;
            for (&n, g) in pts_nodes.iter().zip(t.grads) {
                ev.backprop(n, Value::Point(g), &mut grads)?;
            }
            t.value
        }
        Domain::NonEnergetic => unreachable!(),
    };
    Ok(Some(EdgeTerm {
        domain,
        value,
        grads,
        degenerate,
    }))
}

fn add_pt(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

/// Weighted energy over all energetic fact edges, accumulated in ascending
/// edge id order.
pub fn total_energy(
    state: &MathState,
    binding: &Binding,
    weights: &DomainWeights,
) -> Result<EnergyReport, EnergyError> {
    let layout: HashMap<NodeId, (usize, usize)> = binding
        .free_layout()
        .into_iter()
        .map(|r| (r.node, (r.offset, r.len)))
        .collect();
    let mut gradient = vec![0.0; binding.free_len()];
    let mut per_edge = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut total = 0.0;
    for &f in state.facts() {
        let Some(term) = edge_term(state, binding, f)? else {
            continue;
        };
        let w = weights.weight(term.domain);
        if term.degenerate {
            warnings.push(format!("{}: zero-length segment, predicate holds vacuously", EntityRef::Edge(f)));
        }
        total += w * term.value;
        per_edge.insert(
            f,
            EdgeEnergy {
                domain: term.domain,
                value: w * term.value,
            },
        );
        for (n, g) in term.grads {
            if let Some(&(offset, len)) = layout.get(&n) {
                for (slot, x) in gradient[offset..offset + len].iter_mut().zip(g.flat()) {
                    *slot += w * x;
                }
            }
        }
    }
    Ok(EnergyReport {
        total,
        per_edge,
        gradient,
        warnings,
    })
}

pub fn is_consistent(
    state: &MathState,
    binding: &Binding,
    weights: &DomainWeights,
    tol: f64,
) -> Result<bool, EnergyError> {
    Ok(total_energy(state, binding, weights)?.total < tol)
}
