//! Translation of a state's facts and goal into polynomials.
//!
//! Scalar leaves become variables (numeric labels become constants), points
//! become coordinate pairs, and constructor terms are expanded. An equality
//! fact lifts to `lhs - rhs`; geometric predicates lift to the inner residual
//! polynomial whose square is their energy. Connectives and quantifiers are
//! structure handled by the deduction rules and are not lifted.

use std::collections::BTreeMap;
use std::fmt;

use crate::hypergraph::{EdgeId, EdgeType, EntityRef, MathState, NodeId, NodeType, Operator, Sort};
use crate::ideal::Polynomial;

#[derive(Debug, Clone, PartialEq)]
pub struct Lifted {
    pub vars: Vec<String>,
    /// Lifted facts in ascending edge order; one fact may yield two
    /// polynomials (point or line equality).
    pub facts: Vec<(EdgeId, Polynomial)>,
    pub goal: Polynomial,
}

impl Lifted {
    pub fn polys(&self) -> Vec<Polynomial> {
        self.facts.iter().map(|(_, p)| p.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftError {
    pub edges: Vec<EdgeId>,
    pub reason: String,
}

impl fmt::Display for LiftError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list: Vec<String> = self.edges.iter().map(|e| format!("e{}", e.0)).collect();
        if list.is_empty() {
            write!(f, "not liftable: {}", self.reason)
        } else {
            write!(f, "not liftable ({}): {}", list.join(", "), self.reason)
        }
    }
}

impl std::error::Error for LiftError {}

type P2 = (Polynomial, Polynomial);

struct Lifter<'a> {
    state: &'a MathState,
    var_index: BTreeMap<(NodeId, u8), usize>,
    n: usize,
}

impl<'a> Lifter<'a> {
    fn new(state: &'a MathState) -> (Self, Vec<String>) {
        let mut var_index = BTreeMap::new();
        let mut names = Vec::new();
        for node in state.nodes() {
            if node.node_type == NodeType::CompoundTerm {
                continue;
            }
            match node.sort {
                Sort::Scalar if node.label.parse::<f64>().is_err() => {
                    var_index.insert((node.id, 0), names.len());
                    names.push(node.label.clone());
                }
                Sort::Point => {
                    var_index.insert((node.id, 0), names.len());
                    names.push(format!("{}_x", node.label));
                    var_index.insert((node.id, 1), names.len());
                    names.push(format!("{}_y", node.label));
                }
                _ => {}
            }
        }
        let n = names.len();
        (Lifter { state, var_index, n }, names)
    }

    fn children(&self, node: NodeId) -> Option<(Operator, Vec<NodeId>)> {
        let e = self.state.edge(self.state.defining_edge(node)?)?;
        Some((e.operator, e.args.iter().filter_map(|a| a.as_node()).collect()))
    }

    fn scalar(&self, node: NodeId) -> Result<Polynomial, String> {
        let nd = self.state.node(node).ok_or("unknown node")?;
        if nd.sort != Sort::Scalar {
            return Err(format!("{} is not a scalar", nd.label));
        }
        if nd.node_type != NodeType::CompoundTerm {
            if let Ok(v) = nd.label.parse::<f64>() {
                return Ok(Polynomial::constant(self.n, v));
            }
            return Ok(Polynomial::var(self.n, self.var_index[&(node, 0)]));
        }
        let (op, args) = self.children(node).ok_or("compound without constructor")?;
        let a = self.scalar(args[0])?;
        let b = self.scalar(args[1])?;
        Ok(match op {
            Operator::Sum => a.add(&b),
            Operator::Sub => a.sub(&b),
            Operator::Product => a.mul(&b),
            other => return Err(format!("{} is not a scalar constructor", other.name())),
        }
        .expect("shared variable count"))
    }

    fn point(&self, node: NodeId) -> Result<P2, String> {
        let nd = self.state.node(node).ok_or("unknown node")?;
        if nd.sort != Sort::Point {
            return Err(format!("{} is not a point", nd.label));
        }
        if nd.node_type != NodeType::CompoundTerm {
            return Ok((
                Polynomial::var(self.n, self.var_index[&(node, 0)]),
                Polynomial::var(self.n, self.var_index[&(node, 1)]),
            ));
        }
        match self.children(node) {
            Some((Operator::Midpoint, args)) => {
                let (ax, ay) = self.point(args[0])?;
                let (bx, by) = self.point(args[1])?;
                Ok((
                    ax.add(&bx).expect("shared").scale(0.5),
                    ay.add(&by).expect("shared").scale(0.5),
                ))
            }
            _ => Err("unsupported point constructor".into()),
        }
    }

    /// Points of a predicate argument list; lines contribute both endpoints.
    fn points(&self, args: &[EntityRef]) -> Result<Vec<P2>, String> {
        let mut out = Vec::new();
        for a in args {
            let n = a.as_node().ok_or("predicate argument is not a term")?;
            match self.state.node(n).map(|x| x.sort) {
                Some(Sort::Line) => match self.children(n) {
                    Some((Operator::Line, ends)) => {
                        out.push(self.point(ends[0])?);
                        out.push(self.point(ends[1])?);
                    }
                    _ => return Err("line without defining points".into()),
                },
                _ => out.push(self.point(n)?),
            }
        }
        Ok(out)
    }

    fn edge(&self, id: EdgeId) -> Result<Vec<Polynomial>, String> {
        let e = self.state.edge(id).ok_or("unknown edge")?;
        let sub = |a: &Polynomial, b: &Polynomial| a.sub(b).expect("shared");
        let mul = |a: &Polynomial, b: &Polynomial| a.mul(b).expect("shared");
        let cross = |p: &[P2]| {
            // (p1 - p0) × (p3 - p2)
            let (ux, uy) = (sub(&p[1].0, &p[0].0), sub(&p[1].1, &p[0].1));
            let (vx, vy) = (sub(&p[3].0, &p[2].0), sub(&p[3].1, &p[2].1));
            sub(&mul(&ux, &vy), &mul(&uy, &vx))
        };
        let dsq = |a: &P2, b: &P2| {
            let (dx, dy) = (sub(&a.0, &b.0), sub(&a.1, &b.1));
            mul(&dx, &dx).add(&mul(&dy, &dy)).expect("shared")
        };
        match e.operator {
            Operator::Equals => {
                let (l, r) = (e.args[0].as_node().ok_or("bad equality")?, e.args[1].as_node().ok_or("bad equality")?);
                match self.state.node(l).map(|x| x.sort) {
                    Some(Sort::Scalar) => Ok(vec![sub(&self.scalar(l)?, &self.scalar(r)?)]),
                    Some(Sort::Point) => {
                        let (a, b) = (self.point(l)?, self.point(r)?);
                        Ok(vec![sub(&a.0, &b.0), sub(&a.1, &b.1)])
                    }
                    Some(Sort::Line) => {
                        let p = self.points(&e.args)?;
                        Ok(vec![cross(&[p[0].clone(), p[1].clone(), p[0].clone(), p[2].clone()]), cross(&[
                            p[0].clone(),
                            p[1].clone(),
                            p[0].clone(),
                            p[3].clone(),
                        ])])
                    }
                    _ => Err("matrix equality has no polynomial form".into()),
                }
            }
            Operator::Collinear => {
                let p = self.points(&e.args)?;
                Ok(vec![cross(&[p[0].clone(), p[1].clone(), p[0].clone(), p[2].clone()])])
            }
            Operator::Parallel => Ok(vec![cross(&self.points(&e.args)?)]),
            Operator::Perpendicular => {
                let p = self.points(&e.args)?;
                let (ux, uy) = (sub(&p[1].0, &p[0].0), sub(&p[1].1, &p[0].1));
                let (vx, vy) = (sub(&p[3].0, &p[2].0), sub(&p[3].1, &p[2].1));
                Ok(vec![mul(&ux, &vx).add(&mul(&uy, &vy)).expect("shared")])
            }
            Operator::Congruent => {
                let p = self.points(&e.args)?;
                Ok(vec![sub(&dsq(&p[0], &p[1]), &dsq(&p[2], &p[3]))])
            }
            Operator::Ratio => {
                let p = self.points(&e.args)?;
                Ok(vec![sub(
                    &mul(&dsq(&p[0], &p[1]), &dsq(&p[6], &p[7])),
                    &mul(&dsq(&p[4], &p[5]), &dsq(&p[2], &p[3])),
                )])
            }
            Operator::Symmetric | Operator::Orthogonal | Operator::InverseOf => {
                Err("matrix predicates have no polynomial form".into())
            }
            _ => Ok(Vec::new()),
        }
    }
}

/// Lifts the current fact set and the goal edge.
pub fn algebraic_lift(state: &MathState) -> Result<Lifted, LiftError> {
    let (lifter, vars) = Lifter::new(state);
    let mut facts = Vec::new();
    let mut bad = Vec::new();
    let mut reason = String::new();
    for &f in state.facts() {
        let edge = state.edge(f).expect("fact exists");
        if edge.edge_type != EdgeType::Predicate {
            continue;
        }
        match lifter.edge(f) {
            Ok(ps) => facts.extend(ps.into_iter().map(|p| (f, p))),
            Err(r) => {
                bad.push(f);
                reason = r;
            }
        }
    }
    let goal = match state.goal() {
        None => {
            return Err(LiftError {
                edges: bad,
                reason: "state has no concrete goal".into(),
            })
        }
        Some(g) => match lifter.edge(g) {
            Ok(mut ps) if ps.len() == 1 => Some(ps.remove(0)),
            Ok(_) => {
                bad.push(g);
                reason = "goal must lift to a single polynomial".into();
                None
            }
            Err(r) => {
                bad.push(g);
                reason = r;
                None
            }
        },
    };
    match goal {
        Some(goal) if bad.is_empty() => Ok(Lifted { vars, facts, goal }),
        _ => Err(LiftError { edges: bad, reason }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr_io::load_problem;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lift(text: &str) -> Result<Lifted, LiftError> {
        algebraic_lift(&load_problem(text, 2).unwrap().state)
    }

    #[test]
    fn sum_equality_vanishes_iff_equal() {
        let l = lift("(problem (decl x var) (decl y var) (decl z var) (premise (Equals (Sum x y) z)) (goal (Equals x z)))")
            .unwrap();
        assert_eq!(l.vars, ["x", "y", "z"]);
        let p = &l.facts[0].1;
        assert_eq!(p.to_text(&["x", "y", "z"]), "x + y - z");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for i in 0..20 {
            let x: f64 = rng.gen_range(-2.0..2.0);
            let y: f64 = rng.gen_range(-2.0..2.0);
            // Half the assignments satisfy the equality.
            let z = if i % 2 == 0 { x + y } else { x + y + rng.gen_range(0.1..1.0) };
            assert_eq!(p.eval(&[x, y, z]).abs() < 1e-12, (x + y - z).abs() < 1e-12);
        }
    }

    #[test]
    fn collinear_goal_is_cross_product() {
        let l = lift("(problem (decl A point) (decl B point) (decl C point) (goal (Collinear A B C)))").unwrap();
        assert_eq!(l.vars.len(), 6);
        assert!(l.facts.is_empty());
        let pts = [[0.3, 1.0], [2.0, -1.0], [0.5, 0.25]];
        let x: Vec<f64> = pts.iter().flat_map(|p| p.iter().copied()).collect();
        let want = crate::geometry::coll_residual(pts[0], pts[1], pts[2]).r;
        assert!((l.goal.eval(&x) - want).abs() < 1e-12);
        assert_eq!(l.goal.degree(), 2);
    }

    #[test]
    fn empty_premises_give_goal_norm() {
        let l = lift("(problem (decl a var) (decl b var) (goal (Equals a b)))").unwrap();
        assert!(l.facts.is_empty());
        assert_eq!(l.goal.norm_sq(), 2.0);
    }

    #[test]
    fn numeric_constants_and_connectives() {
        let l = lift(
            "(problem (decl x var) (decl 2 const) (premise (Equals (Product 2 x) x))
             (premise (Implies (Equals x x) (Equals x 2))) (goal (Equals x 2)))",
        )
        .unwrap();
        assert_eq!(l.vars, ["x"]);
        assert_eq!(l.facts.len(), 1);
        assert_eq!(l.facts[0].1.to_text(&["x"]), "x");
        assert_eq!(l.goal.to_text(&["x"]), "x - 2");
    }

    #[test]
    fn matrix_facts_are_rejected() {
        let e = lift("(problem (decl M matrix 2) (decl a var) (premise (Symmetric M)) (goal (Equals a a)))").unwrap_err();
        assert_eq!(e.edges.len(), 1);
        assert!(e.to_string().contains("matrix"));
    }
}
