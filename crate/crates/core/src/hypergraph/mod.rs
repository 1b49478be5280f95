//! Mathematical states as typed, directed, higher-order hypergraphs.
//!
//! A [`MathState`] pairs a hypergraph with a fact set. Nodes are terms
//! (variables, constants, compound terms); hyperedges are ordered relations
//! whose arguments may be nodes or other edges, so nested formulas such as
//! `Implies(And(a, b), c)` are edges over edges. Quantifiers carry a bound
//! variable set and exactly one body edge.
//!
//! Identical edges are interned: adding an edge whose `(type, operator,
//! args, bound vars)` already exists returns the existing id. Entity ids are
//! assigned in creation order, and every edge only refers to entities that
//! existed before it, so id order is a topological order of the
//! references-to graph.

pub mod canon;
pub mod pattern;
pub mod rules;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canon::{canonical_hash, CanonicalHashes};
pub use pattern::{GoalMatch, GoalPattern, PatternTerm};
pub use rules::{Action, RuleKind, RuleLibrary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EdgeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Reference to either a node or a hyperedge of one state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityRef {
    Node(NodeId),
    Edge(EdgeId),
}

impl EntityRef {
    pub fn as_node(self) -> Option<NodeId> {
        match self {
            EntityRef::Node(n) => Some(n),
            EntityRef::Edge(_) => None,
        }
    }

    pub fn as_edge(self) -> Option<EdgeId> {
        match self {
            EntityRef::Edge(e) => Some(e),
            EntityRef::Node(_) => None,
        }
    }
}

impl fmt::Display for EntityRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityRef::Node(n) => write!(f, "n{}", n.0),
            EntityRef::Edge(e) => write!(f, "e{}", e.0),
        }
    }
}

impl std::str::FromStr for EntityRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, digits) = s.split_at(s.len().min(1));
        let id: u32 = digits.parse().map_err(|_| format!("bad entity reference `{s}`"))?;
        match kind {
            "n" => Ok(EntityRef::Node(NodeId(id))),
            "e" => Ok(EntityRef::Edge(EdgeId(id))),
            _ => Err(format!("bad entity reference `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeType {
    Variable,
    Constant,
    CompoundTerm,
}

/// Value domain of a term; decides which energy engine sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sort {
    Scalar,
    Matrix,
    Point,
    Line,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeType {
    Constructor,
    Predicate,
    Connective,
    Quantifier,
}

/// Operator symbols carried by hyperedges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Operator {
    // constructors
    Sum,
    Product,
    Sub,
    Inverse,
    Transpose,
    Midpoint,
    Line,
    // predicates
    Equals,
    Symmetric,
    Orthogonal,
    InverseOf,
    Collinear,
    Parallel,
    Perpendicular,
    Congruent,
    Ratio,
    // connectives
    Implies,
    And,
    // quantifiers
    ForAll,
}

impl Operator {
    pub const ALL: [Operator; 19] = [
        Operator::Sum,
        Operator::Product,
        Operator::Sub,
        Operator::Inverse,
        Operator::Transpose,
        Operator::Midpoint,
        Operator::Line,
        Operator::Equals,
        Operator::Symmetric,
        Operator::Orthogonal,
        Operator::InverseOf,
        Operator::Collinear,
        Operator::Parallel,
        Operator::Perpendicular,
        Operator::Congruent,
        Operator::Ratio,
        Operator::Implies,
        Operator::And,
        Operator::ForAll,
    ];

    pub fn edge_type(self) -> EdgeType {
        use Operator::*;
        match self {
            Sum | Product | Sub | Inverse | Transpose | Midpoint | Line => EdgeType::Constructor,
            Equals | Symmetric | Orthogonal | InverseOf | Collinear | Parallel | Perpendicular
            | Congruent | Ratio => EdgeType::Predicate,
            Implies | And => EdgeType::Connective,
            ForAll => EdgeType::Quantifier,
        }
    }

    pub fn name(self) -> &'static str {
        use Operator::*;
        match self {
            Sum => "Sum",
            Product => "Product",
            Sub => "Sub",
            Inverse => "Inverse",
            Transpose => "Transpose",
            Midpoint => "Midpoint",
            Line => "Line",
            Equals => "Equals",
            Symmetric => "Symmetric",
            Orthogonal => "Orthogonal",
            InverseOf => "InverseOf",
            Collinear => "Collinear",
            Parallel => "Parallel",
            Perpendicular => "Perpendicular",
            Congruent => "Congruent",
            Ratio => "Ratio",
            Implies => "Implies",
            And => "And",
            ForAll => "ForAll",
        }
    }

    pub fn from_name(name: &str) -> Option<Operator> {
        Operator::ALL.iter().copied().find(|op| op.name() == name)
    }

    /// Admissible argument counts (not counting bound variables).
    pub fn arities(self) -> &'static [usize] {
        use Operator::*;
        match self {
            Inverse | Transpose | Symmetric | Orthogonal | ForAll => &[1],
            Sum | Product | Sub | Midpoint | Line | Equals | InverseOf | Implies | And => &[2],
            Collinear => &[3],
            Parallel | Perpendicular | Congruent => &[4, 2],
            Ratio => &[8, 4],
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub node_type: NodeType,
    pub sort: Sort,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperedge {
    pub id: EdgeId,
    pub edge_type: EdgeType,
    pub operator: Operator,
    pub args: Vec<EntityRef>,
    /// Output term of a constructor.
    pub output: Option<NodeId>,
    /// Variables bound by a quantifier, ascending.
    pub bound_vars: Vec<NodeId>,
}

impl Hyperedge {
    /// Arguments as seen by message passing: constructors include their output
    /// as the final position, quantifiers list bound variables before the body.
    pub fn relation(&self) -> Vec<EntityRef> {
        match self.edge_type {
            EdgeType::Constructor => {
                let mut rel = self.args.clone();
                rel.extend(self.output.map(EntityRef::Node));
                rel
            }
            EdgeType::Quantifier => {
                let mut rel: Vec<EntityRef> =
                    self.bound_vars.iter().copied().map(EntityRef::Node).collect();
                rel.extend(self.args.iter().copied());
                rel
            }
            _ => self.args.clone(),
        }
    }

    pub fn is_formula(&self) -> bool {
        self.edge_type != EdgeType::Constructor
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HypergraphError {
    #[error("label must be nonempty")]
    EmptyLabel,
    #[error("symbol `{0}` is already declared")]
    DuplicateSymbol(String),
    #[error("compound terms are created by constructor edges, not add_node")]
    CompoundNode,
    #[error("unknown entity {0}")]
    UnknownEntity(EntityRef),
    #[error("{op} expects {expected:?} arguments, got {got}")]
    Arity {
        op: Operator,
        expected: Vec<usize>,
        got: usize,
    },
    #[error("type mismatch in {op}: {detail}")]
    TypeMismatch { op: Operator, detail: String },
    #[error("edge would introduce a reference cycle")]
    Cycle,
    #[error("edge {0:?} is a constructor and cannot be asserted")]
    NotAssertable(EdgeId),
}

type EdgeKey = (Operator, Vec<EntityRef>, Vec<NodeId>);

/// A proof state: hypergraph plus the set of edges held true.
#[derive(Debug, Clone)]
pub struct MathState {
    nodes: Vec<Node>,
    edges: Vec<Hyperedge>,
    facts: BTreeSet<EdgeId>,
    goal: Option<EdgeId>,
    symbols: HashMap<(NodeType, String), NodeId>,
    interned: HashMap<EdgeKey, EdgeId>,
    defined_by: Vec<Option<EdgeId>>,
}

impl Default for MathState {
    fn default() -> Self {
        Self::new()
    }
}

impl PartialEq for MathState {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.edges == other.edges
            && self.facts == other.facts
            && self.goal == other.goal
    }
}

impl MathState {
    pub fn new() -> Self {
        MathState {
            nodes: Vec::new(),
            edges: Vec::new(),
            facts: BTreeSet::new(),
            goal: None,
            symbols: HashMap::new(),
            interned: HashMap::new(),
            defined_by: Vec::new(),
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Hyperedge] {
        &self.edges
    }

    pub fn facts(&self) -> &BTreeSet<EdgeId> {
        &self.facts
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id.index())
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Hyperedge> {
        self.edges.get(id.index())
    }

    pub fn is_fact(&self, id: EdgeId) -> bool {
        self.facts.contains(&id)
    }

    pub fn entity_count(&self) -> usize {
        self.nodes.len() + self.edges.len()
    }

    pub fn contains(&self, entity: EntityRef) -> bool {
        match entity {
            EntityRef::Node(n) => n.index() < self.nodes.len(),
            EntityRef::Edge(e) => e.index() < self.edges.len(),
        }
    }

    /// Edge designated as the instantiated goal statement, if the goal was
    /// concrete enough to be built into the graph.
    pub fn goal(&self) -> Option<EdgeId> {
        self.goal
    }

    pub fn set_goal(&mut self, goal: Option<EdgeId>) {
        self.goal = goal;
    }

    /// Constructor edge that defines a compound node.
    pub fn defining_edge(&self, node: NodeId) -> Option<EdgeId> {
        self.defined_by.get(node.index()).copied().flatten()
    }

    pub fn lookup_symbol(&self, label: &str) -> Option<NodeId> {
        self.symbols
            .get(&(NodeType::Variable, label.to_string()))
            .or_else(|| self.symbols.get(&(NodeType::Constant, label.to_string())))
            .copied()
    }

    pub fn sort_of(&self, entity: EntityRef) -> Option<Sort> {
        entity.as_node().and_then(|n| self.node(n)).map(|n| n.sort)
    }

    /// Adds a variable or constant. Compound terms come from constructor edges.
    pub fn add_node(
        &mut self,
        node_type: NodeType,
        sort: Sort,
        label: &str,
    ) -> Result<NodeId, HypergraphError> {
        if label.is_empty() {
            return Err(HypergraphError::EmptyLabel);
        }
        if node_type == NodeType::CompoundTerm {
            return Err(HypergraphError::CompoundNode);
        }
        let key = (node_type, label.to_string());
        if self.symbols.contains_key(&key) {
            return Err(HypergraphError::DuplicateSymbol(label.to_string()));
        }
        let id = self.push_node(node_type, sort, label.to_string());
        self.symbols.insert(key, id);
        Ok(id)
    }

    fn push_node(&mut self, node_type: NodeType, sort: Sort, label: String) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node {
            id,
            node_type,
            sort,
            label,
        });
        self.defined_by.push(None);
        id
    }

    /// Adds (or finds the interned copy of) an edge. Constructors create their
    /// compound output node; the returned edge is never a fact.
    pub fn add_edge(
        &mut self,
        operator: Operator,
        args: Vec<EntityRef>,
        bound_vars: Vec<NodeId>,
    ) -> Result<EdgeId, HypergraphError> {
        let mut bound_vars = bound_vars;
        bound_vars.sort();
        bound_vars.dedup();
        let output_sort = self.check_edge(operator, &args, &bound_vars)?;
        let key = (operator, args.clone(), bound_vars.clone());
        if let Some(&existing) = self.interned.get(&key) {
            return Ok(existing);
        }
        let id = EdgeId(self.edges.len() as u32);
        let output = match output_sort {
            Some(sort) => {
                let node = self.push_node(NodeType::CompoundTerm, sort, operator.name().to_string());
                self.defined_by[node.index()] = Some(id);
                Some(node)
            }
            None => None,
        };
        self.edges.push(Hyperedge {
            id,
            edge_type: operator.edge_type(),
            operator,
            args,
            output,
            bound_vars,
        });
        self.interned.insert(key, id);
        Ok(id)
    }

    /// Returns the existing edge with this exact structure, if any.
    pub fn find_edge(
        &self,
        operator: Operator,
        args: &[EntityRef],
        bound_vars: &[NodeId],
    ) -> Option<EdgeId> {
        let mut bound = bound_vars.to_vec();
        bound.sort();
        bound.dedup();
        self.interned.get(&(operator, args.to_vec(), bound)).copied()
    }

    /// Validates typing rules; returns the output sort for constructors.
    fn check_edge(
        &self,
        op: Operator,
        args: &[EntityRef],
        bound_vars: &[NodeId],
    ) -> Result<Option<Sort>, HypergraphError> {
        for &a in args {
            if !self.contains(a) {
                // Every id handed out so far refers backwards, so an unknown
                // id is the only way to form a cycle.
                return Err(HypergraphError::UnknownEntity(a));
            }
        }
        for &v in bound_vars {
            if !self.contains(EntityRef::Node(v)) {
                return Err(HypergraphError::UnknownEntity(EntityRef::Node(v)));
            }
        }
        if !op.arities().contains(&args.len()) {
            return Err(HypergraphError::Arity {
                op,
                expected: op.arities().to_vec(),
                got: args.len(),
            });
        }
        let mismatch = |detail: &str| HypergraphError::TypeMismatch {
            op,
            detail: detail.to_string(),
        };
        let sorts: Vec<Option<Sort>> = args.iter().map(|&a| self.sort_of(a)).collect();
        let all_nodes = sorts.iter().all(Option::is_some);
        let all_sort = |s: Sort| sorts.iter().all(|x| *x == Some(s));
        if op.edge_type() != EdgeType::Quantifier && !bound_vars.is_empty() {
            return Err(mismatch("only quantifiers bind variables"));
        }
        match op.edge_type() {
            EdgeType::Constructor => {
                if !all_nodes {
                    return Err(mismatch("constructor arguments must be nodes"));
                }
                let first = sorts[0].unwrap();
                let out = match op {
                    Operator::Sum | Operator::Sub | Operator::Product => {
                        if !(all_sort(Sort::Scalar) || all_sort(Sort::Matrix)) {
                            return Err(mismatch("operands must both be scalars or both matrices"));
                        }
                        first
                    }
                    Operator::Inverse | Operator::Transpose => {
                        if first != Sort::Matrix {
                            return Err(mismatch("operand must be a matrix"));
                        }
                        Sort::Matrix
                    }
                    Operator::Midpoint => {
                        if !all_sort(Sort::Point) {
                            return Err(mismatch("operands must be points"));
                        }
                        Sort::Point
                    }
                    Operator::Line => {
                        if !all_sort(Sort::Point) {
                            return Err(mismatch("operands must be points"));
                        }
                        Sort::Line
                    }
                    _ => unreachable!(),
                };
                Ok(Some(out))
            }
            EdgeType::Predicate => {
                if !all_nodes {
                    return Err(mismatch("predicate arguments must be nodes"));
                }
                match op {
                    Operator::Equals => {}
                    Operator::Symmetric | Operator::Orthogonal | Operator::InverseOf => {
                        if !all_sort(Sort::Matrix) {
                            return Err(mismatch("operands must be matrices"));
                        }
                    }
                    Operator::Collinear => {
                        if !all_sort(Sort::Point) {
                            return Err(mismatch("operands must be points"));
                        }
                    }
                    Operator::Parallel
                    | Operator::Perpendicular
                    | Operator::Congruent
                    | Operator::Ratio => {
                        let pointwise = args.len() == op.arities()[0];
                        let ok = if pointwise {
                            all_sort(Sort::Point)
                        } else {
                            all_sort(Sort::Line)
                        };
                        if !ok {
                            return Err(mismatch("operands must be all points or all lines"));
                        }
                    }
                    _ => unreachable!(),
                }
                Ok(None)
            }
            EdgeType::Connective => {
                for &a in args {
                    match a {
                        EntityRef::Edge(e) if self.edges[e.index()].is_formula() => {}
                        EntityRef::Edge(_) => {
                            return Err(mismatch("connective arguments must be formulas"))
                        }
                        EntityRef::Node(_) => {
                            return Err(mismatch("connective arguments must be edges"))
                        }
                    }
                }
                Ok(None)
            }
            EdgeType::Quantifier => {
                match args[0] {
                    EntityRef::Edge(e) if self.edges[e.index()].is_formula() => {}
                    _ => return Err(mismatch("quantifier body must be a formula edge")),
                }
                if bound_vars.is_empty() {
                    return Err(mismatch("quantifier must bind at least one variable"));
                }
                for &v in bound_vars {
                    if self.nodes[v.index()].node_type != NodeType::Variable {
                        return Err(mismatch("bound entities must be variables"));
                    }
                }
                Ok(None)
            }
        }
    }

    /// Marks an edge as held true. Idempotent.
    pub fn assert_fact(&mut self, edge: EdgeId) -> Result<(), HypergraphError> {
        let e = self
            .edge(edge)
            .ok_or(HypergraphError::UnknownEntity(EntityRef::Edge(edge)))?;
        if e.edge_type == EdgeType::Constructor {
            return Err(HypergraphError::NotAssertable(edge));
        }
        self.facts.insert(edge);
        Ok(())
    }

    /// Edges that list `entity` in their relation.
    pub fn parents(&self) -> Vec<Vec<EdgeId>> {
        let mut parents = vec![Vec::new(); self.entity_count()];
        for e in &self.edges {
            let mut seen: Vec<usize> = Vec::new();
            for r in e.relation() {
                let idx = self.entity_index(r);
                if !seen.contains(&idx) {
                    seen.push(idx);
                    parents[idx].push(e.id);
                }
            }
        }
        parents
    }

    /// Dense index over nodes followed by edges.
    pub fn entity_index(&self, entity: EntityRef) -> usize {
        match entity {
            EntityRef::Node(n) => n.index(),
            EntityRef::Edge(e) => self.nodes.len() + e.index(),
        }
    }

    pub fn entity_at(&self, index: usize) -> EntityRef {
        if index < self.nodes.len() {
            EntityRef::Node(NodeId(index as u32))
        } else {
            EntityRef::Edge(EdgeId((index - self.nodes.len()) as u32))
        }
    }

    /// Checks every structural invariant; used by tests and after unification.
    pub fn validate(&self) -> Result<(), String> {
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id.index() != i {
                return Err(format!("node id mismatch at {i}"));
            }
            let def = self.defined_by[i];
            match (n.node_type, def) {
                (NodeType::CompoundTerm, Some(e)) => {
                    if self.edges[e.index()].output != Some(n.id) {
                        return Err(format!("compound node {} not linked to its constructor", i));
                    }
                }
                (NodeType::CompoundTerm, None) => {
                    return Err(format!("compound node {i} has no constructor"))
                }
                (_, Some(_)) => return Err(format!("leaf node {i} is a constructor output")),
                _ => {}
            }
        }
        let mut outputs = BTreeSet::new();
        for (i, e) in self.edges.iter().enumerate() {
            if e.id.index() != i {
                return Err(format!("edge id mismatch at {i}"));
            }
            for &a in &e.args {
                if !self.contains(a) {
                    return Err(format!("edge {i} references missing {a}"));
                }
                // Topological order doubles as the acyclicity witness.
                if let EntityRef::Edge(x) = a {
                    if x.index() >= i {
                        return Err(format!("edge {i} references later edge {x:?}"));
                    }
                }
                if let EntityRef::Node(n) = a {
                    if let Some(d) = self.defined_by[n.index()] {
                        if d.index() >= i {
                            return Err(format!("edge {i} references later term {n:?}"));
                        }
                    }
                }
            }
            match e.edge_type {
                EdgeType::Constructor => {
                    let out = e.output.ok_or(format!("constructor {i} lacks output"))?;
                    if !outputs.insert(out) {
                        return Err(format!("node {out:?} output of two constructors"));
                    }
                    if e.args.iter().any(|a| a.as_node().is_none()) {
                        return Err(format!("constructor {i} has edge args"));
                    }
                }
                EdgeType::Connective => {
                    if e.args.iter().any(|a| a.as_edge().is_none()) {
                        return Err(format!("connective {i} has node args"));
                    }
                }
                EdgeType::Quantifier => {
                    if e.args.len() != 1 || e.args[0].as_edge().is_none() || e.bound_vars.is_empty()
                    {
                        return Err(format!("malformed quantifier {i}"));
                    }
                }
                EdgeType::Predicate => {
                    if e.args.iter().any(|a| a.as_node().is_none()) {
                        return Err(format!("predicate {i} has edge args"));
                    }
                }
            }
            if e.edge_type != EdgeType::Constructor && e.output.is_some() {
                return Err(format!("non-constructor {i} has an output"));
            }
        }
        for f in &self.facts {
            let e = self.edge(*f).ok_or(format!("fact {f:?} missing"))?;
            if e.edge_type == EdgeType::Constructor {
                return Err(format!("constructor {f:?} asserted as fact"));
            }
        }
        if let Some(g) = self.goal {
            if self.edge(g).is_none() {
                return Err("goal edge missing".into());
            }
        }
        Ok(())
    }

    /// Human-readable rendering of an entity as a prefix expression.
    pub fn render(&self, entity: EntityRef) -> String {
        match entity {
            EntityRef::Node(n) => {
                let node = &self.nodes[n.index()];
                match self.defining_edge(n) {
                    Some(e) => self.render(EntityRef::Edge(e)),
                    None => node.label.clone(),
                }
            }
            EntityRef::Edge(e) => {
                let edge = &self.edges[e.index()];
                let args: Vec<String> = edge.args.iter().map(|&a| self.render(a)).collect();
                if edge.edge_type == EdgeType::Quantifier {
                    let vars: Vec<&str> = edge
                        .bound_vars
                        .iter()
                        .map(|v| self.nodes[v.index()].label.as_str())
                        .collect();
                    format!("(forall ({}) {})", vars.join(" "), args.join(" "))
                } else {
                    format!("({} {})", edge.operator, args.join(" "))
                }
            }
        }
    }
}
