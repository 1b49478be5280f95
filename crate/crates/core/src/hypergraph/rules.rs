//! Rule library: admissible graph transformations.
//!
//! Every rule either extends the graph (constructors) or extends the fact
//! set (deduction rules). `legal_actions` enumerates candidate operand tuples
//! and keeps exactly those that pass the same precondition check used by
//! `apply_action`, so the two always agree. Actions whose conclusion is
//! already a fact (or whose constructed term already exists) are rejected as
//! no-ops.
//!
//! The deduction rules are:
//!
//! * `ModusPonens(p, Implies(p, q))` asserts `q`.
//! * `AndIntro(a, b)` asserts `And(a, b)`.
//! * `AndElim(And(a, b), a|b)` asserts the chosen conjunct.
//! * `Substitution(Equals(u, v), target, site)` rewrites the first occurrence
//!   of `u` among the arguments of `site` (the target itself or a
//!   constructor inside it) to `v` and asserts the rewritten target.
//! * `UniversalInstantiation(ForAll(V, body), x, t)` replaces `x` by `t`
//!   throughout the body and asserts the body (or the quantifier over the
//!   remaining variables).
//! * `EqualityTransitivity(Equals(a, b), Equals(b, c))` asserts `Equals(a, c)`.
//! * `EqualitySymmetry(Equals(a, b))` asserts `Equals(b, a)`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EdgeId, EdgeType, EntityRef, HypergraphError, MathState, NodeId, Operator, Sort};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleKind {
    ModusPonens,
    AndIntro,
    AndElim,
    Substitution,
    UniversalInstantiation,
    EqualityTransitivity,
    EqualitySymmetry,
    Construct(Operator),
}

/// Whether an operand slot takes a node or an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    Node,
    Edge,
}

impl RuleKind {
    pub const ALL: [RuleKind; 14] = [
        RuleKind::ModusPonens,
        RuleKind::AndIntro,
        RuleKind::AndElim,
        RuleKind::Substitution,
        RuleKind::UniversalInstantiation,
        RuleKind::EqualityTransitivity,
        RuleKind::EqualitySymmetry,
        RuleKind::Construct(Operator::Sum),
        RuleKind::Construct(Operator::Product),
        RuleKind::Construct(Operator::Sub),
        RuleKind::Construct(Operator::Inverse),
        RuleKind::Construct(Operator::Transpose),
        RuleKind::Construct(Operator::Midpoint),
        RuleKind::Construct(Operator::Line),
    ];

    /// Position in [`RuleKind::ALL`]; the policy's operator vocabulary.
    pub fn index(self) -> usize {
        RuleKind::ALL.iter().position(|&r| r == self).expect("rule in table")
    }

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::ModusPonens => "ModusPonens",
            RuleKind::AndIntro => "AndIntro",
            RuleKind::AndElim => "AndElim",
            RuleKind::Substitution => "Substitution",
            RuleKind::UniversalInstantiation => "UniversalInstantiation",
            RuleKind::EqualityTransitivity => "EqualityTransitivity",
            RuleKind::EqualitySymmetry => "EqualitySymmetry",
            RuleKind::Construct(op) => op.name(),
        }
    }

    pub fn from_name(name: &str) -> Option<RuleKind> {
        RuleKind::ALL.iter().copied().find(|r| r.name() == name)
    }

    pub fn slots(self) -> &'static [SlotKind] {
        use SlotKind::*;
        match self {
            RuleKind::ModusPonens
            | RuleKind::AndIntro
            | RuleKind::AndElim
            | RuleKind::EqualityTransitivity => &[Edge, Edge],
            RuleKind::Substitution => &[Edge, Edge, Edge],
            RuleKind::UniversalInstantiation => &[Edge, Node, Node],
            RuleKind::EqualitySymmetry => &[Edge],
            RuleKind::Construct(Operator::Inverse | Operator::Transpose) => &[Node],
            RuleKind::Construct(_) => &[Node, Node],
        }
    }

    pub fn arity(self) -> usize {
        self.slots().len()
    }

    pub fn is_constructor(self) -> bool {
        matches!(self, RuleKind::Construct(_))
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The set of rules available to search, plus commutativity declarations
/// used by canonicalization and the constructor term budget.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleLibrary {
    pub rules: Vec<RuleKind>,
    pub commutative: BTreeSet<Operator>,
    /// Constructor actions are disabled once the node count exceeds this.
    pub term_budget: usize,
}

impl RuleLibrary {
    pub const DEFAULT_TERM_BUDGET: usize = 256;

    /// Deduction rules plus every domain constructor.
    pub fn standard() -> Self {
        RuleLibrary {
            rules: RuleKind::ALL.to_vec(),
            commutative: [Operator::Sum, Operator::Product, Operator::And]
                .into_iter()
                .collect(),
            term_budget: Self::DEFAULT_TERM_BUDGET,
        }
    }

    /// Deduction rules only.
    pub fn logic() -> Self {
        let mut lib = Self::standard();
        lib.rules.retain(|r| !r.is_constructor());
        lib
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "standard" => Some(Self::standard()),
            "logic" => Some(Self::logic()),
            _ => None,
        }
    }

    pub fn contains(&self, rule: RuleKind) -> bool {
        self.rules.contains(&rule)
    }
}

/// An operator symbol plus its ordered operands.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Action {
    pub rule: RuleKind,
    pub operands: Vec<EntityRef>,
}

impl Action {
    pub fn new(rule: RuleKind, operands: Vec<EntityRef>) -> Self {
        Action { rule, operands }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.rule)?;
        for (i, o) in self.operands.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{o}")?;
        }
        f.write_str(")")
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let open = s.find('(').ok_or_else(|| format!("malformed action `{s}`"))?;
        if !s.ends_with(')') {
            return Err(format!("malformed action `{s}`"));
        }
        let rule = RuleKind::from_name(&s[..open]).ok_or_else(|| format!("unknown rule in `{s}`"))?;
        let inner = &s[open + 1..s.len() - 1];
        let operands = if inner.is_empty() {
            Vec::new()
        } else {
            inner.split(',').map(str::parse).collect::<Result<Vec<_>, _>>()?
        };
        Ok(Action { rule, operands })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleError {
    #[error("rule {0} is not in the library")]
    NotInLibrary(RuleKind),
    #[error("{rule} takes {expected} operands, got {got}")]
    Arity {
        rule: RuleKind,
        expected: usize,
        got: usize,
    },
    #[error("operand {slot} of {rule}: {reason}")]
    Operand {
        rule: RuleKind,
        slot: usize,
        reason: String,
    },
    #[error("{rule} precondition failed: {reason}")]
    Precondition { rule: RuleKind, reason: String },
    #[error(transparent)]
    Graph(#[from] HypergraphError),
}

/// What a validated action will do.
enum Plan {
    Assert(EdgeId),
    AssertNew {
        op: Operator,
        args: Vec<EntityRef>,
    },
    AssertRewrite {
        root: EdgeId,
        rewrite: Rewrite,
        requantify: Option<Vec<NodeId>>,
    },
    Construct {
        op: Operator,
        args: Vec<EntityRef>,
    },
}

#[derive(Clone, Copy)]
enum Rewrite {
    /// Replace every occurrence of a node.
    All { from: NodeId, to: NodeId },
    /// Replace the first occurrence of `from` among `site`'s arguments.
    AtSite {
        site: EdgeId,
        from: NodeId,
        to: NodeId,
    },
}

trait Sink {
    fn state(&self) -> &MathState;
    fn edge(
        &mut self,
        op: Operator,
        args: Vec<EntityRef>,
        bound: Vec<NodeId>,
    ) -> Result<Option<EdgeId>, HypergraphError>;
}

struct Lookup<'a>(&'a MathState);

impl Sink for Lookup<'_> {
    fn state(&self) -> &MathState {
        self.0
    }
    fn edge(
        &mut self,
        op: Operator,
        args: Vec<EntityRef>,
        bound: Vec<NodeId>,
    ) -> Result<Option<EdgeId>, HypergraphError> {
        Ok(self.0.find_edge(op, &args, &bound))
    }
}

struct Insert<'a>(&'a mut MathState);

impl Sink for Insert<'_> {
    fn state(&self) -> &MathState {
        self.0
    }
    fn edge(
        &mut self,
        op: Operator,
        args: Vec<EntityRef>,
        bound: Vec<NodeId>,
    ) -> Result<Option<EdgeId>, HypergraphError> {
        self.0.add_edge(op, args, bound).map(Some)
    }
}

/// Rewrites `ent`; `None` means the rewritten structure does not exist yet
/// (only possible with a lookup sink).
fn rewrite_entity<S: Sink>(
    sink: &mut S,
    ent: EntityRef,
    rw: Rewrite,
    memo: &mut HashMap<EntityRef, Option<EntityRef>>,
) -> Result<Option<EntityRef>, HypergraphError> {
    if let Some(&done) = memo.get(&ent) {
        return Ok(done);
    }
    let out = match ent {
        EntityRef::Node(n) => {
            if let Rewrite::All { from, to } = rw {
                if n == from {
                    memo.insert(ent, Some(EntityRef::Node(to)));
                    return Ok(Some(EntityRef::Node(to)));
                }
            }
            match sink.state().defining_edge(n) {
                Some(c) => rewrite_edge(sink, c, rw, memo)?.map(|e| {
                    EntityRef::Node(sink.state().edge(e).and_then(|x| x.output).expect("constructor"))
                }),
                None => Some(ent),
            }
        }
        EntityRef::Edge(e) => rewrite_edge(sink, e, rw, memo)?.map(EntityRef::Edge),
    };
    memo.insert(ent, out);
    Ok(out)
}

fn rewrite_edge<S: Sink>(
    sink: &mut S,
    e: EdgeId,
    rw: Rewrite,
    memo: &mut HashMap<EntityRef, Option<EntityRef>>,
) -> Result<Option<EdgeId>, HypergraphError> {
    let edge = sink.state().edges()[e.index()].clone();
    let mut args = Vec::with_capacity(edge.args.len());
    match rw {
        Rewrite::AtSite { site, from, to } if site == e => {
            args = edge.args.clone();
            if let Some(pos) = args.iter().position(|&a| a == EntityRef::Node(from)) {
                args[pos] = EntityRef::Node(to);
            }
        }
        _ => {
            for &a in &edge.args {
                match rewrite_entity(sink, a, rw, memo)? {
                    Some(x) => args.push(x),
                    None => return Ok(None),
                }
            }
        }
    }
    if args == edge.args {
        return Ok(Some(e));
    }
    sink.edge(edge.operator, args, edge.bound_vars.clone())
}

/// Constructor and predicate edges in the term tree of `root`, root first.
fn term_sites(state: &MathState, root: EdgeId) -> Vec<EdgeId> {
    let mut out = vec![root];
    let mut stack = vec![root];
    while let Some(e) = stack.pop() {
        for a in &state.edges()[e.index()].args {
            if let EntityRef::Node(n) = a {
                if let Some(c) = state.defining_edge(*n) {
                    if !out.contains(&c) {
                        out.push(c);
                        stack.push(c);
                    }
                }
            }
        }
    }
    out
}

fn precondition(rule: RuleKind, reason: impl Into<String>) -> RuleError {
    RuleError::Precondition {
        rule,
        reason: reason.into(),
    }
}

fn operand(rule: RuleKind, slot: usize, reason: impl Into<String>) -> RuleError {
    RuleError::Operand {
        rule,
        slot,
        reason: reason.into(),
    }
}

fn fact_edge(
    state: &MathState,
    rule: RuleKind,
    slot: usize,
    ent: EntityRef,
    op: Option<Operator>,
) -> Result<EdgeId, RuleError> {
    let e = ent.as_edge().ok_or_else(|| operand(rule, slot, "expected an edge"))?;
    let edge = state
        .edge(e)
        .ok_or_else(|| operand(rule, slot, format!("unknown edge {ent}")))?;
    if !state.is_fact(e) {
        return Err(operand(rule, slot, format!("{ent} is not a fact")));
    }
    if let Some(op) = op {
        if edge.operator != op {
            return Err(operand(rule, slot, format!("expected {op}, found {}", edge.operator)));
        }
    }
    Ok(e)
}

fn new_fact(state: &MathState, rule: RuleKind, existing: Option<EdgeId>) -> Result<(), RuleError> {
    match existing {
        Some(e) if state.is_fact(e) => Err(precondition(rule, "conclusion is already a fact")),
        _ => Ok(()),
    }
}

fn check(state: &MathState, action: &Action, lib: &RuleLibrary) -> Result<Plan, RuleError> {
    let rule = action.rule;
    if !lib.contains(rule) {
        return Err(RuleError::NotInLibrary(rule));
    }
    if action.operands.len() != rule.arity() {
        return Err(RuleError::Arity {
            rule,
            expected: rule.arity(),
            got: action.operands.len(),
        });
    }
    for (slot, (&o, kind)) in action.operands.iter().zip(rule.slots()).enumerate() {
        let kind_ok = match kind {
            SlotKind::Node => o.as_node().is_some(),
            SlotKind::Edge => o.as_edge().is_some(),
        };
        if !kind_ok || !state.contains(o) {
            return Err(operand(rule, slot, format!("{o} is not a valid {kind:?}")));
        }
    }
    let ops = &action.operands;
    match rule {
        RuleKind::ModusPonens => {
            let p = fact_edge(state, rule, 0, ops[0], None)?;
            let imp = fact_edge(state, rule, 1, ops[1], Some(Operator::Implies))?;
            let args = &state.edges()[imp.index()].args;
            if args[0] != EntityRef::Edge(p) {
                return Err(precondition(rule, "premise does not match the antecedent"));
            }
            let q = args[1].as_edge().expect("connective args are edges");
            new_fact(state, rule, Some(q))?;
            Ok(Plan::Assert(q))
        }
        RuleKind::AndIntro => {
            let a = fact_edge(state, rule, 0, ops[0], None)?;
            let b = fact_edge(state, rule, 1, ops[1], None)?;
            if a == b {
                return Err(precondition(rule, "conjuncts must be distinct"));
            }
            let args = vec![EntityRef::Edge(a), EntityRef::Edge(b)];
            new_fact(state, rule, state.find_edge(Operator::And, &args, &[]))?;
            Ok(Plan::AssertNew {
                op: Operator::And,
                args,
            })
        }
        RuleKind::AndElim => {
            let conj = fact_edge(state, rule, 0, ops[0], Some(Operator::And))?;
            if !state.edges()[conj.index()].args.contains(&ops[1]) {
                return Err(operand(rule, 1, "not a conjunct"));
            }
            let part = ops[1].as_edge().expect("checked slot kind");
            new_fact(state, rule, Some(part))?;
            Ok(Plan::Assert(part))
        }
        RuleKind::Substitution => {
            let eq = fact_edge(state, rule, 0, ops[0], Some(Operator::Equals))?;
            let target = fact_edge(state, rule, 1, ops[1], None)?;
            if state.edges()[target.index()].edge_type != EdgeType::Predicate {
                return Err(operand(rule, 1, "target must be a predicate"));
            }
            let site = ops[2].as_edge().expect("checked slot kind");
            if !term_sites(state, target).contains(&site) {
                return Err(operand(rule, 2, "site is not inside the target"));
            }
            let eq_args = &state.edges()[eq.index()].args;
            let from = eq_args[0].as_node().expect("predicate args are nodes");
            let to = eq_args[1].as_node().expect("predicate args are nodes");
            if !state.edges()[site.index()].args.contains(&EntityRef::Node(from)) {
                return Err(operand(rule, 2, "site has no occurrence of the rewritten term"));
            }
            let rewrite = Rewrite::AtSite { site, from, to };
            let found = rewrite_edge(&mut Lookup(state), target, rewrite, &mut HashMap::new())?;
            new_fact(state, rule, found)?;
            Ok(Plan::AssertRewrite {
                root: target,
                rewrite,
                requantify: None,
            })
        }
        RuleKind::UniversalInstantiation => {
            let q = fact_edge(state, rule, 0, ops[0], Some(Operator::ForAll))?;
            let edge = &state.edges()[q.index()];
            let var = ops[1].as_node().expect("checked slot kind");
            let term = ops[2].as_node().expect("checked slot kind");
            if !edge.bound_vars.contains(&var) {
                return Err(operand(rule, 1, "not bound by this quantifier"));
            }
            if var == term {
                return Err(operand(rule, 2, "term must differ from the bound variable"));
            }
            if state.sort_of(ops[1]) != state.sort_of(ops[2]) {
                return Err(operand(rule, 2, "term sort differs from the variable's"));
            }
            let rest: Vec<NodeId> = edge.bound_vars.iter().copied().filter(|&v| v != var).collect();
            let body = edge.args[0].as_edge().expect("quantifier body");
            let rewrite = Rewrite::All { from: var, to: term };
            let found = rewrite_edge(&mut Lookup(state), body, rewrite, &mut HashMap::new())?;
            let conclusion = match (found, rest.is_empty()) {
                (None, _) => None,
                (Some(b), true) => Some(b),
                (Some(b), false) => state.find_edge(Operator::ForAll, &[EntityRef::Edge(b)], &rest),
            };
            new_fact(state, rule, conclusion)?;
            Ok(Plan::AssertRewrite {
                root: body,
                rewrite,
                requantify: (!rest.is_empty()).then_some(rest),
            })
        }
        RuleKind::EqualityTransitivity => {
            let a = fact_edge(state, rule, 0, ops[0], Some(Operator::Equals))?;
            let b = fact_edge(state, rule, 1, ops[1], Some(Operator::Equals))?;
            let ea = &state.edges()[a.index()].args;
            let eb = &state.edges()[b.index()].args;
            if ea[1] != eb[0] {
                return Err(precondition(rule, "middle terms differ"));
            }
            let args = vec![ea[0], eb[1]];
            new_fact(state, rule, state.find_edge(Operator::Equals, &args, &[]))?;
            Ok(Plan::AssertNew {
                op: Operator::Equals,
                args,
            })
        }
        RuleKind::EqualitySymmetry => {
            let a = fact_edge(state, rule, 0, ops[0], Some(Operator::Equals))?;
            let ea = &state.edges()[a.index()].args;
            let args = vec![ea[1], ea[0]];
            new_fact(state, rule, state.find_edge(Operator::Equals, &args, &[]))?;
            Ok(Plan::AssertNew {
                op: Operator::Equals,
                args,
            })
        }
        RuleKind::Construct(op) => {
            if state.nodes().len() > lib.term_budget {
                return Err(precondition(rule, "term budget exhausted"));
            }
            state.check_edge(op, ops, &[])?;
            if state.find_edge(op, ops, &[]).is_some() {
                return Err(precondition(rule, "term already constructed"));
            }
            Ok(Plan::Construct {
                op,
                args: ops.clone(),
            })
        }
    }
}

/// Applies an action, returning a new state. The input is never modified.
pub fn apply_action(
    state: &MathState,
    action: &Action,
    lib: &RuleLibrary,
) -> Result<MathState, RuleError> {
    let plan = check(state, action, lib)?;
    let mut next = state.clone();
    match plan {
        Plan::Assert(e) => next.assert_fact(e)?,
        Plan::AssertNew { op, args } => {
            let e = next.add_edge(op, args, Vec::new())?;
            next.assert_fact(e)?;
        }
        Plan::AssertRewrite {
            root,
            rewrite,
            requantify,
        } => {
            let body = rewrite_edge(&mut Insert(&mut next), root, rewrite, &mut HashMap::new())?
                .expect("insert sink always yields an edge");
            let concl = match requantify {
                Some(vars) => next.add_edge(Operator::ForAll, vec![EntityRef::Edge(body)], vars)?,
                None => body,
            };
            next.assert_fact(concl)?;
        }
        Plan::Construct { op, args } => {
            next.add_edge(op, args, Vec::new())?;
        }
    }
    Ok(next)
}

/// Checks an action without applying it.
pub fn is_legal(state: &MathState, action: &Action, lib: &RuleLibrary) -> bool {
    check(state, action, lib).is_ok()
}

/// Every action `apply_action` accepts, grouped by rule in library order and
/// sorted by operands within a rule.
pub fn legal_actions(state: &MathState, lib: &RuleLibrary) -> Vec<Action> {
    let mut out = Vec::new();
    for &rule in &lib.rules {
        let mut candidates = candidates(state, rule, lib);
        candidates.sort();
        out.extend(
            candidates
                .into_iter()
                .map(|ops| Action::new(rule, ops))
                .filter(|a| check(state, a, lib).is_ok()),
        );
    }
    out
}

fn facts_with(state: &MathState, op: Option<Operator>) -> Vec<EdgeId> {
    state
        .facts()
        .iter()
        .copied()
        .filter(|f| op.is_none_or(|op| state.edges()[f.index()].operator == op))
        .collect()
}

fn candidates(state: &MathState, rule: RuleKind, lib: &RuleLibrary) -> Vec<Vec<EntityRef>> {
    let e = EntityRef::Edge;
    let n = EntityRef::Node;
    let mut out = Vec::new();
    match rule {
        RuleKind::ModusPonens => {
            for imp in facts_with(state, Some(Operator::Implies)) {
                out.push(vec![state.edges()[imp.index()].args[0], e(imp)]);
            }
        }
        RuleKind::AndIntro => {
            let facts = facts_with(state, None);
            for &a in &facts {
                for &b in &facts {
                    if a != b {
                        out.push(vec![e(a), e(b)]);
                    }
                }
            }
        }
        RuleKind::AndElim => {
            for conj in facts_with(state, Some(Operator::And)) {
                for &part in &state.edges()[conj.index()].args {
                    out.push(vec![e(conj), part]);
                }
            }
        }
        RuleKind::Substitution => {
            let eqs = facts_with(state, Some(Operator::Equals));
            let targets: Vec<EdgeId> = state
                .facts()
                .iter()
                .copied()
                .filter(|f| state.edges()[f.index()].edge_type == EdgeType::Predicate)
                .collect();
            for &eq in &eqs {
                let from = state.edges()[eq.index()].args[0];
                for &t in &targets {
                    for site in term_sites(state, t) {
                        if state.edges()[site.index()].args.contains(&from) {
                            out.push(vec![e(eq), e(t), e(site)]);
                        }
                    }
                }
            }
        }
        RuleKind::UniversalInstantiation => {
            for q in facts_with(state, Some(Operator::ForAll)) {
                for &var in &state.edges()[q.index()].bound_vars {
                    let sort = state.nodes()[var.index()].sort;
                    for node in state.nodes() {
                        if node.id != var && node.sort == sort {
                            out.push(vec![e(q), n(var), n(node.id)]);
                        }
                    }
                }
            }
        }
        RuleKind::EqualityTransitivity => {
            let eqs = facts_with(state, Some(Operator::Equals));
            for &a in &eqs {
                for &b in &eqs {
                    if state.edges()[a.index()].args[1] == state.edges()[b.index()].args[0] {
                        out.push(vec![e(a), e(b)]);
                    }
                }
            }
        }
        RuleKind::EqualitySymmetry => {
            for a in facts_with(state, Some(Operator::Equals)) {
                out.push(vec![e(a)]);
            }
        }
        RuleKind::Construct(op) => {
            if state.nodes().len() > lib.term_budget {
                return out;
            }
            let of_sorts = |sorts: &[Sort]| -> Vec<NodeId> {
                state
                    .nodes()
                    .iter()
                    .filter(|x| sorts.contains(&x.sort))
                    .map(|x| x.id)
                    .collect()
            };
            match op {
                Operator::Inverse | Operator::Transpose => {
                    for a in of_sorts(&[Sort::Matrix]) {
                        out.push(vec![n(a)]);
                    }
                }
                _ => {
                    let pool = match op {
                        Operator::Midpoint | Operator::Line => of_sorts(&[Sort::Point]),
                        _ => of_sorts(&[Sort::Scalar, Sort::Matrix]),
                    };
                    for &a in &pool {
                        for &b in &pool {
                            if state.nodes()[a.index()].sort == state.nodes()[b.index()].sort {
                                out.push(vec![n(a), n(b)]);
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::NodeType;

    struct Fixture {
        s: MathState,
        vars: HashMap<String, NodeId>,
    }

    impl Fixture {
        fn new(labels: &[&str]) -> Self {
            let mut s = MathState::new();
            let vars = labels
                .iter()
                .map(|l| {
                    (
                        l.to_string(),
                        s.add_node(NodeType::Variable, Sort::Scalar, l).unwrap(),
                    )
                })
                .collect();
            Fixture { s, vars }
        }

        fn n(&self, l: &str) -> EntityRef {
            EntityRef::Node(self.vars[l])
        }

        fn eq(&mut self, a: &str, b: &str) -> EdgeId {
            let (a, b) = (self.n(a), self.n(b));
            self.s.add_edge(Operator::Equals, vec![a, b], vec![]).unwrap()
        }

        fn fact(&mut self, e: EdgeId) -> EdgeId {
            self.s.assert_fact(e).unwrap();
            e
        }
    }

    #[test]
    fn modus_ponens_derives_consequent() {
        let mut f = Fixture::new(&["a", "b", "c", "d"]);
        let a = f.eq("a", "b");
        let b = f.eq("c", "d");
        let imp = f
            .s
            .add_edge(Operator::Implies, vec![EntityRef::Edge(a), EntityRef::Edge(b)], vec![])
            .unwrap();
        f.fact(imp);
        let lib = RuleLibrary::logic();
        let act = Action::new(RuleKind::ModusPonens, vec![EntityRef::Edge(a), EntityRef::Edge(imp)]);
        let before = f.s.clone();
        let err = apply_action(&f.s, &act, &lib).unwrap_err();
        assert!(matches!(err, RuleError::Operand { slot: 0, .. }));
        assert_eq!(f.s, before);
        f.fact(a);
        let next = apply_action(&f.s, &act, &lib).unwrap();
        assert!(next.is_fact(b));
        assert!(!f.s.is_fact(b));
        assert!(legal_actions(&f.s, &lib).contains(&act));
        assert!(!legal_actions(&next, &lib).contains(&act));
    }

    #[test]
    fn transitivity_derives_new_equality() {
        let mut f = Fixture::new(&["a", "b", "c"]);
        let ab = f.eq("a", "b");
        let bc = f.eq("b", "c");
        f.fact(ab);
        f.fact(bc);
        let lib = RuleLibrary::logic();
        let act = Action::new(
            RuleKind::EqualityTransitivity,
            vec![EntityRef::Edge(ab), EntityRef::Edge(bc)],
        );
        let next = apply_action(&f.s, &act, &lib).unwrap();
        let ac = next.find_edge(Operator::Equals, &[f.n("a"), f.n("c")], &[]).unwrap();
        assert!(next.is_fact(ac));
        let wrong = Action::new(
            RuleKind::EqualityTransitivity,
            vec![EntityRef::Edge(bc), EntityRef::Edge(ab)],
        );
        assert!(apply_action(&f.s, &wrong, &lib).is_err());
    }

    #[test]
    fn empty_facts_only_construct() {
        let f = Fixture::new(&["a", "b"]);
        let acts = legal_actions(&f.s, &RuleLibrary::standard());
        assert!(!acts.is_empty());
        assert!(acts.iter().all(|a| a.rule.is_constructor()));
        assert!(legal_actions(&f.s, &RuleLibrary::logic()).is_empty());
    }

    #[test]
    fn substitution_rewrites_one_occurrence() {
        let mut f = Fixture::new(&["x", "y"]);
        let xy = f.eq("x", "y");
        f.fact(xy);
        let xx = f.eq("x", "x");
        f.fact(xx);
        let lib = RuleLibrary::logic();
        let act = Action::new(
            RuleKind::Substitution,
            vec![EntityRef::Edge(xy), EntityRef::Edge(xx), EntityRef::Edge(xx)],
        );
        let s1 = apply_action(&f.s, &act, &lib).unwrap();
        let yx = s1.find_edge(Operator::Equals, &[f.n("y"), f.n("x")], &[]).unwrap();
        assert!(s1.is_fact(yx));
        assert!(s1.find_edge(Operator::Equals, &[f.n("y"), f.n("y")], &[]).is_none());
    }

    #[test]
    fn substitution_inside_constructor() {
        let mut f = Fixture::new(&["a", "b", "c", "d"]);
        let ab = f.eq("a", "b");
        f.fact(ab);
        let sum = f.s.add_edge(Operator::Sum, vec![f.n("a"), f.n("c")], vec![]).unwrap();
        let out = EntityRef::Node(f.s.edge(sum).unwrap().output.unwrap());
        let target = f.s.add_edge(Operator::Equals, vec![out, f.n("d")], vec![]).unwrap();
        f.fact(target);
        let lib = RuleLibrary::logic();
        let act = Action::new(
            RuleKind::Substitution,
            vec![EntityRef::Edge(ab), EntityRef::Edge(target), EntityRef::Edge(sum)],
        );
        let next = apply_action(&f.s, &act, &lib).unwrap();
        let new_sum = next.find_edge(Operator::Sum, &[f.n("b"), f.n("c")], &[]).unwrap();
        let new_out = EntityRef::Node(next.edge(new_sum).unwrap().output.unwrap());
        let concl = next.find_edge(Operator::Equals, &[new_out, f.n("d")], &[]).unwrap();
        assert!(next.is_fact(concl));
        next.validate().unwrap();
    }

    #[test]
    fn instantiation_strips_quantifier() {
        let mut f = Fixture::new(&["x", "t"]);
        let xx = f.eq("x", "x");
        let q = f.s.add_edge(Operator::ForAll, vec![EntityRef::Edge(xx)], vec![f.vars["x"]]).unwrap();
        f.fact(q);
        let lib = RuleLibrary::logic();
        let act = Action::new(
            RuleKind::UniversalInstantiation,
            vec![EntityRef::Edge(q), f.n("x"), f.n("t")],
        );
        let next = apply_action(&f.s, &act, &lib).unwrap();
        let tt = next.find_edge(Operator::Equals, &[f.n("t"), f.n("t")], &[]).unwrap();
        assert!(next.is_fact(tt));
        assert!(!next.is_fact(xx));
    }

    #[test]
    fn and_intro_and_elim() {
        let mut f = Fixture::new(&["a", "b"]);
        let p = f.eq("a", "b");
        let q = f.eq("b", "a");
        f.fact(p);
        f.fact(q);
        let lib = RuleLibrary::logic();
        let intro = Action::new(RuleKind::AndIntro, vec![EntityRef::Edge(p), EntityRef::Edge(q)]);
        let s1 = apply_action(&f.s, &intro, &lib).unwrap();
        let conj = s1
            .find_edge(Operator::And, &[EntityRef::Edge(p), EntityRef::Edge(q)], &[])
            .unwrap();
        assert!(s1.is_fact(conj));
        // both conjuncts are already facts: elimination is a no-op
        let elim = Action::new(RuleKind::AndElim, vec![EntityRef::Edge(conj), EntityRef::Edge(p)]);
        assert!(apply_action(&s1, &elim, &lib).is_err());
    }

    #[test]
    fn term_budget_disables_constructors() {
        let f = Fixture::new(&["a", "b"]);
        let mut lib = RuleLibrary::standard();
        lib.term_budget = 1;
        assert!(legal_actions(&f.s, &lib).is_empty());
    }

    #[test]
    fn action_text_roundtrip() {
        let a = Action::new(
            RuleKind::Substitution,
            vec![EntityRef::Edge(EdgeId(1)), EntityRef::Edge(EdgeId(2)), EntityRef::Node(NodeId(3))],
        );
        assert_eq!(a.to_string(), "Substitution(e1,e2,n3)");
        assert_eq!(a.to_string().parse::<Action>().unwrap(), a);
        assert!("Bogus(e1)".parse::<Action>().is_err());
    }
}
