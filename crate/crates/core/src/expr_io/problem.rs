//! Problem documents: parsing and compilation into a state.
//!
//! ```text
//! (problem
//!   (decl A matrix 2 2)          ; kinds: var const matrix point polyvar
//!   (decl P point frozen)        ; `frozen` keeps the seed fixed under descent
//!   (premise (Equals (Sum a b) c))
//!   (goal (Equals c (Sum b a)))  ; `?x` names are pattern variables
//!   (bind A 1 0 0 1))
//! ```

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::sexp::{read_all, Diagnostic, Pos, Sexp};
use crate::energy::{Binding, Value};
use crate::hypergraph::{
    EntityRef, GoalPattern, MathState, NodeId, NodeType, Operator, PatternTerm, Sort,
};
use crate::matrix::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeclKind {
    Var,
    Const,
    Matrix,
    Point,
    PolyVar,
}

impl DeclKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "var" => DeclKind::Var,
            "const" => DeclKind::Const,
            "matrix" => DeclKind::Matrix,
            "point" => DeclKind::Point,
            "polyvar" => DeclKind::PolyVar,
            _ => return None,
        })
    }

    pub fn sort(self) -> Sort {
        match self {
            DeclKind::Var | DeclKind::Const | DeclKind::PolyVar => Sort::Scalar,
            DeclKind::Matrix => Sort::Matrix,
            DeclKind::Point => Sort::Point,
        }
    }

    pub fn node_type(self) -> NodeType {
        match self {
            DeclKind::Const => NodeType::Constant,
            _ => NodeType::Variable,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decl {
    pub name: String,
    pub kind: DeclKind,
    pub dims: Option<(usize, usize)>,
    pub frozen: bool,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Symbol(String, Pos),
    PatternVar(String, Pos),
    Apply {
        op: Operator,
        args: Vec<Expr>,
        pos: Pos,
    },
    ForAll {
        vars: Vec<(String, Pos)>,
        body: Box<Expr>,
        pos: Pos,
    },
}

impl Expr {
    pub fn pos(&self) -> Pos {
        match self {
            Expr::Symbol(_, p) | Expr::PatternVar(_, p) => *p,
            Expr::Apply { pos, .. } | Expr::ForAll { pos, .. } => *pos,
        }
    }

    pub fn has_pattern_vars(&self) -> bool {
        match self {
            Expr::PatternVar(..) => true,
            Expr::Symbol(..) => false,
            Expr::Apply { args, .. } => args.iter().any(Expr::has_pattern_vars),
            Expr::ForAll { body, .. } => body.has_pattern_vars(),
        }
    }

    pub fn to_pattern(&self) -> PatternTerm {
        match self {
            Expr::Symbol(s, _) => PatternTerm::Symbol(s.clone()),
            Expr::PatternVar(s, _) => PatternTerm::Var(s.clone()),
            Expr::Apply { op, args, .. } => PatternTerm::Apply {
                op: *op,
                args: args.iter().map(Expr::to_pattern).collect(),
            },
            Expr::ForAll { vars, body, .. } => PatternTerm::ForAll {
                vars: vars.iter().map(|(v, _)| v.clone()).collect(),
                body: Box::new(body.to_pattern()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BindSeed {
    pub name: String,
    pub values: Vec<f64>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemDoc {
    pub decls: Vec<Decl>,
    pub premises: Vec<Expr>,
    pub goal: Expr,
    pub bindings: Vec<BindSeed>,
}

/// A compiled problem.
#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub state: MathState,
    pub goal: GoalPattern,
    pub binding: Binding,
}

fn expect_list<'a>(s: &'a Sexp, what: &str) -> Result<(&'a [Sexp], Pos), Diagnostic> {
    match s {
        Sexp::List(items, p) => Ok((items, *p)),
        Sexp::Atom(_, p) => Err(Diagnostic::at(*p, format!("expected {what}"))),
    }
}

fn head(items: &[Sexp], pos: Pos) -> Result<&str, Diagnostic> {
    items
        .first()
        .and_then(Sexp::atom)
        .ok_or_else(|| Diagnostic::at(pos, "expected a keyword after `(`"))
}

pub fn parse_problem(text: &str) -> Result<ProblemDoc, Diagnostic> {
    let top = read_all(text)?;
    let root = match top.as_slice() {
        [one] => one,
        [] => return Err(Diagnostic::global("empty input")),
        [_, second, ..] => {
            return Err(Diagnostic::at(second.pos(), "expected a single `(problem ...)` form"))
        }
    };
    let (items, pos) = expect_list(root, "`(problem ...)`")?;
    if head(items, pos)? != "problem" {
        return Err(Diagnostic::at(pos, "expected `(problem ...)`"));
    }
    let mut decls: Vec<Decl> = Vec::new();
    let mut raw_premises = Vec::new();
    let mut raw_goal = None;
    let mut bindings = Vec::new();
    for form in &items[1..] {
        let (parts, p) = expect_list(form, "a `decl`, `premise`, `goal` or `bind` form")?;
        match head(parts, p)? {
            "decl" => decls.push(parse_decl(parts, p)?),
            "premise" => {
                if parts.len() != 2 {
                    return Err(Diagnostic::at(p, "`premise` takes one expression"));
                }
                raw_premises.push(&parts[1]);
            }
            "goal" => {
                if parts.len() != 2 {
                    return Err(Diagnostic::at(p, "`goal` takes one expression"));
                }
                if raw_goal.is_some() {
                    return Err(Diagnostic::at(p, "more than one goal"));
                }
                raw_goal = Some(&parts[1]);
            }
            "bind" => bindings.push(parse_bind(parts, p)?),
            other => return Err(Diagnostic::at(p, format!("unknown form `{other}`"))),
        }
    }
    let mut seen = HashSet::new();
    for d in &decls {
        if !seen.insert(d.name.as_str()) {
            return Err(Diagnostic::at(d.pos, format!("`{}` declared twice", d.name)));
        }
    }
    let declared: BTreeMap<&str, &Decl> = decls.iter().map(|d| (d.name.as_str(), d)).collect();
    let premises = raw_premises
        .into_iter()
        .map(|s| parse_expr(s, &declared, false))
        .collect::<Result<Vec<_>, _>>()?;
    let goal_sexp = raw_goal.ok_or_else(|| Diagnostic::at(pos, "missing `(goal ...)`"))?;
    let goal = parse_expr(goal_sexp, &declared, true)?;
    for b in &bindings {
        if !declared.contains_key(b.name.as_str()) {
            return Err(Diagnostic::at(b.pos, format!("binding for undeclared symbol `{}`", b.name)));
        }
    }
    Ok(ProblemDoc {
        decls,
        premises,
        goal,
        bindings,
    })
}

fn ident(s: &Sexp, what: &str) -> Result<(String, Pos), Diagnostic> {
    match s {
        Sexp::Atom(a, p) if !a.starts_with('?') => Ok((a.clone(), *p)),
        other => Err(Diagnostic::at(other.pos(), format!("expected {what}"))),
    }
}

fn parse_decl(parts: &[Sexp], pos: Pos) -> Result<Decl, Diagnostic> {
    if parts.len() < 3 {
        return Err(Diagnostic::at(pos, "`decl` needs a name and a kind"));
    }
    let (name, _) = ident(&parts[1], "a symbol name")?;
    let (kind_s, kpos) = ident(&parts[2], "a declaration kind")?;
    let kind = DeclKind::parse(&kind_s)
        .ok_or_else(|| Diagnostic::at(kpos, format!("unknown declaration kind `{kind_s}`")))?;
    let mut dims = Vec::new();
    let mut frozen = kind == DeclKind::Const;
    for extra in &parts[3..] {
        let (a, p) = ident(extra, "a dimension or `frozen`")?;
        if a == "frozen" {
            frozen = true;
        } else if let Ok(n) = a.parse::<usize>() {
            if kind != DeclKind::Matrix {
                return Err(Diagnostic::at(p, "only matrices take dimensions"));
            }
            if n == 0 {
                return Err(Diagnostic::at(p, "dimension must be positive"));
            }
            dims.push(n);
        } else {
            return Err(Diagnostic::at(p, format!("unexpected `{a}` in declaration")));
        }
    }
    let dims = match dims.as_slice() {
        [] => None,
        [d] => Some((*d, *d)),
        [r, c] => Some((*r, *c)),
        _ => return Err(Diagnostic::at(pos, "at most two dimensions")),
    };
    if let Some((r, c)) = dims {
        if r != c {
            return Err(Diagnostic::at(pos, "matrices must be square"));
        }
    }
    Ok(Decl {
        name,
        kind,
        dims,
        frozen,
        pos,
    })
}

fn parse_bind(parts: &[Sexp], pos: Pos) -> Result<BindSeed, Diagnostic> {
    if parts.len() < 3 {
        return Err(Diagnostic::at(pos, "`bind` needs a symbol and at least one number"));
    }
    let (name, _) = ident(&parts[1], "a symbol name")?;
    let mut values = Vec::new();
    for s in &parts[2..] {
        let (a, p) = ident(s, "a number")?;
        let v: f64 = a
            .parse()
            .map_err(|_| Diagnostic::at(p, format!("malformed number `{a}`")))?;
        if !v.is_finite() {
            return Err(Diagnostic::at(p, "numbers must be finite"));
        }
        values.push(v);
    }
    Ok(BindSeed { name, values, pos })
}

fn parse_expr(s: &Sexp, declared: &BTreeMap<&str, &Decl>, allow_patterns: bool) -> Result<Expr, Diagnostic> {
    match s {
        Sexp::Atom(a, p) => {
            if let Some(var) = a.strip_prefix('?') {
                if !allow_patterns {
                    return Err(Diagnostic::at(*p, "pattern variables are only allowed in the goal"));
                }
                if var.is_empty() {
                    return Err(Diagnostic::at(*p, "empty pattern variable name"));
                }
                return Ok(Expr::PatternVar(a.clone(), *p));
            }
            if !declared.contains_key(a.as_str()) {
                return Err(Diagnostic::at(*p, format!("undeclared symbol `{a}`")));
            }
            Ok(Expr::Symbol(a.clone(), *p))
        }
        Sexp::List(items, p) => {
            let Some(first) = items.first() else {
                return Err(Diagnostic::at(*p, "empty expression"));
            };
            let name = first
                .atom()
                .ok_or_else(|| Diagnostic::at(first.pos(), "expected an operator"))?;
            if name == "forall" || name == "ForAll" {
                if items.len() != 3 {
                    return Err(Diagnostic::at(*p, "`forall` takes a variable list and a body"));
                }
                let (vs, vpos) = expect_list(&items[1], "a variable list")?;
                if vs.is_empty() {
                    return Err(Diagnostic::at(vpos, "`forall` must bind at least one variable"));
                }
                let mut vars = Vec::new();
                for v in vs {
                    let (name, vp) = ident(v, "a variable name")?;
                    match declared.get(name.as_str()) {
                        Some(d) if d.kind.node_type() == NodeType::Variable => {}
                        Some(_) => return Err(Diagnostic::at(vp, format!("`{name}` is not a variable"))),
                        None => return Err(Diagnostic::at(vp, format!("undeclared symbol `{name}`"))),
                    }
                    vars.push((name, vp));
                }
                let body = parse_expr(&items[2], declared, allow_patterns)?;
                return Ok(Expr::ForAll {
                    vars,
                    body: Box::new(body),
                    pos: *p,
                });
            }
            let op = Operator::from_name(name)
                .filter(|op| *op != Operator::ForAll)
                .ok_or_else(|| Diagnostic::at(first.pos(), format!("unknown operator `{name}`")))?;
            let args = items[1..]
                .iter()
                .map(|a| parse_expr(a, declared, allow_patterns))
                .collect::<Result<Vec<_>, _>>()?;
            if !op.arities().contains(&args.len()) {
                return Err(Diagnostic::at(
                    *p,
                    format!("{op} takes {:?} arguments, got {}", op.arities(), args.len()),
                ));
            }
            Ok(Expr::Apply { op, args, pos: *p })
        }
    }
}

/// Adds the expression to the graph, returning the entity that denotes it.
pub fn build_expr(state: &mut MathState, expr: &Expr) -> Result<EntityRef, Diagnostic> {
    match expr {
        Expr::Symbol(name, p) => state
            .lookup_symbol(name)
            .map(EntityRef::Node)
            .ok_or_else(|| Diagnostic::at(*p, format!("undeclared symbol `{name}`"))),
        Expr::PatternVar(_, p) => Err(Diagnostic::at(*p, "pattern variables cannot be built")),
        Expr::Apply { op, args, pos } => {
            let args = args
                .iter()
                .map(|a| build_expr(state, a))
                .collect::<Result<Vec<_>, _>>()?;
            let e = state
                .add_edge(*op, args, Vec::new())
                .map_err(|err| Diagnostic::at(*pos, err.to_string()))?;
            Ok(match state.edge(e).and_then(|x| x.output) {
                Some(n) => EntityRef::Node(n),
                None => EntityRef::Edge(e),
            })
        }
        Expr::ForAll { vars, body, pos } => {
            let body = build_expr(state, body)?;
            let bound: Vec<NodeId> = vars
                .iter()
                .map(|(v, vp)| {
                    state
                        .lookup_symbol(v)
                        .ok_or_else(|| Diagnostic::at(*vp, format!("undeclared symbol `{v}`")))
                })
                .collect::<Result<_, _>>()?;
            let e = state
                .add_edge(Operator::ForAll, vec![body], bound)
                .map_err(|err| Diagnostic::at(*pos, err.to_string()))?;
            Ok(EntityRef::Edge(e))
        }
    }
}

/// Compiles a document. `default_dim` is the matrix size used when no
/// declaration fixes one.
pub fn build_state(doc: &ProblemDoc, default_dim: usize) -> Result<BuiltProblem, Diagnostic> {
    let mut dim = None;
    for d in &doc.decls {
        if let Some((r, _)) = d.dims {
            match dim {
                None => dim = Some(r),
                Some(prev) if prev != r => {
                    return Err(Diagnostic::at(
                        d.pos,
                        format!("matrix dimension {r} differs from the earlier {prev}"),
                    ))
                }
                _ => {}
            }
        }
    }
    let dim = dim.unwrap_or(default_dim);
    let mut state = MathState::new();
    for d in &doc.decls {
        state
            .add_node(d.kind.node_type(), d.kind.sort(), &d.name)
            .map_err(|e| Diagnostic::at(d.pos, e.to_string()))?;
    }
    for p in &doc.premises {
        let ent = build_expr(&mut state, p)?;
        let e = ent
            .as_edge()
            .ok_or_else(|| Diagnostic::at(p.pos(), "a premise must be a formula, not a term"))?;
        state
            .assert_fact(e)
            .map_err(|err| Diagnostic::at(p.pos(), err.to_string()))?;
    }
    let goal = GoalPattern::new(doc.goal.to_pattern())
        .map_err(|m| Diagnostic::at(doc.goal.pos(), m))?;
    if !doc.goal.has_pattern_vars() {
        let ent = build_expr(&mut state, &doc.goal)?;
        state.set_goal(ent.as_edge());
    }

    let mut binding = Binding::new(dim);
    let decl_of: BTreeMap<&str, &Decl> = doc.decls.iter().map(|d| (d.name.as_str(), d)).collect();
    for d in &doc.decls {
        // Numeric constant symbols carry their own value.
        if d.kind == DeclKind::Const {
            if let Ok(v) = d.name.parse::<f64>() {
                let n = state.lookup_symbol(&d.name).expect("declared");
                binding.set(n, Value::Scalar(v), true);
            }
        }
    }
    for b in &doc.bindings {
        let d = decl_of[b.name.as_str()];
        let n = state.lookup_symbol(&b.name).expect("declared");
        let value = match d.kind.sort() {
            Sort::Scalar => {
                if b.values.len() != 1 {
                    return Err(Diagnostic::at(b.pos, format!("`{}` is a scalar: expected 1 number", b.name)));
                }
                Value::Scalar(b.values[0])
            }
            Sort::Point => {
                if b.values.len() != 2 {
                    return Err(Diagnostic::at(b.pos, format!("`{}` is a point: expected 2 numbers", b.name)));
                }
                Value::Point([b.values[0], b.values[1]])
            }
            Sort::Matrix => {
                if b.values.len() != dim * dim {
                    return Err(Diagnostic::at(
                        b.pos,
                        format!("`{}` is {dim}x{dim}: expected {} numbers, got {}", b.name, dim * dim, b.values.len()),
                    ));
                }
                Value::Matrix(Mat::from_row_slice(dim, dim, &b.values))
            }
            Sort::Line => unreachable!("lines are not declarable"),
        };
        binding.set(n, value, d.frozen);
    }
    Ok(BuiltProblem {
        state,
        goal,
        binding,
    })
}
