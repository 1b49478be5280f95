//! PUCT Monte Carlo tree search over proof states.
//!
//! Selection maximizes `Q + c·π·√N_parent / (1 + N)`; unvisited actions
//! have `Q = 0` and ties go to the lowest action index. Leaves are scored
//! by the guide's value head, terminals exactly (1 for a proven goal, 0
//! when no action applies), and the value is propagated unchanged.

use serde::{Deserialize, Serialize};

use super::{goal_proven, Guide};
use crate::brain::BrainError;
use crate::hypergraph::rules::{apply_action, legal_actions};
use crate::hypergraph::{Action, MathState, RuleLibrary};

#[derive(Debug, Clone, PartialEq)]
pub struct MctsConfig {
    pub simulations: usize,
    pub c_puct: f64,
    /// Nodes at this depth are scored but never expanded.
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for MctsConfig {
    fn default() -> Self {
        MctsConfig {
            simulations: 1000,
            c_puct: 1.5,
            max_depth: 30,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub state: MathState,
    pub depth: usize,
    pub legal: Vec<Action>,
    pub priors: Vec<f64>,
    pub children: Vec<Option<usize>>,
    /// Per-action visit counts and summed values.
    pub n: Vec<u64>,
    pub w: Vec<f64>,
    pub visits: u64,
    pub evaluations: u64,
    /// Exact value of a terminal state.
    pub terminal: Option<f64>,
    /// Leaf estimate used whenever the node is evaluated.
    pub value: f64,
}

impl TreeNode {
    pub fn q(&self, a: usize) -> f64 {
        if self.n[a] == 0 {
            0.0
        } else {
            self.w[a] / self.n[a] as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationStats {
    pub simulation: usize,
    pub depth: usize,
    pub value: f64,
    pub terminal: bool,
    pub expanded: bool,
}

#[derive(Debug, Clone)]
pub struct MctsOutcome {
    /// Most-visited path from the root.
    pub actions: Vec<Action>,
    /// Whether the path ends on a proven goal.
    pub solved: bool,
    /// The root had no legal action.
    pub stuck: bool,
    /// Mean value of the first chosen action, or the root's exact value.
    pub value: f64,
    pub nodes: Vec<TreeNode>,
    pub stats: Vec<SimulationStats>,
}

fn make_node(state: MathState, depth: usize, guide: &Guide<'_>, lib: &RuleLibrary, cfg: &MctsConfig) -> Result<TreeNode, BrainError> {
    let mut node = TreeNode {
        depth,
        legal: Vec::new(),
        priors: Vec::new(),
        children: Vec::new(),
        n: Vec::new(),
        w: Vec::new(),
        visits: 0,
        evaluations: 0,
        terminal: None,
        value: 0.0,
        state,
    };
    if goal_proven(&node.state) {
        node.terminal = Some(1.0);
        node.value = 1.0;
        return Ok(node);
    }
    if depth < cfg.max_depth {
        node.legal = legal_actions(&node.state, lib);
        if node.legal.is_empty() {
            node.terminal = Some(0.0);
            return Ok(node);
        }
        node.priors = guide.priors(&node.state, &node.legal)?;
        node.children = vec![None; node.legal.len()];
        node.n = vec![0; node.legal.len()];
        node.w = vec![0.0; node.legal.len()];
    }
    node.value = guide.value(&node.state)?;
    Ok(node)
}

fn select(node: &TreeNode, c_puct: f64) -> usize {
    let total: u64 = node.n.iter().sum();
    let sqrt_n = (total.max(1) as f64).sqrt();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for a in 0..node.legal.len() {
        let score = node.q(a) + c_puct * node.priors[a] * sqrt_n / (1.0 + node.n[a] as f64);
        if score > best_score {
            best = a;
            best_score = score;
        }
    }
    best
}

fn most_visited(node: &TreeNode) -> Option<usize> {
    let mut best: Option<usize> = None;
    for a in 0..node.n.len() {
        if node.n[a] > 0 && best.is_none_or(|b| node.n[a] > node.n[b]) {
            best = Some(a);
        }
    }
    best
}

pub fn mcts_search(root: &MathState, guide: Guide<'_>, lib: &RuleLibrary, cfg: &MctsConfig) -> Result<MctsOutcome, BrainError> {
    let root_node = make_node(root.clone(), 0, &guide, lib, cfg)?;
    let mut nodes = vec![root_node];
    if let Some(v) = nodes[0].terminal {
        return Ok(MctsOutcome {
            actions: Vec::new(),
            solved: v == 1.0,
            stuck: v == 0.0,
            value: v,
            nodes,
            stats: Vec::new(),
        });
    }
    if nodes[0].legal.is_empty() {
        // Depth budget of zero: nothing to search.
        let value = nodes[0].value;
        return Ok(MctsOutcome {
            actions: Vec::new(),
            solved: false,
            stuck: false,
            value,
            nodes,
            stats: Vec::new(),
        });
    }
    let mut stats = Vec::with_capacity(cfg.simulations);
    for sim in 0..cfg.simulations {
        let mut path: Vec<(usize, usize)> = Vec::new();
        let mut cur = 0;
        let mut expanded = false;
        loop {
            let node = &nodes[cur];
            if node.terminal.is_some() || node.legal.is_empty() {
                break;
            }
            let a = select(node, cfg.c_puct);
            path.push((cur, a));
            match node.children[a] {
                Some(child) => cur = child,
                None => {
                    let next = apply_action(&node.state, &node.legal[a], lib).expect("legal actions apply");
                    let child = make_node(next, node.depth + 1, &guide, lib, cfg)?;
                    nodes.push(child);
                    let id = nodes.len() - 1;
                    nodes[cur].children[a] = Some(id);
                    cur = id;
                    expanded = true;
                    break;
                }
            }
        }
        let leaf = &mut nodes[cur];
        let v = leaf.terminal.unwrap_or(leaf.value);
        leaf.visits += 1;
        leaf.evaluations += 1;
        stats.push(SimulationStats {
            simulation: sim,
            depth: leaf.depth,
            value: v,
            terminal: leaf.terminal.is_some(),
            expanded,
        });
        for &(id, a) in &path {
            let node = &mut nodes[id];
            node.n[a] += 1;
            node.w[a] += v;
            node.visits += 1;
        }
    }
    let mut actions = Vec::new();
    let mut cur = 0;
    let mut value = 0.0;
    while let Some(a) = most_visited(&nodes[cur]) {
        if cur == 0 {
            value = nodes[0].q(a);
        }
        actions.push(nodes[cur].legal[a].clone());
        match nodes[cur].children[a] {
            Some(c) => cur = c,
            None => break,
        }
    }
    Ok(MctsOutcome {
        solved: goal_proven(&nodes[cur].state),
        actions,
        stuck: false,
        value,
        nodes,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node_with_priors(priors: Vec<f64>) -> TreeNode {
        let k = priors.len();
        TreeNode {
            state: MathState::new(),
            depth: 0,
            legal: (0..k)
                .map(|i| Action::new(crate::hypergraph::RuleKind::ModusPonens, vec![crate::hypergraph::EntityRef::Node(crate::hypergraph::NodeId(i as u32))]))
                .collect(),
            priors,
            children: vec![None; k],
            n: vec![0; k],
            w: vec![0.0; k],
            visits: 0,
            evaluations: 0,
            terminal: None,
            value: 0.0,
        }
    }

    #[test]
    fn first_selection_follows_a_certain_prior() {
        assert_eq!(select(&node_with_priors(vec![0.0, 0.0, 1.0, 0.0]), 1.5), 2);
    }

    #[test]
    fn ties_go_to_the_lowest_index() {
        assert_eq!(select(&node_with_priors(vec![0.25; 4]), 1.5), 0);
        let mut n = node_with_priors(vec![0.25; 4]);
        n.n[0] = 1;
        assert_eq!(select(&n, 1.5), 1);
    }
}
