//! Exhaustive breadth-first proof search, used as a ground-truth oracle for
//! the guided searches on small problems.

use std::collections::{BTreeSet, HashSet, VecDeque};

use super::goal_proven;
use crate::hypergraph::canon::CanonicalHashes;
use crate::hypergraph::rules::{apply_action, legal_actions};
use crate::hypergraph::{Action, MathState, RuleLibrary};

#[derive(Debug, Clone, PartialEq)]
pub struct BfsOutcome {
    /// A shortest proof, if one exists within the depth limit.
    pub proof: Option<Vec<Action>>,
    /// Distinct fact sets visited.
    pub visited: usize,
}

/// Fact sets identified up to entity ids.
fn fact_key(state: &MathState, lib: &RuleLibrary) -> Vec<u64> {
    let h = CanonicalHashes::compute(state, &lib.commutative);
    let set: BTreeSet<u64> = state.facts().iter().map(|f| h.edges[f.index()]).collect();
    set.into_iter().collect()
}

pub fn bfs_shortest(root: &MathState, lib: &RuleLibrary, max_depth: usize) -> BfsOutcome {
    if goal_proven(root) {
        return BfsOutcome {
            proof: Some(Vec::new()),
            visited: 1,
        };
    }
    let mut seen = HashSet::from([fact_key(root, lib)]);
    let mut queue = VecDeque::from([(root.clone(), Vec::<Action>::new())]);
    while let Some((s, path)) = queue.pop_front() {
        if path.len() == max_depth {
            continue;
        }
        for a in legal_actions(&s, lib) {
            let Ok(next) = apply_action(&s, &a, lib) else {
                continue;
            };
            if !seen.insert(fact_key(&next, lib)) {
                continue;
            }
            let mut p = path.clone();
            p.push(a);
            if goal_proven(&next) {
                return BfsOutcome {
                    proof: Some(p),
                    visited: seen.len(),
                };
            }
            queue.push_back((next, p));
        }
    }
    BfsOutcome {
        proof: None,
        visited: seen.len(),
    }
}

/// Number of action sequences of exactly `depth` steps that first prove
/// the goal at their last step. No deduplication.
pub fn count_proofs(root: &MathState, lib: &RuleLibrary, depth: usize) -> usize {
    if goal_proven(root) {
        return usize::from(depth == 0);
    }
    if depth == 0 {
        return 0;
    }
    legal_actions(root, lib)
        .iter()
        .filter_map(|a| apply_action(root, a, lib).ok())
        .map(|next| count_proofs(&next, lib, depth - 1))
        .sum()
}
