//! Synthetic liftable problems and their scripted derivations.
//!
//! An implication ladder has one trigger equality `p = q` and a chain of
//! implications `p = q ⇒ v0 = v1`, `v0 = v1 ⇒ v1 = v2`, ... with goal
//! `v0 = vk`. Only equalities are lifted, so the goal residual starts at
//! ‖v0 − vk‖² and falls as modus ponens releases each link. Distractors add
//! implications whose antecedent never becomes a fact, unrelated
//! equalities, and implications that fire but only restate a known
//! equality.

use rand::seq::SliceRandom;
use rand::Rng;

use super::bc::ExpertTrace;
use super::episode::Task;
use crate::expr_io::load_problem;
use crate::hypergraph::rules::apply_action;
use crate::hypergraph::{Action, EntityRef, MathState, Operator, RuleKind, RuleLibrary};

/// Leaf labels used by generated problems; also the brain's symbol table.
pub const LABELS: [&str; 16] = [
    "a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "m", "n", "p", "q", "r",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderConfig {
    pub min_links: usize,
    pub max_links: usize,
    pub max_distractors: usize,
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig {
            min_links: 2,
            max_links: 4,
            max_distractors: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ladder {
    pub name: String,
    pub text: String,
    pub trigger: (String, String),
    /// Chain labels `v0 .. vk`.
    pub chain: Vec<String>,
}

pub fn ladder<R: Rng>(rng: &mut R, cfg: &LadderConfig, name: &str) -> Ladder {
    let links = rng.gen_range(cfg.min_links..=cfg.max_links);
    let mut pool: Vec<&str> = LABELS.to_vec();
    pool.shuffle(rng);
    let chain: Vec<String> = pool[..=links].iter().map(|s| s.to_string()).collect();
    let rest = &pool[links + 1..];
    let (p, q) = (rest[0].to_string(), rest[1].to_string());
    let rest = &rest[2..];
    let mut decls: Vec<String> = chain.iter().chain([&p, &q]).map(|v| v.to_string()).collect();
    let mut premises = vec![format!("(Equals {p} {q})")];
    let mut prev = format!("(Equals {p} {q})");
    for w in chain.windows(2) {
        let link = format!("(Equals {} {})", w[0], w[1]);
        premises.push(format!("(Implies {prev} {link})"));
        prev = link;
    }
    let distractors = rng.gen_range(0..=cfg.max_distractors);
    for i in 0..distractors {
        let (x, y) = (rest[2 * i], rest[2 * i + 1]);
        decls.extend([x.to_string(), y.to_string()]);
        match rng.gen_range(0..3) {
            0 => {
                let target = &chain[rng.gen_range(0..chain.len())];
                premises.push(format!("(Implies (Equals {x} {y}) (Equals {target} {x}))"));
            }
            1 => premises.push(format!("(Equals {x} {y})")),
            _ => {
                // Fires, but only restates a known equality.
                premises.push(format!("(Equals {x} {y})"));
                premises.push(format!("(Implies (Equals {x} {y}) (Equals {y} {x}))"));
            }
        }
    }
    premises.shuffle(rng);
    let mut text = String::from("(problem");
    for d in &decls {
        text.push_str(&format!(" (decl {d} var)"));
    }
    for pr in &premises {
        text.push_str(&format!(" (premise {pr})"));
    }
    text.push_str(&format!(" (goal (Equals {} {})))", chain[0], chain[links]));
    Ladder {
        name: name.to_string(),
        text,
        trigger: (p, q),
        chain,
    }
}

impl Ladder {
    pub fn task(&self) -> Task {
        Task {
            name: self.name.clone(),
            state: load_problem(&self.text, 2).expect("generated problems parse").state,
        }
    }

    /// Modus ponens up the ladder, then transitivity from `v0` outward
    /// until the goal equality is a fact.
    pub fn expert(&self, lib: &RuleLibrary) -> ExpertTrace {
        let task = self.task();
        let mut s = task.state.clone();
        let mut actions = Vec::new();
        let eq = |s: &MathState, a: &str, b: &str| -> EntityRef {
            let (x, y) = (s.lookup_symbol(a).expect("declared"), s.lookup_symbol(b).expect("declared"));
            EntityRef::Edge(
                s.find_edge(Operator::Equals, &[EntityRef::Node(x), EntityRef::Node(y)], &[])
                    .expect("equality present"),
            )
        };
        let step = |s: &mut MathState, a: Action, actions: &mut Vec<Action>| {
            *s = apply_action(s, &a, lib).expect("scripted step is legal");
            actions.push(a);
        };
        let mut prev = eq(&s, &self.trigger.0, &self.trigger.1);
        for w in self.chain.windows(2) {
            let link = eq(&s, &w[0], &w[1]);
            let imp = EntityRef::Edge(s.find_edge(Operator::Implies, &[prev, link], &[]).expect("ladder rung"));
            step(&mut s, Action::new(RuleKind::ModusPonens, vec![prev, imp]), &mut actions);
            prev = link;
        }
        for i in 2..self.chain.len() {
            let left = eq(&s, &self.chain[0], &self.chain[i - 1]);
            let right = eq(&s, &self.chain[i - 1], &self.chain[i]);
            step(&mut s, Action::new(RuleKind::EqualityTransitivity, vec![left, right]), &mut actions);
        }
        ExpertTrace { task, actions }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::lift::algebraic_lift;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn expert_reaches_goal_fact() {
        let lib = RuleLibrary::logic();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..20 {
            let l = ladder(&mut rng, &LadderConfig::default(), &format!("ladder-{i}"));
            let tr = l.expert(&lib);
            let links = l.chain.len() - 1;
            assert_eq!(tr.actions.len(), 2 * links - 1);
            let mut s = tr.task.state.clone();
            let lifted = algebraic_lift(&s).unwrap();
            assert_eq!(lifted.goal.norm_sq(), 2.0);
            for a in &tr.actions {
                s = apply_action(&s, a, &lib).unwrap();
            }
            assert!(s.is_fact(s.goal().unwrap()));
        }
    }
}
