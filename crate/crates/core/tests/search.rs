use std::collections::BTreeSet;
use std::path::Path;

use mathesis::brain::{BrainConfig, BrainParams};
use mathesis::expr_io::load_problem;
use mathesis::hypergraph::{MathState, Operator, RuleLibrary};
use mathesis::search::*;
use mathesis::training::LABELS;
use proptest::prelude::*;

fn fixture(name: &str) -> MathState {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/proofs").join(name);
    load_problem(&std::fs::read_to_string(path).unwrap(), 2).unwrap().state
}

fn state(text: &str) -> MathState {
    load_problem(text, 2).unwrap().state
}

fn comm() -> BTreeSet<Operator> {
    RuleLibrary::standard().commutative
}

#[test]
fn chain_fixture_needs_two_steps_and_mcts_finds_them() {
    let s = fixture("chain_two.mth");
    let lib = RuleLibrary::logic();
    assert_eq!(bfs_shortest(&s, &lib, 3).proof.map(|p| p.len()), Some(2));
    let cfg = MctsConfig {
        simulations: 500,
        ..Default::default()
    };
    let out = mcts_search(&s, Guide::Uniform, &lib, &cfg).unwrap();
    assert!(out.solved);
    assert_eq!(out.actions.len(), 2);
    assert!(verify_proof(&s, &out.actions, &lib, 1e-6, 1));
}

#[test]
fn proven_root_returns_empty_sequence() {
    let s = state("(problem (decl a var) (decl b var) (premise (Equals a b)) (goal (Equals a b)))");
    let out = mcts_search(&s, Guide::Uniform, &RuleLibrary::logic(), &MctsConfig::default()).unwrap();
    assert!(out.actions.is_empty());
    assert_eq!(out.value, 1.0);
}

#[test]
fn root_without_actions_is_stuck() {
    let s = state("(problem (decl a var) (decl b var) (decl c var) (premise (Equals a b)) (goal (Equals a c)))");
    let lib = RuleLibrary {
        rules: vec![mathesis::hypergraph::RuleKind::ModusPonens],
        ..RuleLibrary::logic()
    };
    let out = mcts_search(&s, Guide::Uniform, &lib, &MctsConfig::default()).unwrap();
    assert!(out.stuck && out.actions.is_empty());
}

fn check_tree(out: &MctsOutcome, sims: usize) {
    assert_eq!(out.nodes[0].visits, sims as u64);
    for node in &out.nodes {
        let children: u64 = node.n.iter().sum();
        assert_eq!(node.visits, children + node.evaluations);
        for a in 0..node.n.len() {
            if let Some(c) = node.children[a] {
                assert_eq!(out.nodes[c].visits, node.n[a]);
            }
            assert!((0.0..=1.0).contains(&node.q(a)));
        }
        if !node.priors.is_empty() {
            assert!((node.priors.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn visits_are_conserved_with_uniform_and_brain_guides() {
    let s = fixture("ponens_then_chain.mth");
    let lib = RuleLibrary::logic();
    let params = BrainParams::new(BrainConfig::default(), &LABELS, 3);
    for guide in [Guide::Uniform, Guide::Brain(&params)] {
        let cfg = MctsConfig {
            simulations: 200,
            ..Default::default()
        };
        let out = mcts_search(&s, guide, &lib, &cfg).unwrap();
        check_tree(&out, 200);
        assert_eq!(out.stats.len(), 200);
    }
}

#[test]
fn search_is_deterministic() {
    let s = fixture("chain_three.mth");
    let lib = RuleLibrary::logic();
    let params = BrainParams::new(BrainConfig::default(), &LABELS, 5);
    let cfg = MctsConfig {
        simulations: 300,
        ..Default::default()
    };
    let a = mcts_search(&s, Guide::Brain(&params), &lib, &cfg).unwrap();
    let b = mcts_search(&s, Guide::Brain(&params), &lib, &cfg).unwrap();
    assert_eq!(a.actions, b.actions);
    assert_eq!(a.stats, b.stats);
}

#[test]
fn self_unification_is_identity_up_to_ids() {
    let s = fixture("ponens_conjunction.mth");
    let (u, r) = unify(&s, &s, &comm()).unwrap();
    assert_eq!(u.entity_count(), s.entity_count());
    assert_eq!(r.merged, s.entity_count());
    assert_eq!(canonical_signature(&u, &comm()), canonical_signature(&s, &comm()));
}

#[test]
fn disjoint_symbols_do_not_merge() {
    let a = state("(problem (decl a var) (decl b var) (premise (Equals a b)) (goal (Equals b a)))");
    let b = state("(problem (decl x var) (decl y var) (premise (Equals x y)) (goal (Equals y x)))");
    let (u, r) = unify(&a, &b, &comm()).unwrap();
    assert_eq!(u.entity_count(), a.entity_count() + b.entity_count());
    assert_eq!(r.merged, 0);
    assert_eq!(r.passes, 1);
}

#[test]
fn differing_premises_are_never_crossed() {
    let lib = RuleLibrary::logic();
    let cfg = EpsConfig {
        generations: 3,
        population: 4,
        ..Default::default()
    };
    let pos = Individual::new(state("(problem (decl x var) (decl p var) (decl z var) (premise (Equals x p)) (goal (Equals z x)))"), &lib, &cfg);
    let neg = Individual::new(state("(problem (decl x var) (decl n var) (decl z var) (premise (Equals x n)) (goal (Equals z x)))"), &lib, &cfg);
    assert_ne!(pos.assumptions, neg.assumptions);
    let out = eps_search(vec![pos.clone(), neg.clone()], Mutation::Uniform, &lib, &cfg).unwrap();
    // The first generation has one individual per group, so nothing can cross.
    assert_eq!(out.stats[1].crossovers, 0);
    assert!(out.stats[1].clones > 0);
    for ind in &out.population {
        let s = &ind.state;
        assert!(s.lookup_symbol("p").is_none() || s.lookup_symbol("n").is_none());
    }
}

#[test]
fn solved_individual_returns_immediately() {
    let lib = RuleLibrary::logic();
    let cfg = EpsConfig::default();
    let ind = Individual::new(state("(problem (decl a var) (decl b var) (premise (Equals a b)) (goal (Equals a b)))"), &lib, &cfg);
    let out = eps_search(vec![ind], Mutation::Uniform, &lib, &cfg).unwrap();
    assert_eq!(out.generations, 0);
    assert!(out.solved);
}

#[test]
fn best_fitness_never_decreases() {
    let lib = RuleLibrary::logic();
    let cfg = EpsConfig {
        generations: 6,
        population: 6,
        eps: 0.0,
        ..Default::default()
    };
    let ind = Individual::new(fixture("ponens_three.mth"), &lib, &cfg);
    let out = eps_search(vec![ind; 6], Mutation::Uniform, &lib, &cfg).unwrap();
    assert!(out.stats.windows(2).all(|w| w[1].best_fitness >= w[0].best_fitness));
}

fn chain_text(links: &[(usize, usize)]) -> String {
    let mut t = String::from("(problem");
    for v in ["a", "b", "c", "d", "e"] {
        t.push_str(&format!(" (decl {v} var)"));
    }
    for &(i, j) in links {
        t.push_str(&format!(" (premise (Equals {} {}))", ["a", "b", "c", "d", "e"][i], ["a", "b", "c", "d", "e"][j]));
    }
    t.push_str(" (goal (Equals a e)))");
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn unify_is_idempotent_and_keeps_every_fact(
        l1 in prop::collection::vec((0usize..5, 0usize..5), 1..5),
        l2 in prop::collection::vec((0usize..5, 0usize..5), 1..5),
    ) {
        let (g1, g2) = (state(&chain_text(&l1)), state(&chain_text(&l2)));
        let (u, _) = unify(&g1, &g2, &comm()).unwrap();
        u.validate().unwrap();
        let (uu, _) = unify(&u, &g2, &comm()).unwrap();
        prop_assert_eq!(canonical_signature(&uu, &comm()), canonical_signature(&u, &comm()));
        let merged = canonical_signature(&u, &comm()).facts;
        let expected: BTreeSet<u64> = canonical_signature(&g1, &comm()).facts.into_iter()
            .chain(canonical_signature(&g2, &comm()).facts).collect();
        prop_assert_eq!(merged.into_iter().collect::<BTreeSet<_>>(), expected);
    }
}

fn compose_parents(cfg: &EpsConfig) -> (Individual, Individual) {
    use mathesis::hypergraph::rules::{apply_action, legal_actions};
    use mathesis::hypergraph::RuleKind;
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/eps/compose.mth");
    let root = load_problem(&std::fs::read_to_string(path).unwrap(), 2).unwrap().state;
    let lib = RuleLibrary::logic();
    let base = Individual::new(root.clone(), &lib, cfg);
    let mp: Vec<_> = legal_actions(&root, &lib).into_iter().filter(|a| a.rule == RuleKind::ModusPonens).collect();
    assert_eq!(mp.len(), 2);
    let parent = |i: usize| Individual::with_assumptions(apply_action(&root, &mp[i], &lib).unwrap(), base.assumptions.clone(), cfg);
    (parent(0), parent(1))
}

#[test]
fn composed_parents_share_the_sum_after_unification() {
    let (g1, g2) = compose_parents(&EpsConfig::default());
    let (u, r) = unify(&g1.state, &g2.state, &comm()).unwrap();
    u.validate().unwrap();
    assert!(r.collisions.is_empty());
    assert_eq!(r.merged, g1.state.entity_count() + g2.state.entity_count() - u.entity_count());
    assert!(r.merged > 0);
    assert_eq!(u.edges().iter().filter(|e| e.operator == Operator::Sum).count(), 1);
    let facts: BTreeSet<u64> = canonical_signature(&u, &comm()).facts.into_iter().collect();
    for g in [&g1, &g2] {
        for f in canonical_signature(&g.state, &comm()).facts {
            assert!(facts.contains(&f));
        }
    }
}

#[test]
fn crossover_proves_the_composed_goal() {
    let lib = RuleLibrary::logic();
    let params = BrainParams::new(BrainConfig::default(), &LABELS, 1);
    let mut solved = 0;
    for seed in 0..5 {
        let cfg = EpsConfig {
            seed,
            require_goal_fact: true,
            ..Default::default()
        };
        let (g1, g2) = compose_parents(&cfg);
        let pop = (0..cfg.population).map(|i| if i % 2 == 0 { g1.clone() } else { g2.clone() }).collect();
        let out = eps_search(pop, Mutation::Policy(&params), &lib, &cfg).unwrap();
        if out.solved && out.generations <= 10 {
            assert!(out.best.state.goal().is_some_and(|g| out.best.state.facts().contains(&g)));
            solved += 1;
        }
    }
    assert!(solved >= 4, "{solved}/5 seeds");
}
