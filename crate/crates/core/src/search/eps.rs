//! Evolutionary proof search.
//!
//! Individuals are grouped by assumption set (the canonical hashes of their
//! premise facts) and only cross within a group. Parents are drawn with
//! probability proportional to shifted fitness, crossed by unification and
//! mutated by one sampled action. The best `elites` individuals survive
//! unchanged, so the best fitness never decreases.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::unify::unify;
use super::{goal_proven, lifted_residual};
use crate::brain::{self, BrainError, BrainParams};
use crate::config::stream;
use crate::energy::{total_energy, Binding, DomainWeights};
use crate::hypergraph::canon::CanonicalHashes;
use crate::hypergraph::rules::{apply_action, legal_actions};
use crate::hypergraph::{MathState, RuleLibrary};

/// How a child's single mutation action is drawn.
#[derive(Debug, Clone, Copy)]
pub enum Mutation<'a> {
    Policy(&'a BrainParams),
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsConfig {
    pub generations: usize,
    pub population: usize,
    pub elites: usize,
    pub eps: f64,
    pub witness_degree_cap: u32,
    /// Added to every shifted fitness so the worst individual can still be
    /// selected.
    pub selection_floor: f64,
    /// Also require the goal edge to be a fact before stopping.
    pub require_goal_fact: bool,
    pub seed: u64,
}

impl Default for EpsConfig {
    fn default() -> Self {
        EpsConfig {
            generations: 10,
            population: 8,
            elites: 1,
            eps: 1e-6,
            witness_degree_cap: 1,
            selection_floor: 1e-3,
            require_goal_fact: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub state: MathState,
    pub assumptions: BTreeSet<u64>,
    /// Negated goal energy: the goal residual when the state lifts,
    /// otherwise the total energy under the default binding.
    pub fitness: f64,
}

impl Individual {
    /// Treats every current fact of `state` as a premise.
    pub fn new(state: MathState, lib: &RuleLibrary, cfg: &EpsConfig) -> Self {
        let h = CanonicalHashes::compute(&state, &lib.commutative);
        let assumptions = state.facts().iter().map(|f| h.edges[f.index()]).collect();
        Self::with_assumptions(state, assumptions, cfg)
    }

    pub fn with_assumptions(state: MathState, assumptions: BTreeSet<u64>, cfg: &EpsConfig) -> Self {
        let fitness = -goal_energy(&state, cfg.witness_degree_cap);
        Individual {
            state,
            assumptions,
            fitness,
        }
    }

    pub fn solved(&self, eps: f64) -> bool {
        -self.fitness < eps
    }

    fn done(&self, cfg: &EpsConfig) -> bool {
        self.solved(cfg.eps) && (!cfg.require_goal_fact || goal_proven(&self.state))
    }
}

/// Goal residual for liftable states. Otherwise the total energy under
/// default values, which only counts as solved once the goal is a fact.
pub fn goal_energy(state: &MathState, cap: u32) -> f64 {
    if let Some(r) = lifted_residual(state, cap) {
        return r;
    }
    let mut binding = Binding::new(2);
    binding.fill_defaults(state);
    let total = total_energy(state, &binding, &DomainWeights::default()).map_or(f64::INFINITY, |r| r.total);
    if goal_proven(state) {
        total
    } else {
        total.max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub groups: usize,
    pub crossovers: usize,
    /// Children copied from a parent alone because its group had no partner.
    pub clones: usize,
    pub mutations: usize,
    pub solved: bool,
}

#[derive(Debug, Clone)]
pub struct EpsOutcome {
    pub best: Individual,
    /// The final population.
    pub population: Vec<Individual>,
    pub generations: usize,
    pub solved: bool,
    pub stats: Vec<GenerationStats>,
}

fn roulette(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if x < w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

fn mutate(state: &MathState, mutation: Mutation<'_>, lib: &RuleLibrary, rng: &mut ChaCha8Rng) -> Result<Option<MathState>, BrainError> {
    let legal = legal_actions(state, lib);
    if legal.is_empty() {
        return Ok(None);
    }
    let a = match mutation {
        Mutation::Policy(p) => brain::choose_action(state, p, &legal, Some(rng))?,
        Mutation::Uniform => legal[rng.gen_range(0..legal.len())].clone(),
    };
    Ok(Some(apply_action(state, &a, lib).expect("legal actions apply")))
}

fn best_of(pop: &[Individual]) -> usize {
    let mut best = 0;
    for (i, ind) in pop.iter().enumerate() {
        if ind.fitness > pop[best].fitness {
            best = i;
        }
    }
    best
}

fn generation_stats(generation: usize, pop: &[Individual], cfg: &EpsConfig) -> GenerationStats {
    let best = &pop[best_of(pop)];
    GenerationStats {
        generation,
        best_fitness: best.fitness,
        mean_fitness: pop.iter().map(|i| i.fitness).sum::<f64>() / pop.len() as f64,
        groups: pop.iter().map(|i| &i.assumptions).collect::<BTreeSet<_>>().len(),
        crossovers: 0,
        clones: 0,
        mutations: 0,
        solved: pop.iter().any(|i| i.done(cfg)),
    }
}

/// Evolves `population` until an individual's goal energy drops below
/// `cfg.eps` or the generation budget is spent.
///
/// # Panics
/// If `population` is empty.
pub fn eps_search(
    population: Vec<Individual>,
    mutation: Mutation<'_>,
    lib: &RuleLibrary,
    cfg: &EpsConfig,
) -> Result<EpsOutcome, BrainError> {
    assert!(!population.is_empty(), "evolutionary search needs a nonempty population");
    let mut pop = population;
    let mut stats = vec![generation_stats(0, &pop, cfg)];
    let size = cfg.population.max(1);
    let mut gen = 0;
    while gen < cfg.generations && !stats.last().is_some_and(|s| s.solved) {
        gen += 1;
        let mut rng = stream(cfg.seed, "eps", gen as u64);
        let min = pop.iter().map(|i| i.fitness).fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = pop.iter().map(|i| i.fitness - min + cfg.selection_floor).collect();
        let mut groups: BTreeMap<&BTreeSet<u64>, Vec<usize>> = BTreeMap::new();
        for (i, ind) in pop.iter().enumerate() {
            groups.entry(&ind.assumptions).or_default().push(i);
        }
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| pop[b].fitness.total_cmp(&pop[a].fitness).then(a.cmp(&b)));
        let mut next: Vec<Individual> = order.iter().take(cfg.elites.min(size)).map(|&i| pop[i].clone()).collect();
        let mut s = GenerationStats {
            generation: gen,
            ..generation_stats(gen, &pop, cfg)
        };
        while next.len() < size {
            let p1 = roulette(&weights, &mut rng);
            let partners: Vec<usize> = groups[&pop[p1].assumptions].iter().copied().filter(|&i| i != p1).collect();
            let child_state = if partners.is_empty() {
                s.clones += 1;
                pop[p1].state.clone()
            } else {
                let w: Vec<f64> = partners.iter().map(|&i| weights[i]).collect();
                let p2 = partners[roulette(&w, &mut rng)];
                s.crossovers += 1;
                match unify(&pop[p1].state, &pop[p2].state, &lib.commutative) {
                    Ok((u, _)) => u,
                    Err(_) => pop[p1].state.clone(),
                }
            };
            let child_state = match mutate(&child_state, mutation, lib, &mut rng)? {
                Some(m) => {
                    s.mutations += 1;
                    m
                }
                None => child_state,
            };
            next.push(Individual::with_assumptions(child_state, pop[p1].assumptions.clone(), cfg));
        }
        pop = next;
        let g = generation_stats(gen, &pop, cfg);
        s.best_fitness = g.best_fitness;
        s.mean_fitness = g.mean_fitness;
        s.groups = g.groups;
        s.solved = g.solved;
        stats.push(s);
    }
    let best = pop.iter().find(|i| i.done(cfg)).unwrap_or(&pop[best_of(&pop)]).clone();
    Ok(EpsOutcome {
        solved: best.done(cfg),
        best,
        population: pop,
        generations: gen,
        stats,
    })
}
