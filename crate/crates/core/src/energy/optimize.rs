//! Gradient descent on the free binding slots with Armijo backtracking.

use super::binding::Binding;
use super::kernel::{total_energy, DomainWeights, EnergyError, EnergyReport};
use crate::hypergraph::MathState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptConfig {
    pub steps: usize,
    /// Initial trial step of every line search.
    pub lr: f64,
    pub tol: f64,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            steps: 1000,
            lr: 0.5,
            tol: 1e-12,
        }
    }
}

const ARMIJO_C: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct OptOutcome {
    pub iterations: usize,
    pub converged: bool,
    /// Total energy before the first step and after every accepted step.
    pub history: Vec<f64>,
}

pub fn minimize_binding(
    state: &MathState,
    binding: &Binding,
    weights: &DomainWeights,
    cfg: &OptConfig,
) -> Result<(Binding, EnergyReport, OptOutcome), EnergyError> {
    let mut current = binding.clone();
    let mut report = total_energy(state, &current, weights)?;
    let mut history = vec![report.total];
    let mut iterations = 0;
    let mut converged = report.total < cfg.tol;
    while !converged && iterations < cfg.steps {
        let g = report.gradient.clone();
        let g_sq: f64 = g.iter().map(|x| x * x).sum();
        if g_sq == 0.0 {
            break;
        }
        let x0 = current.free_vector();
        let mut t = cfg.lr;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial_x: Vec<f64> = x0.iter().zip(&g).map(|(x, gi)| x - t * gi).collect();
            let mut trial = current.clone();
            trial.set_free_vector(&trial_x);
            let r = total_energy(state, &trial, weights)?;
            if r.total <= report.total - ARMIJO_C * t * g_sq {
                accepted = Some((trial, r));
                break;
            }
            t *= SHRINK;
        }
        let Some((next, r)) = accepted else {
            break;
        };
        current = next;
        report = r;
        iterations += 1;
        history.push(report.total);
        converged = report.total < cfg.tol;
    }
    Ok((
        current,
        report,
        OptOutcome {
            iterations,
            converged,
            history,
        },
    ))
}
