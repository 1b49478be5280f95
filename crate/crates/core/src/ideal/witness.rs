//! Bounded-degree ideal membership by linear least squares.
//!
//! For a target `h` and generators `F`, the witnesses `g_i` range over all
//! polynomials of degree ≤ `b`; the residual `h − Σ g_i f_i` is linear in the
//! stacked witness coefficients, so minimizing its coefficient norm is an
//! ordinary least-squares problem.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::poly::{basis_count, monomials_up_to, Monomial, PolyError, Polynomial};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IdealError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("monomial basis for {nvars} variables at degree {degree} has {count} elements, over the cap of {cap}")]
    BasisTooLarge {
        nvars: usize,
        degree: u32,
        count: u128,
        cap: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeConfig {
    pub cap: u32,
    pub slack: u32,
    pub basis_cap: usize,
}

impl Default for DegreeConfig {
    fn default() -> Self {
        DegreeConfig {
            cap: 8,
            slack: 1,
            basis_cap: 20_000,
        }
    }
}

pub const DEFAULT_BASIS_CAP: usize = 20_000;

/// Tikhonov damping relative to the largest normal-matrix diagonal entry.
const DAMPING: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessSolution {
    pub witnesses: Vec<Polynomial>,
    pub residual: Polynomial,
    pub energy: f64,
    pub degree_bound_used: u32,
}

/// Monomial basis of degree ≤ `max_degree`, rejecting sizes over `cap`.
pub fn monomial_basis(n_vars: usize, max_degree: u32, cap: usize) -> Result<Vec<Monomial>, IdealError> {
    let count = basis_count(n_vars, max_degree).unwrap_or(u128::MAX);
    if count > cap as u128 {
        return Err(IdealError::BasisTooLarge {
            nvars: n_vars,
            degree: max_degree,
            count,
            cap,
        });
    }
    Ok(monomials_up_to(n_vars, max_degree))
}

/// min(cap, deg h + max deg f + slack)
pub fn effective_degree_bound(h: &Polynomial, f: &[Polynomial], cfg: &DegreeConfig) -> u32 {
    let max_f = f.iter().map(Polynomial::degree).max().unwrap_or(0);
    cfg.cap.min(h.degree() + max_f + cfg.slack)
}

pub fn solve_witness(h: &Polynomial, f: &[Polynomial], degree_bound: u32) -> Result<WitnessSolution, IdealError> {
    solve_witness_capped(h, f, degree_bound, DEFAULT_BASIS_CAP)
}

pub fn solve_witness_capped(
    h: &Polynomial,
    f: &[Polynomial],
    degree_bound: u32,
    basis_cap: usize,
) -> Result<WitnessSolution, IdealError> {
    let n = h.nvars();
    for p in f {
        if p.nvars() != n {
            return Err(PolyError::Arity(n, p.nvars()).into());
        }
    }
    let zero_solution = || WitnessSolution {
        witnesses: vec![Polynomial::zero(n); f.len()],
        residual: h.clone(),
        energy: h.norm_sq(),
        degree_bound_used: degree_bound,
    };
    let active: Vec<usize> = (0..f.len()).filter(|&i| !f[i].is_zero()).collect();
    if h.is_zero() || active.is_empty() {
        return Ok(zero_solution());
    }
    let basis = monomial_basis(n, degree_bound, basis_cap)?;

    // Row index: every monomial of h and of every product m·f_i.
    let mut rows: HashMap<Monomial, usize> = HashMap::new();
    let row_of = |m: Monomial, rows: &mut HashMap<Monomial, usize>| {
        let next = rows.len();
        *rows.entry(m).or_insert(next)
    };
    let mut columns: Vec<Vec<(usize, f64)>> = Vec::with_capacity(basis.len() * active.len());
    for &i in &active {
        for m in &basis {
            let col = f[i]
                .terms()
                .map(|(fm, c)| (row_of(m.mul(fm), &mut rows), c))
                .collect();
            columns.push(col);
        }
    }
    let mut b = Vec::new();
    for (m, c) in h.terms() {
        b.push((row_of(m.clone(), &mut rows), c));
    }
    let nrows = rows.len();
    let ncols = columns.len();

    // Column equilibration before forming the normal equations.
    let scales: Vec<f64> = columns
        .iter()
        .map(|col| {
            let s: f64 = col.iter().map(|(_, c)| c * c).sum::<f64>().sqrt();
            if s > 0.0 {
                1.0 / s
            } else {
                1.0
            }
        })
        .collect();
    let mut a = DMatrix::<f64>::zeros(nrows, ncols);
    for (j, col) in columns.iter().enumerate() {
        for &(r, c) in col {
            a[(r, j)] += c * scales[j];
        }
    }
    let mut rhs = DVector::<f64>::zeros(nrows);
    for (r, c) in b {
        rhs[r] += c;
    }
    let x = damped_least_squares(&a, &rhs);

    let mut witnesses = vec![Polynomial::zero(n); f.len()];
    for (k, &i) in active.iter().enumerate() {
        let block = &x.as_slice()[k * basis.len()..(k + 1) * basis.len()];
        witnesses[i] = Polynomial::from_terms(
            n,
            basis
                .iter()
                .zip(block)
                .zip(&scales[k * basis.len()..])
                .map(|((m, &c), &s)| (m.clone(), c * s)),
        );
    }
    let (residual, energy) = residual_of(h, f, &witnesses);
    let fresh = WitnessSolution {
        witnesses,
        residual,
        energy,
        degree_bound_used: degree_bound,
    };
    // The zero witness is always feasible.
    if fresh.energy > h.norm_sq() {
        return Ok(zero_solution());
    }
    Ok(fresh)
}

/// Recomputes h − Σ g_i f_i exactly in sparse arithmetic.
pub fn residual_of(h: &Polynomial, f: &[Polynomial], g: &[Polynomial]) -> (Polynomial, f64) {
    let mut r = h.clone();
    for (gi, fi) in g.iter().zip(f) {
        if !gi.is_zero() {
            r = r.sub(&gi.mul(fi).expect("arity checked")).expect("arity checked");
        }
    }
    let e = r.norm_sq();
    (r, e)
}

/// Solves min ‖Ax − b‖² through damped normal equations with two rounds of
/// iterative refinement. Damping escalates if the factorization fails.
fn damped_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let at = a.transpose();
    let normal = &at * a;
    let max_diag = normal.diagonal().iter().cloned().fold(0.0, f64::max).max(1.0);
    let mut lambda = DAMPING * max_diag;
    let chol = loop {
        let mut m = normal.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += lambda;
        }
        if let Some(c) = m.cholesky() {
            break c;
        }
        lambda *= 10.0;
    };
    let mut x = chol.solve(&(&at * b));
    for _ in 0..2 {
        let r = b - a * &x;
        x += chol.solve(&(&at * r));
    }
    x
}

/// Smallest k ≤ k_max with h^k in the ideal at the given bound.
pub fn radical_check(
    h: &Polynomial,
    f: &[Polynomial],
    k_max: u32,
    degree_bound: u32,
    tol: f64,
) -> Result<Option<(u32, WitnessSolution)>, IdealError> {
    for k in 1..=k_max {
        let sol = solve_witness(&h.pow(k), f, degree_bound)?;
        if sol.energy < tol {
            return Ok(Some((k, sol)));
        }
    }
    Ok(None)
}

/// Residual energies before and after adding one generator.
///
/// The previous witnesses padded with a zero witness for `f_new` remain
/// feasible for the enlarged problem, so the better of the two solutions is
/// kept; this makes e_{t+1} ≤ e_t hold in floating point as well.
pub fn witness_energy_step(
    h: &Polynomial,
    f_t: &[Polynomial],
    f_new: &Polynomial,
    degree_bound: u32,
) -> Result<(f64, f64), IdealError> {
    let before = solve_witness(h, f_t, degree_bound)?;
    let mut f_next = f_t.to_vec();
    f_next.push(f_new.clone());
    let after = solve_witness(h, &f_next, degree_bound)?;
    Ok((before.energy, after.energy.min(before.energy)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Polynomial {
        Polynomial::parse(s, &["x", "y", "z"]).unwrap()
    }

    #[test]
    fn difference_of_squares_membership() {
        let sol = solve_witness(&p("x^2 - y^2"), &[p("x - y")], 1).unwrap();
        assert!(sol.energy < 1e-20, "{}", sol.energy);
        let g = &sol.witnesses[0];
        assert!(g.sub(&p("x + y")).unwrap().norm_sq() < 1e-20);
        assert!(g.degree() <= 1);
    }

    #[test]
    fn degree_obstruction() {
        // Every element of <x²> has no degree-1 term, so h = x keeps energy 1.
        let sol = solve_witness(&p("x"), &[p("x^2")], 3).unwrap();
        assert!((sol.energy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_target() {
        let sol = solve_witness(&Polynomial::zero(3), &[p("x"), p("y^2")], 2).unwrap();
        assert_eq!(sol.energy, 0.0);
        assert!(sol.witnesses.iter().all(Polynomial::is_zero));
    }

    #[test]
    fn degree_bounds() {
        let cfg = DegreeConfig {
            cap: 8,
            slack: 0,
            basis_cap: 100,
        };
        assert_eq!(effective_degree_bound(&p("x^2"), &[p("x")], &cfg), 3);
        let tight = DegreeConfig { cap: 2, ..cfg };
        assert_eq!(effective_degree_bound(&p("x^3"), &[p("y^2")], &tight), 2);
        let default = DegreeConfig::default();
        assert_eq!(effective_degree_bound(&p("x^2"), &[p("x")], &default), 4);
    }

    #[test]
    fn basis_cap_rejects() {
        assert!(matches!(
            monomial_basis(10, 10, 20_000),
            Err(IdealError::BasisTooLarge { .. })
        ));
        assert_eq!(monomial_basis(2, 2, 20_000).unwrap().len(), 6);
    }

    #[test]
    fn radical_escalation() {
        let (k, sol) = radical_check(&p("x"), &[p("x^2")], 3, 2, 1e-8).unwrap().unwrap();
        assert_eq!(k, 2);
        assert!(sol.witnesses[0].sub(&p("1")).unwrap().norm_sq() < 1e-16);
        let (k, _) = radical_check(&p("x*y"), &[p("x")], 3, 2, 1e-8).unwrap().unwrap();
        assert_eq!(k, 1);
        assert!(radical_check(&p("1"), &[p("x")], 4, 3, 1e-8).unwrap().is_none());
    }

    #[test]
    fn energy_steps() {
        let h = p("x^2 - y^2");
        let (e0, e1) = witness_energy_step(&h, &[], &h, 1).unwrap();
        assert_eq!(e0, h.norm_sq());
        assert!(e1 < 1e-20);
        let (a, b) = witness_energy_step(&p("x - y"), &[p("x")], &p("z"), 1).unwrap();
        let direct = solve_witness(&p("x - y"), &[p("x"), p("z")], 1).unwrap().energy;
        assert!((a - b).abs() < 1e-10);
        assert!((b - direct).abs() < 1e-10);
    }

    #[test]
    fn duplicate_generators_are_stable() {
        let f = [p("x - y"), p("x - y"), p("2*x - 2*y")];
        let sol = solve_witness(&p("x^2 - y^2"), &f, 2).unwrap();
        assert!(sol.energy < 1e-16);
        assert!(sol.witnesses.iter().all(|g| g.terms().all(|(_, c)| c.is_finite())));
    }
}
