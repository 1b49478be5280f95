//! Ideal-membership residual energy over sparse polynomials.

pub mod poly;
pub mod witness;

pub use poly::{monomials_up_to, Monomial, PolyError, Polynomial};
pub use witness::{
    effective_degree_bound, monomial_basis, radical_check, residual_of, solve_witness,
    solve_witness_capped, witness_energy_step, DegreeConfig, IdealError, WitnessSolution,
};
