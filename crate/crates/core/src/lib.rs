pub mod brain;
pub mod cli;
pub mod config;
pub mod energy;
pub mod expr_io;
pub mod geometry;
pub mod hypergraph;
pub mod ideal;
pub mod matrix;
pub mod search;
pub mod selftest;
pub mod training;
