//! Solvers and benchmarks for monotone stochastic finite-sum variational
//! inequalities in non-Euclidean (Bregman) geometry.

pub mod geometry;
pub mod harness;
pub mod problems;
pub mod rng;
pub mod solvers;
