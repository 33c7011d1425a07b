//! Randomized Kaczmarz and Gauss-Seidel solvers together with the variance,
//! concentration and trajectory bounds that describe their random error, and
//! the Monte-Carlo and brute-force machinery used to check those bounds.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod eigen;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod generate;
pub mod kron;
pub mod matrix;
pub mod mtx;
pub mod rng;
pub mod solvers;

pub use bounds::{BoundParams, BoundValue, Rates, VarianceForm};
pub use ensemble::{BruteForce, EnsembleSummary, TrialEnsemble};
pub use error::{Error, Result};
pub use generate::{InequalitySystem, LinearSystem};
pub use kron::ProjectorFamily;
pub use matrix::{Axis, DenseMatrix, SpectralSummary};
pub use solvers::{Method, Problem, Sampling, Trajectory};
