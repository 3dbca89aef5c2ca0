//! Wasserstein distributionally robust MDPs: exact and robust dynamic
//! programming, DR value computation by duality and by finite-support
//! oracles, regularized lower bounds, linear approximation and the
//! finite-sample radius schedule.
//!
//! Every solver is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ambiguity;
pub mod error;
pub mod estimation;
pub mod guarantees;
pub mod linalg;
pub mod linear_approx;
pub mod lp;
pub mod mdp;
pub mod oracles;
pub mod random;
pub mod regularization;
pub mod robust_dp;
pub mod scalar;

pub use ambiguity::GroundNorm;
pub use error::{Error, Result};
pub use mdp::Policy;
pub use scalar::Scalar;

pub type Mdp = mdp::TabularMdp<f64>;
pub type Model = mdp::TransitionModel<f64>;
pub type Values = mdp::ValueTable<f64>;
pub type Empirical = ambiguity::EmpiricalDistribution<f64>;
pub type ModelDistribution = ambiguity::DiscreteModelDistribution<f64>;
pub type Ambiguity = ambiguity::AmbiguitySpec<f64>;
pub type Features = linear_approx::FeatureMatrix<f64>;
pub type Weights = linear_approx::WeightVector<f64>;
pub type Schedule = guarantees::RadiusSchedule<f64>;
pub type Sandwich = regularization::SandwichReport<f64>;
