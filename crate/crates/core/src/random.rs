//! Seeded random instances for property tests and certification sweeps.

use rand::Rng;

use crate::ambiguity::{build_empirical, EmpiricalDistribution};
use crate::error::Result;
use crate::mdp::{Policy, TabularMdp, TransitionModel, ValueTable};
use crate::scalar::Scalar;

/// Uniform draw from the probability simplex of dimension `n`.
pub fn random_row<F: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<F> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    let mut row: Vec<F> = e.iter().map(|x| F::lit(x / total)).collect();
    let drift = F::one() - row.iter().copied().sum::<F>();
    row[0] += drift;
    if row[0] < F::zero() {
        row[0] = F::zero();
    }
    row
}

/// Transition model with independent uniform simplex rows.
pub fn random_model<F: Scalar, R: Rng + ?Sized>(num_states: usize, num_actions: usize, rng: &mut R) -> TransitionModel<F> {
    let mut probs = Vec::with_capacity(num_states * num_actions * num_states);
    for _ in 0..num_states * num_actions {
        probs.extend(random_row::<F, R>(num_states, rng));
    }
    TransitionModel::new(num_states, num_actions, probs).expect("random rows are stochastic")
}

/// MDP with rewards uniform in `[-1, 1]` and `R_max = 1`.
pub fn random_mdp<F: Scalar, R: Rng + ?Sized>(
    num_states: usize,
    num_actions: usize,
    discount: F,
    rng: &mut R,
) -> Result<TabularMdp<F>> {
    let reward = (0..num_states * num_actions)
        .map(|_| F::lit(rng.gen_range(-1.0..=1.0)))
        .collect();
    TabularMdp::new(num_states, num_actions, reward, discount, F::one())
}

pub fn random_policy<R: Rng + ?Sized>(num_states: usize, num_actions: usize, rng: &mut R) -> Policy {
    Policy((0..num_states).map(|_| rng.gen_range(0..num_actions)).collect())
}

/// Empirical distribution of `n` independent random models.
pub fn random_empirical<F: Scalar, R: Rng + ?Sized>(
    num_states: usize,
    num_actions: usize,
    n: usize,
    rng: &mut R,
) -> Result<EmpiricalDistribution<F>> {
    build_empirical((0..n).map(|_| random_model(num_states, num_actions, rng)).collect())
}

/// Value table with entries uniform in `[lo, hi]`.
pub fn random_values<F: Scalar, R: Rng + ?Sized>(num_states: usize, lo: f64, hi: f64, rng: &mut R) -> ValueTable<F> {
    ValueTable((0..num_states).map(|_| F::lit(rng.gen_range(lo..=hi))).collect())
}
