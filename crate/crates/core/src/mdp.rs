//! Finite MDPs, transition tensors, policy evaluation and the classical
//! Bellman operator.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{dot, sup_dist, Scalar};

/// State/action spaces, rewards `r(s, a)`, discount and reward bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp<F> {
    num_states: usize,
    num_actions: usize,
    /// Row-major `[s][a]`.
    reward: Vec<F>,
    discount: F,
    r_max: F,
}

impl<F: Scalar> TabularMdp<F> {
    /// `reward` is indexed `s * num_actions + a`.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        reward: Vec<F>,
        discount: F,
        r_max: F,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::dim("state and action counts must be positive"));
        }
        if reward.len() != num_states * num_actions {
            return Err(Error::dim(format!(
                "reward has {} entries, expected {}",
                reward.len(),
                num_states * num_actions
            )));
        }
        if !(discount >= F::zero() && discount < F::one()) {
            return Err(Error::param("discount", format!("must lie in [0, 1), got {discount}")));
        }
        if !(r_max > F::zero()) || !r_max.is_finite() {
            return Err(Error::param("r_max", format!("must be positive and finite, got {r_max}")));
        }
        if let Some((i, r)) = reward
            .iter()
            .enumerate()
            .find(|(_, r)| !r.is_finite() || r.abs() > r_max)
        {
            return Err(Error::param(
                "reward",
                format!(
                    "|r({}, {})| = {} exceeds r_max = {r_max}",
                    i / num_actions,
                    i % num_actions,
                    r.abs()
                ),
            ));
        }
        Ok(Self {
            num_states,
            num_actions,
            reward,
            discount,
            r_max,
        })
    }

    /// Uses `max |r|` as the reward bound.
    pub fn with_tight_bound(
        num_states: usize,
        num_actions: usize,
        reward: Vec<F>,
        discount: F,
    ) -> Result<Self> {
        let r_max = reward
            .iter()
            .fold(F::zero(), |m, r| m.max(r.abs()))
            .max(F::min_positive_value());
        Self::new(num_states, num_actions, reward, discount, r_max)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn discount(&self) -> F {
        self.discount
    }

    pub fn r_max(&self) -> F {
        self.r_max
    }

    pub fn reward(&self, s: usize, a: usize) -> F {
        self.reward[s * self.num_actions + a]
    }

    pub fn rewards(&self) -> &[F] {
        &self.reward
    }

    /// `R_max / (1 - γ)`, the bound on any value function.
    pub fn value_bound(&self) -> F {
        self.r_max / (F::one() - self.discount)
    }

    /// Single-action MDP obtained by fixing `pi`; transitions follow with
    /// [`TransitionModel::restrict`].
    pub fn restrict(&self, pi: &Policy) -> Result<Self> {
        pi.check(self)?;
        let reward = (0..self.num_states).map(|s| self.reward(s, pi[s])).collect();
        Self::new(self.num_states, 1, reward, self.discount, self.r_max)
    }

    pub(crate) fn check_model(&self, p: &TransitionModel<F>) -> Result<()> {
        if p.num_states != self.num_states || p.num_actions != self.num_actions {
            return Err(Error::dim(format!(
                "transition model is {}x{}, MDP is {}x{}",
                p.num_states, p.num_actions, self.num_states, self.num_actions
            )));
        }
        Ok(())
    }

    pub(crate) fn check_values(&self, v: &[F]) -> Result<()> {
        if v.len() != self.num_states {
            return Err(Error::dim(format!(
                "value table has {} entries, MDP has {} states",
                v.len(),
                self.num_states
            )));
        }
        Ok(())
    }

    pub(crate) fn check_state(&self, s: usize) -> Result<()> {
        if s >= self.num_states {
            return Err(Error::dim(format!("state {s} out of range 0..{}", self.num_states)));
        }
        Ok(())
    }
}

/// Row-stochastic tensor `p(s' | s, a)`, stored `[s][a][s']`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel<F> {
    num_states: usize,
    num_actions: usize,
    probs: Vec<F>,
}

impl<F: Scalar> TransitionModel<F> {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<F>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::dim("state and action counts must be positive"));
        }
        let expected = num_states * num_actions * num_states;
        if probs.len() != expected {
            return Err(Error::dim(format!(
                "transition tensor has {} entries, expected {expected}",
                probs.len()
            )));
        }
        let model = Self {
            num_states,
            num_actions,
            probs,
        };
        model.validate()?;
        Ok(model)
    }

    /// Builds a model from nested `[s][a][s']` rows.
    pub fn from_rows(rows: &[Vec<Vec<F>>]) -> Result<Self> {
        let ns = rows.len();
        let na = rows.first().map_or(0, Vec::len);
        let mut probs = Vec::with_capacity(ns * na * ns);
        for (s, per_action) in rows.iter().enumerate() {
            if per_action.len() != na {
                return Err(Error::dim(format!("state {s} has {} actions, expected {na}", per_action.len())));
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != ns {
                    return Err(Error::dim(format!(
                        "row ({s}, {a}) has {} successors, expected {ns}",
                        row.len()
                    )));
                }
                probs.extend_from_slice(row);
            }
        }
        Self::new(ns, na, probs)
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let u = F::one() / F::from_usize_(num_states);
        Self {
            num_states,
            num_actions,
            probs: vec![u; num_states * num_actions * num_states],
        }
    }

    /// Deterministic transitions `s' = next(s, a)`.
    pub fn deterministic(
        num_states: usize,
        num_actions: usize,
        next: impl Fn(usize, usize) -> usize,
    ) -> Result<Self> {
        let mut probs = vec![F::zero(); num_states * num_actions * num_states];
        for s in 0..num_states {
            for a in 0..num_actions {
                let t = next(s, a);
                if t >= num_states {
                    return Err(Error::dim(format!("successor {t} out of range")));
                }
                probs[(s * num_actions + a) * num_states + t] = F::one();
            }
        }
        Self::new(num_states, num_actions, probs)
    }

    fn validate(&self) -> Result<()> {
        let tol = F::row_tolerance(self.num_states);
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let row = self.row(s, a);
                if let Some(x) = row.iter().find(|x| !(**x >= F::zero()) || !x.is_finite()) {
                    return Err(Error::param(
                        "transition",
                        format!("row ({s}, {a}) has invalid entry {x}"),
                    ));
                }
                let sum: F = row.iter().copied().sum();
                if (sum - F::one()).abs() > tol {
                    return Err(Error::param(
                        "transition",
                        format!("row ({s}, {a}) sums to {sum}"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn row(&self, s: usize, a: usize) -> &[F] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.probs[start..start + self.num_states]
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> F {
        self.row(s, a)[next]
    }

    /// Flat `[s][a][s']` storage.
    pub fn as_slice(&self) -> &[F] {
        &self.probs
    }

    pub(crate) fn row_mut(&mut self, s: usize, a: usize) -> &mut [F] {
        let start = (s * self.num_actions + a) * self.num_states;
        &mut self.probs[start..start + self.num_states]
    }

    /// Replaces row `(s, a)`; the row must be a probability vector.
    pub fn set_row(&mut self, s: usize, a: usize, row: &[F]) -> Result<()> {
        if row.len() != self.num_states {
            return Err(Error::dim("row length differs from state count"));
        }
        let sum: F = row.iter().copied().sum();
        if row.iter().any(|x| !(*x >= F::zero())) || (sum - F::one()).abs() > F::row_tolerance(row.len()) {
            return Err(Error::param("row", "not a probability vector"));
        }
        self.row_mut(s, a).copy_from_slice(row);
        Ok(())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.num_states == other.num_states && self.num_actions == other.num_actions
    }

    /// `|S| × |S|` matrix of the rows selected by `pi`.
    pub fn policy_matrix(&self, pi: &Policy) -> Vec<F> {
        let n = self.num_states;
        let mut m = Vec::with_capacity(n * n);
        for s in 0..n {
            m.extend_from_slice(self.row(s, pi[s]));
        }
        m
    }

    /// Single-action model keeping only the rows selected by `pi`.
    pub fn restrict(&self, pi: &Policy) -> Self {
        Self {
            num_states: self.num_states,
            num_actions: 1,
            probs: self.policy_matrix(pi),
        }
    }
}

/// Deterministic stationary policy `s -> a`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Policy(pub Vec<usize>);

impl Policy {
    pub fn constant(num_states: usize, action: usize) -> Self {
        Policy(vec![action; num_states])
    }

    pub fn check<F: Scalar>(&self, mdp: &TabularMdp<F>) -> Result<()> {
        if self.0.len() != mdp.num_states() {
            return Err(Error::dim(format!(
                "policy covers {} states, MDP has {}",
                self.0.len(),
                mdp.num_states()
            )));
        }
        if let Some((s, a)) = self.0.iter().enumerate().find(|(_, a)| **a >= mdp.num_actions()) {
            return Err(Error::dim(format!(
                "policy picks action {a} at state {s}, only {} actions",
                mdp.num_actions()
            )));
        }
        Ok(())
    }
}

impl Deref for Policy {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

/// Value function `s -> v(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable<F>(pub Vec<F>);

impl<F: Scalar> ValueTable<F> {
    pub fn zeros(num_states: usize) -> Self {
        ValueTable(vec![F::zero(); num_states])
    }

    pub fn constant(num_states: usize, c: F) -> Self {
        ValueTable(vec![c; num_states])
    }

    /// Sup-norm distance.
    pub fn sup_dist(&self, other: &Self) -> F {
        sup_dist(&self.0, &other.0)
    }

    pub fn into_inner(self) -> Vec<F> {
        self.0
    }
}

impl<F> Deref for ValueTable<F> {
    type Target = [F];
    fn deref(&self) -> &[F] {
        &self.0
    }
}

impl<F> DerefMut for ValueTable<F> {
    fn deref_mut(&mut self) -> &mut [F] {
        &mut self.0
    }
}

fn check_all<F: Scalar>(
    mdp: &TabularMdp<F>,
    p: &TransitionModel<F>,
    pi: &Policy,
) -> Result<()> {
    mdp.check_model(p)?;
    pi.check(mdp)
}

/// `r(s, a) + γ Σ p(s'|s,a) v(s')`.
pub fn q_value<F: Scalar>(mdp: &TabularMdp<F>, p: &TransitionModel<F>, v: &[F], s: usize, a: usize) -> F {
    mdp.reward(s, a) + mdp.discount() * dot(p.row(s, a), v)
}

/// One application of `T_p^π`.
pub fn bellman_apply<F: Scalar>(
    mdp: &TabularMdp<F>,
    p: &TransitionModel<F>,
    pi: &Policy,
    v: &ValueTable<F>,
) -> Result<ValueTable<F>> {
    check_all(mdp, p, pi)?;
    mdp.check_values(v)?;
    Ok(ValueTable(
        (0..mdp.num_states()).map(|s| q_value(mdp, p, v, s, pi[s])).collect(),
    ))
}

/// Exact `v_p^π` by solving `(I - γ P_π) v = r_π`.
pub fn policy_value<F: Scalar>(
    mdp: &TabularMdp<F>,
    p: &TransitionModel<F>,
    pi: &Policy,
) -> Result<ValueTable<F>> {
    check_all(mdp, p, pi)?;
    let n = mdp.num_states();
    let rewards: Vec<F> = (0..n).map(|s| mdp.reward(s, pi[s])).collect();
    Ok(ValueTable(value_of_matrix(n, &p.policy_matrix(pi), &rewards, mdp.discount())))
}

/// Solves `(I - γ P) v = r` for a row-stochastic `n × n` matrix `P`.
pub(crate) fn value_of_matrix<F: Scalar>(n: usize, pmat: &[F], rewards: &[F], discount: F) -> Vec<F> {
    let mut a = vec![F::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = -discount * pmat[i * n + j];
        }
        a[i * n + i] += F::one();
    }
    // I - γP is strictly diagonally dominant for γ < 1.
    linalg::solve(n, &a, rewards).expect("I - γP is nonsingular for γ < 1")
}

/// `v_p^π` within `tol` in sup-norm (direct linear solve).
pub fn evaluate_policy<F: Scalar>(
    mdp: &TabularMdp<F>,
    p: &TransitionModel<F>,
    pi: &Policy,
    tol: F,
) -> Result<ValueTable<F>> {
    if !(tol > F::zero()) {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }
    policy_value(mdp, p, pi)
}

/// `v_p^π` by fixed-point iteration, stopped once
/// `‖v_{k+1} − v_k‖_∞ ≤ tol (1 − γ) / γ`, which bounds the error by `tol`.
pub fn evaluate_policy_iterative<F: Scalar>(
    mdp: &TabularMdp<F>,
    p: &TransitionModel<F>,
    pi: &Policy,
    tol: F,
) -> Result<ValueTable<F>> {
    if !(tol > F::zero()) {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }
    check_all(mdp, p, pi)?;
    fixed_point(mdp.discount(), tol, ValueTable::zeros(mdp.num_states()), |v| {
        Ok(ValueTable(
            (0..mdp.num_states()).map(|s| q_value(mdp, p, v, s, pi[s])).collect(),
        ))
    })
}

/// Iterates a γ-contraction until the a-posteriori bound certifies `tol`.
pub(crate) fn fixed_point<F: Scalar>(
    discount: F,
    tol: F,
    start: ValueTable<F>,
    mut step: impl FnMut(&ValueTable<F>) -> Result<ValueTable<F>>,
) -> Result<ValueTable<F>> {
    let threshold = if discount > F::zero() {
        tol * (F::one() - discount) / discount
    } else {
        F::infinity()
    };
    let mut v = start;
    // Well beyond what any γ < 1 needs; float stagnation is the only way out.
    for _ in 0..1_000_000 {
        let next = step(&v)?;
        let delta = next.sup_dist(&v);
        v = next;
        if delta <= threshold {
            return Ok(v);
        }
    }
    Ok(v)
}

/// Greedy policy w.r.t. `v`; ties go to the lowest action index.
pub fn greedy_improve<F: Scalar>(
    mdp: &TabularMdp<F>,
    p: &TransitionModel<F>,
    v: &ValueTable<F>,
) -> Result<Policy> {
    mdp.check_model(p)?;
    mdp.check_values(v)?;
    Ok(Policy(
        (0..mdp.num_states())
            .map(|s| argmax_first((0..mdp.num_actions()).map(|a| q_value(mdp, p, v, s, a))))
            .collect(),
    ))
}

/// Index of the first maximal element.
pub(crate) fn argmax_first<F: Scalar>(xs: impl Iterator<Item = F>) -> usize {
    let mut best = 0;
    let mut best_val = F::neg_infinity();
    for (i, x) in xs.enumerate() {
        if x > best_val {
            best = i;
            best_val = x;
        }
    }
    best
}

/// Classical optimal value iteration.
pub fn value_iteration<F: Scalar>(
    mdp: &TabularMdp<F>,
    p: &TransitionModel<F>,
    tol: F,
) -> Result<(ValueTable<F>, Policy)> {
    if !(tol > F::zero()) {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }
    mdp.check_model(p)?;
    let v = fixed_point(mdp.discount(), tol, ValueTable::zeros(mdp.num_states()), |v| {
        Ok(ValueTable(
            (0..mdp.num_states())
                .map(|s| {
                    (0..mdp.num_actions())
                        .map(|a| q_value(mdp, p, v, s, a))
                        .fold(F::neg_infinity(), F::max)
                })
                .collect(),
        ))
    })?;
    let pi = greedy_improve(mdp, p, &v)?;
    Ok((v, pi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> (TabularMdp<f64>, TransitionModel<f64>) {
        let mdp = TabularMdp::new(2, 1, vec![0.0, 1.0], 0.9, 1.0).unwrap();
        let p = TransitionModel::deterministic(2, 1, |_, _| 1).unwrap();
        (mdp, p)
    }

    #[test]
    fn single_state_backup() {
        let mdp = TabularMdp::new(1, 1, vec![1.0], 0.5, 1.0).unwrap();
        let p = TransitionModel::uniform(1, 1);
        let tv = bellman_apply(&mdp, &p, &Policy(vec![0]), &ValueTable::zeros(1)).unwrap();
        assert_eq!(tv.0, vec![1.0]);
    }

    #[test]
    fn chain_backup_and_value() {
        let (mdp, p) = chain();
        let pi = Policy(vec![0, 0]);
        let tv = bellman_apply(&mdp, &p, &pi, &ValueTable::zeros(2)).unwrap();
        assert_eq!(tv.0, vec![0.0, 1.0]);
        let v = evaluate_policy(&mdp, &p, &pi, 1e-12).unwrap();
        assert!((v[1] - 10.0).abs() < 1e-12);
        assert!((v[0] - 9.0).abs() < 1e-12);
        let fixed = bellman_apply(&mdp, &p, &pi, &v).unwrap();
        assert!(fixed.sup_dist(&v) < 1e-12);
    }

    #[test]
    fn geometric_series() {
        let mdp = TabularMdp::<f64>::new(1, 1, vec![1.0], 0.9, 1.0).unwrap();
        let p = TransitionModel::uniform(1, 1);
        let v = evaluate_policy(&mdp, &p, &Policy(vec![0]), 1e-10).unwrap();
        assert!((v[0] - 10.0).abs() < 1e-10);
        let vi = evaluate_policy_iterative(&mdp, &p, &Policy(vec![0]), 1e-10).unwrap();
        assert!((vi[0] - 10.0).abs() <= 1e-10);
    }

    #[test]
    fn works_in_f32() {
        let mdp = TabularMdp::<f32>::new(2, 1, vec![0.0, 1.0], 0.9, 1.0).unwrap();
        let p = TransitionModel::<f32>::deterministic(2, 1, |_, _| 1).unwrap();
        let v = evaluate_policy(&mdp, &p, &Policy(vec![0, 0]), 1e-4).unwrap();
        assert!((v[0] - 9.0).abs() < 1e-4 && (v[1] - 10.0).abs() < 1e-4);
    }

    #[test]
    fn greedy_dominant_and_ties() {
        // state 0: action 1 dominant; state 1: action 0 dominant
        let mdp = TabularMdp::new(2, 2, vec![0.0, 1.0, 1.0, 0.0], 0.5, 1.0).unwrap();
        let p = TransitionModel::uniform(2, 2);
        let pi = greedy_improve(&mdp, &p, &ValueTable::zeros(2)).unwrap();
        assert_eq!(pi.0, vec![1, 0]);
        let tie = TabularMdp::new(2, 3, vec![0.5; 6], 0.5, 1.0).unwrap();
        let pi = greedy_improve(&tie, &TransitionModel::uniform(2, 3), &ValueTable::zeros(2)).unwrap();
        assert_eq!(pi.0, vec![0, 0]);
        let single = TabularMdp::new(3, 1, vec![0.1, 0.2, 0.3], 0.5, 1.0).unwrap();
        let pi = greedy_improve(&single, &TransitionModel::uniform(3, 1), &ValueTable::zeros(3)).unwrap();
        assert_eq!(pi.0, vec![0, 0, 0]);
    }

    #[test]
    fn structural_and_parameter_errors() {
        let (mdp, p) = chain();
        assert!(matches!(
            bellman_apply(&mdp, &p, &Policy(vec![0]), &ValueTable::zeros(2)),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            bellman_apply(&mdp, &p, &Policy(vec![0, 0]), &ValueTable::zeros(3)),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            evaluate_policy(&mdp, &p, &Policy(vec![0, 0]), 0.0),
            Err(Error::Parameter { .. })
        ));
        assert!(TabularMdp::new(1, 1, vec![1.0], 1.0, 1.0).is_err());
        assert!(TabularMdp::new(1, 1, vec![2.0], 0.5, 1.0).is_err());
        assert!(TransitionModel::new(1, 1, vec![0.9]).is_err());
        assert!(TransitionModel::new(2, 1, vec![1.5, -0.5, 0.5, 0.5]).is_err());
    }
}
