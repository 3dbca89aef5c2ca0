//! (s,a)-rectangular uncertainty sets and robust dynamic programming.

use serde::{Deserialize, Serialize};

use super::inner::constrained_min_linear;
use crate::ambiguity::GroundNorm;
use crate::error::{Error, Result};
use crate::mdp::{argmax_first, fixed_point, Policy, TabularMdp, TransitionModel, ValueTable};
use crate::scalar::{dot, Scalar};

/// Product over `(s, a)` of admissible transition rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum UncertaintySet<F> {
    /// Rows within `radius_per_sa[s * |A| + a]` of the center row.
    NormBall {
        center: TransitionModel<F>,
        radius_per_sa: Vec<F>,
        norm: GroundNorm,
    },
    /// Each row ranges over the corresponding rows of the atoms.
    Finite { atoms: Vec<TransitionModel<F>> },
}

impl<F: Scalar> UncertaintySet<F> {
    /// Ball with the same radius for every row.
    pub fn ball(center: TransitionModel<F>, radius: F, norm: GroundNorm) -> Self {
        let n = center.num_states() * center.num_actions();
        UncertaintySet::NormBall {
            center,
            radius_per_sa: vec![radius; n],
            norm,
        }
    }

    fn validate(&self, mdp: &TabularMdp<F>) -> Result<()> {
        match self {
            UncertaintySet::NormBall {
                center,
                radius_per_sa,
                ..
            } => {
                mdp.check_model(center)?;
                if radius_per_sa.len() != mdp.num_states() * mdp.num_actions() {
                    return Err(Error::dim("one radius per state-action pair required"));
                }
                if radius_per_sa.iter().any(|r| !(*r >= F::zero())) {
                    return Err(Error::param("radius", "radii must be nonnegative"));
                }
            }
            UncertaintySet::Finite { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::Infeasible("finite uncertainty set has no atoms".into()));
                }
                for a in atoms {
                    mdp.check_model(a)?;
                }
            }
        }
        Ok(())
    }

    /// `min_{q ∈ P_{sa}} ⟨q, v⟩`.
    pub fn worst_case(&self, s: usize, a: usize, v: &[F]) -> Result<F> {
        match self {
            UncertaintySet::NormBall {
                center,
                radius_per_sa,
                norm,
            } => Ok(constrained_min_linear(v, center.row(s, a), radius_per_sa[s * center.num_actions() + a], *norm)?.1),
            UncertaintySet::Finite { atoms } => Ok(atoms
                .iter()
                .map(|m| dot(m.row(s, a), v))
                .fold(F::infinity(), F::min)),
        }
    }
}

fn robust_q<F: Scalar>(mdp: &TabularMdp<F>, u: &UncertaintySet<F>, v: &[F], s: usize, a: usize) -> Result<F> {
    Ok(mdp.reward(s, a) + mdp.discount() * u.worst_case(s, a, v)?)
}

/// `max_a r(s,a) + γ min_{q ∈ P_{sa}} ⟨q, v⟩`.
pub fn robust_bellman_apply<F: Scalar>(
    mdp: &TabularMdp<F>,
    u: &UncertaintySet<F>,
    v: &ValueTable<F>,
) -> Result<ValueTable<F>> {
    u.validate(mdp)?;
    mdp.check_values(v)?;
    backup(mdp, u, v)
}

fn backup<F: Scalar>(mdp: &TabularMdp<F>, u: &UncertaintySet<F>, v: &ValueTable<F>) -> Result<ValueTable<F>> {
    let mut out = Vec::with_capacity(mdp.num_states());
    for s in 0..mdp.num_states() {
        let mut best = F::neg_infinity();
        for a in 0..mdp.num_actions() {
            best = best.max(robust_q(mdp, u, v, s, a)?);
        }
        out.push(best);
    }
    Ok(ValueTable(out))
}

/// Robust backup for the fixed policy `pi`.
pub fn robust_policy_apply<F: Scalar>(
    mdp: &TabularMdp<F>,
    u: &UncertaintySet<F>,
    pi: &Policy,
    v: &ValueTable<F>,
) -> Result<ValueTable<F>> {
    u.validate(mdp)?;
    pi.check(mdp)?;
    mdp.check_values(v)?;
    (0..mdp.num_states())
        .map(|s| robust_q(mdp, u, v, s, pi[s]))
        .collect::<Result<Vec<_>>>()
        .map(ValueTable)
}

/// Greedy policy under the robust backup; ties go to the lowest action.
pub fn robust_greedy<F: Scalar>(mdp: &TabularMdp<F>, u: &UncertaintySet<F>, v: &ValueTable<F>) -> Result<Policy> {
    u.validate(mdp)?;
    let mut pi = Vec::with_capacity(mdp.num_states());
    for s in 0..mdp.num_states() {
        let qs = (0..mdp.num_actions())
            .map(|a| robust_q(mdp, u, v, s, a))
            .collect::<Result<Vec<_>>>()?;
        pi.push(argmax_first(qs.into_iter()));
    }
    Ok(Policy(pi))
}

/// Robust optimal value within `tol` and a greedy robust policy.
pub fn robust_value_iteration<F: Scalar>(
    mdp: &TabularMdp<F>,
    u: &UncertaintySet<F>,
    tol: F,
) -> Result<(ValueTable<F>, Policy)> {
    if !(tol > F::zero()) {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }
    u.validate(mdp)?;
    let v = fixed_point(mdp.discount(), tol, ValueTable::zeros(mdp.num_states()), |v| backup(mdp, u, v))?;
    let pi = robust_greedy(mdp, u, &v)?;
    Ok((v, pi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::value_iteration;

    fn two_state() -> (TabularMdp<f64>, TransitionModel<f64>) {
        let mdp = TabularMdp::new(2, 2, vec![0.0, 0.1, 1.0, 0.5], 0.9, 1.0).unwrap();
        let p = TransitionModel::from_rows(&[
            vec![vec![0.9, 0.1], vec![0.4, 0.6]],
            vec![vec![0.2, 0.8], vec![0.5, 0.5]],
        ])
        .unwrap();
        (mdp, p)
    }

    #[test]
    fn zero_radius_and_single_atom_are_classical() {
        let (mdp, p) = two_state();
        let v = ValueTable(vec![1.0, 3.0]);
        let classical: Vec<f64> = (0..2)
            .map(|s| (0..2).map(|a| crate::mdp::q_value(&mdp, &p, &v, s, a)).fold(f64::MIN, f64::max))
            .collect();
        let ball = UncertaintySet::ball(p.clone(), 0.0, GroundNorm::L1Product);
        let finite = UncertaintySet::Finite { atoms: vec![p.clone()] };
        for u in [ball, finite] {
            let tv = robust_bellman_apply(&mdp, &u, &v).unwrap();
            assert!(tv.sup_dist(&ValueTable(classical.clone())) < 1e-15);
        }
    }

    #[test]
    fn full_simplex_takes_minimum() {
        let (_, p) = two_state();
        let u = UncertaintySet::ball(p, 2.0, GroundNorm::L1Product);
        let v = [1.0, 3.0];
        for s in 0..2 {
            for a in 0..2 {
                assert_eq!(u.worst_case(s, a, &v).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn deterministic_zero_radius_matches_value_iteration() {
        let mdp = TabularMdp::new(3, 2, vec![0.0, 0.5, 0.2, 0.0, 1.0, 0.3], 0.8, 1.0).unwrap();
        let p = TransitionModel::deterministic(3, 2, |s, a| (s + a + 1) % 3).unwrap();
        let (v1, pi1) = value_iteration(&mdp, &p, 1e-10).unwrap();
        let (v2, pi2) = robust_value_iteration(&mdp, &UncertaintySet::ball(p, 0.0, GroundNorm::L1Product), 1e-10).unwrap();
        assert!(v1.sup_dist(&v2) < 1e-9);
        assert_eq!(pi1, pi2);
    }

    #[test]
    fn ordering_between_nominal_and_full_simplex() {
        let (mdp, p) = two_state();
        let value = |r: f64| robust_value_iteration(&mdp, &UncertaintySet::ball(p.clone(), r, GroundNorm::L1Product), 1e-10).unwrap();
        let (nominal, _) = value(0.0);
        let (mid, pi) = value(0.2);
        let (full, _) = value(2.0);
        for s in 0..2 {
            assert!(full[s] <= mid[s] + 1e-9 && mid[s] <= nominal[s] + 1e-9);
        }
        let u = UncertaintySet::ball(p, 0.2, GroundNorm::L1Product);
        assert_eq!(robust_greedy(&mdp, &u, &mid).unwrap(), pi);
    }

    #[test]
    fn empty_set_is_rejected() {
        let (mdp, _) = two_state();
        let u = UncertaintySet::<f64>::Finite { atoms: vec![] };
        assert!(matches!(
            robust_bellman_apply(&mdp, &u, &ValueTable::zeros(2)),
            Err(Error::Infeasible(_))
        ));
    }
}
