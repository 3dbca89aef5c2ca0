//! Regularized value functions, the constant `L = βγR_max/(1−γ)²`, the
//! sandwich certifier and the simulation-lemma check.

use serde::{Deserialize, Serialize};

use crate::ambiguity::{AmbiguitySpec, EmpiricalDistribution, GroundNorm};
use crate::error::{Error, Result};
use crate::mdp::{policy_value, Policy, TabularMdp, TransitionModel, ValueTable};
use crate::robust_dp::{DualSolver, LambdaSearch, OracleSolver, OracleSupport};
use crate::scalar::Scalar;

/// Slack allowed in every inequality of the sandwich chain.
pub const CHAIN_SLACK: f64 = 1e-9;

/// Norm-compatibility constant `β` and `L = βγR_max/(1−γ)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationConstant<F> {
    pub beta: F,
    pub l_value: F,
}

/// `βγR_max/(1−γ)²`; `γ ≥ 1` leaves the constant undefined.
pub fn lipschitz_from_parts<F: Scalar>(beta: F, discount: F, r_max: F) -> Result<F> {
    if !(discount >= F::zero() && discount < F::one()) {
        return Err(Error::param("discount", format!("must lie in [0, 1), got {discount}")));
    }
    if !(beta >= F::zero()) {
        return Err(Error::param("beta", "must be nonnegative"));
    }
    let gap = F::one() - discount;
    Ok(beta * discount * r_max / (gap * gap))
}

pub fn lipschitz_constant<F: Scalar>(mdp: &TabularMdp<F>, norm: GroundNorm) -> Result<RegularizationConstant<F>> {
    let beta = norm.beta(mdp.num_states(), mdp.num_actions());
    Ok(RegularizationConstant {
        beta,
        l_value: lipschitz_from_parts(beta, mdp.discount(), mdp.r_max())?,
    })
}

/// `L` for an already validated MDP.
pub fn lipschitz_bound<F: Scalar>(mdp: &TabularMdp<F>, norm: GroundNorm) -> F {
    lipschitz_constant(mdp, norm)
        .expect("a validated MDP has discount below one")
        .l_value
}

/// Per state, `(1/n) Σ_i v_i(s) − L α`.
pub fn regularized_value<F: Scalar>(
    values_per_atom: &[ValueTable<F>],
    l: &RegularizationConstant<F>,
    alpha: F,
) -> Result<ValueTable<F>> {
    let Some(first) = values_per_atom.first() else {
        return Err(Error::param("values_per_atom", "at least one value table required"));
    };
    if !(alpha >= F::zero()) {
        return Err(Error::param("alpha", format!("must be nonnegative, got {alpha}")));
    }
    if values_per_atom.iter().any(|v| v.len() != first.len()) {
        return Err(Error::dim("value tables differ in length"));
    }
    let n = F::from_usize_(values_per_atom.len());
    Ok(ValueTable(
        (0..first.len())
            .map(|s| values_per_atom.iter().map(|v| v[s]).sum::<F>() / n - l.l_value * alpha)
            .collect(),
    ))
}

/// All quantities of the sandwich chain at one state and radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport<F> {
    pub state: usize,
    pub alpha: F,
    pub empirical_mean: F,
    /// Dual objective (certified lower bound).
    pub dr_lower: F,
    /// Finite-support oracle value (upper bound).
    pub dr_upper: F,
    pub reg_value: F,
    /// `L` used for `reg_value` (the override if one was given).
    pub l_value: F,
    pub lambda_star: F,
    /// `(empirical_mean − dr_upper) / α`, defined for `α > 0`.
    pub kappa_estimate: Option<F>,
    /// `empirical_mean ≥ dr_upper ≥ dr_lower ≥ reg_value`, each within 1e-9.
    pub pass: bool,
    /// `reg_value < −R_max/(1−γ)`: valid but uninformative.
    pub vacuous: bool,
}

impl<F: Scalar> SandwichReport<F> {
    /// Smallest slack across the three inequalities of the chain.
    pub fn min_slack(&self) -> F {
        (self.empirical_mean - self.dr_upper)
            .min(self.dr_upper - self.dr_lower)
            .min(self.dr_lower - self.reg_value)
    }
}

/// Options shared by [`sandwich_check`] and [`sandwich_sweep`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SandwichOptions<F> {
    pub search: LambdaSearch<F>,
    /// Replaces `L` in the regularized value only; the dual search keeps
    /// the true constant.
    pub l_override: Option<F>,
}

/// Sandwich reports for every radius in `alphas` at state `s`.
#[allow(clippy::too_many_arguments)]
pub fn sandwich_sweep<F: Scalar>(
    mdp: &TabularMdp<F>,
    pi: &Policy,
    emp: &EmpiricalDistribution<F>,
    norm: GroundNorm,
    s: usize,
    alphas: &[F],
    support: OracleSupport<'_, F>,
    options: &SandwichOptions<F>,
) -> Result<Vec<SandwichReport<F>>> {
    let mut oracle = OracleSolver::new(mdp, pi, emp, norm, support)?;
    sweep_with(mdp, pi, emp, norm, s, alphas, &mut oracle, options)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn sweep_with<F: Scalar>(
    mdp: &TabularMdp<F>,
    pi: &Policy,
    emp: &EmpiricalDistribution<F>,
    norm: GroundNorm,
    s: usize,
    alphas: &[F],
    oracle: &mut OracleSolver<F>,
    options: &SandwichOptions<F>,
) -> Result<Vec<SandwichReport<F>>> {
    let mut dual = DualSolver::new(mdp, pi, emp, s, norm)?;
    let l_value = match options.l_override {
        Some(l) => l,
        None => lipschitz_bound(mdp, norm),
    };
    let slack = F::lit(CHAIN_SLACK);
    let floor = -mdp.value_bound();
    let mean = dual.empirical_mean();
    alphas
        .iter()
        .map(|&alpha| {
            let d = dual.evaluate(alpha, &options.search)?;
            let upper = oracle.value(s, alpha)?;
            let reg = mean - l_value * alpha;
            let pass = mean >= upper - slack && upper >= d.value - slack && d.value >= reg - slack;
            Ok(SandwichReport {
                state: s,
                alpha,
                empirical_mean: mean,
                dr_lower: d.value,
                dr_upper: upper,
                reg_value: reg,
                l_value,
                lambda_star: d.lambda_star,
                kappa_estimate: (alpha > F::zero()).then(|| (mean - upper) / alpha),
                pass,
                vacuous: reg < floor,
            })
        })
        .collect()
}

/// Sandwich report at state `s` for the aggregate radius of `spec`.
pub fn sandwich_check<F: Scalar>(
    mdp: &TabularMdp<F>,
    pi: &Policy,
    emp: &EmpiricalDistribution<F>,
    spec: &AmbiguitySpec<F>,
    s: usize,
    oracle_grid: OracleSupport<'_, F>,
    options: &SandwichOptions<F>,
) -> Result<SandwichReport<F>> {
    let mut out = sandwich_sweep(mdp, pi, emp, spec.norm(), s, &[spec.scalar_radius()], oracle_grid, options)?;
    Ok(out.remove(0))
}

/// Both sides of the simulation-lemma bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationLemmaReport<F> {
    /// `max_s |v_p^π(s) − v_q^π(s)|`.
    pub lhs: F,
    /// `γ R_max max_s ‖p_s − q_s‖_{∞,1} / (1−γ)²`.
    pub rhs: F,
    pub pass: bool,
}

pub fn simulation_lemma_check<F: Scalar>(
    mdp: &TabularMdp<F>,
    pi: &Policy,
    p: &TransitionModel<F>,
    q: &TransitionModel<F>,
) -> Result<SimulationLemmaReport<F>> {
    let vp = policy_value(mdp, p, pi)?;
    let vq = policy_value(mdp, q, pi)?;
    let lhs = vp.sup_dist(&vq);
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let per_state = (0..ns)
        .map(|s| {
            (0..na)
                .map(|a| p.row(s, a).iter().zip(q.row(s, a)).map(|(x, y)| (*x - *y).abs()).sum::<F>())
                .fold(F::zero(), F::max)
        })
        .fold(F::zero(), F::max);
    let rhs = lipschitz_from_parts(F::one(), mdp.discount(), mdp.r_max())? * per_state;
    Ok(SimulationLemmaReport {
        lhs,
        rhs,
        pass: lhs <= rhs + F::lit(CHAIN_SLACK),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambiguity::build_empirical;

    #[test]
    fn constant_examples() {
        let mdp = TabularMdp::<f64>::new(1, 1, vec![1.0], 0.9, 1.0).unwrap();
        let l = lipschitz_constant(&mdp, GroundNorm::L1Product).unwrap();
        assert!((l.l_value - 90.0).abs() < 1e-9);
        let mdp = TabularMdp::<f64>::new(1, 1, vec![1.0], 0.0, 1.0).unwrap();
        assert_eq!(lipschitz_constant(&mdp, GroundNorm::SupOne).unwrap().l_value, 0.0);
        assert_eq!(lipschitz_from_parts::<f64>(1.0, 0.5, 2.0).unwrap(), 4.0);
        assert!(matches!(lipschitz_from_parts::<f64>(1.0, 1.0, 1.0), Err(Error::Parameter { .. })));
    }

    #[test]
    fn regularized_examples() {
        let l = RegularizationConstant::<f64> { beta: 1.0, l_value: 90.0 };
        let v = regularized_value(&[ValueTable(vec![10.0])], &l, 0.05).unwrap();
        assert!((v[0] - 5.5).abs() < 1e-12);
        let v = regularized_value(&[ValueTable(vec![1.0]), ValueTable(vec![3.0])], &l, 0.0).unwrap();
        assert_eq!(v[0], 2.0);
        assert!(regularized_value::<f64>(&[], &l, 0.1).is_err());
    }

    #[test]
    fn single_state_lemma_is_trivial() {
        let mdp = TabularMdp::<f64>::new(1, 2, vec![0.3, 1.0], 0.9, 1.0).unwrap();
        let p = TransitionModel::uniform(1, 2);
        let r = simulation_lemma_check(&mdp, &Policy(vec![1]), &p, &p).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn sandwich_collapses_at_zero_radius() {
        let mdp = TabularMdp::<f64>::new(2, 1, vec![1.0, -1.0], 0.5, 1.0).unwrap();
        let a = TransitionModel::from_rows(&[vec![vec![0.8, 0.2]], vec![vec![0.4, 0.6]]]).unwrap();
        let b = TransitionModel::from_rows(&[vec![vec![0.3, 0.7]], vec![vec![0.5, 0.5]]]).unwrap();
        let emp = build_empirical(vec![a, b]).unwrap();
        let spec = AmbiguitySpec::uniform(2, 0.0, GroundNorm::L1Product).unwrap();
        let r = sandwich_check(
            &mdp,
            &Policy(vec![0, 0]),
            &emp,
            &spec,
            0,
            OracleSupport::PolicyRowGrid { steps: 10 },
            &SandwichOptions::default(),
        )
        .unwrap();
        assert!(r.pass);
        for x in [r.dr_lower, r.dr_upper, r.reg_value] {
            assert!((x - r.empirical_mean).abs() < 1e-9);
        }
    }
}
