//! Per-state Wasserstein-robust Bellman operators around a Dirac-mixture
//! center, with policy evaluation and policy iteration on top.

use super::inner::{argmin_first, inner_min_linear, l1_penalized_value};
use crate::ambiguity::{AmbiguitySpec, EmpiricalDistribution, GroundNorm};
use crate::error::{Error, Result};
use crate::mdp::{fixed_point, Policy, TabularMdp, ValueTable};
use crate::scalar::Scalar;

fn check_inputs<F: Scalar>(
    mdp: &TabularMdp<F>,
    emp: &EmpiricalDistribution<F>,
    spec: &AmbiguitySpec<F>,
) -> Result<()> {
    for atom in emp.atoms() {
        mdp.check_model(atom)?;
    }
    if spec.num_states() != mdp.num_states() {
        return Err(Error::dim(format!(
            "{} radii for {} states",
            spec.num_states(),
            mdp.num_states()
        )));
    }
    Ok(())
}

fn check_grid<F: Scalar>(grid: &[F]) -> Result<()> {
    if grid.iter().any(|l| !(*l >= F::zero()) || !l.is_finite()) {
        return Err(Error::param("lambda_grid", "multipliers must be finite and nonnegative"));
    }
    Ok(())
}

/// `sup_{λ ≥ 0} (1/n) Σ_i min_q [⟨q, v⟩ + λ‖q − p̂_i(s,a)‖] − λα`.
///
/// For ℓ1-type norms the objective is concave piecewise linear in λ with
/// kinks at `(v_j − min v)/2`, so evaluating those kinks (plus `λ = 0` and the
/// caller's grid) is exact. The Frobenius norm uses golden-section search.
pub fn dr_row_value<F: Scalar>(
    v: &[F],
    emp: &EmpiricalDistribution<F>,
    s: usize,
    a: usize,
    alpha: F,
    norm: GroundNorm,
    lambda_grid: &[F],
) -> Result<F> {
    let n = F::from_usize_(emp.len());
    let rows: Vec<&[F]> = emp.atoms().iter().map(|m| m.row(s, a)).collect();
    let mean_at = |lambda: F| -> Result<F> {
        let mut acc = F::zero();
        for row in &rows {
            acc += match norm {
                GroundNorm::L1Product | GroundNorm::SupOne => l1_penalized_value(v, row, lambda),
                GroundNorm::L2Product => inner_min_linear(v, row, lambda, norm)?.1,
            };
        }
        Ok(acc / n)
    };
    if alpha == F::zero() {
        // The objective is non-decreasing in λ; its limit is the mean backup.
        let mut acc = F::zero();
        for row in &rows {
            acc += crate::scalar::dot(row, v);
        }
        return Ok(acc / n);
    }
    let objective = |lambda: F| -> Result<F> { Ok(mean_at(lambda)? - lambda * alpha) };
    let mut best = objective(F::zero())?;
    for &l in lambda_grid {
        best = best.max(objective(l)?);
    }
    let vmin = v[argmin_first(v)];
    match norm {
        GroundNorm::L1Product | GroundNorm::SupOne => {
            for &x in v {
                let kink = (x - vmin) / F::lit(2.0);
                if kink > F::zero() {
                    best = best.max(objective(kink)?);
                }
            }
        }
        GroundNorm::L2Product => {
            let mid = v.iter().fold(F::zero(), |m, x| m.max(*x)) / F::lit(2.0) + vmin / F::lit(2.0);
            let upper = v.iter().map(|x| (*x - mid) * (*x - mid)).sum::<F>().sqrt() + F::one();
            best = best.max(golden_max(&objective, F::zero(), upper)?);
        }
    }
    Ok(best)
}

/// Maximum of a concave function on `[lo, hi]` by golden-section search,
/// including both endpoints.
pub(crate) fn golden_max<F: Scalar>(f: &impl Fn(F) -> Result<F>, lo: F, hi: F) -> Result<F> {
    let ratio = F::lit(0.618_033_988_749_894_8);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut best = f(lo)?.max(f(hi)?).max(f1).max(f2);
    for _ in 0..200 {
        if b - a <= F::epsilon() * F::lit(8.0) * hi.max(F::one()) {
            break;
        }
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = f(x1)?;
            best = best.max(f1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = f(x2)?;
            best = best.max(f2);
        }
    }
    Ok(best)
}

fn dr_q<F: Scalar>(
    mdp: &TabularMdp<F>,
    emp: &EmpiricalDistribution<F>,
    spec: &AmbiguitySpec<F>,
    v: &[F],
    s: usize,
    a: usize,
    lambda_grid: &[F],
) -> Result<F> {
    let inner = dr_row_value(v, emp, s, a, spec.radius(s), spec.norm(), lambda_grid)?;
    Ok(mdp.reward(s, a) + mdp.discount() * inner)
}

/// DR backup for policy `pi` with per-state radii `α_s`.
pub fn dr_bellman_apply<F: Scalar>(
    mdp: &TabularMdp<F>,
    pi: &Policy,
    emp: &EmpiricalDistribution<F>,
    spec: &AmbiguitySpec<F>,
    v: &ValueTable<F>,
    lambda_grid: &[F],
) -> Result<ValueTable<F>> {
    check_inputs(mdp, emp, spec)?;
    check_grid(lambda_grid)?;
    pi.check(mdp)?;
    mdp.check_values(v)?;
    apply_unchecked(mdp, pi, emp, spec, v, lambda_grid)
}

fn apply_unchecked<F: Scalar>(
    mdp: &TabularMdp<F>,
    pi: &Policy,
    emp: &EmpiricalDistribution<F>,
    spec: &AmbiguitySpec<F>,
    v: &ValueTable<F>,
    lambda_grid: &[F],
) -> Result<ValueTable<F>> {
    (0..mdp.num_states())
        .map(|s| dr_q(mdp, emp, spec, v, s, pi[s], lambda_grid))
        .collect::<Result<Vec<_>>>()
        .map(ValueTable)
}

/// Fixed point of [`dr_bellman_apply`] within `tol`.
pub fn dr_policy_evaluation<F: Scalar>(
    mdp: &TabularMdp<F>,
    pi: &Policy,
    emp: &EmpiricalDistribution<F>,
    spec: &AmbiguitySpec<F>,
    tol: F,
) -> Result<ValueTable<F>> {
    if !(tol > F::zero()) {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }
    check_inputs(mdp, emp, spec)?;
    pi.check(mdp)?;
    fixed_point(mdp.discount(), tol, ValueTable::zeros(mdp.num_states()), |v| {
        apply_unchecked(mdp, pi, emp, spec, v, &[])
    })
}

/// `max_a` of the DR backup.
pub fn dr_optimal_apply<F: Scalar>(
    mdp: &TabularMdp<F>,
    emp: &EmpiricalDistribution<F>,
    spec: &AmbiguitySpec<F>,
    v: &ValueTable<F>,
) -> Result<ValueTable<F>> {
    check_inputs(mdp, emp, spec)?;
    mdp.check_values(v)?;
    let mut out = Vec::with_capacity(mdp.num_states());
    for s in 0..mdp.num_states() {
        let mut best = F::neg_infinity();
        for a in 0..mdp.num_actions() {
            best = best.max(dr_q(mdp, emp, spec, v, s, a, &[])?);
        }
        out.push(best);
    }
    Ok(ValueTable(out))
}

/// Greedy policy w.r.t. the DR backup. The current action is kept unless
/// another one improves on it by more than `tie_tol`; otherwise the lowest
/// maximizing index wins.
fn dr_greedy<F: Scalar>(
    mdp: &TabularMdp<F>,
    emp: &EmpiricalDistribution<F>,
    spec: &AmbiguitySpec<F>,
    v: &ValueTable<F>,
    current: &Policy,
    tie_tol: F,
) -> Result<Policy> {
    let mut next = Vec::with_capacity(mdp.num_states());
    for s in 0..mdp.num_states() {
        let qs = (0..mdp.num_actions())
            .map(|a| dr_q(mdp, emp, spec, v, s, a, &[]))
            .collect::<Result<Vec<_>>>()?;
        let best = qs.iter().copied().fold(F::neg_infinity(), F::max);
        if qs[current[s]] >= best - tie_tol {
            next.push(current[s]);
        } else {
            next.push(qs.iter().position(|q| *q >= best - tie_tol).unwrap());
        }
    }
    Ok(Policy(next))
}

/// Result of DR policy iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DrPolicyIteration<F> {
    pub policy: Policy,
    pub value: ValueTable<F>,
    pub iterations: usize,
}

/// Policy iteration against [`dr_policy_evaluation`], starting from the
/// all-zeros policy.
pub fn dr_policy_iteration<F: Scalar>(
    mdp: &TabularMdp<F>,
    emp: &EmpiricalDistribution<F>,
    spec: &AmbiguitySpec<F>,
    tol: F,
) -> Result<DrPolicyIteration<F>> {
    check_inputs(mdp, emp, spec)?;
    let mut pi = Policy::constant(mdp.num_states(), 0);
    let tie_tol = tol * F::lit(4.0) + F::lit(1e-12).max(F::epsilon() * F::lit(64.0));
    let cap = 100 + mdp.num_states() * mdp.num_actions() * 10;
    for it in 1..=cap {
        let v = dr_policy_evaluation(mdp, &pi, emp, spec, tol)?;
        let next = dr_greedy(mdp, emp, spec, &v, &pi, tie_tol)?;
        if next == pi {
            return Ok(DrPolicyIteration {
                policy: pi,
                value: v,
                iterations: it,
            });
        }
        pi = next;
    }
    let value = dr_policy_evaluation(mdp, &pi, emp, spec, tol)?;
    Ok(DrPolicyIteration {
        policy: pi,
        value,
        iterations: cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambiguity::build_empirical;
    use crate::mdp::{evaluate_policy, TransitionModel};

    fn setup() -> (TabularMdp<f64>, EmpiricalDistribution<f64>) {
        let mdp = TabularMdp::new(2, 2, vec![0.0, 0.2, 1.0, 0.4], 0.9, 1.0).unwrap();
        let a = TransitionModel::from_rows(&[
            vec![vec![0.7, 0.3], vec![0.1, 0.9]],
            vec![vec![0.5, 0.5], vec![0.3, 0.7]],
        ])
        .unwrap();
        let b = TransitionModel::from_rows(&[
            vec![vec![0.2, 0.8], vec![0.6, 0.4]],
            vec![vec![0.9, 0.1], vec![0.4, 0.6]],
        ])
        .unwrap();
        (mdp, build_empirical(vec![a, b]).unwrap())
    }

    #[test]
    fn zero_radius_is_mean_backup() {
        let (mdp, emp) = setup();
        let spec = AmbiguitySpec::uniform(2, 0.0, GroundNorm::L1Product).unwrap();
        let pi = Policy(vec![0, 1]);
        let v = ValueTable(vec![2.0, 5.0]);
        let out = dr_bellman_apply(&mdp, &pi, &emp, &spec, &v, &[]).unwrap();
        for s in 0..2 {
            let mean: f64 = emp
                .atoms()
                .iter()
                .map(|p| crate::mdp::q_value(&mdp, p, &v, s, pi[s]))
                .sum::<f64>()
                / 2.0;
            assert!((out[s] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_values_are_invariant() {
        let (mdp, emp) = setup();
        let spec = AmbiguitySpec::uniform(2, 0.7, GroundNorm::L1Product).unwrap();
        let pi = Policy(vec![1, 0]);
        let out = dr_bellman_apply(&mdp, &pi, &emp, &spec, &ValueTable(vec![3.0, 3.0]), &[0.5]).unwrap();
        for s in 0..2 {
            assert!((out[s] - (mdp.reward(s, pi[s]) + 0.9 * 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_atom_zero_radius_is_classical_evaluation() {
        let (mdp, emp) = setup();
        let single = build_empirical(vec![emp.atoms()[0].clone()]).unwrap();
        let spec = AmbiguitySpec::uniform(2, 0.0, GroundNorm::L1Product).unwrap();
        let pi = Policy(vec![0, 1]);
        let tol = 1e-9;
        let dr = dr_policy_evaluation(&mdp, &pi, &single, &spec, tol).unwrap();
        let classical = evaluate_policy(&mdp, &single.atoms()[0], &pi, tol).unwrap();
        assert!(dr.sup_dist(&classical) <= 2.0 * tol);
    }

    #[test]
    fn policy_iteration_terminates() {
        let (mdp, emp) = setup();
        let spec = AmbiguitySpec::uniform(2, 0.1, GroundNorm::L1Product).unwrap();
        let res = dr_policy_iteration(&mdp, &emp, &spec, 1e-10).unwrap();
        let opt = dr_optimal_apply(&mdp, &emp, &spec, &res.value).unwrap();
        assert!(opt.sup_dist(&res.value) < 1e-8);
    }
}
