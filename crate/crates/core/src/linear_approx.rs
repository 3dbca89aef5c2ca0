//! Linear value approximation `v_p^π(s) ≈ Φ(s)ᵀ w_p` and the approximate
//! DR lower-bound check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{AmbiguitySpec, EmpiricalDistribution, GroundNorm};
use crate::error::{Error, Result};
use crate::linalg::svd;
use crate::mdp::{evaluate_policy, Policy, TabularMdp, TransitionModel};
use crate::regularization::CHAIN_SLACK;
use crate::robust_dp::{OracleSolver, OracleSupport};
use crate::scalar::{dot, Scalar};

/// Relative singular-value threshold below which columns count as dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// `|S| × m` feature matrix with linearly independent columns; row `s` is
/// `Φ(s)ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<F> {
    num_states: usize,
    dim: usize,
    phi: Vec<F>,
    /// `m × |S|` Moore–Penrose pseudo-inverse.
    pinv: Vec<F>,
}

impl<F: Scalar> FeatureMatrix<F> {
    pub fn new(num_states: usize, dim: usize, phi: Vec<F>) -> Result<Self> {
        if dim == 0 || num_states == 0 {
            return Err(Error::dim("feature matrix needs at least one state and one feature"));
        }
        if phi.len() != num_states * dim {
            return Err(Error::dim(format!(
                "feature matrix has {} entries, expected {num_states} × {dim}",
                phi.len()
            )));
        }
        if phi.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("phi", "entries must be finite"));
        }
        if dim > num_states {
            return Err(Error::dim(format!("{dim} features cannot be independent on {num_states} states")));
        }
        let d = svd(num_states, dim, &phi);
        let smax = d.sigma.iter().copied().fold(F::zero(), F::max);
        let smin = d.sigma.iter().copied().fold(F::infinity(), F::min);
        if !(smax > F::zero()) || smin <= F::lit(RANK_TOLERANCE) * smax {
            return Err(Error::dim("feature columns are linearly dependent"));
        }
        let mut pinv = vec![F::zero(); dim * num_states];
        for i in 0..dim {
            for s in 0..num_states {
                pinv[i * num_states + s] = (0..dim)
                    .map(|k| d.v[i * dim + k] * d.u[s * dim + k] / d.sigma[k])
                    .sum();
            }
        }
        Ok(Self {
            num_states,
            dim,
            phi,
            pinv,
        })
    }

    /// `Φ = I`, reducing to the tabular case.
    pub fn identity(num_states: usize) -> Self {
        let mut phi = vec![F::zero(); num_states * num_states];
        for s in 0..num_states {
            phi[s * num_states + s] = F::one();
        }
        Self::new(num_states, num_states, phi).expect("identity has full rank")
    }

    /// Single all-ones column.
    pub fn constant(num_states: usize) -> Self {
        Self::new(num_states, 1, vec![F::one(); num_states]).expect("a nonzero column has full rank")
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, s: usize) -> &[F] {
        &self.phi[s * self.dim..(s + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.phi
    }

    /// Least-squares weights `argmin_w ‖Φw − v‖₂`.
    pub fn weights_for(&self, v: &[F]) -> WeightVector<F> {
        WeightVector(
            (0..self.dim)
                .map(|i| dot(&self.pinv[i * self.num_states..(i + 1) * self.num_states], v))
                .collect(),
        )
    }

    /// `Φw`.
    pub fn apply(&self, w: &WeightVector<F>) -> Vec<F> {
        (0..self.num_states).map(|s| dot(self.row(s), &w.0)).collect()
    }

    /// Orthogonal projection of `v` onto the column span.
    pub fn project(&self, v: &[F]) -> Vec<F> {
        self.apply(&self.weights_for(v))
    }
}

/// Feature weights `w_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector<F>(pub Vec<F>);

impl<F: Scalar> WeightVector<F> {
    /// `Φ(s)ᵀ w`.
    pub fn value_at(&self, phi: &FeatureMatrix<F>, s: usize) -> F {
        dot(phi.row(s), &self.0)
    }
}

/// Least-squares fit of an exact value function.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFit<F> {
    pub weights: WeightVector<F>,
    /// `Φw − v_p^π`.
    pub residual: Vec<F>,
    pub residual_norm: F,
}

/// Projects the exact `v_p^π` onto the feature span.
pub fn fit_weights<F: Scalar>(
    mdp: &TabularMdp<F>,
    p: &TransitionModel<F>,
    pi: &Policy,
    phi: &FeatureMatrix<F>,
    tol: F,
) -> Result<WeightFit<F>> {
    if phi.num_states() != mdp.num_states() {
        return Err(Error::dim(format!(
            "features cover {} states, MDP has {}",
            phi.num_states(),
            mdp.num_states()
        )));
    }
    let v = evaluate_policy(mdp, p, pi, tol)?;
    let weights = phi.weights_for(&v);
    let residual: Vec<F> = phi.apply(&weights).iter().zip(v.iter()).map(|(a, b)| *a - *b).collect();
    let residual_norm = dot(&residual, &residual).sqrt();
    Ok(WeightFit {
        weights,
        residual,
        residual_norm,
    })
}

/// One radius of the approximate DR check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxPoint<F> {
    pub alpha: F,
    /// `inf_ν E_{p∼ν}[Φ(s)ᵀ w_p]` over the discretized ambiguity set.
    pub lhs: F,
    /// `(1/n) Σ_i Φ(s)ᵀ w_{p̂_i}`.
    pub rhs_mean: F,
    /// `(rhs_mean − lhs)/α`, defined for `α > 0`.
    pub eta_hat: Option<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxReport<F> {
    pub state: usize,
    pub points: Vec<ApproxPoint<F>>,
    /// `(lhs_k − lhs_{k+1}) / (α_{k+1} − α_k)` for consecutive radii.
    pub secant_slopes: Vec<F>,
    /// `lhs` non-increasing along the radii, within 1e-9.
    pub monotone: bool,
    /// Monotone, every slope finite and nonnegative, every `η̂` finite and
    /// nonnegative.
    pub pass: bool,
}

/// Approximate DR check at state `s` over the ascending radii `alphas`.
#[allow(clippy::too_many_arguments)]
pub fn approx_dr_sweep<F: Scalar>(
    mdp: &TabularMdp<F>,
    pi: &Policy,
    emp: &EmpiricalDistribution<F>,
    norm: GroundNorm,
    phi: &FeatureMatrix<F>,
    s: usize,
    alphas: &[F],
    support: OracleSupport<'_, F>,
) -> Result<ApproxReport<F>> {
    if phi.num_states() != mdp.num_states() {
        return Err(Error::dim(format!(
            "features cover {} states, MDP has {}",
            phi.num_states(),
            mdp.num_states()
        )));
    }
    mdp.check_state(s)?;
    if alphas.is_empty() {
        return Err(Error::param("alphas", "at least one radius required"));
    }
    if alphas.iter().any(|a| !(*a >= F::zero()) || !a.is_finite()) {
        return Err(Error::param("alphas", "radii must be finite and nonnegative"));
    }
    if alphas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("alphas", "radii must be strictly increasing"));
    }
    let mut oracle = OracleSolver::new(mdp, pi, emp, norm, support)?;
    oracle.map_values(|v| phi.project(v));
    let n = F::from_usize_(emp.len());
    let rhs_mean = emp
        .atoms()
        .par_iter()
        .map(|atom| fit_weights(mdp, atom, pi, phi, F::one()).map(|f| f.weights.value_at(phi, s)))
        .collect::<Result<Vec<F>>>()?
        .into_iter()
        .sum::<F>()
        / n;
    let slack = F::lit(CHAIN_SLACK);
    let mut points = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let lhs = oracle.value(s, alpha)?;
        points.push(ApproxPoint {
            alpha,
            lhs,
            rhs_mean,
            eta_hat: (alpha > F::zero()).then(|| (rhs_mean - lhs) / alpha),
        });
    }
    let secant_slopes: Vec<F> = points
        .windows(2)
        .map(|w| (w[0].lhs - w[1].lhs) / (w[1].alpha - w[0].alpha))
        .collect();
    let monotone = points.windows(2).all(|w| w[1].lhs <= w[0].lhs + slack);
    let finite_nonneg = |x: F| x.is_finite() && x >= -slack;
    let pass = monotone
        && secant_slopes.iter().all(|k| finite_nonneg(*k))
        && points.iter().all(|p| {
            p.eta_hat.is_none_or(finite_nonneg)
                && p.eta_hat.map_or(p.lhs >= p.rhs_mean - slack, |e| p.lhs >= p.rhs_mean - e * p.alpha - slack)
        });
    Ok(ApproxReport {
        state: s,
        points,
        secant_slopes,
        monotone,
        pass,
    })
}

/// [`approx_dr_sweep`] over `{0, α/4, α/2, α}` for the aggregate radius `α`
/// of `spec`.
pub fn approx_dr_check<F: Scalar>(
    mdp: &TabularMdp<F>,
    pi: &Policy,
    emp: &EmpiricalDistribution<F>,
    spec: &AmbiguitySpec<F>,
    phi: &FeatureMatrix<F>,
    s: usize,
    support: OracleSupport<'_, F>,
) -> Result<ApproxReport<F>> {
    let alpha = spec.scalar_radius();
    let alphas = if alpha > F::zero() {
        vec![F::zero(), alpha / F::lit(4.0), alpha / F::lit(2.0), alpha]
    } else {
        vec![F::zero()]
    };
    approx_dr_sweep(mdp, pi, emp, spec.norm(), phi, s, &alphas, support)
}
