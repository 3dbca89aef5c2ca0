//! Ground norms on transition models, discrete distributions over models,
//! 1-Wasserstein distances and Wasserstein balls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Relation};
use crate::mdp::TransitionModel;
use crate::scalar::Scalar;

/// Norm used as the transport cost between two transition models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundNorm {
    /// `Σ_{s,a,s'} |p(s,a,s')|`.
    L1Product,
    /// `(Σ_s ‖p_s‖_F²)^{1/2}`, the Frobenius norm of the whole tensor.
    L2Product,
    /// `Σ_s max_a Σ_{s'} |p(s,a,s')|`.
    SupOne,
}

impl GroundNorm {
    pub const ALL: [GroundNorm; 3] = [GroundNorm::L1Product, GroundNorm::L2Product, GroundNorm::SupOne];

    pub fn name(self) -> &'static str {
        match self {
            GroundNorm::L1Product => "l1_product",
            GroundNorm::L2Product => "l2_product",
            GroundNorm::SupOne => "sup_one",
        }
    }

    /// Norm of an arbitrary `[s][a][s']` tensor.
    pub fn evaluate<F: Scalar>(self, tensor: &[F], num_states: usize, num_actions: usize) -> F {
        debug_assert_eq!(tensor.len(), num_states * num_actions * num_states);
        match self {
            GroundNorm::L1Product => tensor.iter().map(|x| x.abs()).sum(),
            GroundNorm::L2Product => tensor.iter().map(|x| *x * *x).sum::<F>().sqrt(),
            GroundNorm::SupOne => sup_one(tensor, num_states, num_actions),
        }
    }

    /// Norm applied to a single row difference, as used by the rowwise
    /// inner problems. `SupOne` restricted to one row is the ℓ1 norm.
    pub fn row_norm<F: Scalar>(self, diff: &[F]) -> F {
        match self {
            GroundNorm::L1Product | GroundNorm::SupOne => diff.iter().map(|x| x.abs()).sum(),
            GroundNorm::L2Product => diff.iter().map(|x| *x * *x).sum::<F>().sqrt(),
        }
    }

    /// Distance between two probability rows under [`Self::row_norm`].
    pub fn row_distance<F: Scalar>(self, a: &[F], b: &[F]) -> F {
        match self {
            GroundNorm::L1Product | GroundNorm::SupOne => {
                a.iter().zip(b).map(|(x, y)| (*x - *y).abs()).sum()
            }
            GroundNorm::L2Product => a.iter().zip(b).map(|(x, y)| (*x - *y) * (*x - *y)).sum::<F>().sqrt(),
        }
    }

    /// Constant `β` with `Σ_s ‖p_s‖_{∞,1} ≤ β ‖p‖`.
    ///
    /// For the Frobenius norm `‖d_{sa}‖_1 ≤ √|S| ‖d_{sa}‖_2` and Cauchy–Schwarz
    /// over states give `β = |S|`, which is attained.
    pub fn beta<F: Scalar>(self, num_states: usize, _num_actions: usize) -> F {
        match self {
            GroundNorm::L1Product | GroundNorm::SupOne => F::one(),
            GroundNorm::L2Product => F::from_usize_(num_states),
        }
    }

    /// Largest distance between two transition models of the given shape.
    pub fn diameter<F: Scalar>(self, num_states: usize, num_actions: usize) -> F {
        let two = F::lit(2.0);
        match self {
            GroundNorm::L1Product => two * F::from_usize_(num_states * num_actions),
            GroundNorm::L2Product => (two * F::from_usize_(num_states * num_actions)).sqrt(),
            GroundNorm::SupOne => two * F::from_usize_(num_states),
        }
    }

    /// Whether per-state transport costs add up (so radii aggregate by sum).
    pub fn is_additive(self) -> bool {
        !matches!(self, GroundNorm::L2Product)
    }
}

impl std::str::FromStr for GroundNorm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "l1" | "l1_product" => Ok(GroundNorm::L1Product),
            "l2" | "l2_product" => Ok(GroundNorm::L2Product),
            "sup_one" | "sup1" | "inf1" => Ok(GroundNorm::SupOne),
            other => Err(Error::param("norm", format!("unknown ground norm `{other}`"))),
        }
    }
}

/// `Σ_s ‖t_s‖_{∞,1} = Σ_s max_a Σ_{s'} |t(s,a,s')|`.
pub fn sup_one<F: Scalar>(tensor: &[F], num_states: usize, num_actions: usize) -> F {
    (0..num_states)
        .map(|s| {
            (0..num_actions)
                .map(|a| {
                    let start = (s * num_actions + a) * num_states;
                    tensor[start..start + num_states].iter().map(|x| x.abs()).sum::<F>()
                })
                .fold(F::zero(), F::max)
        })
        .sum()
}

/// `‖a − b‖` under `norm`.
pub fn ground_distance<F: Scalar>(
    a: &TransitionModel<F>,
    b: &TransitionModel<F>,
    norm: GroundNorm,
) -> Result<F> {
    if !a.same_shape(b) {
        return Err(Error::dim("transition models differ in shape"));
    }
    let diff: Vec<F> = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| *x - *y).collect();
    Ok(norm.evaluate(&diff, a.num_states(), a.num_actions()))
}

/// Finitely supported distribution over transition models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteModelDistribution<F> {
    atoms: Vec<TransitionModel<F>>,
    weights: Vec<F>,
}

impl<F: Scalar> DiscreteModelDistribution<F> {
    pub fn new(atoms: Vec<TransitionModel<F>>, weights: Vec<F>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::param("atoms", "distribution needs at least one atom"));
        }
        if atoms.len() != weights.len() {
            return Err(Error::dim(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.iter().any(|m| !m.same_shape(&atoms[0])) {
            return Err(Error::dim("atoms differ in shape"));
        }
        if weights.iter().any(|w| !(*w >= F::zero())) {
            return Err(Error::param("weights", "weights must be nonnegative"));
        }
        let total: F = weights.iter().copied().sum();
        if (total - F::one()).abs() > F::row_tolerance(weights.len()) {
            return Err(Error::param("weights", format!("weights sum to {total}, not 1")));
        }
        Ok(Self { atoms, weights })
    }

    pub fn dirac(atom: TransitionModel<F>) -> Self {
        Self {
            atoms: vec![atom],
            weights: vec![F::one()],
        }
    }

    pub fn atoms(&self) -> &[TransitionModel<F>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn num_states(&self) -> usize {
        self.atoms[0].num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.atoms[0].num_actions()
    }
}

/// Uniform Dirac mixture `(1/n) Σ δ_{p̂_i}`; duplicated atoms stay distinct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution<F> {
    base: DiscreteModelDistribution<F>,
}

impl<F: Scalar> EmpiricalDistribution<F> {
    pub fn atoms(&self) -> &[TransitionModel<F>] {
        &self.base.atoms
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn as_distribution(&self) -> &DiscreteModelDistribution<F> {
        &self.base
    }

    pub fn num_states(&self) -> usize {
        self.base.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.base.num_actions()
    }
}

/// Uniform mixture over `models`.
pub fn build_empirical<F: Scalar>(models: Vec<TransitionModel<F>>) -> Result<EmpiricalDistribution<F>> {
    if models.is_empty() {
        return Err(Error::param("models", "empirical distribution needs at least one model"));
    }
    let w = F::one() / F::from_usize_(models.len());
    let n = models.len();
    Ok(EmpiricalDistribution {
        base: DiscreteModelDistribution::new(models, vec![w; n])?,
    })
}

/// Per-state radii, the aggregate radius used by trajectory-level duals, and
/// the ground norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguitySpec<F> {
    radius_per_state: Vec<F>,
    scalar_radius: F,
    norm: GroundNorm,
}

impl<F: Scalar> AmbiguitySpec<F> {
    /// Aggregate radius defaults to `Σ_s α_s` for additive norms and to
    /// `(Σ_s α_s²)^{1/2}` for the Frobenius norm.
    pub fn new(radius_per_state: Vec<F>, norm: GroundNorm) -> Result<Self> {
        let scalar = if norm.is_additive() {
            radius_per_state.iter().copied().sum()
        } else {
            radius_per_state.iter().map(|r| *r * *r).sum::<F>().sqrt()
        };
        Self::with_scalar_radius(radius_per_state, scalar, norm)
    }

    pub fn with_scalar_radius(radius_per_state: Vec<F>, scalar_radius: F, norm: GroundNorm) -> Result<Self> {
        if radius_per_state.is_empty() {
            return Err(Error::dim("radius table is empty"));
        }
        if let Some(r) = radius_per_state.iter().find(|r| !(**r >= F::zero())) {
            return Err(Error::param("alpha", format!("radii must be nonnegative, got {r}")));
        }
        if !(scalar_radius >= F::zero()) {
            return Err(Error::param("alpha", format!("radius must be nonnegative, got {scalar_radius}")));
        }
        Ok(Self {
            radius_per_state,
            scalar_radius,
            norm,
        })
    }

    /// Same radius `alpha` everywhere: each state gets `α_s = α` and the
    /// aggregate radius is `α`.
    pub fn uniform(num_states: usize, alpha: F, norm: GroundNorm) -> Result<Self> {
        Self::with_scalar_radius(vec![alpha; num_states], alpha, norm)
    }

    pub fn radius_per_state(&self) -> &[F] {
        &self.radius_per_state
    }

    pub fn radius(&self, s: usize) -> F {
        self.radius_per_state[s]
    }

    pub fn scalar_radius(&self) -> F {
        self.scalar_radius
    }

    pub fn norm(&self) -> GroundNorm {
        self.norm
    }

    pub fn num_states(&self) -> usize {
        self.radius_per_state.len()
    }

    /// Every radius multiplied by `factor`.
    pub fn scaled(&self, factor: F) -> Self {
        Self {
            radius_per_state: self.radius_per_state.iter().map(|r| *r * factor).collect(),
            scalar_radius: self.scalar_radius * factor,
            norm: self.norm,
        }
    }
}

/// Exact discrete optimal transport cost between weight vectors `a` and `b`
/// under the `a.len() × b.len()` row-major `cost` matrix.
pub fn optimal_transport<F: Scalar>(a: &[F], b: &[F], cost: &[F]) -> Result<F> {
    let (n, m) = (a.len(), b.len());
    if cost.len() != n * m {
        return Err(Error::dim("cost matrix shape"));
    }
    if n == 1 || m == 1 {
        // The only coupling is the product measure.
        return Ok((0..n)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| a[i] * b[j] * cost[i * m + j])
            .sum());
    }
    let mut lp = LinearProgram::new(cost.to_vec());
    for (i, ai) in a.iter().enumerate() {
        let mut row = vec![F::zero(); n * m];
        row[i * m..(i + 1) * m].iter_mut().for_each(|x| *x = F::one());
        lp.constrain(row, Relation::Eq, *ai);
    }
    // The last column constraint is implied by the others.
    for (j, bj) in b.iter().enumerate().take(m - 1) {
        let mut row = vec![F::zero(); n * m];
        for i in 0..n {
            row[i * m + j] = F::one();
        }
        lp.constrain(row, Relation::Eq, *bj);
    }
    Ok(lp.solve()?.objective.max(F::zero()))
}

/// `W_1(μ, ν)` with `norm` as ground cost.
pub fn wasserstein_discrete<F: Scalar>(
    mu: &DiscreteModelDistribution<F>,
    nu: &DiscreteModelDistribution<F>,
    norm: GroundNorm,
) -> Result<F> {
    if !mu.atoms[0].same_shape(&nu.atoms[0]) {
        return Err(Error::dim("distributions live on models of different shape"));
    }
    let mut cost = Vec::with_capacity(mu.len() * nu.len());
    for x in &mu.atoms {
        for y in &nu.atoms {
            cost.push(ground_distance(x, y, norm)?);
        }
    }
    optimal_transport(&mu.weights, &nu.weights, &cost)
}

/// Slack added to the radius in membership tests.
pub const BALL_TOLERANCE: f64 = 1e-10;

/// `W_1(μ, center) ≤ α + 1e-10` with the aggregate radius of `spec`.
pub fn in_ball<F: Scalar>(
    mu: &DiscreteModelDistribution<F>,
    spec: &AmbiguitySpec<F>,
    center: &EmpiricalDistribution<F>,
) -> Result<bool> {
    let alpha = spec.scalar_radius();
    if alpha.is_infinite()
        || alpha >= spec.norm().diameter::<F>(center.num_states(), center.num_actions())
    {
        if !mu.atoms[0].same_shape(&center.atoms()[0]) {
            return Err(Error::dim("distributions live on models of different shape"));
        }
        return Ok(true);
    }
    let d = wasserstein_discrete(mu, center.as_distribution(), spec.norm())?;
    Ok(d <= alpha + F::lit(BALL_TOLERANCE))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(r: &[f64]) -> TransitionModel<f64> {
        TransitionModel::from_rows(&[vec![r.to_vec()], vec![r.to_vec()]]).unwrap()
    }

    #[test]
    fn ground_distance_examples() {
        let a = TransitionModel::from_rows(&[vec![vec![1.0]]]).unwrap();
        assert_eq!(ground_distance(&a, &a, GroundNorm::L1Product).unwrap(), 0.0);
        // 1 state cannot have 2 successors; embed the two rows in a 2-state model
        // whose second state is identical in both.
        let x = TransitionModel::from_rows(&[vec![vec![1.0, 0.0]], vec![vec![0.5, 0.5]]]).unwrap();
        let y = TransitionModel::from_rows(&[vec![vec![0.0, 1.0]], vec![vec![0.5, 0.5]]]).unwrap();
        assert_eq!(ground_distance(&x, &y, GroundNorm::L1Product).unwrap(), 2.0);
        assert_eq!(ground_distance(&x, &y, GroundNorm::SupOne).unwrap(), 2.0);
        assert!((ground_distance(&x, &y, GroundNorm::L2Product).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn l2_beta_is_attained() {
        let x = TransitionModel::from_rows(&[
            vec![vec![0.5, 0.0, 0.5, 0.0]],
            vec![vec![0.5, 0.0, 0.5, 0.0]],
            vec![vec![0.5, 0.0, 0.5, 0.0]],
            vec![vec![0.5, 0.0, 0.5, 0.0]],
        ])
        .unwrap();
        let y = TransitionModel::from_rows(&vec![vec![vec![0.0, 0.5, 0.0, 0.5]]; 4]).unwrap();
        let d: Vec<f64> = x.as_slice().iter().zip(y.as_slice()).map(|(a, b)| a - b).collect();
        let lhs = sup_one(&d, 4, 1);
        let rhs = GroundNorm::L2Product.evaluate(&d, 4, 1);
        assert!((lhs / rhs - GroundNorm::L2Product.beta::<f64>(4, 1)).abs() < 1e-12);
    }

    #[test]
    fn transport_examples() {
        let x = rows(&[1.0, 0.0]);
        let y = rows(&[0.0, 1.0]);
        let c = ground_distance(&x, &y, GroundNorm::L1Product).unwrap();
        let mu = DiscreteModelDistribution::new(vec![x.clone(), y.clone()], vec![0.5, 0.5]).unwrap();
        let dx = DiscreteModelDistribution::dirac(x.clone());
        let dy = DiscreteModelDistribution::dirac(y.clone());
        assert_eq!(wasserstein_discrete(&mu, &mu, GroundNorm::L1Product).unwrap(), 0.0);
        assert_eq!(wasserstein_discrete(&dx, &dy, GroundNorm::L1Product).unwrap(), c);
        assert!((wasserstein_discrete(&mu, &dx, GroundNorm::L1Product).unwrap() - c / 2.0).abs() < 1e-12);
        assert!(DiscreteModelDistribution::new(vec![x.clone(), y], vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn ball_membership() {
        let x = rows(&[1.0, 0.0]);
        let y = rows(&[0.0, 1.0]);
        let center = build_empirical(vec![x.clone()]).unwrap();
        let spec = AmbiguitySpec::uniform(2, 0.0, GroundNorm::L1Product).unwrap();
        assert!(in_ball(center.as_distribution(), &spec, &center).unwrap());
        let far = DiscreteModelDistribution::dirac(y);
        let spec = AmbiguitySpec::uniform(2, 3.9, GroundNorm::L1Product).unwrap();
        assert!(!in_ball(&far, &spec, &center).unwrap());
        let spec = AmbiguitySpec::uniform(2, f64::INFINITY, GroundNorm::L1Product).unwrap();
        assert!(in_ball(&far, &spec, &center).unwrap());
    }

    #[test]
    fn empirical_construction() {
        assert!(build_empirical::<f64>(vec![]).is_err());
        let x = rows(&[1.0, 0.0]);
        let e = build_empirical(vec![x.clone(); 4]).unwrap();
        assert_eq!(e.len(), 4);
        assert!(e.as_distribution().weights().iter().all(|w| *w == 0.25));
    }

    #[test]
    fn aggregate_radius_defaults() {
        let s = AmbiguitySpec::<f64>::new(vec![0.1, 0.2], GroundNorm::L1Product).unwrap();
        assert!((s.scalar_radius() - 0.3).abs() < 1e-15);
        let s = AmbiguitySpec::<f64>::new(vec![0.3, 0.4], GroundNorm::L2Product).unwrap();
        assert!((s.scalar_radius() - 0.5).abs() < 1e-15);
        assert!(AmbiguitySpec::new(vec![-0.1], GroundNorm::SupOne).is_err());
    }
}
