//! Finite-sample radius schedule and the Monte Carlo out-of-sample coverage
//! experiment.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{build_empirical, AmbiguitySpec, DiscreteModelDistribution, EmpiricalDistribution, GroundNorm};
use crate::error::{Error, Result};
use crate::estimation::{estimate_tabular, per_state_sample_counts, sample_index, simulate_episode, CountTensor};
use crate::mdp::{policy_value, Policy, TabularMdp, TransitionModel, ValueTable};
use crate::oracles::enumerate_policies;
use crate::robust_dp::{dr_policy_evaluation, dr_policy_iteration};
use crate::scalar::Scalar;

/// Slack on the coverage event `true_performance ≥ certificate`.
pub const COVERAGE_SLACK: f64 = 1e-9;

/// Reading of the coverage event recorded in every report.
pub const EVENT_READING: &str =
    "policy trained on the sampled episodes, then its certificate compared with its exact mixture performance";

/// `α(n) = c0 ((1/(n c2)) ln(c1/ε))^{1/max(m,2)}` for `n ≥ C = ln(c1/ε)/c2`,
/// and `c0` below the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusSchedule<F> {
    c0: F,
    c1: F,
    c2: F,
    epsilon: F,
    m: usize,
    threshold: F,
}

impl<F: Scalar> RadiusSchedule<F> {
    pub fn new(c0: F, c1: F, c2: F, epsilon: F, m: usize) -> Result<Self> {
        for (name, c) in [("c0", c0), ("c1", c1), ("c2", c2)] {
            if !(c > F::zero() && c.is_finite()) {
                return Err(Error::param(name, format!("must be positive and finite, got {c}")));
            }
        }
        if !(epsilon > F::zero() && epsilon < F::one()) {
            return Err(Error::param("epsilon", format!("must lie in (0, 1), got {epsilon}")));
        }
        if m == 2 {
            return Err(Error::Unsupported("m = 2 is excluded from the radius schedule".into()));
        }
        if m == 0 {
            return Err(Error::param("m", "must be positive"));
        }
        if !(c1 > epsilon) {
            return Err(Error::param("c1", format!("must exceed epsilon = {epsilon}, got {c1}")));
        }
        let threshold = (c1.ln() - epsilon.ln()) / c2;
        Ok(Self {
            c0,
            c1,
            c2,
            epsilon,
            m,
            threshold,
        })
    }

    /// `c0 = 2`, `c1 = 2`, `c2 = 1/2`.
    pub fn with_defaults(epsilon: F, m: usize) -> Result<Self> {
        Self::new(F::lit(2.0), F::lit(2.0), F::lit(0.5), epsilon, m)
    }

    pub fn c0(&self) -> F {
        self.c0
    }

    pub fn c1(&self) -> F {
        self.c1
    }

    pub fn c2(&self) -> F {
        self.c2
    }

    pub fn epsilon(&self) -> F {
        self.epsilon
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `C = ln(c1/ε)/c2`.
    pub fn threshold(&self) -> F {
        self.threshold
    }

    /// Radius for a real-valued sample count.
    pub fn radius_at(&self, n: F) -> Result<F> {
        if !(n >= F::zero()) {
            return Err(Error::param("n_s", format!("must be nonnegative, got {n}")));
        }
        if n < self.threshold || n == F::zero() {
            return Ok(self.c0);
        }
        let exponent = F::one() / F::from_usize_(self.m.max(2));
        Ok(self.c0 * (self.threshold / n).powf(exponent))
    }

    pub fn radius(&self, n: u64) -> F {
        self.radius_at(F::lit(n as f64)).expect("a count is nonnegative")
    }
}

/// How the per-state radii of a trial are set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RadiusRule<F> {
    /// `scale · α(n_s)`.
    Schedule { scale: F },
    /// The same radius at every state.
    Fixed(F),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OosConfig<F> {
    pub n_episodes: usize,
    pub episode_len: usize,
    pub trials: usize,
    pub seed: u64,
    pub norm: GroundNorm,
    pub radius_rule: RadiusRule<F>,
    /// Fixed-point tolerance for DR policy evaluation.
    pub tol: F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OosTrialResult<F> {
    pub trial_id: usize,
    pub policy: Policy,
    pub sample_counts: Vec<u64>,
    pub radii: Vec<F>,
    pub certificate: ValueTable<F>,
    pub true_performance: ValueTable<F>,
    /// `min_s (true_performance(s) − certificate(s)) ≥ −1e-9`.
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport<F> {
    pub trials: Vec<OosTrialResult<F>>,
    pub covered: usize,
    pub coverage: f64,
    /// Wilson score 95% interval for the coverage probability.
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub target: f64,
    pub event_reading: String,
}

/// Wilson score interval at `z = 1.96` (95%).
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// `Σ_j w_j v_{p_j}^π`.
pub fn mixture_value<F: Scalar>(
    mdp: &TabularMdp<F>,
    mu: &DiscreteModelDistribution<F>,
    pi: &Policy,
) -> Result<ValueTable<F>> {
    let mut out = vec![F::zero(); mdp.num_states()];
    for (atom, w) in mu.atoms().iter().zip(mu.weights()) {
        let v = policy_value(mdp, atom, pi)?;
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += *w * *x;
        }
    }
    Ok(ValueTable(out))
}

/// Per-trial generator: stream `trial_id` of the ChaCha generator seeded by
/// `seed`.
pub fn trial_rng(seed: u64, trial_id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_id as u64);
    rng
}

/// Samples `n_episodes` episodes, one generating model per episode, and
/// returns the per-episode estimates with the pooled per-state counts.
pub fn sample_empirical<F: Scalar>(
    true_mu: &DiscreteModelDistribution<F>,
    n_episodes: usize,
    episode_len: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(EmpiricalDistribution<F>, Vec<u64>)> {
    let (ns, na) = (true_mu.num_states(), true_mu.num_actions());
    let fallback = TransitionModel::uniform(ns, na);
    let mut models = Vec::with_capacity(n_episodes);
    let mut counts = Vec::with_capacity(n_episodes);
    for i in 0..n_episodes {
        let j = sample_index(true_mu.weights(), rng);
        let log = simulate_episode(&true_mu.atoms()[j], i as u64, episode_len, rng);
        let c = CountTensor::from_log(&log, ns, na)?;
        models.push(estimate_tabular(&c, &fallback)?);
        counts.push(c);
    }
    Ok((build_empirical(models)?, per_state_sample_counts(&counts)?))
}

fn run_trial<F: Scalar>(
    true_mu: &DiscreteModelDistribution<F>,
    mdp: &TabularMdp<F>,
    schedule: &RadiusSchedule<F>,
    config: &OosConfig<F>,
    trial_id: usize,
) -> Result<OosTrialResult<F>> {
    let mut rng = trial_rng(config.seed, trial_id);
    let (emp, sample_counts) = sample_empirical(true_mu, config.n_episodes, config.episode_len, &mut rng)?;
    let radii: Vec<F> = match config.radius_rule {
        RadiusRule::Schedule { scale } => sample_counts.iter().map(|n| scale * schedule.radius(*n)).collect(),
        RadiusRule::Fixed(r) => vec![r; mdp.num_states()],
    };
    let spec = AmbiguitySpec::new(radii.clone(), config.norm)?;
    let trained = dr_policy_iteration(mdp, &emp, &spec, config.tol)?;
    let true_performance = mixture_value(mdp, true_mu, &trained.policy)?;
    let gap = true_performance
        .iter()
        .zip(trained.value.iter())
        .map(|(t, c)| *t - *c)
        .fold(F::infinity(), F::min);
    Ok(OosTrialResult {
        trial_id,
        policy: trained.policy,
        sample_counts,
        radii,
        certificate: trained.value,
        true_performance,
        covered: gap >= -F::lit(COVERAGE_SLACK),
    })
}

/// Coverage of the DR certificate over independent seeded trials.
pub fn oos_experiment<F: Scalar>(
    true_mu: &DiscreteModelDistribution<F>,
    mdp: &TabularMdp<F>,
    schedule: &RadiusSchedule<F>,
    config: &OosConfig<F>,
) -> Result<CoverageReport<F>> {
    if config.trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    if config.n_episodes == 0 {
        return Err(Error::param("n_episodes", "must be at least 1"));
    }
    if !(config.tol > F::zero()) {
        return Err(Error::param("tol", "must be positive"));
    }
    match config.radius_rule {
        RadiusRule::Schedule { scale } if !(scale >= F::zero() && scale.is_finite()) => {
            return Err(Error::param("radius_scale", "must be finite and nonnegative"))
        }
        RadiusRule::Fixed(r) if !(r >= F::zero()) => {
            return Err(Error::param("radius", "must be nonnegative"))
        }
        _ => {}
    }
    if schedule.m() != mdp.num_states() * mdp.num_actions() {
        return Err(Error::param(
            "m",
            format!(
                "schedule dimension {} differs from |S||A| = {}",
                schedule.m(),
                mdp.num_states() * mdp.num_actions()
            ),
        ));
    }
    for atom in true_mu.atoms() {
        mdp.check_model(atom)?;
    }
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(true_mu, mdp, schedule, config, t))
        .collect::<Result<Vec<_>>>()?;
    let covered = trials.iter().filter(|t| t.covered).count();
    let (wilson_low, wilson_high) = wilson_interval(covered, config.trials);
    Ok(CoverageReport {
        trials,
        covered,
        coverage: covered as f64 / config.trials as f64,
        wilson_low,
        wilson_high,
        target: 1.0 - schedule.epsilon().to_f64_(),
        event_reading: EVENT_READING.to_string(),
    })
}

/// Policy iteration checked against every deterministic policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCertificate<F> {
    pub policy: Policy,
    pub value: ValueTable<F>,
    /// `max_π v_π(s)` over all enumerated policies.
    pub enumerated_best: ValueTable<F>,
    /// `value(s) ≥ enumerated_best(s) − tolerance` at every state.
    pub pass: bool,
}

/// Runs DR policy iteration and compares it with exhaustive enumeration.
pub fn certify_policy_iteration<F: Scalar>(
    mdp: &TabularMdp<F>,
    emp: &EmpiricalDistribution<F>,
    spec: &AmbiguitySpec<F>,
    tol: F,
) -> Result<PolicyCertificate<F>> {
    let policies = enumerate_policies(mdp)?;
    let trained = dr_policy_iteration(mdp, emp, spec, tol)?;
    let values = policies
        .par_iter()
        .map(|pi| dr_policy_evaluation(mdp, pi, emp, spec, tol))
        .collect::<Result<Vec<_>>>()?;
    let best: Vec<F> = (0..mdp.num_states())
        .map(|s| values.iter().map(|v| v[s]).fold(F::neg_infinity(), F::max))
        .collect();
    let allowance = tol * F::lit(4.0) + F::lit(COVERAGE_SLACK);
    let pass = trained.value.iter().zip(&best).all(|(v, b)| *v >= *b - allowance);
    Ok(PolicyCertificate {
        policy: trained.policy,
        value: trained.value,
        enumerated_best: ValueTable(best),
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_examples() {
        let s = RadiusSchedule::new(1.0, std::f64::consts::E, 1.0, (-3.0f64).exp(), 4).unwrap();
        assert_eq!(s.threshold(), 4.0);
        assert_eq!(s.radius(64), 0.5);
        assert_eq!(s.radius(0), 1.0);
        assert_eq!(s.radius_at(s.threshold()).unwrap(), 1.0);
    }

    #[test]
    fn schedule_errors() {
        assert!(matches!(RadiusSchedule::<f64>::with_defaults(0.1, 2), Err(Error::Unsupported(_))));
        assert!(matches!(RadiusSchedule::<f64>::with_defaults(1.0, 4), Err(Error::Parameter { .. })));
        assert!(matches!(RadiusSchedule::<f64>::with_defaults(0.0, 4), Err(Error::Parameter { .. })));
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(450, 500);
        assert!(lo < 0.9 && hi > 0.9);
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
        let (lo, hi) = wilson_interval(10, 10);
        assert!(lo > 0.6 && hi > 0.999);
    }

    #[test]
    fn trial_streams_are_reproducible() {
        use rand::Rng;
        let a: u64 = trial_rng(7, 3).gen();
        let b: u64 = trial_rng(7, 3).gen();
        let c: u64 = trial_rng(7, 4).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
