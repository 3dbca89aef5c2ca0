//! Per-episode transition estimates from visit counts or kernel-weighted counts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{TabularMdp, TransitionModel};
use crate::scalar::Scalar;

/// One observed step `(s, a, s')`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub next: usize,
}

impl Transition {
    pub fn new(state: usize, action: usize, next: usize) -> Self {
        Self { state, action, next }
    }
}

/// Ordered transitions of a single episode.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode_id: u64,
    pub transitions: Vec<Transition>,
}

impl EpisodeLog {
    pub fn new(episode_id: u64, transitions: Vec<Transition>) -> Self {
        Self {
            episode_id,
            transitions,
        }
    }

    pub fn from_triples(episode_id: u64, triples: &[(usize, usize, usize)]) -> Self {
        Self::new(
            episode_id,
            triples.iter().map(|&(s, a, n)| Transition::new(s, a, n)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Checks every index against the given spaces.
    pub fn validate(&self, num_states: usize, num_actions: usize) -> Result<()> {
        for (k, t) in self.transitions.iter().enumerate() {
            if t.state >= num_states || t.next >= num_states {
                return Err(Error::dim(format!(
                    "episode {} step {k}: state index {} out of range 0..{num_states}",
                    self.episode_id,
                    t.state.max(t.next)
                )));
            }
            if t.action >= num_actions {
                return Err(Error::dim(format!(
                    "episode {} step {k}: action index {} out of range 0..{num_actions}",
                    self.episode_id, t.action
                )));
            }
        }
        Ok(())
    }
}

/// Visit counts `n(s, a, s')`, stored `[s][a][s']`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTensor {
    num_states: usize,
    num_actions: usize,
    counts: Vec<u64>,
}

impl CountTensor {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            counts: vec![0; num_states * num_actions * num_states],
        }
    }

    /// Tallies a log; indices must be in range.
    pub fn from_log(log: &EpisodeLog, num_states: usize, num_actions: usize) -> Result<Self> {
        log.validate(num_states, num_actions)?;
        let mut c = Self::zeros(num_states, num_actions);
        for t in &log.transitions {
            let k = c.index(t.state, t.action, t.next);
            c.counts[k] += 1;
        }
        Ok(c)
    }

    fn index(&self, s: usize, a: usize, next: usize) -> usize {
        (s * self.num_actions + a) * self.num_states + next
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, s: usize, a: usize, next: usize) -> u64 {
        self.counts[self.index(s, a, next)]
    }

    pub fn row(&self, s: usize, a: usize) -> &[u64] {
        let start = self.index(s, a, 0);
        &self.counts[start..start + self.num_states]
    }

    pub fn row_total(&self, s: usize, a: usize) -> u64 {
        self.row(s, a).iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Elementwise sum.
    pub fn merged(&self, other: &Self) -> Result<Self> {
        if self.num_states != other.num_states || self.num_actions != other.num_actions {
            return Err(Error::dim("count tensors have different shapes"));
        }
        Ok(Self {
            num_states: self.num_states,
            num_actions: self.num_actions,
            counts: self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect(),
        })
    }
}

/// Kernel weights `ψ_a(s, s') ≥ 0`, stored `[a][s][s']`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec<F> {
    num_states: usize,
    num_actions: usize,
    weight: Vec<F>,
}

impl<F: Scalar> KernelSpec<F> {
    pub fn new(num_states: usize, num_actions: usize, weight: Vec<F>) -> Result<Self> {
        if weight.len() != num_actions * num_states * num_states {
            return Err(Error::dim(format!(
                "kernel has {} weights, expected {}",
                weight.len(),
                num_actions * num_states * num_states
            )));
        }
        if let Some(w) = weight.iter().find(|w| !(**w >= F::zero()) || !w.is_finite()) {
            return Err(Error::param("kernel", format!("weights must be nonnegative and finite, got {w}")));
        }
        Ok(Self {
            num_states,
            num_actions,
            weight,
        })
    }

    /// `ψ ≡ 1`.
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            weight: vec![F::one(); num_actions * num_states * num_states],
        }
    }

    pub fn weight(&self, a: usize, s: usize, next: usize) -> F {
        self.weight[(a * self.num_states + s) * self.num_states + next]
    }
}

/// Counts for one episode, with ranges taken from `dims`.
pub fn count_transitions<F: Scalar>(log: &EpisodeLog, dims: &TabularMdp<F>) -> Result<CountTensor> {
    CountTensor::from_log(log, dims.num_states(), dims.num_actions())
}

fn check_fallback<F: Scalar>(counts: &CountTensor, fallback: &TransitionModel<F>) -> Result<()> {
    if counts.num_states != fallback.num_states() || counts.num_actions != fallback.num_actions() {
        return Err(Error::dim("count tensor and fallback model differ in shape"));
    }
    Ok(())
}

/// `p̂(s'|s,a) = n(s,a,s') / Σ n(s,a,·)`; unvisited rows copy `fallback`.
pub fn estimate_tabular<F: Scalar>(
    counts: &CountTensor,
    fallback: &TransitionModel<F>,
) -> Result<TransitionModel<F>> {
    check_fallback(counts, fallback)?;
    let mut out = fallback.clone();
    for s in 0..counts.num_states {
        for a in 0..counts.num_actions {
            let total = counts.row_total(s, a);
            if total == 0 {
                continue;
            }
            let denom = F::lit(total as f64);
            for (dst, &c) in out.row_mut(s, a).iter_mut().zip(counts.row(s, a)) {
                *dst = F::lit(c as f64) / denom;
            }
        }
    }
    Ok(out)
}

/// `p̂(s'|s,a) ∝ ψ_a(s,s') n(s,a,s')`; zero-denominator rows copy `fallback`.
pub fn estimate_kernel<F: Scalar>(
    counts: &CountTensor,
    kernel: &KernelSpec<F>,
    fallback: &TransitionModel<F>,
) -> Result<TransitionModel<F>> {
    check_fallback(counts, fallback)?;
    if kernel.num_states != counts.num_states || kernel.num_actions != counts.num_actions {
        return Err(Error::dim("kernel and count tensor differ in shape"));
    }
    let mut out = fallback.clone();
    let mut weighted = vec![F::zero(); counts.num_states];
    for s in 0..counts.num_states {
        for a in 0..counts.num_actions {
            for (next, (w, &c)) in weighted.iter_mut().zip(counts.row(s, a)).enumerate() {
                *w = kernel.weight(a, s, next) * F::lit(c as f64);
            }
            let denom: F = weighted.iter().copied().sum();
            if !(denom > F::zero()) {
                continue;
            }
            for (dst, w) in out.row_mut(s, a).iter_mut().zip(&weighted) {
                *dst = *w / denom;
            }
        }
    }
    Ok(out)
}

/// `n_s = Σ_{i, a, s'} n_i(s, a, s')`.
pub fn per_state_sample_counts(counts: &[CountTensor]) -> Result<Vec<u64>> {
    let Some(first) = counts.first() else {
        return Ok(Vec::new());
    };
    let mut n = vec![0u64; first.num_states];
    for c in counts {
        if c.num_states != first.num_states || c.num_actions != first.num_actions {
            return Err(Error::dim("count tensors have different shapes"));
        }
        for (s, ns) in n.iter_mut().enumerate() {
            *ns += (0..c.num_actions).map(|a| c.row_total(s, a)).sum::<u64>();
        }
    }
    Ok(n)
}

/// Draws an index from a probability vector.
pub fn sample_index<F: Scalar, R: Rng + ?Sized>(probs: &[F], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.iter().enumerate() {
        let p = p.to_f64_();
        if p > 0.0 {
            last = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Rolls out one episode in `model` from a uniformly random start state,
/// choosing actions uniformly at random.
pub fn simulate_episode<F: Scalar, R: Rng + ?Sized>(
    model: &TransitionModel<F>,
    episode_id: u64,
    len: usize,
    rng: &mut R,
) -> EpisodeLog {
    let mut s = rng.gen_range(0..model.num_states());
    let mut transitions = Vec::with_capacity(len);
    for _ in 0..len {
        let a = rng.gen_range(0..model.num_actions());
        let next = sample_index(model.row(s, a), rng);
        transitions.push(Transition::new(s, a, next));
        s = next;
    }
    EpisodeLog::new(episode_id, transitions)
}
