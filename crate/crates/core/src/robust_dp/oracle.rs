//! Exact DR value over a finite support: the smallest expected `v_p^π(s)`
//! among distributions on the support within Wasserstein distance `α` of the
//! empirical distribution.

use rayon::prelude::*;

use crate::ambiguity::{ground_distance, AmbiguitySpec, EmpiricalDistribution, GroundNorm};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Relation};
use crate::mdp::{value_of_matrix, Policy, TabularMdp, TransitionModel};
use crate::oracles::SimplexGrid;
use crate::scalar::{sup_dist, Scalar};

/// Largest support the oracle accepts.
pub const MAX_SUPPORT: usize = 5_000_000;

/// Candidate models for the discretized ambiguity set.
#[derive(Debug, Clone, Copy)]
pub enum OracleSupport<'a, F> {
    /// Explicit list of models; must contain every empirical atom.
    Models(&'a [TransitionModel<F>]),
    /// Every combination of policy rows drawn from the simplex grid with
    /// spacing `1/steps` together with the atoms' own rows. Non-policy rows
    /// are those of the atom being transported, so they cost nothing.
    PolicyRowGrid { steps: usize },
}

/// Lower envelope of lines `b + λ m` on `λ ≥ 0`.
#[derive(Debug, Clone)]
struct Envelope<F> {
    /// `(slope, intercept)` with slopes decreasing.
    lines: Vec<(F, F)>,
    /// `breaks[k]` is where line `k + 1` takes over from line `k`.
    breaks: Vec<F>,
}

impl<F: Scalar> Envelope<F> {
    fn build(mut lines: Vec<(F, F)>) -> Self {
        lines.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.partial_cmp(&b.1).unwrap()));
        // Keep lines not dominated on λ ≥ 0 by one with smaller slope.
        let mut kept: Vec<(F, F)> = Vec::new();
        for (m, b) in lines {
            if kept.last().is_none_or(|&(_, lb)| b < lb) {
                kept.push((m, b));
            }
        }
        kept.reverse();
        // Slopes now decrease and intercepts increase.
        let mut hull: Vec<(F, F)> = Vec::with_capacity(kept.len());
        let cross = |l1: (F, F), l2: (F, F)| (l2.1 - l1.1) / (l1.0 - l2.0);
        for l in kept {
            while hull.len() >= 2 {
                let n = hull.len();
                if cross(hull[n - 2], l) <= cross(hull[n - 2], hull[n - 1]) {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(l);
        }
        let breaks = hull.windows(2).map(|w| cross(w[0], w[1])).collect();
        Self { lines: hull, breaks }
    }

    fn eval(&self, lambda: F) -> F {
        let k = self.breaks.partition_point(|b| *b <= lambda);
        let (m, b) = self.lines[k];
        b + lambda * m
    }
}

/// `min Σ_ij π_ij v_j` over couplings with `Σ_j π_ij = 1/n` and
/// `Σ_ij π_ij d_ij ≤ α`, through its dual
/// `max_{λ≥0} (1/n) Σ_i min_j (v_j + λ d_ij) − λα`, which is concave and
/// piecewise linear, so its maximum sits at `λ = 0` or at a kink.
fn envelope_dual<F: Scalar>(envelopes: &[Envelope<F>], alpha: F) -> F {
    let n = F::from_usize_(envelopes.len());
    let g = |lambda: F| envelopes.iter().map(|e| e.eval(lambda)).sum::<F>() / n - lambda * alpha;
    let mut best = g(F::zero());
    for e in envelopes {
        for &b in &e.breaks {
            if b > F::zero() {
                best = best.max(g(b));
            }
        }
    }
    best
}

/// Budgeted transport minimum for `values[j]` and the `n × m` row-major
/// distance matrix `dist`.
pub fn budgeted_transport_min<F: Scalar>(values: &[F], dist: &[F], alpha: F) -> Result<F> {
    let m = values.len();
    if m == 0 || !dist.len().is_multiple_of(m) || dist.is_empty() {
        return Err(Error::dim("distance matrix must be n × m with m = values.len() > 0"));
    }
    if !(alpha >= F::zero()) {
        return Err(Error::param("alpha", "must be nonnegative"));
    }
    let n = F::from_usize_(dist.len() / m);
    let cheapest: F = dist.chunks(m).map(|row| row.iter().copied().fold(F::infinity(), F::min)).sum::<F>() / n;
    if alpha < cheapest {
        return Err(Error::Infeasible(format!(
            "budget {alpha} is below the cheapest transport cost {cheapest}"
        )));
    }
    let envelopes: Vec<Envelope<F>> = dist
        .chunks(m)
        .map(|row| Envelope::build(row.iter().zip(values).map(|(d, v)| (*d, *v)).collect()))
        .collect();
    Ok(envelope_dual(&envelopes, alpha))
}

/// Same program as [`budgeted_transport_min`], solved by the simplex method.
pub fn budgeted_transport_min_lp<F: Scalar>(values: &[F], dist: &[F], alpha: F) -> Result<F> {
    let m = values.len();
    if m == 0 || !dist.len().is_multiple_of(m) || dist.is_empty() {
        return Err(Error::dim("distance matrix must be n × m with m = values.len() > 0"));
    }
    let n = dist.len() / m;
    let w = F::one() / F::from_usize_(n);
    let mut cost = Vec::with_capacity(n * m);
    for _ in 0..n {
        cost.extend_from_slice(values);
    }
    let mut lp = LinearProgram::new(cost);
    for i in 0..n {
        let mut row = vec![F::zero(); n * m];
        row[i * m..(i + 1) * m].iter_mut().for_each(|x| *x = F::one());
        lp.constrain(row, Relation::Eq, w);
    }
    lp.constrain(dist.to_vec(), Relation::Le, alpha);
    Ok(lp.solve()?.objective)
}

enum Distances<F> {
    /// `n × m` row-major.
    Explicit(Vec<F>),
    /// Per atom, per policy row, per row option: the row contribution
    /// (absolute for ℓ1-type norms, squared for Frobenius).
    Grid {
        row_dist: Vec<Vec<Vec<F>>>,
        radix: Vec<usize>,
        squared: bool,
    },
}

/// Support values and distances for one `(mdp, π, μ̂_n, norm, support)`;
/// answers [`dr_value_oracle`] queries for every state and radius.
pub struct OracleSolver<F> {
    num_states: usize,
    num_atoms: usize,
    support_len: usize,
    /// `values[j * |S| + s] = v_{p_j}^π(s)`.
    values: Vec<F>,
    distances: Distances<F>,
    envelopes: Vec<Option<Vec<Envelope<F>>>>,
}

impl<F: Scalar> OracleSolver<F> {
    pub fn new(
        mdp: &TabularMdp<F>,
        pi: &Policy,
        emp: &EmpiricalDistribution<F>,
        norm: GroundNorm,
        support: OracleSupport<'_, F>,
    ) -> Result<Self> {
        pi.check(mdp)?;
        for atom in emp.atoms() {
            mdp.check_model(atom)?;
        }
        let ns = mdp.num_states();
        let rewards: Vec<F> = (0..ns).map(|k| mdp.reward(k, pi[k])).collect();
        let (values, distances, support_len) = match support {
            OracleSupport::Models(models) => {
                for (i, atom) in emp.atoms().iter().enumerate() {
                    for m in models {
                        mdp.check_model(m)?;
                    }
                    if !models.iter().any(|m| sup_dist(m.as_slice(), atom.as_slice()) <= F::lit(1e-12)) {
                        return Err(Error::param("support", format!("support grid is missing empirical atom {i}")));
                    }
                }
                if models.len() > MAX_SUPPORT {
                    return Err(Error::Refused(format!("{} support points exceed {MAX_SUPPORT}", models.len())));
                }
                let mut values = Vec::with_capacity(models.len() * ns);
                for m in models {
                    values.extend(value_of_matrix(ns, &m.policy_matrix(pi), &rewards, mdp.discount()));
                }
                let mut dist = Vec::with_capacity(emp.len() * models.len());
                for atom in emp.atoms() {
                    for m in models {
                        dist.push(ground_distance(atom, m, norm)?);
                    }
                }
                (values, Distances::Explicit(dist), models.len())
            }
            OracleSupport::PolicyRowGrid { steps } => {
                let grid = SimplexGrid::with_steps(ns, steps)?;
                let base = grid.points()?;
                let mut options: Vec<Vec<Vec<F>>> = Vec::with_capacity(ns);
                for k in 0..ns {
                    let mut rows = base.clone();
                    for atom in emp.atoms() {
                        let r = atom.row(k, pi[k]);
                        if !rows.iter().any(|x| sup_dist(x, r) == F::zero()) {
                            rows.push(r.to_vec());
                        }
                    }
                    options.push(rows);
                }
                let radix: Vec<usize> = options.iter().map(Vec::len).collect();
                let total = radix.iter().try_fold(1usize, |acc, r| acc.checked_mul(*r));
                let total = match total {
                    Some(t) if t <= MAX_SUPPORT => t,
                    _ => {
                        return Err(Error::Refused(format!(
                            "policy-row grid with {radix:?} options per row exceeds {MAX_SUPPORT} points"
                        )))
                    }
                };
                let squared = matches!(norm, GroundNorm::L2Product);
                let row_dist = emp
                    .atoms()
                    .iter()
                    .map(|atom| {
                        options
                            .iter()
                            .enumerate()
                            .map(|(k, rows)| {
                                let c = atom.row(k, pi[k]);
                                rows.iter()
                                    .map(|r| {
                                        let d = norm.row_distance(r, c);
                                        if squared {
                                            d * d
                                        } else {
                                            d
                                        }
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect();
                let mut values = vec![F::zero(); total * ns];
                let mut mat = vec![F::zero(); ns * ns];
                let mut idx = vec![0usize; ns];
                for j in 0..total {
                    for k in 0..ns {
                        mat[k * ns..(k + 1) * ns].copy_from_slice(&options[k][idx[k]]);
                    }
                    let v = value_of_matrix(ns, &mat, &rewards, mdp.discount());
                    values[j * ns..(j + 1) * ns].copy_from_slice(&v);
                    advance(&mut idx, &radix);
                }
                (
                    values,
                    Distances::Grid {
                        row_dist,
                        radix,
                        squared,
                    },
                    total,
                )
            }
        };
        Ok(Self {
            num_states: ns,
            num_atoms: emp.len(),
            support_len,
            values,
            distances,
            envelopes: vec![None; ns],
        })
    }

    pub fn support_len(&self) -> usize {
        self.support_len
    }

    /// Replaces every support value vector `v_p^π` by `f(v_p^π)`.
    pub(crate) fn map_values(&mut self, f: impl Fn(&[F]) -> Vec<F> + Sync) {
        let ns = self.num_states;
        self.values.par_chunks_mut(ns).for_each(|v| {
            let mapped = f(v);
            v.copy_from_slice(&mapped);
        });
        self.envelopes = vec![None; ns];
    }

    fn envelopes(&mut self, s: usize) -> &[Envelope<F>] {
        if self.envelopes[s].is_none() {
            let ns = self.num_states;
            let m = self.support_len;
            let values = &self.values;
            let envs = match &self.distances {
                Distances::Explicit(dist) => (0..self.num_atoms)
                    .map(|i| Envelope::build((0..m).map(|j| (dist[i * m + j], values[j * ns + s])).collect()))
                    .collect(),
                Distances::Grid {
                    row_dist,
                    radix,
                    squared,
                } => row_dist
                    .iter()
                    .map(|per_row| {
                        let mut idx = vec![0usize; radix.len()];
                        let mut lines = Vec::with_capacity(m);
                        for j in 0..m {
                            let mut d = F::zero();
                            for (k, &r) in idx.iter().enumerate() {
                                d += per_row[k][r];
                            }
                            if *squared {
                                d = d.sqrt();
                            }
                            lines.push((d, values[j * ns + s]));
                            advance(&mut idx, radix);
                        }
                        Envelope::build(lines)
                    })
                    .collect(),
            };
            self.envelopes[s] = Some(envs);
        }
        self.envelopes[s].as_deref().unwrap()
    }

    /// Exact minimum of `E_{p∼ν} v_p^π(s)` over distributions `ν` on the
    /// support with `W_1(ν, μ̂_n) ≤ alpha`.
    pub fn value(&mut self, s: usize, alpha: F) -> Result<F> {
        if s >= self.num_states {
            return Err(Error::dim(format!("state {s} out of range")));
        }
        if !(alpha >= F::zero()) {
            return Err(Error::param("alpha", format!("must be nonnegative, got {alpha}")));
        }
        Ok(envelope_dual(self.envelopes(s), alpha))
    }
}

fn advance(idx: &mut [usize], radix: &[usize]) {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < radix[k] {
            return;
        }
        idx[k] = 0;
    }
}

/// Minimum over the discretized ambiguity set at state `s` with the
/// aggregate radius of `spec`; an upper bound on the DR value.
pub fn dr_value_oracle<F: Scalar>(
    mdp: &TabularMdp<F>,
    pi: &Policy,
    emp: &EmpiricalDistribution<F>,
    spec: &AmbiguitySpec<F>,
    s: usize,
    support: OracleSupport<'_, F>,
) -> Result<F> {
    OracleSolver::new(mdp, pi, emp, spec.norm(), support)?.value(s, spec.scalar_radius())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambiguity::build_empirical;
    use crate::mdp::policy_value;

    #[test]
    fn envelope_matches_simplex() {
        let values = [3.0, 1.0, 2.0, 0.5];
        let dist = [0.0, 0.4, 0.3, 1.0, 0.5, 0.0, 0.2, 0.7];
        for &alpha in &[0.0, 0.05, 0.1, 0.2, 0.4, 1.0] {
            let a = budgeted_transport_min::<f64>(&values, &dist, alpha).unwrap();
            let b = budgeted_transport_min_lp::<f64>(&values, &dist, alpha).unwrap();
            assert!((a - b).abs() < 1e-10, "α={alpha}: {a} vs {b}");
        }
    }

    #[test]
    fn fractional_transport_below_pairwise_distance() {
        // Two atoms at distance d; α < d/n still buys a fraction of the move.
        let values = [1.0, 0.0];
        let d = 1.0;
        let dist = [0.0, d, d, 0.0];
        let alpha = 0.1;
        let v = budgeted_transport_min::<f64>(&values, &dist, alpha).unwrap();
        let expected = 0.5 - alpha * 1.0 / d;
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_radius_and_missing_atoms() {
        let mdp = TabularMdp::<f64>::new(2, 1, vec![1.0, 0.0], 0.5, 1.0).unwrap();
        let pi = Policy(vec![0, 0]);
        let a = TransitionModel::from_rows(&[vec![vec![0.9, 0.1]], vec![vec![0.5, 0.5]]]).unwrap();
        let b = TransitionModel::from_rows(&[vec![vec![0.2, 0.8]], vec![vec![0.5, 0.5]]]).unwrap();
        let emp = build_empirical(vec![a.clone(), b.clone()]).unwrap();
        let spec = AmbiguitySpec::uniform(2, 0.0, GroundNorm::L1Product).unwrap();
        let mean = (policy_value(&mdp, &a, &pi).unwrap()[0] + policy_value(&mdp, &b, &pi).unwrap()[0]) / 2.0;
        let support = [a.clone(), b.clone()];
        let v = dr_value_oracle(&mdp, &pi, &emp, &spec, 0, OracleSupport::Models(&support)).unwrap();
        assert!((v - mean).abs() < 1e-12);
        let g = dr_value_oracle(&mdp, &pi, &emp, &spec, 0, OracleSupport::PolicyRowGrid { steps: 4 }).unwrap();
        assert!((g - mean).abs() < 1e-12);
        assert!(matches!(
            dr_value_oracle(&mdp, &pi, &emp, &spec, 0, OracleSupport::Models(&support[..1])),
            Err(Error::Parameter { .. })
        ));
    }

    #[test]
    fn grid_support_agrees_with_explicit_models() {
        let mdp = TabularMdp::<f64>::new(2, 2, vec![1.0, 0.3, -0.4, 0.0], 0.7, 1.0).unwrap();
        let pi = Policy(vec![1, 0]);
        let a = TransitionModel::from_rows(&[
            vec![vec![0.9, 0.1], vec![0.6, 0.4]],
            vec![vec![0.5, 0.5], vec![0.1, 0.9]],
        ])
        .unwrap();
        let emp = build_empirical(vec![a.clone()]).unwrap();
        let steps = 5;
        let mut models = vec![];
        let rows: Vec<Vec<f64>> = (0..=steps).map(|i| vec![i as f64 / 5.0, 1.0 - i as f64 / 5.0]).collect();
        let mut opts0 = rows.clone();
        opts0.push(a.row(0, 1).to_vec());
        let mut opts1 = rows;
        opts1.push(a.row(1, 0).to_vec());
        for r0 in &opts0 {
            for r1 in &opts1 {
                let mut m = a.clone();
                m.set_row(0, 1, r0).unwrap();
                m.set_row(1, 0, r1).unwrap();
                models.push(m);
            }
        }
        for &alpha in &[0.0, 0.1, 0.3, 1.0] {
            let spec = AmbiguitySpec::uniform(2, alpha, GroundNorm::L1Product).unwrap();
            for s in 0..2 {
                let x = dr_value_oracle(&mdp, &pi, &emp, &spec, s, OracleSupport::Models(&models)).unwrap();
                let y = dr_value_oracle(&mdp, &pi, &emp, &spec, s, OracleSupport::PolicyRowGrid { steps }).unwrap();
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
        }
    }
}
