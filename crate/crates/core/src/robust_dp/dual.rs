//! Lagrangian dual of the trajectory-level Wasserstein-robust value:
//! `sup_{λ≥0} (1/n) Σ_i inf_p [v_p^π(s) + λ‖p − p̂_i‖] − λα`.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::inner::project_simplex;
use crate::ambiguity::{AmbiguitySpec, EmpiricalDistribution, GroundNorm};
use crate::error::{Error, Result};
use crate::linalg;
use crate::mdp::{value_of_matrix, Policy, TabularMdp, TransitionModel};
use crate::regularization::lipschitz_bound;
use crate::scalar::Scalar;

/// How the multiplier λ is searched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LambdaSearch<F> {
    /// Only the listed multipliers (nonempty, ascending, nonnegative).
    Grid(Vec<F>),
    /// Golden-section search on `[0, upper]` (default upper bound: the
    /// Lipschitz constant `βγR_max/(1−γ)²`), plus the listed extra points.
    Golden { upper: Option<F>, extra: Vec<F> },
}

impl<F> Default for LambdaSearch<F> {
    fn default() -> Self {
        LambdaSearch::Golden {
            upper: None,
            extra: Vec::new(),
        }
    }
}

/// Best dual objective found and the per-atom inner infima at `lambda_star`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualEvaluation<F> {
    pub lambda_star: F,
    pub value: F,
    pub inner_values: Vec<F>,
}

/// Policy-restricted view of an atom: `|S| × |S|` matrix of the rows chosen by π.
fn policy_rows<F: Scalar>(model: &TransitionModel<F>, pi: &Policy) -> Vec<F> {
    model.policy_matrix(pi)
}

/// Inner problem `inf_P v_P(s) + λ d(P, C)` over policy-row matrices `P`,
/// where only the rows chosen by the policy can influence `v^π`.
struct InnerProblem<'a, F> {
    n: usize,
    rewards: &'a [F],
    discount: F,
    state: usize,
    norm: GroundNorm,
}

impl<F: Scalar> InnerProblem<'_, F> {
    fn row(&self, k: usize) -> std::ops::Range<usize> {
        k * self.n..(k + 1) * self.n
    }

    fn distance(&self, p: &[F], c: &[F]) -> F {
        match self.norm {
            GroundNorm::L1Product | GroundNorm::SupOne => p.iter().zip(c).map(|(a, b)| (*a - *b).abs()).sum(),
            GroundNorm::L2Product => p.iter().zip(c).map(|(a, b)| (*a - *b) * (*a - *b)).sum::<F>().sqrt(),
        }
    }

    fn value(&self, p: &[F]) -> F {
        value_of_matrix(self.n, p, self.rewards, self.discount)[self.state]
    }

    fn objective(&self, p: &[F], c: &[F], lambda: F) -> F {
        let pen = if lambda > F::zero() { lambda * self.distance(p, c) } else { F::zero() };
        self.value(p) + pen
    }

    fn stop_tol(&self) -> F {
        F::lit(1e-10).max(F::epsilon() * F::lit(1e4))
    }

    /// Minimizes from each start and returns the best objective and matrix.
    fn minimize(&self, c: &[F], lambda: F, starts: &[Vec<F>]) -> (F, Vec<F>) {
        let mut best = (self.objective(c, c, lambda), c.to_vec());
        for start in starts {
            let cand = match self.norm {
                GroundNorm::L1Product | GroundNorm::SupOne => self.coordinate_descent(c, lambda, start.clone()),
                GroundNorm::L2Product => self.projected_gradient(c, lambda, start.clone()),
            };
            if cand.0 < best.0 {
                best = cand;
            }
        }
        best
    }

    fn coordinate_descent(&self, c: &[F], lambda: F, mut p: Vec<F>) -> (F, Vec<F>) {
        let mut obj = self.objective(&p, c, lambda);
        for _ in 0..100 {
            let before = obj;
            for k in 0..self.n {
                if let Some(row) = self.best_row(&p, c, k, lambda) {
                    let mut trial = p.clone();
                    trial[self.row(k)].copy_from_slice(&row);
                    let t = self.objective(&trial, c, lambda);
                    if t < obj {
                        p = trial;
                        obj = t;
                    }
                }
            }
            if before - obj < self.stop_tol() {
                break;
            }
        }
        (obj, p)
    }

    /// Exact minimizer of the objective over row `k` with the other rows fixed
    /// (ℓ1 distance).
    ///
    /// With `M = (I − γP_b)⁻¹` for the matrix `P_b` whose row `k` is the center
    /// row `c`, moving row `k` by `d` gives
    /// `v(s) = v_b(s) + γ M_sk ⟨d, v_b⟩ / (1 − γ⟨d, M_{·k}⟩)`. Sublevel sets of
    /// `v(s)` in `d` are half-spaces with normal `v_b + θ M_{·k}`, and the
    /// ℓ1-cheapest point of such a half-space moves mass to one target from a
    /// prefix of the successors sorted by that normal. Enumerating every order
    /// that some `θ` induces, every prefix, and the exact one-dimensional
    /// optimum of the partially drained source covers the minimizer.
    fn best_row(&self, p: &[F], c: &[F], k: usize, lambda: F) -> Option<Vec<F>> {
        let n = self.n;
        let rk = self.row(k);
        let center = &c[rk.clone()];
        let mut base = p.to_vec();
        base[rk.clone()].copy_from_slice(center);
        let mut a = vec![F::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = -self.discount * base[i * n + j];
            }
            a[i * n + i] += F::one();
        }
        let m = linalg::inverse(n, &a)?;
        let vb: Vec<F> = (0..n)
            .map(|i| (0..n).map(|j| m[i * n + j] * self.rewards[j]).sum())
            .collect();
        let mcol: Vec<F> = (0..n).map(|i| m[i * n + k]).collect();
        let msk = mcol[self.state];
        if !(msk > F::zero()) {
            return Some(center.to_vec());
        }
        let g = self.discount;
        let two_l = lambda + lambda;

        let mut thetas = Vec::new();
        for x in 0..n {
            for y in x + 1..n {
                let dm = mcol[x] - mcol[y];
                if dm != F::zero() {
                    thetas.push(-(vb[x] - vb[y]) / dm);
                }
            }
        }
        thetas.sort_by(|x, y| x.partial_cmp(y).unwrap());
        thetas.dedup();
        let mut probes = Vec::with_capacity(thetas.len() + 1);
        match (thetas.first(), thetas.last()) {
            (Some(&lo), Some(&hi)) => {
                probes.push(lo - lo.abs().max(F::one()));
                for w in thetas.windows(2) {
                    probes.push((w[0] + w[1]) / F::lit(2.0));
                }
                probes.push(hi + hi.abs().max(F::one()));
            }
            _ => probes.push(F::zero()),
        }

        let mut seen = HashSet::new();
        // (value without constant parts, target, drained prefix, partial source, amount)
        let mut best: (F, usize, Vec<usize>, Option<(usize, F)>) = (F::zero(), k.min(n - 1), Vec::new(), None);
        let mut best_val = F::infinity();
        for theta in probes {
            let w: Vec<F> = (0..n).map(|i| vb[i] + theta * mcol[i]).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|x, y| w[*y].partial_cmp(&w[*x]).unwrap().then(x.cmp(y)));
            if !seen.insert(order.clone()) {
                continue;
            }
            let target = order[n - 1];
            let sources: Vec<usize> = order[..n - 1]
                .iter()
                .copied()
                .filter(|&f| center[f] > F::zero())
                .collect();
            let (mut dv0, mut dm0, mut mass0) = (F::zero(), F::zero(), F::zero());
            for pfx in 0..=sources.len() {
                if pfx > 0 {
                    let f = sources[pfx - 1];
                    dv0 += center[f] * (vb[target] - vb[f]);
                    dm0 += center[f] * (mcol[target] - mcol[f]);
                    mass0 += center[f];
                }
                let a0 = g * msk * dv0;
                let b0 = F::one() - g * dm0;
                let h = |num: F, den: F, mass: F| num / den + two_l * mass;
                let val0 = h(a0, b0, mass0);
                if val0 < best_val {
                    best_val = val0;
                    best = (val0, target, sources[..pfx].to_vec(), None);
                }
                if pfx < sources.len() {
                    let src = sources[pfx];
                    let cap = center[src];
                    let a1 = g * msk * (vb[target] - vb[src]);
                    let b1 = g * (mcol[target] - mcol[src]);
                    let kk = a1 * b0 + a0 * b1;
                    if kk < F::zero() && lambda > F::zero() && b1 != F::zero() {
                        let d = (-kk / two_l).sqrt();
                        let x = (b0 - d) / b1;
                        if x > F::zero() && x < cap {
                            let val = h(a0 + a1 * x, b0 - b1 * x, mass0 + x);
                            if val < best_val {
                                best_val = val;
                                best = (val, target, sources[..pfx].to_vec(), Some((src, x)));
                            }
                        }
                    }
                }
            }
        }
        let (_, target, drained, partial) = best;
        let mut row = center.to_vec();
        for f in drained {
            let m = row[f];
            row[target] += m;
            row[f] = F::zero();
        }
        if let Some((src, x)) = partial {
            row[src] -= x;
            row[target] += x;
        }
        Some(row)
    }

    /// Gradient of `v_P(s)` with respect to `P`: `γ M_{s,k} v_j`.
    fn value_gradient(&self, p: &[F]) -> Option<(F, Vec<F>)> {
        let n = self.n;
        let mut a = vec![F::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = -self.discount * p[i * n + j];
            }
            a[i * n + i] += F::one();
        }
        let m = linalg::inverse(n, &a)?;
        let v: Vec<F> = (0..n)
            .map(|i| (0..n).map(|j| m[i * n + j] * self.rewards[j]).sum())
            .collect();
        let mut g = vec![F::zero(); n * n];
        for k in 0..n {
            let coef = self.discount * m[self.state * n + k];
            for j in 0..n {
                g[k * n + j] = coef * v[j];
            }
        }
        Some((v[self.state], g))
    }

    /// Projected gradient with backtracking on `v_P(s) + λ(√(‖P − C‖² + δ²) − δ)`
    /// for a decreasing sequence of smoothing levels `δ`; the best point under
    /// the exact objective is returned.
    fn projected_gradient(&self, c: &[F], lambda: F, mut p: Vec<F>) -> (F, Vec<F>) {
        let n = self.n;
        let mut best = (self.objective(&p, c, lambda), p.clone());
        let smoothed = |p: &[F], delta: F| -> Option<(F, Vec<F>)> {
            let (val, mut g) = self.value_gradient(p)?;
            let sq: F = p.iter().zip(c).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
            let root = (sq + delta * delta).sqrt();
            for (gi, (a, b)) in g.iter_mut().zip(p.iter().zip(c)) {
                *gi += lambda * (*a - *b) / root;
            }
            Some((val + lambda * (root - delta), g))
        };
        let project = |y: &[F]| -> Vec<F> {
            let mut out = Vec::with_capacity(n * n);
            for k in 0..n {
                out.extend(project_simplex(&y[k * n..(k + 1) * n]));
            }
            out
        };
        let mut step = F::one();
        for exp in [2, 4, 6, 8, 10, 12] {
            let delta = F::lit(10f64.powi(-exp));
            for _ in 0..400 {
                let Some((f0, g)) = smoothed(&p, delta) else { return best };
                let mut moved = false;
                step *= F::lit(4.0);
                while step > F::lit(1e-16) {
                    let y: Vec<F> = p.iter().zip(&g).map(|(a, b)| *a - step * *b).collect();
                    let q = project(&y);
                    let Some((f1, _)) = smoothed(&q, delta) else { break };
                    let decrease: F = g.iter().zip(q.iter().zip(&p)).map(|(gi, (a, b))| *gi * (*a - *b)).sum();
                    let sq: F = q.iter().zip(&p).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
                    if f1 <= f0 + decrease + sq / (step + step) {
                        moved = sq > F::zero();
                        p = q;
                        break;
                    }
                    step /= F::lit(2.0);
                }
                let obj = self.objective(&p, c, lambda);
                if obj < best.0 {
                    best = (obj, p.clone());
                }
                if !moved || step <= F::lit(1e-16) {
                    break;
                }
            }
        }
        best
    }
}

/// Reusable evaluator of the dual objective for one `(mdp, π, μ̂_n, s, norm)`.
///
/// Inner infima are cached per multiplier, and previous minimizers seed
/// later searches, so sweeping several radii is cheap.
pub struct DualSolver<F: Scalar> {
    rewards: Vec<F>,
    discount: F,
    state: usize,
    norm: GroundNorm,
    centers: Vec<Vec<F>>,
    atom_values: Vec<F>,
    lipschitz: F,
    cache: HashMap<u64, Vec<F>>,
    warm: Vec<Vec<Vec<F>>>,
}

impl<F: Scalar> DualSolver<F> {
    pub fn new(
        mdp: &TabularMdp<F>,
        pi: &Policy,
        emp: &EmpiricalDistribution<F>,
        s: usize,
        norm: GroundNorm,
    ) -> Result<Self> {
        pi.check(mdp)?;
        mdp.check_state(s)?;
        for atom in emp.atoms() {
            mdp.check_model(atom)?;
        }
        let n = mdp.num_states();
        let rewards: Vec<F> = (0..n).map(|k| mdp.reward(k, pi[k])).collect();
        let centers: Vec<Vec<F>> = emp.atoms().iter().map(|m| policy_rows(m, pi)).collect();
        let atom_values = centers
            .iter()
            .map(|c| value_of_matrix(n, c, &rewards, mdp.discount())[s])
            .collect();
        Ok(Self {
            rewards,
            discount: mdp.discount(),
            state: s,
            norm,
            lipschitz: lipschitz_bound(mdp, norm),
            warm: vec![Vec::new(); centers.len()],
            centers,
            atom_values,
            cache: HashMap::new(),
        })
    }

    /// `v_{p̂_i}^π(s)` for every atom.
    pub fn atom_values(&self) -> &[F] {
        &self.atom_values
    }

    pub fn empirical_mean(&self) -> F {
        self.atom_values.iter().copied().sum::<F>() / F::from_usize_(self.atom_values.len())
    }

    /// Default upper end of the multiplier search.
    pub fn lipschitz(&self) -> F {
        self.lipschitz
    }

    fn problem(&self) -> InnerProblem<'_, F> {
        InnerProblem {
            n: self.rewards.len(),
            rewards: &self.rewards,
            discount: self.discount,
            state: self.state,
            norm: self.norm,
        }
    }

    /// `inf_p v_p^π(s) + λ‖p − p̂_i‖` for every atom `i`.
    pub fn inner_values(&mut self, lambda: F) -> Result<Vec<F>> {
        if !(lambda >= F::zero()) || !lambda.is_finite() {
            return Err(Error::param("lambda", format!("must be finite and nonnegative, got {lambda}")));
        }
        let key = lambda.to_f64_().to_bits();
        if let Some(v) = self.cache.get(&key) {
            return Ok(v.clone());
        }
        let mut out = Vec::with_capacity(self.centers.len());
        for i in 0..self.centers.len() {
            out.push(self.solve_atom(i, lambda).0);
        }
        self.cache.insert(key, out.clone());
        Ok(out)
    }

    fn solve_atom(&mut self, i: usize, lambda: F) -> (F, Vec<F>) {
        let n = self.rewards.len();
        let c = &self.centers[i];
        let mut starts = vec![c.clone()];
        for t in 0..n {
            let mut dirac = vec![F::zero(); n * n];
            for k in 0..n {
                dirac[k * n + t] = F::one();
            }
            starts.push(dirac);
        }
        starts.extend(self.warm[i].iter().cloned());
        let (val, p) = self.problem().minimize(c, lambda, &starts);
        let warm = &mut self.warm[i];
        if !warm.contains(&p) {
            warm.push(p.clone());
            if warm.len() > 3 {
                warm.remove(0);
            }
        }
        if val <= self.atom_values[i] {
            (val, p)
        } else {
            (self.atom_values[i], self.centers[i].clone())
        }
    }

    fn objective(&mut self, lambda: F, alpha: F) -> Result<(F, Vec<F>)> {
        let inner = self.inner_values(lambda)?;
        let mean = inner.iter().copied().sum::<F>() / F::from_usize_(inner.len());
        Ok((mean - lambda * alpha, inner))
    }

    /// Best dual objective for aggregate radius `alpha`.
    pub fn evaluate(&mut self, alpha: F, search: &LambdaSearch<F>) -> Result<DualEvaluation<F>> {
        if !(alpha >= F::zero()) {
            return Err(Error::param("alpha", format!("must be nonnegative, got {alpha}")));
        }
        let check = |grid: &[F]| -> Result<()> {
            if grid.iter().any(|l| !(*l >= F::zero()) || !l.is_finite()) {
                return Err(Error::param("lambda_grid", "multipliers must be finite and nonnegative"));
            }
            Ok(())
        };
        match search {
            LambdaSearch::Grid(g) => {
                if g.is_empty() {
                    return Err(Error::param("lambda_grid", "grid is empty"));
                }
                check(g)?;
                if g.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::param("lambda_grid", "grid must be sorted ascending"));
                }
            }
            LambdaSearch::Golden { upper, extra } => {
                check(extra)?;
                if let Some(u) = upper {
                    check(&[*u])?;
                }
            }
        }
        if alpha == F::zero() {
            let lambda_star = match search {
                LambdaSearch::Grid(g) => *g.last().unwrap(),
                LambdaSearch::Golden { upper, .. } => upper.unwrap_or(self.lipschitz),
            };
            return Ok(DualEvaluation {
                lambda_star,
                value: self.empirical_mean(),
                inner_values: self.atom_values.clone(),
            });
        }
        let mut best: Option<(F, F, Vec<F>)> = None;
        let mut consider = |this: &mut Self, lambda: F| -> Result<F> {
            let (val, inner) = this.objective(lambda, alpha)?;
            if best.as_ref().is_none_or(|b| val > b.1) {
                best = Some((lambda, val, inner));
            }
            Ok(val)
        };
        match search {
            LambdaSearch::Grid(g) => {
                for &l in g {
                    consider(self, l)?;
                }
            }
            LambdaSearch::Golden { upper, extra } => {
                let hi = upper.unwrap_or(self.lipschitz);
                consider(self, F::zero())?;
                consider(self, hi)?;
                for &l in extra {
                    consider(self, l)?;
                }
                let ratio = F::lit(0.618_033_988_749_894_8);
                let (mut a, mut b) = (F::zero(), hi);
                let mut x1 = b - ratio * (b - a);
                let mut x2 = a + ratio * (b - a);
                let mut f1 = consider(self, x1)?;
                let mut f2 = consider(self, x2)?;
                let width_tol = F::lit(1e-9).max(F::epsilon() * F::lit(64.0)) * hi.max(F::one());
                for _ in 0..200 {
                    if b - a <= width_tol {
                        break;
                    }
                    if f1 >= f2 {
                        b = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = b - ratio * (b - a);
                        f1 = consider(self, x1)?;
                    } else {
                        a = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = a + ratio * (b - a);
                        f2 = consider(self, x2)?;
                    }
                }
            }
        }
        let (lambda_star, value, inner_values) = best.expect("at least one multiplier evaluated");
        Ok(DualEvaluation {
            lambda_star,
            value,
            inner_values,
        })
    }
}

/// Dual lower bound on the trajectory-level DR value at state `s`, using the
/// aggregate radius of `spec`.
pub fn dr_value_dual<F: Scalar>(
    mdp: &TabularMdp<F>,
    pi: &Policy,
    emp: &EmpiricalDistribution<F>,
    spec: &AmbiguitySpec<F>,
    s: usize,
    search: &LambdaSearch<F>,
) -> Result<DualEvaluation<F>> {
    DualSolver::new(mdp, pi, emp, s, spec.norm())?.evaluate(spec.scalar_radius(), search)
}

/// `inf_p v_p^π(s) + λ‖p − center‖` together with a minimizing model whose
/// non-policy rows equal those of `center`.
pub fn penalized_infimum<F: Scalar>(
    mdp: &TabularMdp<F>,
    pi: &Policy,
    center: &TransitionModel<F>,
    s: usize,
    lambda: F,
    norm: GroundNorm,
) -> Result<(F, TransitionModel<F>)> {
    let emp = crate::ambiguity::build_empirical(vec![center.clone()])?;
    let mut solver = DualSolver::new(mdp, pi, &emp, s, norm)?;
    if !(lambda >= F::zero()) || !lambda.is_finite() {
        return Err(Error::param("lambda", format!("must be finite and nonnegative, got {lambda}")));
    }
    let (value, best) = solver.solve_atom(0, lambda);
    let n = mdp.num_states();
    let mut model = center.clone();
    for k in 0..n {
        model.set_row(k, pi[k], &best[k * n..(k + 1) * n])?;
    }
    Ok((value, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambiguity::build_empirical;
    use crate::mdp::policy_value;
    use crate::robust_dp::robust::{robust_value_iteration, UncertaintySet};

    fn instance() -> (TabularMdp<f64>, TransitionModel<f64>) {
        let mdp = TabularMdp::new(3, 1, vec![1.0, -0.5, 0.2], 0.9, 1.0).unwrap();
        let p = TransitionModel::from_rows(&[
            vec![vec![0.5, 0.3, 0.2]],
            vec![vec![0.1, 0.6, 0.3]],
            vec![vec![0.3, 0.3, 0.4]],
        ])
        .unwrap();
        (mdp, p)
    }

    #[test]
    fn zero_radius_returns_empirical_mean() {
        let (mdp, p) = instance();
        let emp = build_empirical(vec![p.clone()]).unwrap();
        let spec = AmbiguitySpec::uniform(3, 0.0, GroundNorm::L1Product).unwrap();
        let pi = Policy(vec![0, 0, 0]);
        let d = dr_value_dual(&mdp, &pi, &emp, &spec, 0, &LambdaSearch::default()).unwrap();
        assert_eq!(d.value, policy_value(&mdp, &p, &pi).unwrap()[0]);
    }

    #[test]
    fn zero_multiplier_gives_unconstrained_minimum() {
        let (mdp, p) = instance();
        let emp = build_empirical(vec![p.clone()]).unwrap();
        let spec = AmbiguitySpec::uniform(3, 0.3, GroundNorm::L1Product).unwrap();
        let pi = Policy(vec![0, 0, 0]);
        let (robust, _) = robust_value_iteration(&mdp, &UncertaintySet::ball(p, 2.0, GroundNorm::L1Product), 1e-12).unwrap();
        for s in 0..3 {
            let d = dr_value_dual(&mdp, &pi, &emp, &spec, s, &LambdaSearch::Grid(vec![0.0])).unwrap();
            assert!((d.value - robust[s]).abs() < 1e-9, "{} vs {}", d.value, robust[s]);
        }
    }

    #[test]
    fn value_matches_inner_mean() {
        let (mdp, p) = instance();
        let q = TransitionModel::uniform(3, 1);
        let emp = build_empirical(vec![p, q]).unwrap();
        let spec = AmbiguitySpec::uniform(3, 0.1, GroundNorm::L1Product).unwrap();
        let pi = Policy(vec![0, 0, 0]);
        let d = dr_value_dual(&mdp, &pi, &emp, &spec, 1, &LambdaSearch::default()).unwrap();
        let mean = d.inner_values.iter().sum::<f64>() / 2.0;
        assert!((d.value - (mean - d.lambda_star * 0.1)).abs() < 1e-9);
        assert!(matches!(
            dr_value_dual(&mdp, &pi, &emp, &spec, 1, &LambdaSearch::Grid(vec![])),
            Err(Error::Parameter { .. })
        ));
    }

    #[test]
    fn row_minimization_beats_grid_on_two_states() {
        let mdp = TabularMdp::new(2, 1, vec![1.0, -1.0], 0.8, 1.0).unwrap();
        let c = TransitionModel::from_rows(&[vec![vec![0.6, 0.4]], vec![vec![0.3, 0.7]]]).unwrap();
        let pi = Policy(vec![0, 0]);
        for &lambda in &[0.0, 0.5, 1.0, 2.0, 5.0, 20.0] {
            let (val, _) = penalized_infimum(&mdp, &pi, &c, 0, lambda, GroundNorm::L1Product).unwrap();
            let mut grid_best = f64::INFINITY;
            for i in 0..=200 {
                for j in 0..=200 {
                    let (x, y) = (i as f64 / 200.0, j as f64 / 200.0);
                    let p = TransitionModel::from_rows(&[vec![vec![x, 1.0 - x]], vec![vec![y, 1.0 - y]]]).unwrap();
                    let v = policy_value(&mdp, &p, &pi).unwrap()[0];
                    let d = crate::ambiguity::ground_distance(&p, &c, GroundNorm::L1Product).unwrap();
                    grid_best = grid_best.min(v + lambda * d);
                }
            }
            assert!(val <= grid_best + 1e-12, "λ={lambda}: {val} > {grid_best}");
            assert!(val >= grid_best - 0.1, "λ={lambda}: {val} far below grid {grid_best}");
        }
    }
}
