//! One-row inner problems: penalized `min_q ⟨q, v⟩ + λ‖q − p̂‖` and
//! constrained `min_q ⟨q, v⟩ s.t. ‖q − p̂‖ ≤ ρ` over the probability simplex.

use crate::ambiguity::GroundNorm;
use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

/// Index of the first minimal entry.
pub(crate) fn argmin_first<F: Scalar>(v: &[F]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// Exact minimizer and minimum of `⟨q, v⟩ + λ‖q − p̂‖` over the simplex.
///
/// For the ℓ1 row norm (also used for `SupOne`), every successor whose value
/// exceeds `min v` by more than `2λ` sends its mass to the first minimizer of
/// `v`. The Frobenius row norm is handled by a convex search along the
/// constrained solution path.
pub fn inner_min_linear<F: Scalar>(v: &[F], p_hat: &[F], lambda: F, norm: GroundNorm) -> Result<(Vec<F>, F)> {
    check_row(v, p_hat)?;
    if !(lambda >= F::zero()) {
        return Err(Error::param("lambda", format!("must be nonnegative, got {lambda}")));
    }
    Ok(match norm {
        GroundNorm::L1Product | GroundNorm::SupOne => l1_penalized(v, p_hat, lambda),
        GroundNorm::L2Product => l2_penalized(v, p_hat, lambda),
    })
}

/// Minimum only, for ℓ1: `Σ_j p̂_j min(v_j, min v + 2λ)`.
pub(crate) fn l1_penalized_value<F: Scalar>(v: &[F], p_hat: &[F], lambda: F) -> F {
    let vmin = v[argmin_first(v)];
    let cap = vmin + lambda + lambda;
    p_hat.iter().zip(v).map(|(p, x)| *p * x.min(cap)).sum()
}

fn l1_penalized<F: Scalar>(v: &[F], p_hat: &[F], lambda: F) -> (Vec<F>, F) {
    let m = argmin_first(v);
    let cap = v[m] + lambda + lambda;
    let mut q = p_hat.to_vec();
    let mut moved = F::zero();
    for j in 0..v.len() {
        if j != m && v[j] > cap {
            moved += q[j];
            q[j] = F::zero();
        }
    }
    q[m] += moved;
    let value = dot(&q, v) + lambda * GroundNorm::L1Product.row_distance(&q, p_hat);
    (q, value)
}

fn check_row<F: Scalar>(v: &[F], p_hat: &[F]) -> Result<()> {
    if v.len() != p_hat.len() || v.is_empty() {
        return Err(Error::dim(format!(
            "value has {} entries, row has {}",
            v.len(),
            p_hat.len()
        )));
    }
    let sum: F = p_hat.iter().copied().sum();
    if p_hat.iter().any(|x| !(*x >= F::zero())) || (sum - F::one()).abs() > F::row_tolerance(p_hat.len()) {
        return Err(Error::param("p_hat", "row is not a probability vector"));
    }
    Ok(())
}

/// Exact minimizer and minimum of `⟨q, v⟩` over `{q ∈ Δ : ‖q − p̂‖ ≤ ρ}`.
pub fn constrained_min_linear<F: Scalar>(v: &[F], p_hat: &[F], rho: F, norm: GroundNorm) -> Result<(Vec<F>, F)> {
    check_row(v, p_hat)?;
    if !(rho >= F::zero()) {
        return Err(Error::param("radius", format!("must be nonnegative, got {rho}")));
    }
    let q = match norm {
        GroundNorm::L1Product | GroundNorm::SupOne => l1_constrained(v, p_hat, rho),
        GroundNorm::L2Product => l2_constrained(v, p_hat, rho),
    };
    let value = dot(&q, v);
    Ok((q, value))
}

/// Moves up to `ρ/2` mass onto the first minimizer, highest values first.
fn l1_constrained<F: Scalar>(v: &[F], p_hat: &[F], rho: F) -> Vec<F> {
    let m = argmin_first(v);
    let mut q = p_hat.to_vec();
    let mut budget = (rho / F::lit(2.0)).min(F::one() - p_hat[m]);
    let mut order: Vec<usize> = (0..v.len()).filter(|&j| j != m).collect();
    order.sort_by(|a, b| v[*b].partial_cmp(&v[*a]).unwrap().then(a.cmp(b)));
    for j in order {
        if budget <= F::zero() || v[j] <= v[m] {
            break;
        }
        let take = q[j].min(budget);
        q[j] -= take;
        q[m] += take;
        budget -= take;
    }
    q
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex<F: Scalar>(y: &[F]) -> Vec<F> {
    let top = y.iter().copied().fold(F::neg_infinity(), F::max);
    let y: Vec<F> = y.iter().map(|x| *x - top).collect();
    let mut u = y.clone();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut acc = F::zero();
    let mut theta = F::zero();
    for (j, uj) in u.iter().enumerate() {
        acc += *uj;
        let t = (acc - F::one()) / F::from_usize_(j + 1);
        if *uj - t > F::zero() {
            theta = t;
        }
    }
    y.iter().map(|x| (*x - theta).max(F::zero())).collect()
}

/// `argmin_{q ∈ Δ} ⟨q, v⟩ + (η/2)‖q − p̂‖²`.
fn l2_path<F: Scalar>(v: &[F], p_hat: &[F], eta: F) -> Vec<F> {
    let y: Vec<F> = p_hat.iter().zip(v).map(|(p, x)| *p - *x / eta).collect();
    project_simplex(&y)
}

fn l2_dist<F: Scalar>(a: &[F], b: &[F]) -> F {
    GroundNorm::L2Product.row_distance(a, b)
}

/// Range of `ln η` scanned along the constrained path.
fn eta_bounds<F: Scalar>(v: &[F]) -> (F, F) {
    let spread = v.iter().fold(F::zero(), |m, x| m.max(x.abs())).max(F::one());
    let s = spread.ln();
    (s - F::lit(40.0), s + F::lit(40.0))
}

fn l2_constrained<F: Scalar>(v: &[F], p_hat: &[F], rho: F) -> Vec<F> {
    let (lo0, hi0) = eta_bounds(v);
    let loose = l2_path(v, p_hat, lo0.exp());
    if l2_dist(&loose, p_hat) <= rho {
        return loose;
    }
    // ‖q(η) − p̂‖ decreases in η: find the smallest η meeting the radius.
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..200 {
        let mid = (lo + hi) / F::lit(2.0);
        if l2_dist(&l2_path(v, p_hat, mid.exp()), p_hat) <= rho {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < F::epsilon() * F::lit(16.0) * hi.abs().max(F::one()) {
            break;
        }
    }
    l2_path(v, p_hat, hi.exp())
}

fn l2_penalized<F: Scalar>(v: &[F], p_hat: &[F], lambda: F) -> (Vec<F>, F) {
    let (lo0, _) = eta_bounds(v);
    let rho_max = l2_dist(&l2_path(v, p_hat, lo0.exp()), p_hat);
    let eval = |rho: F| {
        let q = l2_constrained(v, p_hat, rho);
        let val = dot(&q, v) + lambda * l2_dist(&q, p_hat);
        (q, val)
    };
    // h(ρ) + λρ is convex in ρ.
    let ratio = F::lit(0.618_033_988_749_894_8);
    let (mut a, mut b) = (F::zero(), rho_max);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = eval(x1).1;
    let mut f2 = eval(x2).1;
    for _ in 0..120 {
        if b - a <= F::epsilon() * F::lit(4.0) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = eval(x1).1;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = eval(x2).1;
        }
    }
    [F::zero(), rho_max, (a + b) / F::lit(2.0)]
        .into_iter()
        .map(eval)
        .fold(None, |best: Option<(Vec<F>, F)>, cand| match best {
            Some(b) if b.1 <= cand.1 => Some(b),
            _ => Some(cand),
        })
        .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn penalized_l1_examples() {
        let (q, val) = inner_min_linear::<f64>(&[0.0, 10.0], &[0.3, 0.7], 1.0, GroundNorm::L1Product).unwrap();
        assert_eq!(q, vec![1.0, 0.0]);
        assert!((val - 1.4).abs() < 1e-12);
        let (q, val) = inner_min_linear::<f64>(&[3.0, 1.0, 2.0], &[0.2, 0.5, 0.3], 0.0, GroundNorm::L1Product).unwrap();
        assert_eq!(q, vec![0.0, 1.0, 0.0]);
        assert_eq!(val, 1.0);
        let (q, val) = inner_min_linear::<f64>(&[3.0, 1.0, 2.0], &[0.2, 0.5, 0.3], 1.0, GroundNorm::L1Product).unwrap();
        assert_eq!(q, vec![0.2, 0.5, 0.3]);
        assert!((val - 1.7).abs() < 1e-12);
        assert!(inner_min_linear::<f64>(&[0.0], &[1.0], -1.0, GroundNorm::L1Product).is_err());
    }

    #[test]
    fn constrained_l1_budget() {
        let (q, val) = constrained_min_linear::<f64>(&[0.0, 10.0], &[0.3, 0.7], 0.4, GroundNorm::L1Product).unwrap();
        assert!((q[0] - 0.5).abs() < 1e-15);
        assert!((val - 5.0).abs() < 1e-12);
        let (_, val) = constrained_min_linear::<f64>(&[4.0, 1.0, 2.0], &[0.2, 0.5, 0.3], 2.0, GroundNorm::L1Product).unwrap();
        assert_eq!(val, 1.0);
    }

    #[test]
    fn simplex_projection() {
        let x = project_simplex::<f64>(&[0.5, 0.5, 0.5]);
        for xi in &x {
            assert!((xi - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(project_simplex::<f64>(&[2.0, 0.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn l2_limits() {
        let v = [0.0, 1.0, 3.0];
        let p = [0.2, 0.3, 0.5];
        let (_, big) = inner_min_linear::<f64>(&v, &p, 100.0, GroundNorm::L2Product).unwrap();
        assert!((big - dot(&p, &v)).abs() < 1e-9);
        let (_, zero) = inner_min_linear::<f64>(&v, &p, 0.0, GroundNorm::L2Product).unwrap();
        assert!(zero.abs() < 1e-9);
        let (q, _) = constrained_min_linear::<f64>(&v, &p, 0.1, GroundNorm::L2Product).unwrap();
        assert!(l2_dist(&q, &p) <= 0.1 + 1e-9);
    }
}
