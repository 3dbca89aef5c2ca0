//! Brute-force verifiers: simplex grid search for row problems and exhaustive
//! policy enumeration. Size guards refuse oversized requests outright.

use rayon::prelude::*;

use crate::ambiguity::GroundNorm;
use crate::error::{Error, Result};
use crate::mdp::{Policy, TabularMdp};
use crate::scalar::{dot, Scalar};

/// Largest dimension accepted by [`grid_inner_min`].
pub const MAX_GRID_DIMENSION: usize = 4;
/// Largest number of points [`SimplexGrid::points`] materializes.
pub const MAX_GRID_POINTS: usize = 10_000_000;
/// Largest number of policies [`enumerate_policies`] lists.
pub const MAX_POLICIES: usize = 10_000;

/// Points `c / k` of the probability simplex with integer `c`, `Σc = k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexGrid {
    dimension: usize,
    steps: usize,
}

impl SimplexGrid {
    /// Grid with spacing `step`; `1/step` must be an integer.
    pub fn new(dimension: usize, step: f64) -> Result<Self> {
        if !(step > 0.0 && step <= 1.0) {
            return Err(Error::param("step", format!("must lie in (0, 1], got {step}")));
        }
        let k = (1.0 / step).round();
        if (k * step - 1.0).abs() > 1e-9 {
            return Err(Error::param("step", format!("1/step must be an integer, got {step}")));
        }
        Self::with_steps(dimension, k as usize)
    }

    pub fn with_steps(dimension: usize, steps: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::dim("simplex dimension must be positive"));
        }
        if steps == 0 {
            return Err(Error::param("steps", "must be positive"));
        }
        Ok(Self { dimension, steps })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn step(&self) -> f64 {
        1.0 / self.steps as f64
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of grid points, `C(k + d − 1, d − 1)`, if it fits in `usize`.
    pub fn len(&self) -> Option<usize> {
        let (k, d) = (self.steps as u128, self.dimension as u128);
        let mut c: u128 = 1;
        for i in 1..d {
            c = c.checked_mul(k + i)? / i;
        }
        usize::try_from(c).ok()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All grid points in lexicographic order of their integer coordinates.
    pub fn points<F: Scalar>(&self) -> Result<Vec<Vec<F>>> {
        match self.len() {
            Some(n) if n <= MAX_GRID_POINTS => {}
            _ => {
                return Err(Error::Refused(format!(
                    "simplex grid of dimension {} with {} steps is too large",
                    self.dimension, self.steps
                )))
            }
        }
        let mut out = Vec::new();
        let mut counts = vec![0usize; self.dimension];
        let k = F::from_usize_(self.steps);
        self.visit(&mut counts, 0, self.steps, &mut |c| {
            out.push(c.iter().map(|x| F::from_usize_(*x) / k).collect());
        });
        Ok(out)
    }

    fn visit(&self, counts: &mut [usize], pos: usize, remaining: usize, f: &mut impl FnMut(&[usize])) {
        if pos + 1 == counts.len() {
            counts[pos] = remaining;
            f(counts);
            return;
        }
        for c in 0..=remaining {
            counts[pos] = c;
            self.visit(counts, pos + 1, remaining - c, f);
        }
    }
}

/// `min` over grid points `q` of `⟨q, v⟩ + λ‖q − p̂‖`; never below the
/// exact minimum over the simplex.
pub fn grid_inner_min<F: Scalar>(v: &[F], p_hat: &[F], lambda: F, norm: GroundNorm, grid: &SimplexGrid) -> Result<F> {
    if grid.dimension > MAX_GRID_DIMENSION {
        return Err(Error::Refused(format!(
            "grid search over dimension {} exceeds {MAX_GRID_DIMENSION}",
            grid.dimension
        )));
    }
    if v.len() != grid.dimension || p_hat.len() != grid.dimension {
        return Err(Error::dim("value, row and grid dimensions differ"));
    }
    if !(lambda >= F::zero()) {
        return Err(Error::param("lambda", "must be nonnegative"));
    }
    let k = grid.steps;
    let kf = F::from_usize_(k);
    let best = (0..=k)
        .into_par_iter()
        .map(|c0| {
            let mut counts = vec![0usize; grid.dimension];
            counts[0] = c0;
            let mut q = vec![F::zero(); grid.dimension];
            let mut best = F::infinity();
            let mut eval = |c: &[usize]| {
                for (qi, ci) in q.iter_mut().zip(c) {
                    *qi = F::from_usize_(*ci) / kf;
                }
                let val = dot(&q, v) + lambda * norm.row_distance(&q, p_hat);
                if val < best {
                    best = val;
                }
            };
            if grid.dimension == 1 {
                if c0 == k {
                    eval(&counts);
                }
            } else {
                grid.visit(&mut counts, 1, k - c0, &mut eval);
            }
            best
        })
        .reduce(|| F::infinity(), F::min);
    Ok(best)
}

/// Every deterministic stationary policy, lexicographic with state 0 most
/// significant; the first maps every state to action 0.
pub fn enumerate_policies<F: Scalar>(mdp: &TabularMdp<F>) -> Result<Vec<Policy>> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let count = u32::try_from(ns)
        .ok()
        .and_then(|e| na.checked_pow(e))
        .filter(|c| *c <= MAX_POLICIES)
        .ok_or_else(|| Error::Refused(format!("{na}^{ns} policies exceed {MAX_POLICIES}")))?;
    let mut out = Vec::with_capacity(count);
    let mut current = vec![0usize; ns];
    for _ in 0..count {
        out.push(Policy(current.clone()));
        for s in (0..ns).rev() {
            current[s] += 1;
            if current[s] < na {
                break;
            }
            current[s] = 0;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_lie_on_simplex() {
        let g = SimplexGrid::new(3, 0.25).unwrap();
        let pts = g.points::<f64>().unwrap();
        assert_eq!(pts.len(), 15);
        assert_eq!(g.len(), Some(15));
        for p in pts {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(SimplexGrid::new(3, 0.3).is_err());
    }

    #[test]
    fn grid_min_examples() {
        let g = SimplexGrid::new(3, 0.01).unwrap();
        let v = [2.0, -1.0, 0.5];
        let p = [0.2, 0.3, 0.5];
        let m = grid_inner_min::<f64>(&v, &p, 0.0, GroundNorm::L1Product, &g).unwrap();
        assert_eq!(m, -1.0);
        let c = grid_inner_min::<f64>(&[1.5; 3], &p, 0.7, GroundNorm::L1Product, &g).unwrap();
        assert!((c - 1.5).abs() < 1e-12);
        let big = SimplexGrid::new(5, 0.5).unwrap();
        assert!(matches!(
            grid_inner_min::<f64>(&[0.0; 5], &[0.2; 5], 0.0, GroundNorm::L1Product, &big),
            Err(Error::Refused(_))
        ));
    }

    #[test]
    fn policy_enumeration() {
        let m22 = TabularMdp::<f64>::new(2, 2, vec![0.0; 4], 0.5, 1.0).unwrap();
        let ps = enumerate_policies(&m22).unwrap();
        assert_eq!(ps.len(), 4);
        assert_eq!(ps[0].0, vec![0, 0]);
        assert_eq!(ps[1].0, vec![0, 1]);
        let m13 = TabularMdp::<f64>::new(1, 3, vec![0.0; 3], 0.5, 1.0).unwrap();
        assert_eq!(enumerate_policies(&m13).unwrap().len(), 3);
        let huge = TabularMdp::<f64>::new(20, 2, vec![0.0; 40], 0.5, 1.0).unwrap();
        assert!(matches!(enumerate_policies(&huge), Err(Error::Refused(_))));
    }
}
