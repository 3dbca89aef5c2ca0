//! Dense two-phase simplex method for the small linear programs used by the
//! transport and oracle computations.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// `min cᵀx` subject to linear constraints and `x ≥ 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram<F> {
    num_vars: usize,
    objective: Vec<F>,
    rows: Vec<(Vec<F>, Relation, F)>,
}

#[derive(Debug, Clone)]
pub struct LpSolution<F> {
    pub x: Vec<F>,
    pub objective: F,
}

impl<F: Scalar> LinearProgram<F> {
    pub fn new(objective: Vec<F>) -> Self {
        Self {
            num_vars: objective.len(),
            objective,
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Adds `coeffs · x (rel) rhs`.
    pub fn constrain(&mut self, coeffs: Vec<F>, rel: Relation, rhs: F) {
        assert_eq!(coeffs.len(), self.num_vars, "constraint width");
        self.rows.push((coeffs, rel, rhs));
    }

    pub fn solve(&self) -> Result<LpSolution<F>> {
        Tableau::build(self).solve(&self.objective)
    }
}

struct Tableau<F> {
    /// `m` rows of `width + 1` entries; last entry is the right-hand side.
    t: Vec<Vec<F>>,
    basis: Vec<usize>,
    width: usize,
    num_vars: usize,
    artificial_start: usize,
    eps: F,
}

impl<F: Scalar> Tableau<F> {
    fn build(lp: &LinearProgram<F>) -> Self {
        let m = lp.rows.len();
        let n = lp.num_vars;
        let num_slack = lp.rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let mut rows: Vec<(Vec<F>, Relation, F)> = lp
            .rows
            .iter()
            .map(|(c, rel, b)| {
                if *b < F::zero() {
                    let flipped = match rel {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.iter().map(|x| -*x).collect(), flipped, -*b)
                } else {
                    (c.clone(), *rel, *b)
                }
            })
            .collect();
        let num_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let artificial_start = n + num_slack;
        let width = artificial_start + num_art;
        let mut t = vec![vec![F::zero(); width + 1]; m];
        let mut basis = vec![0; m];
        let mut slack = n;
        let mut art = artificial_start;
        for (i, (coeffs, rel, b)) in rows.drain(..).enumerate() {
            t[i][..n].copy_from_slice(&coeffs);
            t[i][width] = b;
            match rel {
                Relation::Le => {
                    t[i][slack] = F::one();
                    basis[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    t[i][slack] = -F::one();
                    slack += 1;
                    t[i][art] = F::one();
                    basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    t[i][art] = F::one();
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        let eps = F::epsilon().sqrt() * F::lit(1e-3);
        Self {
            t,
            basis,
            width,
            num_vars: n,
            artificial_start,
            eps,
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.t[row][col];
        for x in self.t[row].iter_mut() {
            *x /= piv;
        }
        let prow = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != F::zero() {
                for (x, p) in r.iter_mut().zip(&prow) {
                    *x -= f * *p;
                }
            }
        }
        self.basis[row] = col;
    }

    /// Reduced costs `c_j − c_Bᵀ B⁻¹ A_j` for columns below `limit`.
    fn reduced_costs(&self, cost: &[F], limit: usize) -> Vec<F> {
        let mut d: Vec<F> = (0..limit).map(|j| cost[j]).collect();
        for (i, row) in self.t.iter().enumerate() {
            let cb = cost[self.basis[i]];
            if cb != F::zero() {
                for (dj, a) in d.iter_mut().zip(row) {
                    *dj -= cb * *a;
                }
            }
        }
        d
    }

    /// Minimizes `cost` over columns `< limit`.
    fn optimize(&mut self, cost: &[F], limit: usize) -> Result<()> {
        let mut degenerate_run = 0usize;
        let max_iter = 50_000 + 100 * self.width * (self.t.len() + 1);
        for _ in 0..max_iter {
            let d = self.reduced_costs(cost, limit);
            let bland = degenerate_run > 50;
            let mut enter = None;
            let mut best = -self.eps;
            for (j, dj) in d.iter().enumerate() {
                if *dj < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = *dj;
                }
            }
            let Some(col) = enter else {
                return Ok(());
            };
            let mut leave: Option<(usize, F)> = None;
            for (i, row) in self.t.iter().enumerate() {
                let a = row[col];
                if a > self.eps {
                    let ratio = row[self.width] / a;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - self.eps
                                || (ratio <= lr + self.eps && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((row, ratio)) = leave else {
                return Err(Error::Unbounded);
            };
            if ratio <= self.eps {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(row, col);
        }
        Err(Error::Infeasible("simplex iteration limit reached".into()))
    }

    fn solve(mut self, objective: &[F]) -> Result<LpSolution<F>> {
        if self.artificial_start < self.width {
            let mut phase1 = vec![F::zero(); self.width];
            for c in phase1.iter_mut().skip(self.artificial_start) {
                *c = F::one();
            }
            self.optimize(&phase1, self.width)?;
            let infeas: F = self
                .t
                .iter()
                .zip(&self.basis)
                .filter(|(_, b)| **b >= self.artificial_start)
                .map(|(r, _)| r[self.width])
                .sum();
            let scale = self
                .t
                .iter()
                .fold(F::one(), |m, r| m.max(r[self.width].abs()));
            if infeas > self.eps * scale {
                return Err(Error::Infeasible(format!("phase one residual {infeas}")));
            }
            self.drive_out_artificials();
        }
        let mut cost = vec![F::zero(); self.width];
        cost[..self.num_vars].copy_from_slice(objective);
        self.optimize(&cost, self.artificial_start)?;
        let mut x = vec![F::zero(); self.num_vars];
        for (row, &b) in self.t.iter().zip(&self.basis) {
            if b < self.num_vars {
                x[b] = row[self.width].max(F::zero());
            }
        }
        let value = x.iter().zip(objective).map(|(a, b)| *a * *b).sum();
        Ok(LpSolution { x, objective: value })
    }

    fn drive_out_artificials(&mut self) {
        let mut i = 0;
        while i < self.t.len() {
            if self.basis[i] >= self.artificial_start {
                let col = (0..self.artificial_start).find(|&j| self.t[i][j].abs() > self.eps);
                match col {
                    Some(j) => {
                        self.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        self.t.remove(i);
                        self.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → 36 at (2, 6)
        let mut lp = LinearProgram::<f64>::new(vec![-3.0, -5.0]);
        lp.constrain(vec![1.0, 0.0], Relation::Le, 4.0);
        lp.constrain(vec![0.0, 2.0], Relation::Le, 12.0);
        lp.constrain(vec![3.0, 2.0], Relation::Le, 18.0);
        let sol = lp.solve().unwrap();
        assert!((sol.objective + 36.0).abs() < 1e-9);
        assert!((sol.x[0] - 2.0).abs() < 1e-9 && (sol.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_redundant_rows() {
        // min x + 2y, x + y = 1 (stated twice), x ≥ 0.25
        let mut lp = LinearProgram::<f64>::new(vec![1.0, 2.0]);
        lp.constrain(vec![1.0, 1.0], Relation::Eq, 1.0);
        lp.constrain(vec![2.0, 2.0], Relation::Eq, 2.0);
        lp.constrain(vec![1.0, 0.0], Relation::Ge, 0.25);
        let sol = lp.solve().unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::<f64>::new(vec![1.0]);
        lp.constrain(vec![1.0], Relation::Le, -1.0);
        assert!(matches!(lp.solve(), Err(Error::Infeasible(_))));
        let mut lp = LinearProgram::<f64>::new(vec![-1.0]);
        lp.constrain(vec![1.0], Relation::Ge, 1.0);
        assert!(matches!(lp.solve(), Err(Error::Unbounded)));
    }
}
