//! Dense two-phase simplex for small covering programs
//! `min c·x  s.t.  A x ≥ b, x ≥ 0` with `b ≥ 0`.
//!
//! Pivoting follows Bland's rule (lowest-index entering column, ties in the
//! ratio test to the lowest-index basic variable), so the returned vertex is
//! a deterministic function of the input and the method cannot cycle.

use crate::error::{Error, Result};

const EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Optimal multipliers of the `≥` rows (nonnegative).
    pub duals: Vec<f64>,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    /// Columns `0..entering_limit` may enter the basis.
    entering_limit: usize,
}

impl Tableau {
    fn rhs(&self) -> usize {
        self.obj.len() - 1
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[row].clone();
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        let f = self.obj[col];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
        self.basis[row] = col;
    }

    fn run(&mut self, pivots: &mut usize) -> Result<()> {
        let rhs = self.rhs();
        loop {
            let Some(col) = (0..self.entering_limit).find(|&j| self.obj[j] < -EPS) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, r) in self.rows.iter().enumerate() {
                if r[col] > EPS {
                    let ratio = r[rhs] / r[col];
                    let better = match leave {
                        None => true,
                        Some((best, br)) => {
                            ratio < br - EPS
                                || (ratio <= br + EPS && self.basis[i] < self.basis[best])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((row, _)) = leave else {
                return Err(Error::Lp("objective is unbounded below".into()));
            };
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(Error::Lp(format!(
                    "no convergence after {MAX_PIVOTS} pivots"
                )));
            }
            self.pivot(row, col);
        }
    }
}

/// Solve `min c·x  s.t.  A x ≥ b, x ≥ 0`. `a` is given row by row.
pub fn minimize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution> {
    let n = c.len();
    let m = a.len();
    if b.len() != m {
        return Err(Error::Lp(format!(
            "{m} rows but {} right-hand sides",
            b.len()
        )));
    }
    if let Some(r) = a.iter().position(|r| r.len() != n) {
        return Err(Error::Lp(format!(
            "row {r} has {} entries, expected {n}",
            a[r].len()
        )));
    }
    if b.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Lp(
            "right-hand sides must be finite and nonnegative".into(),
        ));
    }
    if a.iter().flatten().chain(c).any(|v| !v.is_finite()) {
        return Err(Error::Lp("coefficients must be finite".into()));
    }

    // Columns: x (n), surplus (m), artificial (m), rhs.
    let width = n + 2 * m + 1;
    let rhs = width - 1;
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut r = vec![0.0; width];
            r[..n].copy_from_slice(&a[i]);
            r[n + i] = -1.0;
            r[n + m + i] = 1.0;
            r[rhs] = b[i];
            r
        })
        .collect();
    let mut obj = vec![0.0; width];
    for r in &rows {
        for j in 0..n + m {
            obj[j] -= r[j];
        }
        obj[rhs] -= r[rhs];
    }
    let mut t = Tableau {
        rows,
        obj,
        basis: (n + m..n + 2 * m).collect(),
        entering_limit: n + m,
    };
    let mut pivots = 0;
    t.run(&mut pivots)?;
    if -t.obj[rhs] > 1e-9 * (1.0 + b.iter().sum::<f64>()) {
        return Err(Error::Lp("constraints are infeasible".into()));
    }

    // Drive leftover zero-level artificials out where possible.
    for i in 0..m {
        if t.basis[i] >= n + m {
            if let Some(j) = (0..n + m).find(|&j| t.rows[i][j].abs() > EPS) {
                t.pivot(i, j);
            }
        }
    }

    let cost = |j: usize| if j < n { c[j] } else { 0.0 };
    let mut obj = vec![0.0; width];
    for (j, v) in obj.iter_mut().enumerate().take(rhs) {
        *v = cost(j);
    }
    for (i, r) in t.rows.iter().enumerate() {
        let cb = cost(t.basis[i]);
        if cb != 0.0 {
            for (v, rv) in obj.iter_mut().zip(r) {
                *v -= cb * rv;
            }
        }
    }
    t.obj = obj;
    t.run(&mut pivots)?;

    let mut x = vec![0.0; n];
    for (i, &bi) in t.basis.iter().enumerate() {
        if bi < n {
            x[bi] = t.rows[i][rhs].max(0.0);
        }
    }
    let objective = x.iter().zip(c).map(|(x, c)| x * c).sum();
    let duals = (0..m).map(|i| (-t.obj[n + m + i]).max(0.0)).collect();
    Ok(LpSolution {
        x,
        objective,
        duals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn textbook_example() {
        // min x + y  s.t.  x + 2y ≥ 4, 3x + y ≥ 6  ->  (1.6, 1.2), value 2.8.
        let s = minimize(&[1.0, 1.0], &[vec![1.0, 2.0], vec![3.0, 1.0]], &[4.0, 6.0]).unwrap();
        assert!((s.x[0] - 1.6).abs() < 1e-12);
        assert!((s.x[1] - 1.2).abs() < 1e-12);
        assert!((s.objective - 2.8).abs() < 1e-12);
        assert!((s.duals[0] - 0.4).abs() < 1e-12);
        assert!((s.duals[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        assert!(matches!(
            minimize(&[1.0], &[vec![0.0]], &[1.0]),
            Err(Error::Lp(_))
        ));
        assert!(matches!(
            minimize(&[-1.0], &[vec![1.0]], &[1.0]),
            Err(Error::Lp(_))
        ));
    }

    #[test]
    fn redundant_rows() {
        let s = minimize(&[2.0, 3.0], &[vec![1.0, 1.0], vec![1.0, 1.0]], &[1.0, 1.0]).unwrap();
        assert!((s.objective - 2.0).abs() < 1e-12);
        let s = minimize(&[1.0, 1.0], &[vec![1.0, 0.0]], &[0.0]).unwrap();
        assert_eq!(s.objective, 0.0);
    }

    /// Vertex enumeration for two variables: every feasible intersection of
    /// two boundary lines among the constraints and the axes.
    fn vertex_oracle(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> f64 {
        let mut lines: Vec<([f64; 2], f64)> =
            a.iter().zip(b).map(|(r, &b)| ([r[0], r[1]], b)).collect();
        lines.push(([1.0, 0.0], 0.0));
        lines.push(([0.0, 1.0], 0.0));
        let mut best = f64::INFINITY;
        for i in 0..lines.len() {
            for j in i + 1..lines.len() {
                let ([p, q], r) = lines[i];
                let ([s, t], u) = lines[j];
                let det = p * t - q * s;
                if det.abs() < 1e-12 {
                    continue;
                }
                let x = (r * t - q * u) / det;
                let y = (p * u - r * s) / det;
                let feasible = x >= -1e-9
                    && y >= -1e-9
                    && a.iter()
                        .zip(b)
                        .all(|(row, &bb)| row[0] * x + row[1] * y >= bb - 1e-9);
                if feasible {
                    best = best.min(c[0] * x + c[1] * y);
                }
            }
        }
        best
    }

    #[test]
    fn random_two_variable_programs_match_vertices() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let rows = rng.random_range(1..6);
            let c = [rng.random_range(0.1..3.0), rng.random_range(0.1..3.0)];
            let a: Vec<Vec<f64>> = (0..rows)
                .map(|_| vec![rng.random_range(0.0..4.0), rng.random_range(0.1..4.0)])
                .collect();
            let b: Vec<f64> = (0..rows).map(|_| rng.random_range(0.0..5.0)).collect();
            let s = minimize(&c, &a, &b).unwrap();
            let oracle = vertex_oracle(&c, &a, &b);
            assert!(
                (s.objective - oracle).abs() < 1e-9 * (1.0 + oracle),
                "{} vs {oracle}",
                s.objective
            );
        }
    }

    #[test]
    fn random_programs_certify_by_duality() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let n = rng.random_range(1..30);
            let m = rng.random_range(1..12);
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
            let a: Vec<Vec<f64>> = (0..m)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            if rng.random_bool(0.4) {
                                0.0
                            } else {
                                rng.random_range(0.0..5.0)
                            }
                        })
                        .collect()
                })
                .collect();
            if a.iter().any(|r| r.iter().all(|&v| v == 0.0)) {
                continue;
            }
            let b = vec![1.0; m];
            let s = minimize(&c, &a, &b).unwrap();
            for (row, bb) in a.iter().zip(&b) {
                let lhs: f64 = row.iter().zip(&s.x).map(|(a, x)| a * x).sum();
                assert!(lhs >= bb - 1e-9);
            }
            for j in 0..n {
                let col: f64 = (0..m).map(|i| a[i][j] * s.duals[i]).sum();
                assert!(col <= c[j] + 1e-9, "dual infeasible at column {j}");
            }
            let dual_obj: f64 = s.duals.iter().zip(&b).map(|(y, b)| y * b).sum();
            assert!((dual_obj - s.objective).abs() < 1e-9 * (1.0 + s.objective));
        }
    }
}
