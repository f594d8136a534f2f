//! Banded storage and LU factorization with partial pivoting.
//!
//! Rows are stored with room for `kl` extra super-diagonals so that row
//! interchanges during elimination never leave the band.

use crate::error::{Result, SolverError};

#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + j + self.kl - i
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    /// Adds `value` to entry `(i, j)`; panics if outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            self.in_band(i, j),
            "entry ({i},{j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let k = self.idx(i, j);
        self.data[k] += value;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.idx(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// Iterates over the stored nonzero pattern as `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            (lo..=hi).map(move |j| (i, j, self.data[self.idx(i, j)]))
        })
    }

    pub fn factorize(&self) -> Result<BandLu> {
        let n = self.n;
        let kl = self.kl;
        let reach = kl + self.ku;
        let mut a = self.clone();
        let mut pivots = vec![0usize; n];
        let mut mult = vec![0.0; n * kl.max(1)];

        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = a.data[a.idx(k, k)].abs();
            for i in k + 1..=last {
                let v = a.data[a.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(SolverError::SingularJacobian { column: k });
            }
            pivots[k] = p;
            let col_end = (k + reach).min(n - 1);
            if p != k {
                for j in k..=col_end {
                    let (ik, ip) = (a.idx(k, j), a.idx(p, j));
                    a.data.swap(ik, ip);
                }
            }
            let pivot = a.data[a.idx(k, k)];
            for i in k + 1..=last {
                let m = a.data[a.idx(i, k)] / pivot;
                mult[k * kl + (i - k - 1)] = m;
                if m != 0.0 {
                    for j in k + 1..=col_end {
                        let akj = a.data[a.idx(k, j)];
                        let ij = a.idx(i, j);
                        a.data[ij] -= m * akj;
                    }
                }
            }
        }
        Ok(BandLu {
            factors: a,
            pivots,
            mult,
        })
    }

    /// Factorizes and solves, then applies one step of iterative refinement
    /// when the relative residual exceeds `rel_tol`.
    pub fn solve(&self, rhs: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
        let lu = self.factorize()?;
        lu.solve_refined(self, rhs, rel_tol)
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    factors: BandMatrix,
    pivots: Vec<usize>,
    mult: Vec<f64>,
}

impl BandLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let a = &self.factors;
        let n = a.n;
        let kl = a.kl;
        let reach = kl + a.ku;
        assert_eq!(rhs.len(), n);
        let mut x = rhs.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let last = (k + kl).min(n - 1);
            let xk = x[k];
            for i in k + 1..=last {
                x[i] -= self.mult[k * kl + (i - k - 1)] * xk;
            }
        }
        for i in (0..n).rev() {
            let hi = (i + reach).min(n - 1);
            let mut s = x[i];
            for j in i + 1..=hi {
                s -= a.data[a.idx(i, j)] * x[j];
            }
            x[i] = s / a.data[a.idx(i, i)];
        }
        x
    }

    pub fn solve_refined(&self, original: &BandMatrix, rhs: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
        let mut x = self.solve(rhs);
        let scale = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if scale == 0.0 {
            return Ok(x);
        }
        let mut res = relative_residual(original, &x, rhs, scale);
        if res > rel_tol {
            let ax = original.mul_vec(&x);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, y)| b - y).collect();
            let dx = self.solve(&r);
            x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
            res = relative_residual(original, &x, rhs, scale);
            if res > rel_tol {
                return Err(SolverError::LinearSolve { residual: res });
            }
        }
        Ok(x)
    }
}

fn relative_residual(a: &BandMatrix, x: &[f64], b: &[f64], scale: f64) -> f64 {
    let ax = a.mul_vec(x);
    ax.iter().zip(b).map(|(y, bi)| (y - bi) * (y - bi)).sum::<f64>().sqrt() / scale
}
