//! Sparse row assembly and a banded LU with partial pivoting.
//!
//! The saddle systems here are assembled row by row with arbitrary stencils,
//! then funneled into a band factorization sized from the actual entries.
//! Partial pivoting can push fill up to kl extra superdiagonals, so rows are
//! stored with width 2*kl + ku + 1. Everything stays dense-per-row and
//! allocation-free after `factor`, which is plenty at desk scale; the dense
//! LU from nalgebra serves as the correctness oracle in tests.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinsolveError {
    #[error("matrix is numerically singular at elimination step {0} (pivot {1:.3e})")]
    Singular(usize, f64),
    #[error("rhs length {0} does not match system size {1}")]
    RhsMismatch(usize, usize),
    #[error("entry ({0}, {1}) outside system of size {2}")]
    OutOfRange(usize, usize, usize),
}

/// Row-wise sparse accumulator for one square system.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl LinearSystem {
    pub fn new(n: usize) -> Self {
        LinearSystem { n, rows: vec![Vec::new(); n] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) -> Result<(), LinsolveError> {
        if row >= self.n || col >= self.n {
            return Err(LinsolveError::OutOfRange(row, col, self.n));
        }
        if value == 0.0 {
            return Ok(());
        }
        if let Some(slot) = self.rows[row].iter_mut().find(|(c, _)| *c == col) {
            slot.1 += value;
        } else {
            self.rows[row].push((col, value));
        }
        Ok(())
    }

    /// Replace a row entirely (used for boundary-condition rows).
    pub fn set_row(&mut self, row: usize, entries: Vec<(usize, f64)>) {
        self.rows[row] = entries;
    }

    pub fn row(&self, row: usize) -> &[(usize, f64)] {
        &self.rows[row]
    }

    /// Lower/upper bandwidths of the assembled pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0usize;
        let mut ku = 0usize;
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, _) in row {
                if c < r {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        (kl, ku)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn factor_banded(&self) -> Result<BandedLu, LinsolveError> {
        let (kl, ku) = self.bandwidths();
        let mut lu = BandedLu::new(self.n, kl, ku);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                lu.set(r, c, lu.get(r, c) + v);
            }
        }
        lu.factor()?;
        Ok(lu)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (r, row) in self.rows.iter().enumerate() {
            y[r] = row.iter().map(|&(c, v)| v * x[c]).sum();
        }
        y
    }
}

/// Band matrix with room for pivoting fill; row i stores columns
/// [i - kl, i + kl + ku] contiguously.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    perm: Vec<usize>,
    factored: bool,
}

impl BandedLu {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandedLu {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            perm: (0..n).collect(),
            factored: false,
        }
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> Option<usize> {
        let lo = r.saturating_sub(self.kl);
        if c < lo || c > r + self.kl + self.ku || c >= self.n {
            return None;
        }
        Some(r * self.width + (c - lo))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.slot(r, c).map(|s| self.data[s]).unwrap_or(0.0)
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        let s = self
            .slot(r, c)
            .unwrap_or_else(|| panic!("({r}, {c}) outside band kl={} ku={}", self.kl, self.ku));
        self.data[s] = v;
    }

    /// In-place LU with partial pivoting. Multipliers land in the strictly
    /// lower part, U in the upper; `perm[k]` records the row swapped into
    /// position k at step k.
    pub fn factor(&mut self) -> Result<(), LinsolveError> {
        let n = self.n;
        for k in 0..n {
            let imax = (k + self.kl).min(n - 1);
            let mut piv_row = k;
            let mut piv_val = self.get(k, k).abs();
            for i in (k + 1)..=imax {
                let v = self.get(i, k).abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = i;
                }
            }
            if piv_val < 1e-300 {
                return Err(LinsolveError::Singular(k, piv_val));
            }
            self.perm[k] = piv_row;
            if piv_row != k {
                // Swap the active parts of rows k and piv_row.
                let hi = (k + self.kl + self.ku).min(n - 1);
                for c in k..=hi {
                    let a = self.get(k, c);
                    let b = self.get(piv_row, c);
                    self.set(k, c, b);
                    self.set(piv_row, c, a);
                }
            }
            let pivot = self.get(k, k);
            let hi = (k + self.kl + self.ku).min(n - 1);
            for i in (k + 1)..=imax {
                let m = self.get(i, k) / pivot;
                self.set(i, k, m);
                if m != 0.0 {
                    for c in (k + 1)..=hi {
                        let u = self.get(k, c);
                        if u != 0.0 {
                            let s = self.slot(i, c).expect("within widened band");
                            self.data[s] -= m * u;
                        }
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinsolveError> {
        assert!(self.factored, "solve called before factor");
        if rhs.len() != self.n {
            return Err(LinsolveError::RhsMismatch(rhs.len(), self.n));
        }
        let n = self.n;
        let mut x = rhs.to_vec();
        for k in 0..n {
            let p = self.perm[k];
            if p != k {
                x.swap(k, p);
            }
            let imax = (k + self.kl).min(n - 1);
            let xk = x[k];
            if xk != 0.0 {
                for i in (k + 1)..=imax {
                    x[i] -= self.get(i, k) * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let hi = (k + self.kl + self.ku).min(n - 1);
            let mut acc = x[k];
            for c in (k + 1)..=hi {
                acc -= self.get(k, c) * x[c];
            }
            x[k] = acc / self.get(k, k);
        }
        Ok(x)
    }
}
