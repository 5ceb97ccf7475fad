//! Sparse row operators and a banded LU factorization with partial pivoting.

use crate::error::{LabError, Result};

/// A linear operator stored row by row, with an optional constant term per row.
#[derive(Clone, Debug, Default)]
pub struct SparseRows {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub offset: Vec<f64>,
}

impl SparseRows {
    pub fn new(n: usize) -> Self {
        Self { rows: vec![Vec::new(); n], offset: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `(A u)_i + offset_i`.
    pub fn apply_row(&self, i: usize, u: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(j, a)| a * u[j]).sum::<f64>() + self.offset[i]
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        (0..self.rows.len()).map(|i| self.apply_row(i, u)).collect()
    }

    /// Largest `|i − j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }
}

/// LU factors of a banded matrix, LAPACK `gbtrf` layout.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    fn ldab(kl: usize, ku: usize) -> usize {
        2 * kl + ku + 1
    }

    /// Factors the square matrix whose rows are `rows` (duplicate columns are summed).
    pub fn factor(rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let n = rows.len();
        let mut kl = 0;
        let mut ku = 0;
        for (i, r) in rows.iter().enumerate() {
            for &(j, _) in r {
                if j > i {
                    ku = ku.max(j - i);
                } else {
                    kl = kl.max(i - j);
                }
            }
        }
        let ldab = Self::ldab(kl, ku);
        let kv = kl + ku;
        let mut ab = vec![0.0; ldab * n];
        for (i, r) in rows.iter().enumerate() {
            for &(j, a) in r {
                ab[kv + i - j + j * ldab] += a;
            }
        }
        let mut ipiv = vec![0; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ldab;
            let mut jp = 0;
            let mut best = ab[col + kv].abs();
            for i in 1..=km {
                let v = ab[col + kv + i].abs();
                if v > best {
                    best = v;
                    jp = i;
                }
            }
            ipiv[j] = j + jp;
            if best == 0.0 || !best.is_finite() {
                return Err(LabError::SingularMatrix(j));
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let off = c - j;
                    let a = (kv + jp) as isize - off as isize;
                    let b = kv as isize - off as isize;
                    if a >= 0 && b >= 0 {
                        ab.swap(c * ldab + a as usize, c * ldab + b as usize);
                    }
                }
            }
            let piv = ab[col + kv];
            for i in 1..=km {
                ab[col + kv + i] /= piv;
            }
            for c in (j + 1)..=ju {
                let off = c - j;
                let top = ab[c * ldab + kv - off];
                if top == 0.0 {
                    continue;
                }
                for i in 1..=km {
                    let l = ab[col + kv + i];
                    ab[c * ldab + kv + i - off] -= l * top;
                }
            }
        }
        Ok(Self { n, kl, ku, ab, ipiv })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let ldab = Self::ldab(self.kl, self.ku);
        let kv = self.kl + self.ku;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = self.kl.min(n - 1 - j);
            let bj = b[j];
            if bj != 0.0 {
                for i in 1..=km {
                    b[j + i] -= self.ab[j * ldab + kv + i] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[j * ldab + kv];
            let bj = b[j];
            if bj != 0.0 {
                for i in 1..=kv.min(j) {
                    b[j - i] -= self.ab[j * ldab + kv - i] * bj;
                }
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
