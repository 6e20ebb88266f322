//! Dense symmetric matrices and the inner-product kernel shared by the
//! distance estimator.

use crate::error::{Result, SabreError};

/// Dense symmetric real matrix stored row-major.
///
/// Every constructor either mirrors the upper triangle or checks exact
/// equality of `(i, j)` and `(j, i)`, so symmetry holds bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(SabreError::EmptyMatrix);
        }
        Ok(SymMatrix {
            n,
            data: vec![0.0; n * n],
        })
    }

    /// Builds a matrix by evaluating `f(i, j)` on the upper triangle
    /// (including the diagonal) and mirroring it.
    pub fn from_upper<F>(n: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> f64,
    {
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        Ok(m)
    }

    /// Takes ownership of a row-major buffer, rejecting any asymmetry.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(SabreError::EmptyMatrix);
        }
        if data.len() != n * n {
            return Err(SabreError::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if data[i * n + j].to_bits() != data[j * n + i].to_bits() {
                    return Err(SabreError::Asymmetric { i, j });
                }
            }
        }
        Ok(SymMatrix { n, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(SabreError::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            data.extend(row);
        }
        Self::from_row_major(n, data)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_upper(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    /// Sets `(i, j)` and `(j, i)` together.
    pub(crate) fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> Result<f64> {
        if self.n != other.n {
            return Err(SabreError::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn frobenius_distance(&self, other: &SymMatrix) -> Result<f64> {
        if self.n != other.n {
            return Err(SabreError::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    pub fn entries_within(&self, lo: f64, hi: f64) -> bool {
        self.data.iter().all(|&v| v >= lo && v <= hi)
    }

    /// Reads the matrix through a position vector: entry `(i, j)` of the
    /// result is `self[positions[i] - 1][positions[j] - 1]`. Positions are
    /// 1-based ranks and may repeat.
    pub(crate) fn read_through(&self, positions: &[usize]) -> Result<SymMatrix> {
        if positions.len() != self.n {
            return Err(SabreError::DimensionMismatch {
                expected: self.n,
                found: positions.len(),
            });
        }
        if let Some(&bad) = positions.iter().find(|&&p| p == 0 || p > self.n) {
            return Err(SabreError::InvalidPermutation(format!(
                "position {bad} outside 1..={}",
                self.n
            )));
        }
        Self::from_upper(self.n, |i, j| self.get(positions[i] - 1, positions[j] - 1))
    }
}

/// Inner product with eight independent accumulators. The summation order
/// is fixed, so the result is reproducible for a given pair of slices.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let x = &a[c * 8..c * 8 + 8];
        let y = &b[c * 8..c * 8 + 8];
        for t in 0..8 {
            acc[t] += x[t] * y[t];
        }
    }
    let mut tail = 0.0;
    for t in chunks * 8..a.len() {
        tail += a[t] * b[t];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_upper_is_exactly_symmetric() {
        let m = SymMatrix::from_upper(4, |i, j| (i * 10 + j) as f64 * 0.1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.get(i, j).to_bits(), m.get(j, i).to_bits());
            }
        }
    }

    #[test]
    fn rejects_asymmetry_and_empty() {
        let err = SymMatrix::from_rows(vec![vec![1.0, 2.0], vec![2.5, 1.0]]).unwrap_err();
        assert!(matches!(err, SabreError::Asymmetric { i: 0, j: 1 }));
        assert!(matches!(SymMatrix::zeros(0), Err(SabreError::EmptyMatrix)));
        assert!(SymMatrix::from_rows(vec![vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f64> = (0..19).map(|x| (x as f64).sin()).collect();
        let b: Vec<f64> = (0..19).map(|x| (x as f64 * 0.3).cos()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }
}
