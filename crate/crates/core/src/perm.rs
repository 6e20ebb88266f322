//! Latent orders, comparison matrices and the algebra linking them.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SabreError};
use crate::matrix::SymMatrix;

/// Position vector `positions[i] ∈ 1..=n` for item `i` (items are 0-based,
/// positions 1-based).
///
/// An exact permutation is a bijection. An approximate permutation with
/// spread `zeta` may repeat positions, but every `k` in `1..=n` lies within
/// `zeta` of some position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation {
    positions: Vec<usize>,
    zeta: Option<usize>,
}

impl Permutation {
    /// Exact permutation; rejects anything that is not a bijection of `1..=n`.
    pub fn new(positions: Vec<usize>) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return Err(SabreError::EmptyMatrix);
        }
        let mut seen = vec![false; n];
        for &p in &positions {
            if p == 0 || p > n || seen[p - 1] {
                return Err(SabreError::NotBijective { n });
            }
            seen[p - 1] = true;
        }
        Ok(Permutation { positions, zeta: None })
    }

    /// Approximate permutation with spread `zeta`.
    pub fn approximate(positions: Vec<usize>, zeta: usize) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return Err(SabreError::EmptyMatrix);
        }
        if let Some(&bad) = positions.iter().find(|&&p| p == 0 || p > n) {
            return Err(SabreError::InvalidPermutation(format!(
                "position {bad} outside 1..={n}"
            )));
        }
        let spread = max_spread(&positions);
        if spread > zeta {
            return Err(SabreError::InvalidPermutation(format!(
                "spread {spread} exceeds zeta {zeta}"
            )));
        }
        Ok(Permutation {
            positions,
            zeta: Some(zeta),
        })
    }

    /// Exact if the positions form a bijection, otherwise approximate with
    /// the smallest admissible spread.
    pub fn infer(positions: Vec<usize>) -> Result<Self> {
        match Self::new(positions.clone()) {
            Ok(p) => Ok(p),
            Err(SabreError::NotBijective { .. }) => {
                let z = max_spread_checked(&positions)?;
                Self::approximate(positions, z)
            }
            Err(e) => Err(e),
        }
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            positions: (1..=n).collect(),
            zeta: None,
        }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut positions: Vec<usize> = (1..=n).collect();
        positions.shuffle(rng);
        Permutation { positions, zeta: None }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn into_positions(self) -> Vec<usize> {
        self.positions
    }

    pub fn is_exact(&self) -> bool {
        self.zeta.is_none()
    }

    /// Declared spread; `None` for exact permutations.
    pub fn zeta(&self) -> Option<usize> {
        self.zeta
    }

    pub fn as_scores(&self) -> Vec<f64> {
        self.positions.iter().map(|&p| p as f64).collect()
    }

    /// Inverse of an exact permutation: `inv[positions[i] - 1] = i + 1`.
    pub fn inverse(&self) -> Result<Permutation> {
        self.require_exact()?;
        let mut inv = vec![0; self.len()];
        for (i, &p) in self.positions.iter().enumerate() {
            inv[p - 1] = i + 1;
        }
        Ok(Permutation {
            positions: inv,
            zeta: None,
        })
    }

    pub(crate) fn require_exact(&self) -> Result<()> {
        if self.is_exact() {
            Ok(())
        } else {
            Err(SabreError::NotBijective { n: self.len() })
        }
    }
}

/// `max_k min_i |positions[i] - k|` over `k` in `1..=n`.
pub fn max_spread(positions: &[usize]) -> usize {
    let n = positions.len();
    let mut present = vec![false; n + 2];
    for &p in positions {
        if p >= 1 && p <= n {
            present[p] = true;
        }
    }
    // Distance to the nearest present value, sweeping left then right.
    let mut dist = vec![usize::MAX; n + 1];
    let mut last: Option<usize> = None;
    for k in 1..=n {
        if present[k] {
            last = Some(k);
        }
        if let Some(l) = last {
            dist[k] = k - l;
        }
    }
    last = None;
    for k in (1..=n).rev() {
        if present[k] {
            last = Some(k);
        }
        if let Some(l) = last {
            dist[k] = dist[k].min(l - k);
        }
    }
    dist[1..].iter().copied().max().unwrap_or(0)
}

fn max_spread_checked(positions: &[usize]) -> Result<usize> {
    let n = positions.len();
    if let Some(&bad) = positions.iter().find(|&&p| p == 0 || p > n) {
        return Err(SabreError::InvalidPermutation(format!(
            "position {bad} outside 1..={n}"
        )));
    }
    Ok(max_spread(positions))
}

pub fn reverse_permutation(pi: &Permutation) -> Permutation {
    let n = pi.len();
    Permutation {
        positions: pi.positions.iter().map(|&p| n + 1 - p).collect(),
        zeta: pi.zeta,
    }
}

/// `result[i][j] = F[π_i][π_j]` for an exact `π`.
pub fn permute_matrix(f: &SymMatrix, pi: &Permutation) -> Result<SymMatrix> {
    if pi.len() != f.n() {
        return Err(SabreError::DimensionMismatch {
            expected: f.n(),
            found: pi.len(),
        });
    }
    pi.require_exact()?;
    f.read_through(pi.positions())
}

/// Like [`permute_matrix`] but accepts approximate permutations, whose
/// repeated positions produce repeated rows.
pub fn read_through(f: &SymMatrix, pi: &Permutation) -> Result<SymMatrix> {
    f.read_through(pi.positions())
}

/// Antisymmetric matrix with entries in {-1, 0, +1} and zero diagonal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComparisonMatrix {
    n: usize,
    data: Vec<i8>,
}

impl ComparisonMatrix {
    pub fn zeros(n: usize) -> Self {
        ComparisonMatrix {
            n,
            data: vec![0; n * n],
        }
    }

    pub fn from_rows(rows: Vec<Vec<i8>>) -> Result<Self> {
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
        let m = ComparisonMatrix { n, data };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            if self.get(i, i) != 0 {
                return Err(SabreError::InvalidComparison {
                    i,
                    j: i,
                    reason: "nonzero diagonal",
                });
            }
            for j in 0..n {
                let v = self.get(i, j);
                if !(-1..=1).contains(&v) {
                    return Err(SabreError::InvalidComparison {
                        i,
                        j,
                        reason: "entry outside {-1, 0, 1}",
                    });
                }
                if v != -self.get(j, i) {
                    return Err(SabreError::InvalidComparison {
                        i,
                        j,
                        reason: "not antisymmetric",
                    });
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[i8] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Sets `(i, j)` to `v` and `(j, i)` to `-v`. Panics on the diagonal
    /// unless `v` is zero.
    pub fn set_pair(&mut self, i: usize, j: usize, v: i8) {
        assert!(i != j || v == 0, "diagonal must stay zero");
        assert!((-1..=1).contains(&v));
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = -v;
    }

    /// Entrywise negation, i.e. the matrix of the reversed order.
    pub fn negated(&self) -> Self {
        ComparisonMatrix {
            n: self.n,
            data: self.data.iter().map(|v| -v).collect(),
        }
    }

    /// Number of unordered pairs `i < j` with a nonzero entry.
    pub fn decided_pairs(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count() / 2
    }

    pub fn undecided_pairs(&self) -> usize {
        self.n * (self.n.saturating_sub(1)) / 2 - self.decided_pairs()
    }

    /// Sum of two matrices with disjoint supports.
    pub fn add_disjoint(&self, other: &ComparisonMatrix) -> Result<ComparisonMatrix> {
        if self.n != other.n {
            return Err(SabreError::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let mut data = Vec::with_capacity(self.data.len());
        for (k, (&a, &b)) in self.data.iter().zip(&other.data).enumerate() {
            if a != 0 && b != 0 {
                return Err(SabreError::InvalidComparison {
                    i: k / self.n,
                    j: k % self.n,
                    reason: "supports overlap",
                });
            }
            data.push(a + b);
        }
        Ok(ComparisonMatrix { n: self.n, data })
    }

    pub fn row_sums(&self) -> Vec<i64> {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|&v| v as i64).sum())
            .collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<i8>> {
        self.data.chunks_exact(self.n.max(1)).map(|r| r.to_vec()).collect()
    }
}

/// `H*[i][j] = -1` if `π_i < π_j`, `+1` if `π_j < π_i`, zero on the diagonal.
pub fn oracle_comparison_matrix(pi: &Permutation) -> Result<ComparisonMatrix> {
    pi.require_exact()?;
    let p = pi.positions();
    let n = p.len();
    let mut h = ComparisonMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            h.set_pair(i, j, if p[i] < p[j] { -1 } else { 1 });
        }
    }
    Ok(h)
}

/// Row-sum scores `(Σ_k H[i][k] + n + 1) / 2`. Half-integers appear when
/// `H` has undecided entries.
pub fn permutation_from_comparison(h: &ComparisonMatrix) -> Vec<f64> {
    let n = h.n() as i64;
    h.row_sums().into_iter().map(|s| (s + n + 1) as f64 / 2.0).collect()
}

/// Nearest integer with ties toward the lower value, clamped to `1..=n`.
pub fn round_scores(scores: &[f64]) -> Vec<usize> {
    let n = scores.len().max(1) as f64;
    scores
        .iter()
        .map(|&s| (s - 0.5).ceil().clamp(1.0, n) as usize)
        .collect()
}
