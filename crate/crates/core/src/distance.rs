//! Row-distance estimation through the robust nearest-neighbour proxy.
//!
//! All inner products are taken against the restricted matrix `A^S`, whose
//! rows and columns outside `S` are zero. Since zeroed coordinates add
//! nothing, the implementation works on the compact `|S| x |S|` block.

use rayon::prelude::*;

use crate::error::{Result, SabreError};
use crate::matrix::{dot, SymMatrix};
use crate::perm::Permutation;

/// Sorted index set `S ⊆ [n]` with a membership mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subset {
    n: usize,
    members: Vec<usize>,
    mask: Vec<bool>,
}

impl Subset {
    pub fn full(n: usize) -> Self {
        Subset {
            n,
            members: (0..n).collect(),
            mask: vec![true; n],
        }
    }

    /// Builds a subset from arbitrary indices; duplicates are merged.
    pub fn new(n: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut mask = vec![false; n];
        for k in indices {
            if k >= n {
                return Err(SabreError::param(format!("index {k} outside 0..{n}")));
            }
            mask[k] = true;
        }
        let members = (0..n).filter(|&k| mask[k]).collect();
        Ok(Subset { n, members, mask })
    }

    /// `[n]` minus the given indices.
    pub fn complement_of(n: usize, excluded: &[usize]) -> Result<Self> {
        let mut mask = vec![true; n];
        for &k in excluded {
            if k >= n {
                return Err(SabreError::param(format!("index {k} outside 0..{n}")));
            }
            mask[k] = false;
        }
        let members = (0..n).filter(|&k| mask[k]).collect();
        Ok(Subset { n, members, mask })
    }

    pub fn universe(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    #[inline]
    pub fn contains(&self, k: usize) -> bool {
        self.mask[k]
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }
}

/// `A^S (A^S)^T` as an `n x n` matrix, zero outside `S x S`.
pub fn gram(a: &SymMatrix, s: &Subset) -> Result<SymMatrix> {
    check_subset(a, s, 1)?;
    let compact = compact_gram(a, s);
    let pos = local_index(s);
    SymMatrix::from_upper(a.n(), |i, j| match (pos[i], pos[j]) {
        (Some(x), Some(y)) => compact.get(x, y),
        _ => 0.0,
    })
}

fn check_subset(a: &SymMatrix, s: &Subset, needed: usize) -> Result<()> {
    if s.universe() != a.n() {
        return Err(SabreError::DimensionMismatch {
            expected: a.n(),
            found: s.universe(),
        });
    }
    if s.len() < needed {
        return Err(SabreError::SubsetTooSmall { needed, got: s.len() });
    }
    Ok(())
}

fn local_index(s: &Subset) -> Vec<Option<usize>> {
    let mut pos = vec![None; s.universe()];
    for (x, &k) in s.members().iter().enumerate() {
        pos[k] = Some(x);
    }
    pos
}

/// Gram matrix of the compact block `A[S, S]`, indexed by position in `S`.
pub(crate) fn compact_gram(a: &SymMatrix, s: &Subset) -> SymMatrix {
    let m = s.members();
    let block: Vec<Vec<f64>> = m
        .iter()
        .map(|&i| {
            let row = a.row(i);
            m.iter().map(|&k| row[k]).collect()
        })
        .collect();
    let len = m.len();
    let upper: Vec<Vec<f64>> = (0..len)
        .into_par_iter()
        .map(|x| (x..len).map(|y| dot(&block[x], &block[y])).collect())
        .collect();
    let mut data = vec![0.0; len * len];
    for (x, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let y = x + off;
            data[x * len + y] = v;
            data[y * len + x] = v;
        }
    }
    SymMatrix::from_row_major(len, data).expect("mirrored upper triangle is symmetric")
}

/// `max_k |g[q][k] - g[c][k]|` over all `k` except `q` and `c`, abandoned
/// as soon as the running maximum cannot beat `(best, best_idx)`.
#[inline]
fn criterion(g: &SymMatrix, q: usize, c: usize, best: f64, best_idx: usize) -> Option<f64> {
    let (rq, rc) = (g.row(q), g.row(c));
    let beaten = |v: f64| v > best || (v == best && c > best_idx);
    let (lo, hi) = if q < c { (q, c) } else { (c, q) };
    let mut running = 0.0f64;
    for range in [0..lo, lo + 1..hi, hi + 1..rq.len()] {
        let (xs, ys) = (&rq[range.clone()], &rc[range]);
        for (cx, cy) in xs.chunks(32).zip(ys.chunks(32)) {
            for (x, y) in cx.iter().zip(cy) {
                running = running.max((x - y).abs());
            }
            if beaten(running) {
                return None;
            }
        }
    }
    Some(running)
}

/// Proxy of `q` on a compact Gram matrix: the candidate `c` minimising
/// `max_{k != q, c} |g[q][k] - g[c][k]|`, ties to the smallest index.
/// Candidates listed in `skip` are ignored, as are rows that are entirely
/// zero because they were removed from the subset.
pub(crate) fn proxy_on(g: &SymMatrix, q: usize, skip: &[usize]) -> usize {
    let s = g.n();
    let gqq = g.get(q, q);
    // Trying nearby rows first makes the pruning bite early.
    let mut order: Vec<(f64, usize)> = (0..s)
        .filter(|&c| c != q && !skip.contains(&c))
        .map(|c| (gqq + g.get(c, c) - 2.0 * g.get(q, c), c))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut best = f64::INFINITY;
    let mut best_idx = usize::MAX;
    for &(_, c) in &order {
        if let Some(v) = criterion(g, q, c, best, best_idx) {
            if v < best || (v == best && c < best_idx) {
                best = v;
                best_idx = c;
            }
        }
    }
    best_idx
}

/// Nearest-neighbour proxies `m̂_i` for every `i ∈ S` (None outside `S`).
pub fn nn_proxy(a: &SymMatrix, s: &Subset) -> Result<Vec<Option<usize>>> {
    check_subset(a, s, 3)?;
    let g = compact_gram(a, s);
    Ok(expand_proxies(s, &compact_proxies(&g)))
}

fn compact_proxies(g: &SymMatrix) -> Vec<usize> {
    (0..g.n()).into_par_iter().map(|q| proxy_on(g, q, &[])).collect()
}

fn expand_proxies(s: &Subset, local: &[usize]) -> Vec<Option<usize>> {
    let m = s.members();
    let mut out = vec![None; s.universe()];
    for (x, &p) in local.iter().enumerate() {
        out[m[x]] = Some(m[p]);
    }
    out
}

/// Estimated distances on a subset together with the proxies used.
#[derive(Clone, Debug)]
pub struct DistanceEstimate {
    pub matrix: SymMatrix,
    pub subset: Subset,
    pub proxies: Vec<Option<usize>>,
}

/// `D̂[i][j]^2 = n max(0, G[i][m̂_i] + G[j][m̂_j] - 2 G[i][j])` on `S x S`,
/// zero elsewhere. The multiplier is the full dimension `n`.
pub fn estimate_distance(a: &SymMatrix, s: &Subset) -> Result<DistanceEstimate> {
    check_subset(a, s, 3)?;
    let g = compact_gram(a, s);
    let local = compact_proxies(&g);
    let nf = a.n() as f64;
    let len = s.len();
    let anchor: Vec<f64> = (0..len).map(|x| g.get(x, local[x])).collect();
    let compact = SymMatrix::from_upper(len, |x, y| {
        if x == y {
            0.0
        } else {
            (nf * (anchor[x] + anchor[y] - 2.0 * g.get(x, y)).max(0.0)).sqrt()
        }
    })?;
    let m = s.members();
    let mut matrix = SymMatrix::zeros(a.n())?;
    for x in 0..len {
        for y in (x + 1)..len {
            matrix.set_sym(m[x], m[y], compact.get(x, y));
        }
    }
    Ok(DistanceEstimate {
        matrix,
        subset: s.clone(),
        proxies: expand_proxies(s, &local),
    })
}

/// Population distances
/// `D*[i][j](S) = n sqrt(mean_{k∈S} (F[π_i][π_k] - F[π_j][π_k])^2)`,
/// which for `S = [n]` equals `sqrt(n) ||F_{π_i} - F_{π_j}||`.
pub fn population_distance(f: &SymMatrix, pi: &Permutation, s: &Subset) -> Result<SymMatrix> {
    let n = f.n();
    if pi.len() != n {
        return Err(SabreError::DimensionMismatch {
            expected: n,
            found: pi.len(),
        });
    }
    check_subset(f, s, 1)?;
    let fp = f.read_through(pi.positions())?;
    let m = s.members();
    let nf = n as f64;
    let len = m.len() as f64;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ri = fp.row(i);
            (i..n)
                .map(|j| {
                    let rj = fp.row(j);
                    let ss: f64 = m.iter().map(|&k| (ri[k] - rj[k]).powi(2)).sum();
                    nf * (ss / len).sqrt()
                })
                .collect()
        })
        .collect();
    SymMatrix::from_upper(n, |i, j| rows[i][j - i])
}

/// Gram matrix of `A` restricted to `[n] \ {i, j}`: a rank-two downdate of
/// the full Gram matrix with rows and columns `i`, `j` zeroed.
pub(crate) fn leave_two_out_gram(full: &SymMatrix, a: &SymMatrix, i: usize, j: usize) -> SymMatrix {
    let n = full.n();
    let (ai, aj) = (a.row(i), a.row(j));
    let mut data = vec![0.0; n * n];
    for k in 0..n {
        if k == i || k == j {
            continue;
        }
        let gk = full.row(k);
        let (aki, akj) = (ai[k], aj[k]);
        let out = &mut data[k * n..(k + 1) * n];
        for l in 0..n {
            out[l] = gk[l] - aki * ai[l] - akj * aj[l];
        }
        out[i] = 0.0;
        out[j] = 0.0;
    }
    // Mirror the upper triangle so the result is bit-symmetric.
    for k in 0..n {
        for l in (k + 1)..n {
            data[l * n + k] = data[k * n + l];
        }
    }
    SymMatrix::from_row_major(n, data).expect("mirrored")
}

/// Distances `D̂^{S}[p][k]` for the listed targets only, where `g` is the
/// `n x n` Gram matrix of `A^S` and `excluded = [n] \ S`.
pub(crate) fn distances_from(
    g: &SymMatrix,
    n_mult: f64,
    p: usize,
    targets: &[usize],
    excluded: &[usize],
    proxy_cache: &mut Vec<Option<usize>>,
) -> Vec<f64> {
    let mut proxy = |q: usize| -> usize {
        if let Some(m) = proxy_cache[q] {
            return m;
        }
        let m = proxy_on(g, q, excluded);
        proxy_cache[q] = Some(m);
        m
    };
    let mp = proxy(p);
    let gp = g.get(p, mp);
    targets
        .iter()
        .map(|&k| {
            if k == p {
                return 0.0;
            }
            let mk = proxy(k);
            (n_mult * (gp + g.get(k, mk) - 2.0 * g.get(p, k)).max(0.0)).sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::gen_f_alpha;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SymMatrix::from_upper(n, |_, _| rng.random::<f64>() * 2.0 - 1.0).unwrap()
    }

    #[test]
    fn gram_of_identity_and_masking() {
        let a = SymMatrix::identity(5).unwrap();
        assert_eq!(gram(&a, &Subset::full(5)).unwrap(), a);
        let a = random_sym(6, 1);
        let s = Subset::complement_of(6, &[2]).unwrap();
        let g = gram(&a, &s).unwrap();
        assert!((0..6).all(|k| g.get(2, k) == 0.0));
    }

    #[test]
    fn gram_differences_are_inner_products() {
        let a = random_sym(6, 2);
        let g = gram(&a, &Subset::full(6)).unwrap();
        for k in 0..6 {
            for i in 0..6 {
                for j in 0..6 {
                    let direct: f64 = (0..6).map(|m| a.get(k, m) * (a.get(i, m) - a.get(j, m))).sum();
                    assert!((g.get(k, i) - g.get(k, j) - direct).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn duplicate_rows_are_each_others_proxy() {
        let base = random_sym(7, 3);
        // Make items 0 and 1 identical (rows and columns).
        let a = SymMatrix::from_upper(7, |i, j| {
            let m = |x: usize| if x == 1 { 0 } else { x };
            base.get(m(i), m(j))
        })
        .unwrap();
        let p = nn_proxy(&a, &Subset::full(7)).unwrap();
        assert_eq!(p[0], Some(1));
        assert_eq!(p[1], Some(0));
        let est = estimate_distance(&a, &Subset::full(7)).unwrap();
        assert_eq!(est.matrix.get(0, 1), 0.0);
    }

    #[test]
    fn noiseless_proxies_are_neighbours() {
        let f = gen_f_alpha(6, 1.0).unwrap();
        let p = nn_proxy(&f, &Subset::full(6)).unwrap();
        for i in 1..5 {
            let m = p[i].unwrap();
            assert!(m == i - 1 || m == i + 1, "i={i} m={m}");
        }
    }

    #[test]
    fn estimate_is_zero_outside_subset() {
        let a = random_sym(10, 4);
        let s = Subset::new(10, [0, 2, 3, 5, 9]).unwrap();
        let est = estimate_distance(&a, &s).unwrap();
        for i in 0..10 {
            assert_eq!(est.matrix.get(i, i), 0.0);
            for j in 0..10 {
                let v = est.matrix.get(i, j);
                assert!(v >= 0.0);
                if !s.contains(i) || !s.contains(j) {
                    assert_eq!(v, 0.0);
                }
            }
            assert_eq!(est.proxies[i].is_some(), s.contains(i));
        }
        assert!(estimate_distance(&a, &Subset::new(10, [1, 2]).unwrap()).is_err());
    }

    #[test]
    fn population_distance_of_f1() {
        let f = gen_f_alpha(4, 1.0).unwrap();
        let d = population_distance(&f, &Permutation::identity(4), &Subset::full(4)).unwrap();
        assert!((d.get(0, 1) - 1.0).abs() < 1e-12);
        assert_eq!(d.get(2, 2), 0.0);
    }

    #[test]
    fn leave_two_out_gram_matches_direct() {
        let a = random_sym(9, 5);
        let full = gram(&a, &Subset::full(9)).unwrap();
        let fast = leave_two_out_gram(&full, &a, 2, 6);
        let slow = gram(&a, &Subset::complement_of(9, &[2, 6]).unwrap()).unwrap();
        assert!(fast.max_abs_diff(&slow).unwrap() < 1e-12);
    }
}
