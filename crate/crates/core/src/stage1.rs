//! First seriation: per-index graph bisections, a global orientation and
//! their aggregation into a partial comparison matrix.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SabreError};
use crate::matrix::SymMatrix;
use crate::perm::ComparisonMatrix;
use crate::unionfind::UnionFind;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub delta4: f64,
}

impl Thresholds {
    pub fn new(delta1: f64, delta2: f64, delta3: f64, delta4: f64) -> Result<Self> {
        let t = Thresholds {
            delta1,
            delta2,
            delta3,
            delta4,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, v) in self.as_array().iter().enumerate() {
            if !(*v > 0.0 && v.is_finite()) {
                return Err(SabreError::param(format!("delta{} must be positive, got {v}", k + 1)));
            }
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.delta1, self.delta2, self.delta3, self.delta4]
    }

    /// Ordering warnings; `delta1 <= delta2 <= delta3` is expected but not
    /// enforced.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.delta1 > self.delta2 {
            w.push(format!(
                "delta1 = {:.3} exceeds delta2 = {:.3}",
                self.delta1, self.delta2
            ));
        }
        if self.delta2 > self.delta3 {
            w.push(format!(
                "delta2 = {:.3} exceeds delta3 = {:.3}",
                self.delta2, self.delta3
            ));
        }
        w
    }
}

/// Which endpoints of an edge must be far from `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EdgeRule {
    /// At least one endpoint at distance `>= delta2`.
    #[default]
    Or,
    /// Both endpoints at distance `>= delta2`.
    And,
}

impl std::str::FromStr for EdgeRule {
    type Err = SabreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "or" => Ok(EdgeRule::Or),
            "and" => Ok(EdgeRule::And),
            other => Err(SabreError::param(format!("unknown edge rule '{other}'"))),
        }
    }
}

/// The two largest filtered components of the graph around one index.
/// `first` is never smaller than `second`; either may be empty.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bisection {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

/// For every vertex, the vertices within `delta1` (itself excluded).
fn close_lists(d: &SymMatrix, delta1: f64) -> Vec<Vec<u32>> {
    let n = d.n();
    (0..n)
        .into_par_iter()
        .map(|k| {
            let row = d.row(k);
            (0..n)
                .filter(|&l| l != k && row[l] <= delta1)
                .map(|l| l as u32)
                .collect()
        })
        .collect()
}

fn bisect_with(
    d: &SymMatrix,
    i: usize,
    close: &[Vec<u32>],
    th: &Thresholds,
    rule: EdgeRule,
    uf: &mut UnionFind,
) -> Bisection {
    let n = d.n();
    let di = d.row(i);
    uf.reset();
    // Every edge has a far endpoint, so scanning far vertices and their
    // close lists enumerates the whole edge set.
    for k in 0..n {
        if k == i || di[k] < th.delta2 {
            continue;
        }
        for &l in &close[k] {
            let l = l as usize;
            if l == i || (rule == EdgeRule::And && di[l] < th.delta2) {
                continue;
            }
            uf.union(k, l);
        }
    }
    let mut size = vec![0usize; n];
    let mut min_vertex = vec![usize::MAX; n];
    let mut reaches = vec![false; n];
    for k in 0..n {
        if k == i {
            continue;
        }
        let r = uf.find(k);
        size[r] += 1;
        min_vertex[r] = min_vertex[r].min(k);
        reaches[r] |= di[k] >= th.delta3;
    }
    let mut roots: Vec<usize> = (0..n).filter(|&r| size[r] > 0 && reaches[r]).collect();
    roots.sort_by(|&a, &b| size[b].cmp(&size[a]).then(min_vertex[a].cmp(&min_vertex[b])));
    let members = |root: Option<&usize>, uf: &mut UnionFind| -> Vec<usize> {
        match root {
            Some(&r) => (0..n).filter(|&k| k != i && uf.find(k) == r).collect(),
            None => Vec::new(),
        }
    };
    let first = members(roots.first(), uf);
    let second = members(roots.get(1), uf);
    Bisection { first, second }
}

/// Graph on `[n] \ {i}` linking `k, l` when `D[k][l] <= delta1` and the
/// edge rule holds for `delta2`; keeps components holding a vertex at
/// distance `>= delta3` from `i` and returns the two largest (ties by the
/// smallest member).
pub fn build_bisection(d: &SymMatrix, i: usize, th: &Thresholds, rule: EdgeRule) -> Bisection {
    let close = close_lists(d, th.delta1);
    let mut uf = UnionFind::new(d.n());
    bisect_with(d, i, &close, th, rule, &mut uf)
}

pub fn build_all_bisections(d: &SymMatrix, th: &Thresholds, rule: EdgeRule) -> Vec<Bisection> {
    let n = d.n();
    let close = close_lists(d, th.delta1);
    (0..n)
        .into_par_iter()
        .map_init(|| UnionFind::new(n), |uf, i| bisect_with(d, i, &close, th, rule, uf))
        .collect()
}

/// Oriented sides: `left[i]` and `right[i]` estimate the items placed
/// before and after `i`, up to one global reversal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrientedBisections {
    pub left: Vec<Vec<usize>>,
    pub right: Vec<Vec<usize>>,
    pub anchor: usize,
    /// Indices with a single component lying in neither anchor side,
    /// oriented by overlap with the anchor sides.
    pub overlap_oriented: usize,
}

fn overlap(a: &[usize], mask: &[bool]) -> usize {
    a.iter().filter(|&&k| mask[k]).count()
}

fn to_mask(n: usize, set: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &k in set {
        m[k] = true;
    }
    m
}

/// Global orientation of the bisections around an anchor `c` maximising
/// `min(|G_c|, |G_c'|)` (ties to the smallest index). Without any index
/// holding two components there is no left/right reference and the
/// orientation is refused.
pub fn orient(bisections: &[Bisection]) -> Result<OrientedBisections> {
    let n = bisections.len();
    let mut c = 0;
    let mut best = 0;
    for (i, b) in bisections.iter().enumerate() {
        let m = b.second.len();
        if m > best {
            best = m;
            c = i;
        }
    }
    if best == 0 {
        return Err(SabreError::NoBisection);
    }
    let lc = to_mask(n, &bisections[c].first);
    let rc = to_mask(n, &bisections[c].second);
    let mut left = vec![Vec::new(); n];
    let mut right = vec![Vec::new(); n];
    let mut overlap_oriented = 0;
    for (i, b) in bisections.iter().enumerate() {
        if i == c {
            left[i] = b.first.clone();
            right[i] = b.second.clone();
            continue;
        }
        if b.first.is_empty() {
            continue;
        }
        if b.second.is_empty() {
            let to_right = if lc[i] {
                true
            } else if rc[i] {
                false
            } else {
                // Item lies in neither anchor side; side with the larger
                // overlap wins, ties go left.
                overlap_oriented += 1;
                overlap(&b.first, &rc) > overlap(&b.first, &lc)
            };
            if to_right {
                right[i] = b.first.clone();
            } else {
                left[i] = b.first.clone();
            }
        } else if overlap(&b.first, &lc) == 0 || overlap(&b.second, &rc) == 0 {
            left[i] = b.second.clone();
            right[i] = b.first.clone();
        } else {
            left[i] = b.first.clone();
            right[i] = b.second.clone();
        }
    }
    Ok(OrientedBisections {
        left,
        right,
        anchor: c,
        overlap_oriented,
    })
}

/// `H[i][j] = -1` if `i ∈ L_j` or `j ∈ R_i`; else `+1` if `i ∈ R_j` or
/// `j ∈ L_i`; else 0. Computed for `i < j` and mirrored. Returns the matrix
/// and the number of pairs that carried evidence both ways.
pub fn aggregate(oriented: &OrientedBisections) -> (ComparisonMatrix, usize) {
    let n = oriented.left.len();
    // side[a * n + b] = -1 if b ∈ L_a, +1 if b ∈ R_a.
    let mut side = vec![0i8; n * n];
    for a in 0..n {
        for &b in &oriented.left[a] {
            side[a * n + b] = -1;
        }
        for &b in &oriented.right[a] {
            side[a * n + b] = 1;
        }
    }
    let mut h = ComparisonMatrix::zeros(n);
    let mut conflicts = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let i_in_j = side[j * n + i];
            let j_in_i = side[i * n + j];
            let neg = i_in_j == -1 || j_in_i == 1;
            let pos = i_in_j == 1 || j_in_i == -1;
            if neg && pos {
                conflicts += 1;
            }
            if neg {
                h.set_pair(i, j, -1);
            } else if pos {
                h.set_pair(i, j, 1);
            }
        }
    }
    (h, conflicts)
}

#[derive(Clone, Debug)]
pub struct Stage1Output {
    pub h: ComparisonMatrix,
    pub bisections: Vec<Bisection>,
    /// None when no index had two components.
    pub oriented: Option<OrientedBisections>,
    pub conflicts: usize,
}

/// Bisections, orientation and aggregation in one call. If no index has two
/// components the comparison matrix is all zero.
pub fn first_seriation(d: &SymMatrix, th: &Thresholds, rule: EdgeRule) -> Stage1Output {
    let bisections = build_all_bisections(d, th, rule);
    match orient(&bisections) {
        Ok(o) => {
            let (h, conflicts) = aggregate(&o);
            Stage1Output {
                h,
                bisections,
                oriented: Some(o),
                conflicts,
            }
        }
        Err(_) => Stage1Output {
            h: ComparisonMatrix::zeros(d.n()),
            bisections,
            oriented: None,
            conflicts: 0,
        },
    }
}
