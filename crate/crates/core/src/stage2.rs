//! Refined seriation: undecided pairs are re-evaluated with side sums over
//! comparison sets drawn from a part of the sample that excludes the pair.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::{distances_from, estimate_distance, gram, leave_two_out_gram, DistanceEstimate, Subset};
use crate::error::{Result, SabreError};
use crate::matrix::SymMatrix;
use crate::perm::ComparisonMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    #[default]
    Tripartition,
    LeaveOneOut,
}

impl std::str::FromStr for SplitMode {
    type Err = SabreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tripartition" => Ok(SplitMode::Tripartition),
            "leave-one-out" => Ok(SplitMode::LeaveOneOut),
            other => Err(SabreError::param(format!("unknown split mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitPlan {
    pub mode: SplitMode,
    pub n: usize,
    /// The three parts (sorted) in tripartition mode; empty otherwise.
    pub parts: Vec<Vec<usize>>,
    pub seed: u64,
}

/// Uniformly shuffled split of `[n]` into three parts whose sizes differ
/// by at most one.
pub fn tripartition(n: usize, seed: u64) -> Result<SplitPlan> {
    if n < 9 {
        return Err(SabreError::param(format!(
            "tripartition needs n >= 9 so every part has 3 items, got {n}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut parts: Vec<Vec<usize>> = (0..3)
        .map(|t| idx.iter().skip(t).step_by(3).copied().collect())
        .collect();
    for p in &mut parts {
        p.sort_unstable();
    }
    Ok(SplitPlan {
        mode: SplitMode::Tripartition,
        n,
        parts,
        seed,
    })
}

pub fn leave_one_out(n: usize) -> Result<SplitPlan> {
    if n < 5 {
        return Err(SabreError::param(format!(
            "leave-one-out needs n >= 5 so every reference set has 3 items, got {n}"
        )));
    }
    Ok(SplitPlan {
        mode: SplitMode::LeaveOneOut,
        n,
        parts: Vec::new(),
        seed: 0,
    })
}

/// `L_ij = {k : H[i][k] = H[j][k] = 1}`, `R_ij = {k : H[i][k] = H[j][k] = -1}`.
pub fn preliminary_sets(h: &ComparisonMatrix, i: usize, j: usize) -> (Vec<usize>, Vec<usize>) {
    let (hi, hj) = (h.row(i), h.row(j));
    let mut l = Vec::new();
    let mut r = Vec::new();
    for k in 0..h.n() {
        match (hi[k], hj[k]) {
            (1, 1) => l.push(k),
            (-1, -1) => r.push(k),
            _ => {}
        }
    }
    (l, r)
}

/// Reference set used for one pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reference {
    Part(usize),
    LeaveOut,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairContext {
    pub i: usize,
    pub j: usize,
    pub reference: Reference,
    pub anchor: usize,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

fn argmin_over(row: &[f64], members: &[usize]) -> usize {
    let mut best = members[0];
    for &p in &members[1..] {
        if row[p] < row[best] {
            best = p;
        }
    }
    best
}

/// Comparison sets of an undecided pair: the anchor `p` minimises the
/// stage-one distance `D[i][p]` over the reference set, then `L̃` and `R̃`
/// keep the members of `L_ij`, `R_ij` in the reference set with
/// `D̂ref[p][k] >= delta4`.
pub fn modified_sets(
    d: &SymMatrix,
    dref: &DistanceEstimate,
    h: &ComparisonMatrix,
    i: usize,
    j: usize,
    delta4: f64,
) -> Result<PairContext> {
    let s = &dref.subset;
    if s.contains(i) || s.contains(j) {
        return Err(SabreError::param(format!(
            "reference set must exclude the pair ({i}, {j})"
        )));
    }
    if s.is_empty() {
        return Err(SabreError::SubsetTooSmall { needed: 1, got: 0 });
    }
    let p = argmin_over(d.row(i), s.members());
    let (l, r) = preliminary_sets(h, i, j);
    let keep = |set: Vec<usize>| -> Vec<usize> {
        set.into_iter()
            .filter(|&k| s.contains(k) && dref.matrix.get(p, k) >= delta4)
            .collect()
    };
    Ok(PairContext {
        i,
        j,
        reference: Reference::LeaveOut,
        anchor: p,
        left: keep(l),
        right: keep(r),
    })
}

/// `5 sigma sqrt(n ln n)`.
pub fn decision_threshold(n: usize, sigma: f64) -> f64 {
    let nf = n as f64;
    5.0 * sigma * (nf * nf.ln()).sqrt()
}

/// Side-sum decision. `l` is tested before `r`. A left sum that is exactly
/// zero carries no information and falls through to the right sum, which
/// only matters when the threshold itself is zero.
pub fn evaluate_comparison(a_i: &[f64], a_j: &[f64], left: &[usize], right: &[usize], sigma: f64) -> i8 {
    let thr = decision_threshold(a_i.len(), sigma);
    let sum = |set: &[usize]| set.iter().map(|&k| a_i[k] - a_j[k]).sum::<f64>();
    let l = sum(left);
    if l != 0.0 && l.abs() >= thr {
        return if l > 0.0 { -1 } else { 1 };
    }
    let r = sum(right);
    if r != 0.0 && r.abs() >= thr {
        return if r > 0.0 { 1 } else { -1 };
    }
    0
}

#[derive(Clone, Debug)]
pub struct RefineOutput {
    pub h_hat: ComparisonMatrix,
    pub h_tilde: ComparisonMatrix,
    /// Pairs that entered the loop (undecided after stage one).
    pub examined: usize,
}

/// Re-evaluates every pair with `H[i][j] = 0` and returns `Ĥ = H + H̃`.
pub fn refine(
    h: &ComparisonMatrix,
    d: &SymMatrix,
    a: &SymMatrix,
    sigma: f64,
    delta4: f64,
    plan: &SplitPlan,
) -> Result<RefineOutput> {
    let n = a.n();
    if h.n() != n || d.n() != n || plan.n != n {
        return Err(SabreError::DimensionMismatch {
            expected: n,
            found: if h.n() != n {
                h.n()
            } else if d.n() != n {
                d.n()
            } else {
                plan.n
            },
        });
    }
    let decisions: Vec<Vec<(usize, i8)>> = match plan.mode {
        SplitMode::Tripartition => refine_tripartition(h, d, a, sigma, delta4, plan)?,
        SplitMode::LeaveOneOut => refine_leave_one_out(h, d, a, sigma, delta4)?,
    };
    let mut h_tilde = ComparisonMatrix::zeros(n);
    let mut examined = 0;
    for (i, row) in decisions.into_iter().enumerate() {
        for (j, v) in row {
            examined += 1;
            h_tilde.set_pair(i, j, v);
        }
    }
    let h_hat = h.add_disjoint(&h_tilde)?;
    Ok(RefineOutput {
        h_hat,
        h_tilde,
        examined,
    })
}

fn refine_tripartition(
    h: &ComparisonMatrix,
    d: &SymMatrix,
    a: &SymMatrix,
    sigma: f64,
    delta4: f64,
    plan: &SplitPlan,
) -> Result<Vec<Vec<(usize, i8)>>> {
    let n = a.n();
    if plan.parts.len() != 3 {
        return Err(SabreError::param("tripartition plan needs three parts"));
    }
    let mut part_of = vec![usize::MAX; n];
    for (t, part) in plan.parts.iter().enumerate() {
        for &k in part {
            part_of[k] = t;
        }
    }
    if part_of.contains(&usize::MAX) {
        return Err(SabreError::param("tripartition plan does not cover [n]"));
    }
    let estimates: Vec<DistanceEstimate> = plan
        .parts
        .iter()
        .map(|part| estimate_distance(a, &Subset::new(n, part.iter().copied())?))
        .collect::<Result<_>>()?;
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            for j in (i + 1)..n {
                if h.get(i, j) != 0 {
                    continue;
                }
                let t = (0..3).find(|&t| t != part_of[i] && t != part_of[j]).expect("3 parts");
                let mut ctx = modified_sets(d, &estimates[t], h, i, j, delta4).expect("i, j outside part t");
                ctx.reference = Reference::Part(t);
                let v = evaluate_comparison(a.row(i), a.row(j), &ctx.left, &ctx.right, sigma);
                out.push((j, v));
            }
            out
        })
        .collect())
}

/// Leave-one-out comparison sets for one pair, computing only the
/// distances from the anchor to the members of `L_ij ∪ R_ij`.
pub(crate) fn leave_one_out_sets(
    h: &ComparisonMatrix,
    d: &SymMatrix,
    a: &SymMatrix,
    full_gram: &SymMatrix,
    i: usize,
    j: usize,
    delta4: f64,
) -> PairContext {
    let n = a.n();
    let members: Vec<usize> = (0..n).filter(|&k| k != i && k != j).collect();
    let p = argmin_over(d.row(i), &members);
    let (l, r) = preliminary_sets(h, i, j);
    let mut targets = l.clone();
    targets.extend(&r);
    let (left, right) = if targets.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        let g = leave_two_out_gram(full_gram, a, i, j);
        let mut cache = vec![None; n];
        let dist = distances_from(&g, n as f64, p, &targets, &[i, j], &mut cache);
        let keep = |set: &[usize], offset: usize| -> Vec<usize> {
            set.iter()
                .enumerate()
                .filter(|(x, _)| dist[offset + x] >= delta4)
                .map(|(_, &k)| k)
                .collect()
        };
        (keep(&l, 0), keep(&r, l.len()))
    };
    PairContext {
        i,
        j,
        reference: Reference::LeaveOut,
        anchor: p,
        left,
        right,
    }
}

fn refine_leave_one_out(
    h: &ComparisonMatrix,
    d: &SymMatrix,
    a: &SymMatrix,
    sigma: f64,
    delta4: f64,
) -> Result<Vec<Vec<(usize, i8)>>> {
    let n = a.n();
    if n < 5 {
        return Err(SabreError::param("leave-one-out needs n >= 5"));
    }
    let full = gram(a, &Subset::full(n))?;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|&(i, j)| h.get(i, j) == 0)
        .collect();
    let decided: Vec<(usize, usize, i8)> = pairs
        .into_par_iter()
        .map(|(i, j)| {
            let ctx = leave_one_out_sets(h, d, a, &full, i, j, delta4);
            (
                i,
                j,
                evaluate_comparison(a.row(i), a.row(j), &ctx.left, &ctx.right, sigma),
            )
        })
        .collect();
    let mut rows = vec![Vec::new(); n];
    for (i, j, v) in decided {
        rows[i].push((j, v));
    }
    Ok(rows)
}
