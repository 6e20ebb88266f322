//! Reversal-invariant losses between an estimated and a true ordering.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SabreError};
use crate::matrix::SymMatrix;
use crate::perm::{reverse_permutation, Permutation};

/// Which orientation of the truth attained a minimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Forward,
    Reversed,
}

fn pick(forward: f64, reversed: f64) -> (f64, Side) {
    if reversed < forward {
        (reversed, Side::Reversed)
    } else {
        (forward, Side::Forward)
    }
}

fn check_len(est: usize, truth: usize) -> Result<()> {
    if est != truth {
        return Err(SabreError::DimensionMismatch {
            expected: truth,
            found: est,
        });
    }
    if truth == 0 {
        return Err(SabreError::EmptyMatrix);
    }
    Ok(())
}

pub fn l_max_sided(est: &[f64], truth: &Permutation) -> Result<(f64, Side)> {
    check_len(est.len(), truth.len())?;
    let n = truth.len();
    let nf = n as f64;
    let (mut fw, mut rv) = (0.0f64, 0.0f64);
    for (&e, &p) in est.iter().zip(truth.positions()) {
        fw = fw.max((e - p as f64).abs());
        rv = rv.max((e - (n + 1 - p) as f64).abs());
    }
    let (v, s) = pick(fw, rv);
    Ok((v / nf, s))
}

/// `(1/n) min(max_i |est_i - pi_i|, max_i |est_i - pi^rev_i|)`.
pub fn l_max(est: &[f64], truth: &Permutation) -> Result<f64> {
    Ok(l_max_sided(est, truth)?.0)
}

pub fn l_one_sided(est: &[f64], truth: &Permutation) -> Result<(f64, Side)> {
    check_len(est.len(), truth.len())?;
    let n = truth.len();
    let (mut fw, mut rv) = (0.0, 0.0);
    for (&e, &p) in est.iter().zip(truth.positions()) {
        fw += (e - p as f64).abs();
        rv += (e - (n + 1 - p) as f64).abs();
    }
    let (v, s) = pick(fw, rv);
    Ok((v / n as f64, s))
}

/// `(1/n) min(sum_i |est_i - pi_i|, sum_i |est_i - pi^rev_i|)`.
pub fn l_one(est: &[f64], truth: &Permutation) -> Result<f64> {
    Ok(l_one_sided(est, truth)?.0)
}

/// Numbers of discordant and concordant pairs between `x` and `y`. Pairs
/// tied in either coordinate count as neither. O(n log n).
pub fn discordant_concordant(x: &[usize], y: &[usize]) -> (u64, u64) {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_unstable_by_key(|&i| (x[i], y[i]));
    let n0 = (n as u64) * (n as u64).saturating_sub(1) / 2;
    let tied_pairs = |keys: &mut dyn Iterator<Item = bool>| -> u64 {
        // keys yields "same as previous" flags over a sorted sequence.
        let (mut total, mut run) = (0u64, 1u64);
        for same in keys {
            if same {
                run += 1;
            } else {
                total += run * (run - 1) / 2;
                run = 1;
            }
        }
        total + run * (run - 1) / 2
    };
    let n1 = tied_pairs(&mut idx.windows(2).map(|w| x[w[0]] == x[w[1]]));
    let n3 = tied_pairs(&mut idx.windows(2).map(|w| x[w[0]] == x[w[1]] && y[w[0]] == y[w[1]]));
    // Merge sort on y counts strict inversions, i.e. discordant pairs plus
    // nothing else, since x-ties are ordered by y already.
    let mut ys: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0usize; n];
    let discordant = merge_count(&mut ys, &mut buf);
    let mut ysorted = ys;
    ysorted.sort_unstable();
    let n2 = tied_pairs(&mut ysorted.windows(2).map(|w| w[0] == w[1]));
    let concordant = n0 + n3 - n1 - n2 - discordant;
    (discordant, concordant)
}

fn merge_count(v: &mut [usize], buf: &mut [usize]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = merge_count(&mut v[..mid], &mut buf[..mid]) + merge_count(&mut v[mid..], &mut buf[mid..]);
    let (mut a, mut b, mut k) = (0, mid, 0);
    while a < mid && b < n {
        if v[b] < v[a] {
            count += (mid - a) as u64;
            buf[k] = v[b];
            b += 1;
        } else {
            buf[k] = v[a];
            a += 1;
        }
        k += 1;
    }
    buf[k..k + mid - a].copy_from_slice(&v[a..mid]);
    k += mid - a;
    buf[k..k + n - b].copy_from_slice(&v[b..n]);
    v.copy_from_slice(&buf[..n]);
    count
}

pub fn l_kendall_sided(est: &[usize], truth: &Permutation) -> Result<(f64, Side)> {
    check_len(est.len(), truth.len())?;
    let (d, c) = discordant_concordant(est, truth.positions());
    // Against the reversed truth every concordant pair becomes discordant.
    let (v, s) = pick(d as f64, c as f64);
    Ok((v / truth.len() as f64, s))
}

/// `(1/n) min(K(est, pi), K(est, pi^rev))` with `K` the inversion count.
pub fn l_kendall(est: &[usize], truth: &Permutation) -> Result<f64> {
    Ok(l_kendall_sided(est, truth)?.0)
}

pub fn l_frobenius_sided(f: &SymMatrix, est: &Permutation, truth: &Permutation) -> Result<(f64, Side)> {
    check_len(est.len(), truth.len())?;
    if f.n() != truth.len() {
        return Err(SabreError::DimensionMismatch {
            expected: truth.len(),
            found: f.n(),
        });
    }
    est.require_exact()?;
    let fe = f.read_through(est.positions())?;
    let fw = fe.frobenius_distance(&f.read_through(truth.positions())?)?;
    let rv = fe.frobenius_distance(&f.read_through(reverse_permutation(truth).positions())?)?;
    Ok(pick(fw, rv))
}

/// `min(||F_est - F_pi||, ||F_est - F_{pi^rev}||)` in Frobenius norm.
pub fn l_frobenius(f: &SymMatrix, est: &Permutation, truth: &Permutation) -> Result<f64> {
    Ok(l_frobenius_sided(f, est, truth)?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Hash, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    LMax,
    LKendall,
    LOne,
    LFrobenius,
}

impl LossKind {
    pub fn column(&self) -> &'static str {
        match self {
            LossKind::LMax => "l_max",
            LossKind::LKendall => "l_kendall",
            LossKind::LOne => "l_one",
            LossKind::LFrobenius => "l_frobenius",
        }
    }

    pub const ALL: [LossKind; 4] = [LossKind::LMax, LossKind::LKendall, LossKind::LOne, LossKind::LFrobenius];
}

impl std::str::FromStr for LossKind {
    type Err = SabreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l_max" | "max" => Ok(LossKind::LMax),
            "l_kendall" | "kendall" => Ok(LossKind::LKendall),
            "l_one" | "one" | "l1" => Ok(LossKind::LOne),
            "l_frobenius" | "frobenius" => Ok(LossKind::LFrobenius),
            other => Err(SabreError::param(format!("unknown loss '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_max: Option<f64>,
    pub l_kendall: Option<f64>,
    pub l_one: Option<f64>,
    pub l_frobenius: Option<f64>,
    pub side_max: Option<Side>,
    pub side_kendall: Option<Side>,
    pub side_one: Option<Side>,
    pub side_frobenius: Option<Side>,
}

/// Computes the selected losses. Raw scores feed `l_max` and `l_one`; the
/// rounded positions feed Kendall and, when they form a bijection,
/// Frobenius.
pub fn loss_report(
    scores: &[f64],
    truth: &Permutation,
    selection: &[LossKind],
    signal: Option<&SymMatrix>,
) -> Result<LossReport> {
    let mut rep = LossReport::default();
    let rounded = crate::perm::round_scores(scores);
    for kind in selection {
        match kind {
            LossKind::LMax => {
                let (v, s) = l_max_sided(scores, truth)?;
                rep.l_max = Some(v);
                rep.side_max = Some(s);
            }
            LossKind::LOne => {
                let (v, s) = l_one_sided(scores, truth)?;
                rep.l_one = Some(v);
                rep.side_one = Some(s);
            }
            LossKind::LKendall => {
                let (v, s) = l_kendall_sided(&rounded, truth)?;
                rep.l_kendall = Some(v);
                rep.side_kendall = Some(s);
            }
            LossKind::LFrobenius => {
                let f = signal.ok_or_else(|| SabreError::param("frobenius requires signal matrix"))?;
                let est = Permutation::new(rounded.clone())?;
                let (v, s) = l_frobenius_sided(f, &est, truth)?;
                rep.l_frobenius = Some(v);
                rep.side_frobenius = Some(s);
            }
        }
    }
    Ok(rep)
}
