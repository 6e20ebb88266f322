//! Synthetic Robinson signals, the observation model and structural
//! validators.

use rand::seq::IndexedRandom;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SabreError};
use crate::matrix::SymMatrix;
use crate::perm::{max_spread, Permutation};

/// Trimming constant of the average-Lipschitz lower bound.
pub const C0: f64 = 1.0 / 32.0;

/// Numerical slack for non-strict inequalities in the validators.
pub const TOL: f64 = 1e-9;

/// Structural constants of the bi-Lipschitz and average-Lipschitz classes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub r: f64,
    pub r_prime: f64,
    pub sigma: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, r: f64, r_prime: f64, sigma: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("r", r), ("r_prime", r_prime)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SabreError::param(format!("{name} must be positive, got {v}")));
            }
        }
        if alpha > beta {
            return Err(SabreError::param(format!("alpha {alpha} exceeds beta {beta}")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(SabreError::param(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(ModelParams {
            alpha,
            beta,
            r,
            r_prime,
            sigma,
        })
    }

    pub fn c0(&self) -> f64 {
        C0
    }
}

/// `F[i][j] = 1 - alpha |i - j| / n`.
pub fn gen_f_alpha(n: usize, alpha: f64) -> Result<SymMatrix> {
    if n < 2 {
        return Err(SabreError::param(format!("n must be at least 2, got {n}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(SabreError::param(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let nf = n as f64;
    SymMatrix::from_upper(n, |i, j| 1.0 - alpha * (j - i) as f64 / nf)
}

/// Toeplitz examples built from a non-increasing sequence `a_l` via
/// `F[i][j] = a_{|i-j|} / n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Example {
    /// `a_l = n/2 - l` for `l <= n/2`, else 0.
    Vanishing,
    /// `a_l = n - alpha l` for `l <= l0`, else `n - alpha l - delta`.
    Jump { alpha: f64, delta: f64, l0: usize },
    /// `a_l = n - floor(l / c)`.
    Plateau { c: usize },
}

impl Example {
    pub fn name(&self) -> &'static str {
        match self {
            Example::Vanishing => "vanishing",
            Example::Jump { .. } => "jump",
            Example::Plateau { .. } => "plateau",
        }
    }

    fn coefficient(&self, n: usize, l: usize) -> f64 {
        let nf = n as f64;
        let lf = l as f64;
        match *self {
            Example::Vanishing => {
                if lf <= nf / 2.0 {
                    nf / 2.0 - lf
                } else {
                    0.0
                }
            }
            Example::Jump { alpha, delta, l0 } => {
                if l <= l0 {
                    nf - alpha * lf
                } else {
                    nf - alpha * lf - delta
                }
            }
            Example::Plateau { c } => nf - (l / c) as f64,
        }
    }
}

pub fn gen_example(n: usize, which: &Example) -> Result<SymMatrix> {
    if n < 2 {
        return Err(SabreError::param(format!("n must be at least 2, got {n}")));
    }
    match *which {
        Example::Jump { alpha, delta, .. } => {
            if !(alpha > 0.0 && delta >= 0.0 && alpha.is_finite() && delta.is_finite()) {
                return Err(SabreError::param("jump needs alpha > 0 and delta >= 0"));
            }
        }
        Example::Plateau { c } if c < 2 => {
            return Err(SabreError::param(format!("plateau length must be >= 2, got {c}")));
        }
        _ => {}
    }
    let nf = n as f64;
    let a: Vec<f64> = (0..n).map(|l| which.coefficient(n, l) / nf).collect();
    if let Some((l, v)) = a.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && **v <= 1.0)) {
        return Err(SabreError::param(format!(
            "{} example has entry {v} outside [0, 1] at lag {l}",
            which.name()
        )));
    }
    SymMatrix::from_upper(n, |i, j| a[j - i])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Gaussian,
    Rademacher,
    BernoulliGraph,
}

impl std::str::FromStr for NoiseKind {
    type Err = SabreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "rademacher" => Ok(NoiseKind::Rademacher),
            "bernoulli-graph" | "bernoulli" => Ok(NoiseKind::BernoulliGraph),
            other => Err(SabreError::param(format!("unknown noise kind '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::Gaussian,
            sigma,
            seed,
        }
    }

    /// Noise level to feed downstream thresholds. Centered Bernoulli
    /// variables have variance proxy at most 1/2.
    pub fn effective_sigma(&self) -> f64 {
        match self.kind {
            NoiseKind::BernoulliGraph => 0.5,
            _ => self.sigma,
        }
    }
}

/// Draws `A = F_π + σE`. The upper triangle (diagonal included) is sampled
/// in row-major order from a ChaCha8 stream seeded by `noise.seed` and then
/// mirrored. `π` may be approximate.
pub fn sample_observation(f: &SymMatrix, pi: &Permutation, noise: &NoiseSpec) -> Result<SymMatrix> {
    let n = f.n();
    if pi.len() != n {
        return Err(SabreError::DimensionMismatch {
            expected: n,
            found: pi.len(),
        });
    }
    if noise.kind != NoiseKind::BernoulliGraph && !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
        return Err(SabreError::param(format!("sigma must be >= 0, got {}", noise.sigma)));
    }
    if noise.kind == NoiseKind::BernoulliGraph && !f.entries_within(0.0, 1.0) {
        return Err(SabreError::param("bernoulli-graph noise needs F entries in [0, 1]"));
    }
    let signal = f.read_through(pi.positions())?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let sigma = noise.sigma;
    SymMatrix::from_upper(n, |i, j| {
        let s = signal.get(i, j);
        match noise.kind {
            NoiseKind::Gaussian => {
                let z: f64 = rng.sample(StandardNormal);
                s + sigma * z
            }
            NoiseKind::Rademacher => {
                let z = if rng.random::<bool>() { 1.0 } else { -1.0 };
                s + sigma * z
            }
            NoiseKind::BernoulliGraph => {
                if rng.random::<f64>() < s {
                    1.0
                } else {
                    0.0
                }
            }
        }
    })
}

/// Samples a member of `A(zeta)`.
///
/// `zeta = 0` gives a uniform exact permutation. Otherwise every item gets a
/// uniform position in `1..=n`; then, while some `k` has no position within
/// `zeta`, the smallest such `k` is covered by moving a randomly chosen item
/// whose position is shared with another item to `min(k + zeta, n)`.
pub fn sample_approx_permutation(n: usize, zeta: usize, seed: u64) -> Result<Permutation> {
    if n == 0 {
        return Err(SabreError::EmptyMatrix);
    }
    if zeta >= n {
        return Err(SabreError::param(format!("zeta {zeta} must be below n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if zeta == 0 {
        return Ok(Permutation::random(n, &mut rng));
    }
    let mut pos: Vec<usize> = (0..n).map(|_| rng.random_range(1..=n)).collect();
    let mut count = vec![0usize; n + 1];
    for &p in &pos {
        count[p] += 1;
    }
    let covered = |count: &[usize], k: usize| {
        let lo = k.saturating_sub(zeta).max(1);
        let hi = (k + zeta).min(n);
        (lo..=hi).any(|v| count[v] > 0)
    };
    let mut k = 1;
    while k <= n {
        if covered(&count, k) {
            k += 1;
            continue;
        }
        // An uncovered k means the positions are not a bijection, so some
        // value is shared and moving one of its holders uncovers nothing.
        let shared: Vec<usize> = (0..n).filter(|&i| count[pos[i]] > 1).collect();
        let &i = shared
            .choose(&mut rng)
            .expect("a shared position exists whenever coverage fails");
        let target = (k + zeta).min(n);
        count[pos[i]] -= 1;
        pos[i] = target;
        count[target] += 1;
    }
    debug_assert!(max_spread(&pos) <= zeta);
    Permutation::approximate(pos, zeta)
}

/// Uniform exact permutation from a seed.
pub fn sample_permutation(n: usize, seed: u64) -> Permutation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions: Vec<usize> = (1..=n).collect();
    positions.shuffle(&mut rng);
    Permutation::new(positions).expect("shuffle of 1..=n is a bijection")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RobinsonMode {
    Strict,
    #[default]
    Weak,
}

/// Checks that entries decrease moving away from the diagonal:
/// `F[j][k] < F[i][k]` for `k <= i < j` and `F[i][k] < F[j][k]` for
/// `i < j <= k`. Weak mode accepts equality.
pub fn check_robinson(f: &SymMatrix, mode: RobinsonMode) -> bool {
    let n = f.n();
    let ok = |near: f64, far: f64| match mode {
        RobinsonMode::Strict => far < near,
        RobinsonMode::Weak => far <= near + TOL,
    };
    // Adjacent comparisons imply the full chain.
    for k in 0..n {
        for i in k..n.saturating_sub(1) {
            if !ok(f.get(i, k), f.get(i + 1, k)) {
                return false;
            }
        }
        for i in 0..k {
            if !ok(f.get(i + 1, k), f.get(i, k)) {
                return false;
            }
        }
    }
    true
}

/// One inequality of a structural definition, with its slack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: String,
    pub i: usize,
    pub j: usize,
    pub k: Option<usize>,
    /// Right-hand side minus left-hand side in the direction that must be
    /// nonnegative; negative values are violations.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pass: bool,
    /// The binding constraint (smallest margin), when any constraint applies.
    pub worst: Option<Violation>,
}

#[derive(Default)]
struct Tracker {
    ok: bool,
    worst: Option<Violation>,
}

impl Tracker {
    fn new() -> Self {
        Tracker { ok: true, worst: None }
    }

    fn record(&mut self, cond: &str, i: usize, j: usize, k: Option<usize>, margin: f64, strict: bool) {
        let satisfied = if strict { margin > 0.0 } else { margin >= -TOL };
        self.ok &= satisfied;
        if self.worst.as_ref().is_none_or(|w| margin < w.margin) {
            self.worst = Some(Violation {
                condition: cond.to_string(),
                i,
                j,
                k,
                margin,
            });
        }
    }

    fn finish(self) -> ValidationReport {
        ValidationReport {
            pass: self.ok,
            worst: self.worst,
        }
    }
}

/// Bi-Lipschitz check on canonical indices.
pub fn check_bilipschitz(f: &SymMatrix, alpha: f64, beta: f64) -> ValidationReport {
    let n = f.n();
    let nf = n as f64;
    let mut t = Tracker::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let g = (j - i) as f64 / nf;
            let (ri, rj) = (f.row(i), f.row(j));
            let (mut kmax, mut dmax) = (0, 0.0f64);
            for k in 0..n {
                let d = (ri[k] - rj[k]).abs();
                if d > dmax {
                    dmax = d;
                    kmax = k;
                }
            }
            t.record("linf-upper", i, j, Some(kmax), beta * g - dmax, false);
            let (mut kl, mut low) = (0, f64::INFINITY);
            for k in 0..=i {
                let d = ri[k] - rj[k];
                if d < low {
                    low = d;
                    kl = k;
                }
            }
            for k in j..n {
                let d = rj[k] - ri[k];
                if d < low {
                    low = d;
                    kl = k;
                }
            }
            t.record("pointwise-lower", i, j, Some(kl), low - alpha * g, false);
        }
    }
    t.finish()
}

/// Largest `alpha` and smallest `beta` for which `F` is bi-Lipschitz.
pub fn fit_bilipschitz(f: &SymMatrix) -> (f64, f64) {
    let n = f.n();
    let nf = n as f64;
    let (mut alpha, mut beta) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        for j in (i + 1)..n {
            let g = (j - i) as f64 / nf;
            let (ri, rj) = (f.row(i), f.row(j));
            for k in 0..n {
                beta = beta.max((ri[k] - rj[k]).abs() / g);
            }
            for k in 0..=i {
                alpha = alpha.min((ri[k] - rj[k]) / g);
            }
            for k in j..n {
                alpha = alpha.min((rj[k] - ri[k]) / g);
            }
        }
    }
    (alpha, beta)
}

/// Quantities of the average-Lipschitz definition for one ordered pair
/// `pi_i < pi_j`, read through the latent positions.
struct AlPair {
    i: usize,
    j: usize,
    gap: usize,
    norm: f64,
    one_sided: f64,
}

fn al_pairs(f: &SymMatrix, positions: &[usize]) -> Vec<AlPair> {
    let n = f.n();
    let trim = (C0 * n as f64).floor() as usize;
    let mut out = Vec::new();
    for a in 0..positions.len() {
        for b in 0..positions.len() {
            let (pa, pb) = (positions[a], positions[b]);
            if pa >= pb {
                continue;
            }
            let (ra, rb) = (f.row(pa - 1), f.row(pb - 1));
            let norm = ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            let (mut left, mut right) = (0.0, 0.0);
            for &pk in positions {
                if pk + trim < pa {
                    left += ra[pk - 1] - rb[pk - 1];
                }
                if pk > pb + trim {
                    right += rb[pk - 1] - ra[pk - 1];
                }
            }
            out.push(AlPair {
                i: a,
                j: b,
                gap: pb - pa,
                norm,
                one_sided: left.max(right),
            });
        }
    }
    out
}

fn canonical_or(positions: Option<&Permutation>, n: usize) -> Result<Vec<usize>> {
    match positions {
        None => Ok((1..=n).collect()),
        Some(p) if p.len() == n => Ok(p.positions().to_vec()),
        Some(p) => Err(SabreError::DimensionMismatch {
            expected: n,
            found: p.len(),
        }),
    }
}

/// Average-Lipschitz check. Without `pi` the canonical indices are used;
/// with `pi` every gap is read through the latent positions and rows are
/// `F_{pi_i}`.
pub fn check_average_lipschitz(
    f: &SymMatrix,
    alpha: f64,
    beta: f64,
    r: f64,
    r_prime: f64,
    pi: Option<&Permutation>,
) -> Result<ValidationReport> {
    let n = f.n();
    let positions = canonical_or(pi, n)?;
    let nf = n as f64;
    let sqn = nf.sqrt();
    let mut t = Tracker::new();
    for p in al_pairs(f, &positions) {
        let g = p.gap as f64;
        if g <= r * nf {
            t.record("l2-upper", p.i, p.j, None, beta * g / sqn - p.norm, false);
            t.record("l1-lower", p.i, p.j, None, p.one_sided - alpha * g, false);
        } else {
            t.record("non-collapse", p.i, p.j, None, p.norm - r_prime * sqn, true);
        }
    }
    Ok(t.finish())
}

/// Measured constants of the average-Lipschitz class at a given `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlConstants {
    /// Largest admissible alpha.
    pub alpha: f64,
    /// Smallest admissible beta.
    pub beta: f64,
    /// Supremum of admissible r' (infinite if no pair is far apart).
    pub r_prime: f64,
}

pub fn fit_average_lipschitz(f: &SymMatrix, r: f64, pi: Option<&Permutation>) -> Result<AlConstants> {
    let n = f.n();
    let positions = canonical_or(pi, n)?;
    let nf = n as f64;
    let sqn = nf.sqrt();
    let mut c = AlConstants {
        alpha: f64::INFINITY,
        beta: 0.0,
        r_prime: f64::INFINITY,
    };
    for p in al_pairs(f, &positions) {
        let g = p.gap as f64;
        if g <= r * nf {
            c.alpha = c.alpha.min(p.one_sided / g);
            c.beta = c.beta.max(p.norm * sqn / g);
        } else {
            c.r_prime = c.r_prime.min(p.norm / sqn);
        }
    }
    Ok(c)
}

/// Local distance equivalence: `alpha gap - omega <= D[i][j] <= beta gap +
/// omega` whenever `min(gap, D[i][j]) <= n r`, with `gap = |pi_i - pi_j|`.
pub fn local_distance_report(
    d: &SymMatrix,
    pi: &Permutation,
    alpha: f64,
    beta: f64,
    omega: f64,
    r: f64,
) -> Result<ValidationReport> {
    let n = d.n();
    if pi.len() != n {
        return Err(SabreError::DimensionMismatch {
            expected: n,
            found: pi.len(),
        });
    }
    let p = pi.positions();
    let cap = n as f64 * r;
    let mut t = Tracker::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = p[i].abs_diff(p[j]) as f64;
            let dij = d.get(i, j);
            if gap.min(dij) <= cap {
                t.record("lower", i, j, None, dij - (alpha * gap - omega), false);
                t.record("upper", i, j, None, beta * gap + omega - dij, false);
            }
        }
    }
    Ok(t.finish())
}

pub fn check_local_distance_equivalence(
    d: &SymMatrix,
    pi: &Permutation,
    alpha: f64,
    beta: f64,
    omega: f64,
    r: f64,
) -> Result<bool> {
    Ok(local_distance_report(d, pi, alpha, beta, omega, r)?.pass)
}
