//! Seeded Monte-Carlo harness: one SABRE run per `(n, trial)`, tabulated
//! losses and a log-log rate fit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SabreError};
use crate::evaluate::{loss_report, LossKind, LossReport};
use crate::matrix::SymMatrix;
use crate::models::{
    gen_example, gen_f_alpha, sample_approx_permutation, sample_observation, Example, NoiseKind, NoiseSpec,
};
use crate::perm::Permutation;
use crate::pipeline::{
    default_tuning_approx, default_tuning_calibrated, default_tuning_ideal, default_tuning_practical,
    default_tuning_theoretical, sabre, Preset, Rounding, SabreConfig, Tuning, CALIBRATED_CONSTANTS,
};
use crate::stage1::{EdgeRule, Thresholds};
use crate::stage2::SplitMode;

pub const SCHEMA_VERSION: u32 = 1;

/// SplitMix64 finaliser; a bijection on `u64`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(master ^ splitmix64(n | trial << 32))`. Injective in
/// `(n, trial)` for a fixed master seed while both are below `2^32`.
pub fn trial_seed(master: u64, n: usize, trial: usize) -> u64 {
    let key = (n as u64 & 0xFFFF_FFFF) | ((trial as u64) << 32);
    splitmix64(master ^ splitmix64(key))
}

/// The first three words of a ChaCha8 stream seeded by `seed`: the seeds of
/// the latent order, the noise and the tripartition, in that order.
pub fn stream_seeds(seed: u64) -> [u64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    [rng.next_u64(), rng.next_u64(), rng.next_u64()]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    FAlpha { alpha: f64 },
    Vanishing,
    Jump { alpha: f64, delta: f64, l0: usize },
    Plateau { c: usize },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::FAlpha { .. } => "f_alpha",
            ModelSpec::Vanishing => "vanishing",
            ModelSpec::Jump { .. } => "jump",
            ModelSpec::Plateau { .. } => "plateau",
        }
    }

    pub fn generate(&self, n: usize) -> Result<SymMatrix> {
        match *self {
            ModelSpec::FAlpha { alpha } => gen_f_alpha(n, alpha),
            ModelSpec::Vanishing => gen_example(n, &Example::Vanishing),
            ModelSpec::Jump { alpha, delta, l0 } => gen_example(n, &Example::Jump { alpha, delta, l0 }),
            ModelSpec::Plateau { c } => gen_example(n, &Example::Plateau { c }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseTemplate {
    pub kind: NoiseKind,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningSpec {
    pub preset: Preset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    /// Calibrated-preset constants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<[f64; 4]>,
    /// Explicit thresholds; required for `manual`, an override otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<[f64; 4]>,
}

impl TuningSpec {
    pub fn preset(preset: Preset) -> Self {
        TuningSpec {
            preset,
            kappa1: None,
            ratio: None,
            constants: None,
            thresholds: None,
        }
    }

    pub fn resolve(&self, n: usize, zeta: usize) -> Result<Tuning> {
        if let Some(d) = self.thresholds {
            let mut t = Tuning::manual(n, Thresholds::new(d[0], d[1], d[2], d[3])?)?;
            if self.preset != Preset::Manual {
                t.warnings
                    .push(format!("{:?} preset overridden by explicit thresholds", self.preset));
            }
            return Ok(t);
        }
        match self.preset {
            Preset::Theoretical => default_tuning_theoretical(n),
            Preset::Practical => default_tuning_practical(n, self.kappa1.unwrap_or(3.0), self.ratio.unwrap_or(3.0)),
            Preset::Approx => default_tuning_approx(n, zeta),
            Preset::Calibrated => default_tuning_calibrated(n, self.constants.unwrap_or(CALIBRATED_CONSTANTS)),
            Preset::IdealTest => default_tuning_ideal(n),
            Preset::Manual => Err(SabreError::param("manual tuning needs explicit thresholds")),
        }
    }
}

fn default_losses() -> Vec<LossKind> {
    vec![LossKind::LMax, LossKind::LKendall, LossKind::LOne]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub schema_version: u32,
    pub model: ModelSpec,
    pub noise: NoiseTemplate,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub tuning: TuningSpec,
    #[serde(default)]
    pub split: SplitMode,
    #[serde(default)]
    pub edge_rule: EdgeRule,
    #[serde(default)]
    pub zeta: usize,
    #[serde(default = "default_losses")]
    pub losses: Vec<LossKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub master_seed: u64,
    #[serde(default)]
    pub allow_large_leave_one_out: bool,
}

impl ExperimentManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: ExperimentManifest = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(SabreError::param(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.trials == 0 {
            return Err(SabreError::param("trials must be at least 1"));
        }
        if self.n_grid.is_empty() {
            return Err(SabreError::param("n_grid must not be empty"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SabreError::param("n_grid must be strictly increasing"));
        }
        if self.losses.is_empty() {
            return Err(SabreError::param("losses must not be empty"));
        }
        if !(self.noise.sigma >= 0.0 && self.noise.sigma.is_finite()) {
            return Err(SabreError::param("noise sigma must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub sigma: f64,
    pub model: String,
    pub zeta: usize,
    pub thresholds: [f64; 4],
    pub losses: LossReport,
    pub stage1_decided_pairs: usize,
    pub refine_decided_pairs: usize,
    pub undecided_pairs: usize,
    pub conflicts: usize,
    pub runtime_ms: f64,
    pub distance_ms: f64,
    pub stage1_ms: f64,
    pub refine_ms: f64,
}

/// Runs one trial; the trial seed is split with [`stream_seeds`].
pub fn run_trial(m: &ExperimentManifest, n: usize, trial: usize) -> Result<TrialRow> {
    let seed = trial_seed(m.master_seed, n, trial);
    let [pi_seed, noise_seed, split_seed] = stream_seeds(seed);
    let pi = sample_approx_permutation(n, m.zeta, pi_seed)?;
    let f = m.model.generate(n)?;
    let noise = NoiseSpec {
        kind: m.noise.kind,
        sigma: m.noise.sigma,
        seed: noise_seed,
    };
    let a = sample_observation(&f, &pi, &noise)?;
    let tuning = m.tuning.resolve(n, m.zeta)?;
    let thresholds = tuning.thresholds.as_array();
    let cfg = SabreConfig {
        tuning,
        sigma: noise.effective_sigma(),
        split: m.split,
        edge_rule: m.edge_rule,
        rounding: Rounding::Raw,
        seed: split_seed,
        allow_large_leave_one_out: m.allow_large_leave_one_out,
    };
    let out = sabre(&a, &cfg)?;
    let losses = trial_losses(&out.raw_scores, &pi, &m.losses, &f)?;
    let d = &out.diagnostics;
    Ok(TrialRow {
        n,
        trial,
        seed,
        sigma: noise.effective_sigma(),
        model: m.model.name().to_string(),
        zeta: m.zeta,
        thresholds,
        losses,
        stage1_decided_pairs: d.stage1_decided_pairs,
        refine_decided_pairs: d.refine_decided_pairs,
        undecided_pairs: d.undecided_pairs,
        conflicts: d.conflicts,
        runtime_ms: d.timings.total_ms,
        distance_ms: d.timings.distance_ms,
        stage1_ms: d.timings.stage1_ms,
        refine_ms: d.timings.refine_ms,
    })
}

/// Frobenius needs a bijective estimate; when rounding leaves ties the
/// value is left empty rather than failing the trial.
fn trial_losses(scores: &[f64], pi: &Permutation, selection: &[LossKind], f: &SymMatrix) -> Result<LossReport> {
    let without_f: Vec<LossKind> = selection
        .iter()
        .copied()
        .filter(|k| *k != LossKind::LFrobenius)
        .collect();
    let mut rep = loss_report(scores, pi, &without_f, None)?;
    if selection.contains(&LossKind::LFrobenius) {
        match loss_report(scores, pi, &[LossKind::LFrobenius], Some(f)) {
            Ok(r) => {
                rep.l_frobenius = r.l_frobenius;
                rep.side_frobenius = r.side_frobenius;
            }
            Err(SabreError::NotBijective { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerN {
    pub n: usize,
    pub trials: usize,
    pub median_l_max: Option<f64>,
    pub median_l_kendall: Option<f64>,
    pub median_l_one: Option<f64>,
    pub median_l_frobenius: Option<f64>,
    pub median_undecided_pairs: f64,
    /// `sqrt(n) median(L_max) / sqrt(ln n)`, flat when the rate holds.
    pub rate_normalized_l_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub per_n: Vec<PerN>,
    /// "fitted" or "not-applicable".
    pub slope_status: String,
    pub slope_l_max: Option<f64>,
    pub intercept_l_max: Option<f64>,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

/// Ordinary least squares `y = a + b x`; returns `(b, a)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let b = sxy / sxx;
    Some((b, my - b * mx))
}

pub fn summarize(rows: &[TrialRow]) -> Summary {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.dedup();
    let per_n: Vec<PerN> = ns
        .iter()
        .map(|&n| {
            let group: Vec<&TrialRow> = rows.iter().filter(|r| r.n == n).collect();
            let med = |get: &dyn Fn(&TrialRow) -> Option<f64>| {
                let mut v: Vec<f64> = group.iter().filter_map(|r| get(r)).collect();
                median(&mut v)
            };
            let median_l_max = med(&|r| r.losses.l_max);
            let nf = n as f64;
            PerN {
                n,
                trials: group.len(),
                median_l_max,
                median_l_kendall: med(&|r| r.losses.l_kendall),
                median_l_one: med(&|r| r.losses.l_one),
                median_l_frobenius: med(&|r| r.losses.l_frobenius),
                median_undecided_pairs: med(&|r| Some(r.undecided_pairs as f64)).unwrap_or(0.0),
                rate_normalized_l_max: median_l_max.map(|v| nf.sqrt() * v / nf.ln().sqrt()),
            }
        })
        .collect();
    let points: Vec<(f64, f64)> = per_n
        .iter()
        .filter_map(|p| p.median_l_max.map(|v| ((p.n as f64).ln(), v.ln())))
        .collect();
    let usable = points.len() == per_n.len() && points.iter().all(|(_, y)| y.is_finite());
    let fit = if usable {
        let (xs, ys): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        fit_line(&xs, &ys)
    } else {
        None
    };
    Summary {
        schema_version: SCHEMA_VERSION,
        per_n,
        slope_status: if fit.is_some() { "fitted" } else { "not-applicable" }.to_string(),
        slope_l_max: fit.map(|f| f.0),
        intercept_l_max: fit.map(|f| f.1),
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub rows: Vec<TrialRow>,
    pub summary: Summary,
}

/// Runs every `(n, trial)` in parallel; rows come back ordered by
/// `(n, trial)`.
pub fn run_experiment(m: &ExperimentManifest) -> Result<ExperimentResult> {
    m.validate()?;
    let jobs: Vec<(usize, usize)> = m
        .n_grid
        .iter()
        .flat_map(|&n| (0..m.trials).map(move |t| (n, t)))
        .collect();
    let mut rows = jobs
        .into_par_iter()
        .map(|(n, t)| run_trial(m, n, t))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| (r.n, r.trial));
    let summary = summarize(&rows);
    Ok(ExperimentResult { rows, summary })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const RESULTS_HEADER: &str = "n,trial,seed,sigma,model,zeta,delta1,delta2,delta3,delta4,\
l_max,l_kendall,l_one,l_frobenius,stage1_decided_pairs,refine_decided_pairs,undecided_pairs,conflicts";

/// Deterministic per-trial table (no timings).
pub fn results_csv(rows: &[TrialRow]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        let d = r.thresholds;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.trial,
            r.seed,
            r.sigma,
            r.model,
            r.zeta,
            d[0],
            d[1],
            d[2],
            d[3],
            opt(r.losses.l_max),
            opt(r.losses.l_kendall),
            opt(r.losses.l_one),
            opt(r.losses.l_frobenius),
            r.stage1_decided_pairs,
            r.refine_decided_pairs,
            r.undecided_pairs,
            r.conflicts
        )
        .expect("writing to a String");
    }
    out
}

pub fn timings_csv(rows: &[TrialRow]) -> String {
    let mut out = String::from("n,trial,runtime_ms,distance_ms,stage1_ms,refine_ms\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{:.3},{:.3},{:.3},{:.3}",
            r.n, r.trial, r.runtime_ms, r.distance_ms, r.stage1_ms, r.refine_ms
        )
        .expect("writing to a String");
    }
    out
}

/// Writes `results.csv`, `timings.csv` and `summary.json` into `dir`.
pub fn write_experiment(dir: &Path, result: &ExperimentResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("results.csv"), results_csv(&result.rows))?;
    fs::write(dir.join("timings.csv"), timings_csv(&result.rows))?;
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&result.summary)? + "\n",
    )?;
    Ok(())
}
