//! End-to-end SABRE: distances, first seriation, refinement and the final
//! row-sum ordering.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::distance::{estimate_distance, Subset};
use crate::error::{Result, SabreError};
use crate::matrix::SymMatrix;
use crate::perm::{permutation_from_comparison, round_scores, ComparisonMatrix};
use crate::stage1::{first_seriation, EdgeRule, Thresholds};
use crate::stage2::{leave_one_out, refine, tripartition, SplitMode};

/// Largest `n` accepted in leave-one-out mode unless explicitly overridden.
pub const LEAVE_ONE_OUT_CAP: usize = 400;

/// Constants of the calibrated preset, in units of `n^{3/4} (ln n)^{1/4}`.
pub const CALIBRATED_CONSTANTS: [f64; 4] = [0.3, 1.2, 1.2, 0.5];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Theoretical,
    Practical,
    Approx,
    Calibrated,
    IdealTest,
    Manual,
}

impl std::str::FromStr for Preset {
    type Err = SabreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theoretical" => Ok(Preset::Theoretical),
            "practical" => Ok(Preset::Practical),
            "approx" => Ok(Preset::Approx),
            "calibrated" => Ok(Preset::Calibrated),
            "ideal-test" => Ok(Preset::IdealTest),
            "manual" => Ok(Preset::Manual),
            other => Err(SabreError::param(format!("unknown tuning preset '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub thresholds: Thresholds,
    pub preset: Preset,
    /// False when the thresholds break the `n/8` cap on `delta2`, `delta3`.
    pub feasible: bool,
    pub warnings: Vec<String>,
}

impl Tuning {
    fn build(n: usize, d: [f64; 4], preset: Preset, mut warnings: Vec<String>) -> Result<Self> {
        let thresholds = Thresholds::new(d[0], d[1], d[2], d[3])?;
        let cap = n as f64 / 8.0;
        let mut feasible = true;
        for (k, v) in [(2, d[1]), (3, d[2])] {
            if v > cap {
                feasible = false;
                warnings.push(format!("infeasible: delta{k} = {v:.3} exceeds n/8 = {cap:.3}"));
            }
        }
        warnings.extend(thresholds.warnings());
        Ok(Tuning {
            thresholds,
            preset,
            feasible,
            warnings,
        })
    }

    pub fn manual(n: usize, thresholds: Thresholds) -> Result<Self> {
        Self::build(n, thresholds.as_array(), Preset::Manual, Vec::new())
    }
}

fn check_n(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(SabreError::param(format!("tuning needs n >= {min}, got {n}")));
    }
    Ok(())
}

/// `n^{3/4} (ln n)^{1/4}`, the scale of the distance estimation error.
pub fn distance_scale(n: usize) -> f64 {
    let nf = n as f64;
    nf.powf(0.75) * nf.ln().powf(0.25)
}

/// `delta1 = n^{3/4} ln n`, `delta_{k+1} = delta_k ln n`.
pub fn default_tuning_theoretical(n: usize) -> Result<Tuning> {
    check_n(n, 3)?;
    let l = (n as f64).ln();
    let d1 = (n as f64).powf(0.75) * l;
    Tuning::build(
        n,
        [d1, d1 * l, d1 * l * l, d1 * l * l * l],
        Preset::Theoretical,
        Vec::new(),
    )
}

/// `delta1 = kappa1 n^{3/4} (ln n)^{1/4}`, `delta_{k+1} = ratio delta_k`,
/// with `delta2..delta4` capped at `n/8`.
pub fn default_tuning_practical(n: usize, kappa1: f64, ratio: f64) -> Result<Tuning> {
    check_n(n, 30)?;
    if !(kappa1 > 0.0 && kappa1.is_finite()) {
        return Err(SabreError::param(format!("kappa1 must be positive, got {kappa1}")));
    }
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(SabreError::param(format!("ratio must be positive, got {ratio}")));
    }
    let cap = n as f64 / 8.0;
    let mut d = [kappa1 * distance_scale(n), 0.0, 0.0, 0.0];
    let mut warnings = Vec::new();
    for k in 1..4 {
        let raw = ratio * d[k - 1];
        if raw > cap {
            warnings.push(format!("cap: delta{} = {raw:.3} capped at n/8 = {cap:.3}", k + 1));
            d[k] = cap;
        } else {
            d[k] = raw;
        }
    }
    Tuning::build(n, d, Preset::Practical, warnings)
}

/// Approximate-permutation tuning: `delta1 = n^{3/4} ln n + sqrt((2 zeta +
/// 1) n) ln(n / (2 zeta + 1))`, `delta_{k+1} = delta_k ln(n / (2 zeta + 1))`.
pub fn default_tuning_approx(n: usize, zeta: usize) -> Result<Tuning> {
    check_n(n, 3)?;
    let nf = n as f64;
    let w = 2.0 * zeta as f64 + 1.0;
    if 2 * zeta >= n {
        return Err(SabreError::param(format!(
            "zeta {zeta} must be below n/2 = {}",
            nf / 2.0
        )));
    }
    let l = (nf / w).ln();
    let d1 = nf.powf(0.75) * nf.ln() + (w * nf).sqrt() * l;
    Tuning::build(n, [d1, d1 * l, d1 * l * l, d1 * l * l * l], Preset::Approx, Vec::new())
}

/// `delta_k = c_k n^{3/4} (ln n)^{1/4}` with constants from a pilot run at
/// `sigma = 0.5` on the linear Toeplitz model. No caps are applied.
pub fn default_tuning_calibrated(n: usize, constants: [f64; 4]) -> Result<Tuning> {
    check_n(n, 9)?;
    let s = distance_scale(n);
    Tuning::build(n, constants.map(|c| c * s), Preset::Calibrated, Vec::new())
}

/// Thresholds for exact ordering distances `D[i][j] = |pi_i - pi_j|`.
pub fn default_tuning_ideal(n: usize) -> Result<Tuning> {
    check_n(n, 16)?;
    let d3 = (n / 8) as f64;
    Tuning::build(n, [1.0, 5.0_f64.min(d3), d3, d3], Preset::IdealTest, Vec::new())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    #[default]
    Round,
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SabreConfig {
    pub tuning: Tuning,
    pub sigma: f64,
    pub split: SplitMode,
    pub edge_rule: EdgeRule,
    pub rounding: Rounding,
    /// Seed of the tripartition.
    pub seed: u64,
    /// Lifts the leave-one-out size cap.
    pub allow_large_leave_one_out: bool,
}

impl SabreConfig {
    pub fn new(tuning: Tuning, sigma: f64) -> Self {
        SabreConfig {
            tuning,
            sigma,
            split: SplitMode::Tripartition,
            edge_rule: EdgeRule::Or,
            rounding: Rounding::Round,
            seed: 0,
            allow_large_leave_one_out: false,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.tuning.thresholds.validate()?;
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(SabreError::param(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        match self.split {
            SplitMode::Tripartition if n < 9 => Err(SabreError::param(format!("tripartition needs n >= 9, got {n}"))),
            SplitMode::LeaveOneOut if n > LEAVE_ONE_OUT_CAP && !self.allow_large_leave_one_out => {
                Err(SabreError::Guard(format!(
                    "leave-one-out costs O(n^5); n = {n} exceeds the cap of {LEAVE_ONE_OUT_CAP} \
                     (pass the override flag to run anyway)"
                )))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub distance_ms: f64,
    pub stage1_ms: f64,
    pub refine_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n: usize,
    pub thresholds: Thresholds,
    pub preset: Preset,
    pub split: SplitMode,
    pub edge_rule: EdgeRule,
    pub warnings: Vec<String>,
    /// `(|G_i|, |G_i'|)` for every index.
    pub component_sizes: Vec<(usize, usize)>,
    pub anchor: Option<usize>,
    pub overlap_oriented: usize,
    pub conflicts: usize,
    pub stage1_decided_pairs: usize,
    pub refine_decided_pairs: usize,
    pub undecided_pairs: usize,
    pub timings: Timings,
}

#[derive(Clone, Debug)]
pub struct SabreOutput {
    /// Scores, rounded to integers when the config asks for it.
    pub scores: Vec<f64>,
    pub raw_scores: Vec<f64>,
    pub h_stage1: ComparisonMatrix,
    pub h_hat: ComparisonMatrix,
    pub diagnostics: Diagnostics,
}

impl SabreOutput {
    pub fn positions(&self) -> Vec<usize> {
        round_scores(&self.raw_scores)
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs SABRE on an observation matrix.
pub fn sabre(a: &SymMatrix, config: &SabreConfig) -> Result<SabreOutput> {
    let n = a.n();
    config.validate(n)?;
    let th = config.tuning.thresholds;
    let start = Instant::now();

    let t = Instant::now();
    let d = estimate_distance(a, &Subset::full(n))?.matrix;
    let distance_ms = ms(t);

    let t = Instant::now();
    let s1 = first_seriation(&d, &th, config.edge_rule);
    let stage1_ms = ms(t);

    let t = Instant::now();
    let plan = match config.split {
        SplitMode::Tripartition => tripartition(n, config.seed)?,
        SplitMode::LeaveOneOut => leave_one_out(n)?,
    };
    let refined = refine(&s1.h, &d, a, config.sigma, th.delta4, &plan)?;
    let refine_ms = ms(t);

    let raw_scores = permutation_from_comparison(&refined.h_hat);
    let scores = match config.rounding {
        Rounding::Round => round_scores(&raw_scores).into_iter().map(|p| p as f64).collect(),
        Rounding::Raw => raw_scores.clone(),
    };
    let mut warnings = config.tuning.warnings.clone();
    if s1.oriented.is_none() {
        warnings.push("no index has two components; first seriation is empty".to_string());
    }
    let stage1_decided = s1.h.decided_pairs();
    let diagnostics = Diagnostics {
        n,
        thresholds: th,
        preset: config.tuning.preset,
        split: config.split,
        edge_rule: config.edge_rule,
        warnings,
        component_sizes: s1.bisections.iter().map(|b| (b.first.len(), b.second.len())).collect(),
        anchor: s1.oriented.as_ref().map(|o| o.anchor),
        overlap_oriented: s1.oriented.as_ref().map_or(0, |o| o.overlap_oriented),
        conflicts: s1.conflicts,
        stage1_decided_pairs: stage1_decided,
        refine_decided_pairs: refined.h_hat.decided_pairs() - stage1_decided,
        undecided_pairs: refined.h_hat.undecided_pairs(),
        timings: Timings {
            distance_ms,
            stage1_ms,
            refine_ms,
            total_ms: ms(start),
        },
    };
    Ok(SabreOutput {
        scores,
        raw_scores,
        h_stage1: s1.h,
        h_hat: refined.h_hat,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theoretical_values() {
        let t = default_tuning_theoretical(20).unwrap();
        assert!((t.thresholds.delta1 - 28.33).abs() < 0.01);
        assert!((t.thresholds.delta2 - 84.9).abs() < 0.1);
        let l = 20f64.ln();
        let d = t.thresholds.as_array();
        for k in 0..3 {
            assert!((d[k + 1] / d[k] - l).abs() < 1e-12);
        }
        let big = default_tuning_theoretical(1000).unwrap();
        assert!((big.thresholds.delta2 - 8485.0).abs() < 1.0);
        assert!(!big.feasible);
        assert!(big.warnings.iter().any(|w| w.contains("infeasible")));
    }

    #[test]
    fn practical_values_and_caps() {
        let t = default_tuning_practical(1000, 3.0, 3.0).unwrap();
        assert!((t.thresholds.delta1 - 864.879).abs() < 1e-3);
        assert_eq!(t.thresholds.delta2, 125.0);
        assert!(t.warnings.iter().any(|w| w.starts_with("cap: delta2")));
        assert!(default_tuning_practical(1000, 0.0, 3.0).is_err());
        assert!(default_tuning_practical(20, 3.0, 3.0).is_err());
        let lo = default_tuning_practical(500, 0.1, 3.0).unwrap().thresholds.as_array();
        let hi = default_tuning_practical(500, 0.2, 3.0).unwrap().thresholds.as_array();
        assert!(lo.iter().zip(&hi).all(|(a, b)| a <= b));
    }

    #[test]
    fn approx_values() {
        let t = default_tuning_approx(100, 0).unwrap();
        assert!((t.thresholds.delta1 - 191.7).abs() < 0.1);
        assert!((t.thresholds.delta2 / t.thresholds.delta1 - 100f64.ln()).abs() < 1e-12);
        let t3 = default_tuning_approx(100, 3).unwrap();
        assert!((t3.thresholds.delta2 / t3.thresholds.delta1 - (100.0f64 / 7.0).ln()).abs() < 1e-12);
        assert!(default_tuning_approx(100, 50).is_err());
    }

    #[test]
    fn leave_one_out_guard() {
        let tuning = default_tuning_calibrated(500, CALIBRATED_CONSTANTS).unwrap();
        let mut cfg = SabreConfig::new(tuning, 0.5);
        cfg.split = SplitMode::LeaveOneOut;
        assert!(matches!(cfg.validate(500), Err(SabreError::Guard(_))));
        cfg.allow_large_leave_one_out = true;
        assert!(cfg.validate(500).is_ok());
    }
}
