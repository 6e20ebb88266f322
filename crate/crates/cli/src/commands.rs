use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use sabre::experiment::{run_experiment, stream_seeds, write_experiment, ExperimentManifest, ModelSpec, TuningSpec};
use sabre::io::{
    comparison_to_csv, read_matrix_csv, read_positions, read_scores, write_matrix_csv, write_positions, write_scores,
};
use sabre::models::{fit_average_lipschitz, fit_bilipschitz, ValidationReport};
use sabre::pipeline::{Preset, Rounding};
use sabre::{
    check_average_lipschitz, check_bilipschitz, check_robinson, loss_report, sabre as run_sabre,
    sample_approx_permutation, sample_observation, EdgeRule, LossKind, NoiseKind, NoiseSpec, Permutation, RobinsonMode,
    SabreConfig, SabreError, SplitMode,
};

use crate::{CheckArgs, CliError, EvaluateArgs, ExperimentArgs, GenerateArgs, SeriateArgs};

const SCHEMA_VERSION: u32 = sabre::experiment::SCHEMA_VERSION;

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(SabreError::from)? + "\n";
    fs::write(path, text).map_err(SabreError::from)?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(SabreError::from)?;
    Ok(())
}

fn model_spec(a: &GenerateArgs) -> Result<ModelSpec> {
    Ok(match a.model.as_str() {
        "f_alpha" => ModelSpec::FAlpha { alpha: a.alpha },
        "vanishing" => ModelSpec::Vanishing,
        "jump" => ModelSpec::Jump {
            alpha: a.alpha,
            delta: a.delta.unwrap_or((a.n as f64).sqrt()),
            l0: a.l0.unwrap_or(a.n / 4),
        },
        "plateau" => ModelSpec::Plateau { c: a.c },
        other => return Err(usage(format!("unknown model '{other}'"))),
    })
}

pub fn generate(a: &GenerateArgs) -> Result<()> {
    let model = model_spec(a)?;
    let kind: NoiseKind = a.noise.parse()?;
    if !(a.sigma >= 0.0 && a.sigma.is_finite()) {
        return Err(usage(format!("sigma must be >= 0, got {}", a.sigma)));
    }
    let [pi_seed, noise_seed, _] = stream_seeds(a.seed);
    let pi = sample_approx_permutation(a.n, a.zeta, pi_seed)?;
    let f = model.generate(a.n)?;
    let noise = NoiseSpec {
        kind,
        sigma: a.sigma,
        seed: noise_seed,
    };
    let obs = sample_observation(&f, &pi, &noise)?;

    create_dir(&a.out)?;
    let mut files = vec!["A.csv", "pi.txt", "manifest.json"];
    write_matrix_csv(&a.out.join("A.csv"), &obs)?;
    if !a.no_signal {
        write_matrix_csv(&a.out.join("F.csv"), &f)?;
        files.insert(1, "F.csv");
    }
    write_positions(&a.out.join("pi.txt"), pi.positions())?;
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "model": model,
        "n": a.n,
        "noise": { "kind": kind, "sigma": a.sigma },
        "effective_sigma": noise.effective_sigma(),
        "seed": a.seed,
        "pi_seed": pi_seed,
        "noise_seed": noise_seed,
        "zeta": a.zeta,
        "files": files,
    });
    write_json(&a.out.join("manifest.json"), &manifest)?;
    println!("wrote {} to {}", files.join(", "), a.out.display());
    Ok(())
}

fn four(v: &Option<Vec<f64>>, what: &str) -> Result<Option<[f64; 4]>> {
    match v {
        None => Ok(None),
        Some(x) => <[f64; 4]>::try_from(x.as_slice())
            .map(Some)
            .map_err(|_| usage(format!("--{what} needs exactly four values"))),
    }
}

pub fn seriate(a: &SeriateArgs) -> Result<()> {
    let obs = read_matrix_csv(&a.input)?;
    let n = obs.n();
    let spec = TuningSpec {
        preset: a.tuning.parse::<Preset>()?,
        kappa1: a.kappa1,
        ratio: a.ratio,
        constants: four(&a.constants, "constants")?,
        thresholds: four(&a.thresholds, "thresholds")?,
    };
    let cfg = SabreConfig {
        tuning: spec.resolve(n, a.zeta)?,
        sigma: a.sigma,
        split: a.mode.parse::<SplitMode>()?,
        edge_rule: a.edge_rule.parse::<EdgeRule>()?,
        rounding: if a.raw { Rounding::Raw } else { Rounding::Round },
        seed: a.seed,
        allow_large_leave_one_out: a.allow_large_leave_one_out,
    };
    let out = run_sabre(&obs, &cfg)?;

    create_dir(&a.out)?;
    if a.raw {
        write_scores(&a.out.join("pihat.txt"), &out.raw_scores)?;
    } else {
        write_positions(&a.out.join("pihat.txt"), &out.positions())?;
    }
    if a.write_h {
        fs::write(a.out.join("H.csv"), comparison_to_csv(&out.h_hat)).map_err(SabreError::from)?;
    }
    let d = &out.diagnostics;
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "input": a.input.display().to_string(),
        "sigma": a.sigma,
        "feasible": cfg.tuning.feasible,
        "diagnostics": d,
    });
    write_json(&a.out.join("diagnostics.json"), &report)?;
    println!(
        "n={n} stage1_decided={} refine_decided={} undecided={} total_ms={:.1}",
        d.stage1_decided_pairs, d.refine_decided_pairs, d.undecided_pairs, d.timings.total_ms
    );
    for w in &d.warnings {
        println!("warning: {w}");
    }
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let selection = a
        .losses
        .iter()
        .map(|s| s.trim().parse::<LossKind>())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if selection.is_empty() {
        return Err(usage("no loss selected"));
    }
    let est = read_scores(&a.est)?;
    let truth = Permutation::infer(read_positions(&a.truth)?)?;
    let signal = a.matrix_f.as_deref().map(read_matrix_csv).transpose()?;
    let rep = loss_report(&est, &truth, &selection, signal.as_ref())?;

    println!("{:<12} {:>12}  side", "loss", "value");
    let rows = [
        (LossKind::LMax, rep.l_max, rep.side_max),
        (LossKind::LKendall, rep.l_kendall, rep.side_kendall),
        (LossKind::LOne, rep.l_one, rep.side_one),
        (LossKind::LFrobenius, rep.l_frobenius, rep.side_frobenius),
    ];
    for (kind, value, side) in rows {
        if let (Some(v), Some(s)) = (value, side) {
            let side = serde_json::to_value(s).map_err(SabreError::from)?;
            println!("{:<12} {:>12.6}  {}", kind.column(), v, side.as_str().unwrap_or(""));
        }
    }
    if let Some(path) = &a.out {
        let report = json!({
            "schema_version": SCHEMA_VERSION,
            "n": truth.len(),
            "report": rep,
        });
        write_json(path, &report)?;
    }
    Ok(())
}

pub fn experiment(a: &ExperimentArgs) -> Result<()> {
    let text = fs::read_to_string(&a.manifest).map_err(SabreError::from)?;
    let m = ExperimentManifest::from_json(&text)?;
    let dir = match (&a.out, &m.output) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => d.into(),
        (None, None) => {
            return Err(usage(
                "no output directory: pass --out or set \"output\" in the manifest",
            ))
        }
    };
    let result = run_experiment(&m)?;
    write_experiment(&dir, &result)?;
    for p in &result.summary.per_n {
        println!(
            "n={} trials={} median_l_max={}",
            p.n,
            p.trials,
            p.median_l_max.map_or("-".to_string(), |v| format!("{v:.4}"))
        );
    }
    match result.summary.slope_l_max {
        Some(s) => println!("slope of log median l_max vs log n: {s:.4}"),
        None => println!("slope: {}", result.summary.slope_status),
    }
    println!("wrote results.csv, timings.csv, summary.json to {}", dir.display());
    Ok(())
}

/// Violation indices are reported 1-based like every other file format.
fn report_json(rep: &ValidationReport) -> Value {
    json!({
        "pass": rep.pass,
        "worst": rep.worst.as_ref().map(|w| json!({
            "condition": w.condition,
            "i": w.i + 1,
            "j": w.j + 1,
            "k": w.k.map(|k| k + 1),
            "margin": w.margin,
        })),
    })
}

fn need(v: Option<f64>, name: &str, class: &str) -> Result<f64> {
    v.ok_or_else(|| usage(format!("--class {class} needs --{name} (or --fit)")))
}

pub fn check(a: &CheckArgs) -> Result<()> {
    let f = read_matrix_csv(&a.input)?;
    let out = match a.class.as_str() {
        "robinson" => {
            let mode = match a.mode.as_str() {
                "strict" => RobinsonMode::Strict,
                "weak" => RobinsonMode::Weak,
                other => return Err(usage(format!("unknown robinson mode '{other}'"))),
            };
            json!({ "class": "robinson", "mode": mode, "pass": check_robinson(&f, mode) })
        }
        "bl" => {
            let (alpha, beta) = if a.fit {
                fit_bilipschitz(&f)
            } else {
                (need(a.alpha, "alpha", "bl")?, need(a.beta, "beta", "bl")?)
            };
            let rep = check_bilipschitz(&f, alpha, beta);
            let mut v = report_json(&rep);
            // A fitted lower constant of zero means no admissible alpha.
            v["pass"] = json!(rep.pass && alpha > 0.0);
            json!({ "class": "bl", "alpha": alpha, "beta": beta, "fitted": a.fit, "report": v })
        }
        "al" => {
            let pi =
                a.pi.as_deref()
                    .map(|p| read_positions(p).and_then(Permutation::infer))
                    .transpose()?;
            let (alpha, beta, r_prime) = if a.fit {
                let c = fit_average_lipschitz(&f, a.r, pi.as_ref())?;
                // The non-collapse bound is strict; back off from the supremum.
                let rp = if c.r_prime.is_finite() { 0.99 * c.r_prime } else { 0.0 };
                (c.alpha, c.beta, rp)
            } else {
                (
                    need(a.alpha, "alpha", "al")?,
                    need(a.beta, "beta", "al")?,
                    need(a.r_prime, "r-prime", "al")?,
                )
            };
            let rep = check_average_lipschitz(&f, alpha, beta, a.r, r_prime, pi.as_ref())?;
            let mut v = report_json(&rep);
            v["pass"] = json!(rep.pass && alpha > 0.0);
            json!({
                "class": "al",
                "alpha": alpha,
                "beta": beta,
                "r": a.r,
                "r_prime": r_prime,
                "fitted": a.fit,
                "report": v,
            })
        }
        other => return Err(usage(format!("unknown class '{other}' (expected robinson, bl or al)"))),
    };
    println!("{}", serde_json::to_string_pretty(&out).map_err(SabreError::from)?);
    Ok(())
}
