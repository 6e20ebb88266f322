//! Pilot runs used to pick the calibrated threshold constants.
//!
//! Usage: `calibrate <n> <trials> [c1 c2 c3 c4] [sigma] [zeta] [split]`
//!
//! With `PRACTICAL=kappa1,ratio` in the environment the practical preset is
//! used instead and the constants are ignored.
//!
//! Prints one line per trial with the loss, the fraction of pairs decided
//! by each stage and the stage timings, then the median loss.

use sabre::experiment::{run_trial, ExperimentManifest, ModelSpec, NoiseTemplate, TuningSpec, SCHEMA_VERSION};
use sabre::pipeline::{Preset, CALIBRATED_CONSTANTS};
use sabre::{LossKind, NoiseKind, SplitMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().map_or(Ok(500), |s| s.parse())?;
    let trials: usize = args.get(1).map_or(Ok(3), |s| s.parse())?;
    let mut constants = CALIBRATED_CONSTANTS;
    if args.len() >= 6 {
        for k in 0..4 {
            constants[k] = args[2 + k].parse()?;
        }
    }
    let sigma: f64 = args.get(6).map_or(Ok(0.5), |s| s.parse())?;
    let zeta: usize = args.get(7).map_or(Ok(0), |s| s.parse())?;
    let split: SplitMode = args.get(8).map_or(Ok(SplitMode::Tripartition), |s| s.parse())?;

    let manifest = ExperimentManifest {
        schema_version: SCHEMA_VERSION,
        model: ModelSpec::FAlpha { alpha: 1.0 },
        noise: NoiseTemplate {
            kind: NoiseKind::Gaussian,
            sigma,
        },
        n_grid: vec![n],
        trials,
        tuning: match std::env::var("PRACTICAL") {
            Ok(v) => {
                let (k, r) = v.split_once(',').ok_or("PRACTICAL must be kappa1,ratio")?;
                TuningSpec {
                    kappa1: Some(k.parse()?),
                    ratio: Some(r.parse()?),
                    ..TuningSpec::preset(Preset::Practical)
                }
            }
            Err(_) => TuningSpec {
                constants: Some(constants),
                ..TuningSpec::preset(Preset::Calibrated)
            },
        },
        split,
        edge_rule: Default::default(),
        zeta,
        losses: vec![LossKind::LMax],
        output: None,
        master_seed: 2024,
        allow_large_leave_one_out: true,
    };
    let pairs = (n * (n - 1) / 2) as f64;
    let mut losses = Vec::new();
    for t in 0..trials {
        let r = run_trial(&manifest, n, t)?;
        let l = r.losses.l_max.unwrap_or(f64::NAN);
        losses.push(l);
        println!(
            "n={n} trial={t} l_max={l:.4} stage1={:.3} refine={:.3} conflicts={} \
             ms: dist={:.0} s1={:.0} ref={:.0}",
            r.stage1_decided_pairs as f64 / pairs,
            r.refine_decided_pairs as f64 / pairs,
            r.conflicts,
            r.distance_ms,
            r.stage1_ms,
            r.refine_ms
        );
    }
    let med = sabre::experiment::median(&mut losses).unwrap_or(f64::NAN);
    println!("median l_max = {med:.4}");
    Ok(())
}
