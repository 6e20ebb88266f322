//! Acceptance suite. Prints one PASS/FAIL line per criterion and a summary.
//!
//! `SABRE_ACCEPTANCE=1,4,6` runs a subset. Failures are reported but the
//! exit status stays zero unless `SABRE_ACCEPTANCE_STRICT=1` is set.
//! Criterion 6 writes its experiment tables under the cargo target tmp dir.

mod common;

use std::path::PathBuf;
use std::time::Instant;

use common::{bl_family, naive_proxy, r_prime_bound};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sabre::experiment::{
    run_experiment, write_experiment, ExperimentManifest, ModelSpec, NoiseTemplate, TuningSpec, SCHEMA_VERSION,
};
use sabre::models::{fit_average_lipschitz, fit_bilipschitz, sample_permutation};
use sabre::pipeline::{distance_scale, Preset};
use sabre::stage1::first_seriation;
use sabre::{
    check_average_lipschitz, check_bilipschitz, estimate_distance, gen_example, gen_f_alpha, l_kendall, l_one,
    nn_proxy, oracle_comparison_matrix, permutation_from_comparison, population_distance, sample_observation, EdgeRule,
    Example, LossKind, NoiseKind, NoiseSpec, Permutation, SplitMode, Subset, SymMatrix, Thresholds,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    sabre::experiment::median(&mut v).expect("non-empty")
}

/// Stage one on exact ordering distances with (1, 5, n/8): every decided
/// pair agrees with one global orientation of the truth and every pair at
/// least 5 apart is decided.
fn ideal_stage_one() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut failures = Vec::new();
    let mut runs = 0;
    for n in [50usize, 200] {
        for _ in 0..50 {
            runs += 1;
            let pi = Permutation::random(n, &mut rng);
            let p = pi.positions();
            let d = SymMatrix::from_upper(n, |i, j| p[i].abs_diff(p[j]) as f64).unwrap();
            let d3 = (n / 8) as f64;
            let th = Thresholds::new(1.0, 5.0, d3, d3).unwrap();
            let h = first_seriation(&d, &th, EdgeRule::Or).h;
            let star = oracle_comparison_matrix(&pi).unwrap();
            let agrees = |s: i8| (0..n).all(|i| (0..n).all(|j| h.get(i, j) == 0 || h.get(i, j) == s * star.get(i, j)));
            let sign_ok = agrees(1) || agrees(-1);
            let covered = (0..n).all(|i| (0..n).all(|j| p[i].abs_diff(p[j]) < 5 || h.get(i, j) != 0));
            if !(sign_ok && covered) {
                failures.push(format!("n={n} sign_ok={sign_ok} covered={covered}"));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("{}/{runs} permutations exact {failures:?}", runs - failures.len()),
    )
}

fn row_sum_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut ok = 0;
    for _ in 0..100 {
        let pi = Permutation::random(100, &mut rng);
        let h = oracle_comparison_matrix(&pi).unwrap();
        ok += (permutation_from_comparison(&h) == pi.as_scores()) as usize;
    }
    outcome(ok == 100, format!("{ok}/100 exact"))
}

fn kendall_sandwich() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut violations = 0;
    for _ in 0..1000 {
        let est = Permutation::random(50, &mut rng);
        let truth = Permutation::random(50, &mut rng);
        let lk = l_kendall(est.positions(), &truth).unwrap();
        let l1 = l_one(&est.as_scores(), &truth).unwrap();
        // Both losses are integers divided by n, so the comparison is exact.
        if !(0.5 * l1 <= lk && lk <= l1) {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{violations} violations over 1000 pairs"))
}

fn gram_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let n = 12;
    let all: Vec<usize> = (0..n).collect();
    let mut mismatches = 0;
    for m in 0..20 {
        // Half the matrices are small integers so that ties really occur.
        let a = if m % 2 == 0 {
            SymMatrix::from_upper(n, |_, _| rng.random_range(-2..=2) as f64).unwrap()
        } else {
            SymMatrix::from_upper(n, |_, _| rng.random::<f64>() - 0.5).unwrap()
        };
        let got = nn_proxy(&a, &Subset::full(n)).unwrap();
        mismatches += (0..n).filter(|&i| got[i] != Some(naive_proxy(&a, &all, i).0)).count();
    }
    outcome(
        mismatches == 0,
        format!("{mismatches} argmin mismatches over 20 matrices"),
    )
}

fn distance_rate_shape() -> Outcome {
    let sigma = 0.5;
    let normalised_error = |n: usize| -> f64 {
        let f = gen_f_alpha(n, 1.0).unwrap();
        let errs: Vec<f64> = (0..10u64)
            .map(|seed| {
                let pi = sample_permutation(n, seed);
                let a = sample_observation(&f, &pi, &NoiseSpec::gaussian(sigma, 1000 + seed)).unwrap();
                let full = Subset::full(n);
                let dhat = estimate_distance(&a, &full).unwrap().matrix;
                let dstar = population_distance(&f, &pi, &full).unwrap();
                dhat.max_abs_diff(&dstar).unwrap() / distance_scale(n)
            })
            .collect();
        median(errs)
    };
    let small = normalised_error(250);
    let large = normalised_error(1000);
    outcome(
        large <= 1.5 * small,
        format!(
            "median normalised error {small:.4} (n=250), {large:.4} (n=1000), ratio {:.3} (<= 1.5)",
            large / small
        ),
    )
}

fn manifest(n_grid: Vec<usize>, trials: usize, split: SplitMode, zeta: usize) -> ExperimentManifest {
    ExperimentManifest {
        schema_version: SCHEMA_VERSION,
        model: ModelSpec::FAlpha { alpha: 1.0 },
        noise: NoiseTemplate {
            kind: NoiseKind::Gaussian,
            sigma: 0.5,
        },
        n_grid,
        trials,
        tuning: TuningSpec::preset(Preset::Calibrated),
        split,
        edge_rule: EdgeRule::Or,
        zeta,
        losses: vec![LossKind::LMax, LossKind::LKendall, LossKind::LOne],
        output: None,
        master_seed: 2024,
        allow_large_leave_one_out: false,
    }
}

fn output_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name)
}

fn rate_scaling() -> Outcome {
    let m = manifest(vec![250, 500, 1000, 2000], 10, SplitMode::Tripartition, 0);
    let r = run_experiment(&m).unwrap();
    let dir = output_dir("rate");
    let written = write_experiment(&dir, &r).is_ok();
    let medians: Vec<String> = r
        .summary
        .per_n
        .iter()
        .map(|p| format!("{}:{:.4}", p.n, p.median_l_max.unwrap_or(f64::NAN)))
        .collect();
    let slope = r.summary.slope_l_max.unwrap_or(f64::NAN);
    outcome(
        (-0.65..=-0.35).contains(&slope),
        format!(
            "slope {slope:.3} (band [-0.65, -0.35]); medians {}; tables {}",
            medians.join(" "),
            if written {
                dir.display().to_string()
            } else {
                "not written".to_string()
            }
        ),
    )
}

fn bl_implies_al() -> Outcome {
    let n = 100;
    let r = 0.25;
    let mut ok = 0;
    let mut checked = 0;
    for f in bl_family(n) {
        let (alpha, beta) = fit_bilipschitz(&f);
        if !check_bilipschitz(&f, alpha, beta).pass {
            continue;
        }
        checked += 1;
        let rp = 0.9 * r_prime_bound(alpha, beta, r);
        ok += check_average_lipschitz(&f, alpha / 4.0, beta, r, rp, None)
            .unwrap()
            .pass as usize;
    }
    outcome(
        checked == 10 && ok == 10,
        format!("{ok}/{checked} bi-Lipschitz instances average-Lipschitz"),
    )
}

fn separations() -> Outcome {
    let n = 100;
    let mut notes = Vec::new();
    let mut pass = true;
    for ex in [Example::Vanishing, Example::Plateau { c: 2 }] {
        let f = gen_example(n, &ex).unwrap();
        let al = fit_average_lipschitz(&f, 0.25, None).unwrap();
        let al_ok = al.alpha > 0.0
            && check_average_lipschitz(&f, al.alpha, al.beta, 0.25, 0.99 * al.r_prime, None)
                .unwrap()
                .pass;
        let bl_fails = !check_bilipschitz(&f, al.alpha, al.beta).pass;
        pass &= al_ok && bl_fails;
        notes.push(format!("{} al_pass={al_ok} bl_fail={bl_fails}", ex.name()));
    }
    let alpha = 0.5;
    for n in [64usize, 144, 256] {
        let sq = (n as f64).sqrt();
        for mult in [1.0, 2.0, 4.0] {
            let delta = mult * sq;
            let f = gen_example(
                n,
                &Example::Jump {
                    alpha,
                    delta,
                    l0: n / 4,
                },
            )
            .unwrap();
            let al_beta = fit_average_lipschitz(&f, 0.25, None).unwrap().beta;
            let (_, bl_beta) = fit_bilipschitz(&f);
            let ok = al_beta <= alpha + 3.0 * delta / sq && bl_beta >= delta / 2.0;
            pass &= ok;
            if mult == 1.0 || !ok {
                notes.push(format!(
                    "jump n={n} delta={delta:.1} al_beta={al_beta:.3} bl_beta={bl_beta:.2}"
                ));
            }
        }
    }
    outcome(pass, notes.join("; "))
}

fn approximate_decay() -> Outcome {
    let run = |n: usize| -> f64 {
        let zeta = (n as f64).sqrt().floor() as usize;
        let m = manifest(vec![n], 10, SplitMode::LeaveOneOut, zeta);
        let r = run_experiment(&m).unwrap();
        r.summary.per_n[0].median_l_max.unwrap()
    };
    let small = run(150);
    let large = run(300);
    outcome(
        large <= 0.8 * small,
        format!(
            "median L_max {small:.4} (n=150, zeta=12), {large:.4} (n=300, zeta=17), ratio {:.3} (<= 0.8)",
            large / small
        ),
    )
}

type Criterion = (usize, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 9] = [
    (1, "ideal-distance first seriation", ideal_stage_one),
    (2, "row-sum identity", row_sum_identity),
    (3, "Kendall / l1 sandwich", kendall_sandwich),
    (4, "Gram proxy equals naive proxy", gram_equivalence),
    (5, "distance error rate shape", distance_rate_shape),
    (6, "end-to-end rate slope", rate_scaling),
    (7, "bi-Lipschitz implies average-Lipschitz", bl_implies_al),
    (8, "class separations", separations),
    (9, "approximate-permutation decay", approximate_decay),
];

fn main() {
    // libtest flags such as --list or a name filter may be forwarded here.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let selected: Option<Vec<usize>> = std::env::var("SABRE_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let strict = std::env::var("SABRE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut failed = Vec::new();
    let mut ran = 0;
    for (k, name, run) in CRITERIA {
        if selected.as_ref().is_some_and(|s| !s.contains(&k)) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {k}: {verdict} {name}: {} [{:.1}s]",
            o.detail,
            t.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed.push(k);
        }
    }
    println!("acceptance: {}/{ran} passed; failed: {failed:?}", ran - failed.len());
    if strict && !failed.is_empty() {
        std::process::exit(1);
    }
}
