mod common;

use common::{bl_family, r_prime_bound};
use sabre::models::{fit_average_lipschitz, fit_bilipschitz};
use sabre::{
    check_average_lipschitz, check_bilipschitz, check_robinson, gen_example, gen_f_alpha, permute_matrix, Example,
    Permutation, RobinsonMode,
};

#[test]
fn bilipschitz_instances_are_average_lipschitz() {
    let n = 100;
    for f in bl_family(n) {
        assert!(check_robinson(&f, RobinsonMode::Strict));
        let (alpha, beta) = fit_bilipschitz(&f);
        assert!(alpha > 0.0);
        assert!(check_bilipschitz(&f, alpha, beta).pass);
        let r = 0.25;
        let rp = 0.9 * r_prime_bound(alpha, beta, r);
        let rep = check_average_lipschitz(&f, alpha / 4.0, beta, r, rp, None).unwrap();
        assert!(rep.pass, "alpha {alpha} beta {beta}: {:?}", rep.worst);
    }
}

#[test]
fn average_lipschitz_is_invariant_under_latent_relabelling() {
    let n = 40;
    let f = gen_f_alpha(n, 0.6).unwrap();
    let pi = Permutation::new((1..=n).rev().collect()).unwrap();
    let a = check_average_lipschitz(&f, 0.15, 0.6, 0.25, 0.05, None).unwrap();
    let b = check_average_lipschitz(&f, 0.15, 0.6, 0.25, 0.05, Some(&pi)).unwrap();
    assert_eq!(a.pass, b.pass);
    assert!(a.pass);
}

#[test]
fn vanishing_and_plateau_separate_the_classes() {
    let n = 100;
    for ex in [Example::Vanishing, Example::Plateau { c: 2 }, Example::Plateau { c: 3 }] {
        let f = gen_example(n, &ex).unwrap();
        assert!(check_robinson(&f, RobinsonMode::Weak));
        let al = fit_average_lipschitz(&f, 0.25, None).unwrap();
        assert!(al.alpha > 0.0 && al.r_prime > 0.0);
        let rep = check_average_lipschitz(&f, al.alpha, al.beta, 0.25, 0.99 * al.r_prime, None).unwrap();
        assert!(rep.pass, "{}: {:?}", ex.name(), rep.worst);
        // No positive lower constant survives the flat stretches.
        let (bl_alpha, _) = fit_bilipschitz(&f);
        assert!(bl_alpha <= 1e-12, "{}: {bl_alpha}", ex.name());
        let bl = check_bilipschitz(&f, al.alpha, al.beta);
        assert!(!bl.pass);
        let worst = bl.worst.unwrap();
        assert!(worst.margin < 0.0 && worst.i < worst.j && worst.k.is_some());
    }
}

#[test]
fn jump_inflates_only_the_pointwise_constant() {
    let alpha = 0.5;
    for n in [64usize, 144, 256] {
        let delta = (n as f64).sqrt();
        let f = gen_example(
            n,
            &Example::Jump {
                alpha,
                delta,
                l0: n / 4,
            },
        )
        .unwrap();
        let al = fit_average_lipschitz(&f, 0.25, None).unwrap();
        let (_, bl_beta) = fit_bilipschitz(&f);
        assert!(al.beta <= alpha + 3.0 * delta / (n as f64).sqrt(), "n={n}: {}", al.beta);
        assert!(bl_beta >= delta / 2.0, "n={n}: {bl_beta}");
    }
}

#[test]
fn robinson_is_lost_under_a_relabelling() {
    let n = 12;
    let f = gen_f_alpha(n, 1.0).unwrap();
    let mut pos: Vec<usize> = (1..=n).collect();
    pos.swap(2, 7);
    let a = permute_matrix(&f, &Permutation::new(pos).unwrap()).unwrap();
    assert!(!check_robinson(&a, RobinsonMode::Weak));
}
