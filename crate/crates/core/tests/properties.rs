use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sabre::perm::max_spread;
use sabre::stage2::{leave_one_out, tripartition};
use sabre::{
    estimate_distance, gen_f_alpha, l_kendall, l_max, l_one, oracle_comparison_matrix, permutation_from_comparison,
    permute_matrix, refine, reverse_permutation, round_scores, sample_approx_permutation, sample_observation,
    ComparisonMatrix, NoiseSpec, Permutation, Subset,
};

fn perm(n: usize, seed: u64) -> Permutation {
    Permutation::random(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn arb_perm(max_n: usize) -> impl Strategy<Value = Permutation> {
    (2..max_n, any::<u64>()).prop_map(|(n, s)| perm(n, s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn row_sums_recover_the_order(pi in arb_perm(120)) {
        let h = oracle_comparison_matrix(&pi).unwrap();
        let scores = permutation_from_comparison(&h);
        let want: Vec<f64> = pi.positions().iter().map(|&p| p as f64).collect();
        prop_assert_eq!(&scores, &want);
        prop_assert_eq!(round_scores(&scores), pi.positions().to_vec());
    }

    #[test]
    fn reversal_negates_the_comparison_matrix(pi in arb_perm(60)) {
        let h = oracle_comparison_matrix(&pi).unwrap();
        let hr = oracle_comparison_matrix(&reverse_permutation(&pi)).unwrap();
        prop_assert_eq!(hr, h.negated());
        prop_assert_eq!(reverse_permutation(&reverse_permutation(&pi)), pi);
    }

    #[test]
    fn permuted_signal_is_symmetric_and_read_through(pi in arb_perm(40), alpha in 0.05f64..=1.0) {
        let n = pi.len();
        let f = gen_f_alpha(n, alpha).unwrap();
        let a = permute_matrix(&f, &pi).unwrap();
        let p = pi.positions();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(a.get(i, j), a.get(j, i));
                prop_assert_eq!(a.get(i, j), f.get(p[i] - 1, p[j] - 1));
            }
        }
    }

    #[test]
    fn tripartition_is_balanced(n in 9usize..300, seed in any::<u64>()) {
        let plan = tripartition(n, seed).unwrap();
        let sizes: Vec<usize> = plan.parts.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut all: Vec<usize> = plan.parts.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(plan, tripartition(n, seed).unwrap());
    }

    #[test]
    fn approximate_permutations_respect_the_spread(n in 2usize..200, frac in 0.0f64..0.5, seed in any::<u64>()) {
        let zeta = ((n as f64 - 1.0) / 2.0 * frac) as usize;
        let pi = sample_approx_permutation(n, zeta, seed).unwrap();
        prop_assert!(max_spread(pi.positions()) <= zeta);
        prop_assert!(pi.positions().iter().all(|&p| (1..=n).contains(&p)));
        if zeta == 0 {
            prop_assert!(pi.is_exact());
        }
    }

    #[test]
    fn kendall_is_sandwiched_by_l1(est in arb_perm(60), seed in any::<u64>()) {
        let truth = perm(est.len(), seed);
        let lk = l_kendall(est.positions(), &truth).unwrap();
        let l1 = l_one(&est.as_scores(), &truth).unwrap();
        prop_assert!(0.5 * l1 <= lk + 1e-12);
        prop_assert!(lk <= l1 + 1e-12);
    }

    #[test]
    fn loss_chain(est in arb_perm(60), seed in any::<u64>()) {
        let n = est.len();
        let truth = perm(n, seed);
        let lk = l_kendall(est.positions(), &truth).unwrap();
        let l1 = l_one(&est.as_scores(), &truth).unwrap();
        let lm = l_max(&est.as_scores(), &truth).unwrap();
        prop_assert!(lk <= l1 + 1e-12);
        prop_assert!(l1 <= n as f64 * lm + 1e-12);
    }

    #[test]
    fn losses_are_reversal_invariant(pi in arb_perm(60)) {
        let s = pi.as_scores();
        let rev = reverse_permutation(&pi);
        prop_assert_eq!(l_max(&s, &pi).unwrap(), 0.0);
        prop_assert_eq!(l_max(&s, &rev).unwrap(), 0.0);
        prop_assert_eq!(l_one(&s, &rev).unwrap(), 0.0);
        prop_assert_eq!(l_kendall(pi.positions(), &rev).unwrap(), 0.0);
    }

    #[test]
    fn distance_estimates_are_symmetric_and_nonnegative(n in 5usize..30, seed in any::<u64>()) {
        let pi = perm(n, seed);
        let a = sample_observation(&gen_f_alpha(n, 1.0).unwrap(), &pi, &NoiseSpec::gaussian(0.3, seed)).unwrap();
        let d = estimate_distance(&a, &Subset::full(n)).unwrap().matrix;
        for i in 0..n {
            prop_assert_eq!(d.get(i, i), 0.0);
            for j in 0..n {
                prop_assert!(d.get(i, j) >= 0.0);
                prop_assert_eq!(d.get(i, j), d.get(j, i));
            }
        }
    }
}

fn random_partial(pi: &Permutation, keep: f64, seed: u64) -> ComparisonMatrix {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = oracle_comparison_matrix(pi).unwrap();
    let n = pi.len();
    let mut h = ComparisonMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(keep) {
                h.set_pair(i, j, full.get(i, j));
            }
        }
    }
    h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn refinement_only_fills_undecided_pairs(
        n in 9usize..40,
        keep in 0.0f64..1.0,
        sigma in 0.0f64..0.2,
        loo in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let pi = perm(n, seed);
        let a = sample_observation(&gen_f_alpha(n, 1.0).unwrap(), &pi, &NoiseSpec::gaussian(sigma, seed)).unwrap();
        let d = estimate_distance(&a, &Subset::full(n)).unwrap().matrix;
        let h = random_partial(&pi, keep, seed ^ 1);
        let plan = if loo { leave_one_out(n).unwrap() } else { tripartition(n, seed).unwrap() };
        let out = refine(&h, &d, &a, sigma.max(1e-3), 2.0, &plan).unwrap();
        for i in 0..n {
            for j in 0..n {
                let (x, t) = (h.get(i, j), out.h_tilde.get(i, j));
                prop_assert!(x == 0 || t == 0);
                prop_assert_eq!(out.h_hat.get(i, j), x + t);
                prop_assert_eq!(t, -out.h_tilde.get(j, i));
            }
        }
        prop_assert_eq!(out.examined, h.undecided_pairs());
    }
}
