#![allow(dead_code)]

use sabre::{gen_f_alpha, SymMatrix};

pub fn inner(a: &SymMatrix, s: &[usize], x: usize, y: usize) -> f64 {
    s.iter().map(|&l| a.get(x, l) * a.get(y, l)).sum()
}

/// `max_{k ∈ S \ {i, j}} |<A_k, A_i> - <A_k, A_j>|` with every inner
/// product evaluated directly.
pub fn naive_criterion(a: &SymMatrix, s: &[usize], i: usize, j: usize) -> f64 {
    s.iter()
        .filter(|&&k| k != i && k != j)
        .map(|&k| (inner(a, s, k, i) - inner(a, s, k, j)).abs())
        .fold(0.0, f64::max)
}

/// Proxy by brute force; ties to the smallest index.
pub fn naive_proxy(a: &SymMatrix, s: &[usize], i: usize) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for &j in s {
        if j == i {
            continue;
        }
        let v = naive_criterion(a, s, i, j);
        if v < best.1 {
            best = (j, v);
        }
    }
    best
}

/// Largest admissible r' for the average-Lipschitz inclusion of a
/// bi-Lipschitz matrix (a strict bound).
pub fn r_prime_bound(alpha: f64, beta: f64, r: f64) -> f64 {
    (alpha / 2f64.sqrt() * r).min(alpha.powf(1.5) / (8.0 * (alpha + beta).sqrt()))
}

/// Ten bi-Lipschitz Robinson matrices: linear profiles and mildly convex or
/// concave ones.
pub fn bl_family(n: usize) -> Vec<SymMatrix> {
    let nf = n as f64;
    let mut out: Vec<SymMatrix> = [0.2, 0.35, 0.5, 0.65, 0.8, 1.0]
        .iter()
        .map(|&a| gen_f_alpha(n, a).unwrap())
        .collect();
    for &(a, c) in &[(0.4, 0.3), (0.6, 0.2), (0.5, -0.2), (0.7, -0.3)] {
        out.push(
            SymMatrix::from_upper(n, |i, j| {
                let g = (j - i) as f64 / nf;
                1.0 - a * g - c * g * g
            })
            .unwrap(),
        );
    }
    out
}
