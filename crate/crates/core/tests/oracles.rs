//! Independent oracles for the exact solver.
//!
//! Eigenvalues come from a per-mode quadratic that follows from the product
//! form of the eigenvectors; coefficients come from dense SVD null vectors
//! and a dense boundary solve, sharing no code with the library.

use nalgebra::{DMatrix, DVector};
use storesize::model::{stationary_distribution, SystemModel};
use storesize::spectral::solve_spectrum;

/// Real roots of `A z² + B z + C = 0` over the modes.
///
/// Modes `k` and `N - k` share one quadratic, and the middle mode of an even
/// `N` has a double root, so this yields exactly `N + 1` roots.
fn quadratic_roots(n: usize, chi: f64, c: f64) -> Vec<f64> {
    let h = n as f64 / 2.0;
    let mut roots = Vec::new();
    for k in 0..=n / 2 {
        let t = (h - k as f64).powi(2);
        let a = t - (h - c).powi(2);
        let b = 2.0 * (1.0 - chi) * t - n as f64 * (1.0 + chi) * (h - c);
        let cc = -(1.0 + chi).powi(2) * (h * h - t);
        // `a` vanishes only for integer `C`.
        assert!(a != 0.0);
        let disc = b * b - 4.0 * a * cc;
        assert!(disc >= -1e-9, "complex mode k={k}");
        let sq = disc.max(0.0).sqrt();
        // Stable form of the two roots.
        let q = -0.5 * (b + b.signum() * sq);
        roots.push(q / a);
        if 2 * k != n && q != 0.0 {
            roots.push(cc / q);
        }
    }
    roots
}

fn oracle_negative_eigenvalues(n: usize, chi: f64, c: f64) -> Vec<f64> {
    let mut neg: Vec<f64> = quadratic_roots(n, chi, c)
        .into_iter()
        .filter(|z| *z < -1e-12)
        .collect();
    neg.sort_by(|a, b| b.partial_cmp(a).unwrap());
    neg
}

fn dense_generator(n: usize, chi: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        let up = (n - i) as f64 * chi;
        let down = i as f64;
        if i < n {
            m[(i, i + 1)] = up;
        }
        if i > 0 {
            m[(i, i - 1)] = down;
        }
        m[(i, i)] = -(up + down);
    }
    m
}

/// `P(S > b)` from quadratic eigenvalues, SVD left null vectors and a dense
/// boundary solve in the original (unbalanced) coordinates.
fn dense_outage(n: usize, chi: f64, c: f64, buffers: &[f64]) -> Vec<f64> {
    let m = dense_generator(n, chi);
    let d = DMatrix::from_diagonal(&DVector::from_fn(n + 1, |i, _| i as f64 - c));
    let zs = oracle_negative_eigenvalues(n, chi, c);
    let over: Vec<usize> = (0..=n).filter(|&i| i as f64 > c).collect();
    assert_eq!(zs.len(), over.len());

    let vecs: Vec<DVector<f64>> = zs
        .iter()
        .map(|&z| {
            let t = (&m - &d * z).transpose();
            let svd = t.svd(false, true);
            let vt = svd.v_t.unwrap();
            let (imin, _) = svd
                .singular_values
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap();
            vt.row(imin).transpose()
        })
        .collect();

    let p = chi / (1.0 + chi);
    let pi: Vec<f64> = (0..=n)
        .map(|i| {
            let ln = (1..=n).map(|x| (x as f64).ln()).sum::<f64>()
                - (1..=i).map(|x| (x as f64).ln()).sum::<f64>()
                - (1..=n - i).map(|x| (x as f64).ln()).sum::<f64>();
            (ln + i as f64 * p.ln() + (n - i) as f64 * (1.0 - p).ln()).exp()
        })
        .collect();

    let k = over.len();
    let sys = DMatrix::from_fn(k, k, |r, col| vecs[col][over[r]]);
    let rhs = DVector::from_fn(k, |r, _| -pi[over[r]]);
    let alpha = sys.lu().solve(&rhs).expect("boundary system");

    buffers
        .iter()
        .map(|&b| {
            -(0..k)
                .map(|j| alpha[j] * vecs[j].sum() * (zs[j] * b).exp())
                .sum::<f64>()
        })
        .collect()
}

const CASES: &[(usize, f64, f64)] = &[
    (1, 0.5, 0.8),
    (2, 1.0, 1.5),
    (3, 0.5, 1.7),
    (5, 0.5, 2.5),
    (8, 2.0, 6.3),
    (12, 0.5, 4.9),
    (20, 0.5, 8.3),
    (25, 1.0, 13.2),
];

#[test]
fn eigenvalues_match_mode_quadratics() {
    for &(n, chi, c) in CASES.iter().chain(&[(100, 0.5, 36.83), (400, 0.5, 147.32)]) {
        let sol = solve_spectrum(&SystemModel::from_parts(n, chi, c).unwrap()).unwrap();
        let expect = oracle_negative_eigenvalues(n, chi, c);
        let got = sol.negative_eigenvalues();
        assert_eq!(got.len(), expect.len(), "N={n}");
        for (g, e) in got.iter().zip(&expect) {
            assert!(
                (g - e).abs() <= 1e-8 * e.abs().max(1.0),
                "N={n}: {g} vs {e}"
            );
        }
    }
}

#[test]
fn dominant_eigenvalue_closed_form() {
    // Mode k = N gives z = (χ - (1+χ)ς) / (ς (1-ς)) for every N.
    for n in [100, 400, 800] {
        let s: f64 = 0.3683;
        let sol = solve_spectrum(&SystemModel::from_parts(n, 0.5, s * n as f64).unwrap()).unwrap();
        let expect = (0.5 - 1.5 * s) / (s * (1.0 - s));
        let z = sol.negative_eigenvalues()[0];
        assert!((z - expect).abs() < 1e-9, "N={n}: {z} vs {expect}");
    }
}

#[test]
fn outage_matches_dense_oracle() {
    let buffers = [0.0, 0.1, 0.5, 1.0, 2.5, 5.0];
    for &(n, chi, c) in CASES {
        let sol = solve_spectrum(&SystemModel::from_parts(n, chi, c).unwrap()).unwrap();
        let oracle = dense_outage(n, chi, c, &buffers);
        for (&b, o) in buffers.iter().zip(oracle) {
            let v = sol.outage_probability(b);
            assert!(
                (v - o).abs() <= 1e-9 * o.abs().max(1e-6),
                "N={n} C={c} b={b}: {v:e} vs {o:e}"
            );
        }
    }
}

#[test]
fn stationary_matches_direct_binomial() {
    let m = SystemModel::from_parts(9, 0.5, 4.5).unwrap();
    let pi = stationary_distribution(&m);
    let p: f64 = 1.0 / 3.0;
    let mut binom = 1.0;
    for i in 0..=9usize {
        if i > 0 {
            binom = binom * (10 - i) as f64 / i as f64;
        }
        let e = binom * p.powi(i as i32) * (1.0 - p).powi(9 - i as i32);
        assert!((pi[i] - e).abs() < 1e-15);
    }
}
