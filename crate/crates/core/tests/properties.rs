use proptest::prelude::*;
use storesize::model::SystemModel;
use storesize::sizing::{size_storage, Method};
use storesize::spectral::solve_spectrum;

/// Stable, non-degenerate models with up to 40 users.
fn stable_model() -> impl Strategy<Value = SystemModel> {
    (1usize..=40, 0.1f64..3.0, 0.02f64..0.98).prop_filter_map("integer capacity", |(n, chi, t)| {
        let p = chi / (1.0 + chi);
        let c = n as f64 * (p + (1.0 - p) * t);
        let frac = c - c.floor();
        if !(1e-6..=1.0 - 1e-6).contains(&frac) {
            return None;
        }
        SystemModel::from_parts(n, chi, c).ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn outage_is_a_decreasing_probability(m in stable_model(), bs in prop::collection::vec(0.0f64..20.0, 2..8)) {
        let sol = solve_spectrum(&m).unwrap();
        let mut bs = bs;
        bs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let vals: Vec<f64> = bs.iter().map(|&b| sol.outage_probability(b)).collect();
        for v in &vals {
            prop_assert!((0.0..=1.0).contains(v));
        }
        for w in vals.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn empty_buffer_outage_covers_overload(m in stable_model()) {
        // Overload states never sit at an empty buffer.
        let sol = solve_spectrum(&m).unwrap();
        let overload: f64 = sol.pi().iter().enumerate()
            .filter(|(i, _)| *i as f64 > m.capacity())
            .map(|(_, p)| p)
            .sum();
        prop_assert!(sol.outage_probability(0.0) >= overload - 1e-12);
        let f0 = sol.cdf(0.0);
        for (i, f) in f0.components.iter().enumerate() {
            if i as f64 > m.capacity() {
                prop_assert!(f.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cdf_tends_to_stationary_law(m in stable_model()) {
        let sol = solve_spectrum(&m).unwrap();
        let z0 = sol.negative_eigenvalues().first().copied().unwrap_or(-1.0);
        let far = sol.cdf(60.0 / z0.abs());
        for (f, p) in far.components.iter().zip(sol.pi()) {
            prop_assert!((f - p).abs() < 1e-9);
        }
    }

    #[test]
    fn more_capacity_never_hurts(m in stable_model(), dc in 0.01f64..1.0, b in 0.0f64..10.0) {
        let c2 = m.capacity() + dc;
        let frac = c2 - c2.floor();
        prop_assume!(frac > 1e-6 && frac < 1.0 - 1e-6);
        let hi = solve_spectrum(&m.with_capacity(c2).unwrap()).unwrap().outage_probability(b);
        let lo = solve_spectrum(&m).unwrap().outage_probability(b);
        prop_assert!(hi <= lo + 1e-12);
    }

    #[test]
    fn storage_shrinks_with_looser_targets(m in stable_model(), e1 in 1e-4f64..0.5, e2 in 1e-4f64..0.5) {
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let b_tight = size_storage(&m, lo, Method::Exact).unwrap();
        let b_loose = size_storage(&m, hi, Method::Exact).unwrap();
        prop_assert!(b_tight.b_eps >= b_loose.b_eps);
        if b_tight.b_eps > 0.0 {
            prop_assert!((b_tight.achieved_outage - lo).abs() <= 1e-6 * lo);
        }
    }

    #[test]
    fn eigen_residuals_are_small(m in stable_model()) {
        let sol = solve_spectrum(&m).unwrap();
        for k in 0..sol.eigenvalues().len() {
            prop_assert!(sol.eigen_residual(k) <= 1e-8);
        }
    }
}
