//! Analytic single-user (N = 1) solution.
//!
//! With one user the fluid model has a single negative eigenvalue and the
//! outage is a pure exponential, `P(S > b) = -α₁ exp(z₁ b)`.

use crate::error::{Error, Result};

fn check(chi: f64, c: f64) -> Result<()> {
    if !(chi.is_finite() && chi > 0.0) {
        return Err(Error::invalid("chi", format!("must be > 0, got {chi}")));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::invalid(
            "capacity",
            format!("must lie in (0, 1), got {c}"),
        ));
    }
    let p = chi / (1.0 + chi);
    if p >= c {
        return Err(Error::Unstable {
            mean_demand: p,
            capacity: c,
        });
    }
    Ok(())
}

/// Negative eigenvalue `z₁ = chi/c - 1/(1 - c)` and coefficient
/// `α₁ = -chi / (c (1 + chi))` (for eigenvector `[1 - c, c]`).
pub fn single_user_spectrum(chi: f64, c: f64) -> Result<(f64, f64)> {
    check(chi, c)?;
    let z1 = chi / c - 1.0 / (1.0 - c);
    let alpha1 = -chi / (c * (1.0 + chi));
    Ok((z1, alpha1))
}

/// `P(S > b) = -α₁ exp(z₁ b)`.
pub fn single_user_outage(chi: f64, c: f64, b: f64) -> Result<f64> {
    if !(b >= 0.0) {
        return Err(Error::invalid("b", format!("must be >= 0, got {b}")));
    }
    let (z1, alpha1) = single_user_spectrum(chi, c)?;
    Ok(-alpha1 * (z1 * b).exp())
}

/// Smallest `b >= 0` with `P(S > b) <= epsilon`.
///
/// Zero when the bufferless outage `-α₁` already meets the target.
pub fn single_user_size(chi: f64, c: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(
            "epsilon",
            format!("must lie in (0, 1), got {epsilon}"),
        ));
    }
    let (_, alpha1) = single_user_spectrum(chi, c)?;
    if -alpha1 <= epsilon {
        return Ok(0.0);
    }
    Ok(c * (1.0 - c) / (chi - chi * c - c) * (epsilon * c * (1.0 + chi) / chi).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn reference_point() {
        let (z1, a1) = single_user_spectrum(0.5, 0.8).unwrap();
        assert!((z1 + 4.375).abs() < 1e-12);
        assert!((a1 + 0.5 / 1.2).abs() < 1e-15);
        assert!((single_user_outage(0.5, 0.8, 0.0).unwrap() - 5.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn size_matches_bisection_oracle() {
        let b = single_user_size(0.5, 0.8, 0.01).unwrap();
        let oracle = bisect(
            |x| single_user_outage(0.5, 0.8, x).unwrap(),
            0.01,
            0.0,
            10.0,
        );
        assert!((b - oracle).abs() < 1e-12, "{b} vs {oracle}");
        assert!((b - 0.8525).abs() < 5e-5);
        assert!((single_user_outage(0.5, 0.8, 0.8525).unwrap() - 0.01).abs() < 1e-6);
    }

    #[test]
    fn clamps_to_zero_when_target_met() {
        assert_eq!(single_user_size(0.5, 0.8, 0.5).unwrap(), 0.0);
        assert_eq!(single_user_size(0.5, 0.8, 5.0 / 12.0).unwrap(), 0.0);
    }

    #[test]
    fn eigenvalue_vanishes_at_stability_boundary() {
        let p = 0.5 / 1.5;
        let (z1, _) = single_user_spectrum(0.5, p + 1e-9).unwrap();
        assert!(z1 < 0.0 && z1 > -1e-7);
    }

    #[test]
    fn outage_vanishes_for_large_buffers() {
        assert!(single_user_outage(0.5, 0.8, 1e3).unwrap() < 1e-300);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(
            single_user_spectrum(2.0, 0.5),
            Err(Error::Unstable { .. })
        ));
        assert!(single_user_spectrum(0.5, 1.0).is_err());
        assert!(single_user_spectrum(0.5, 0.0).is_err());
        assert!(single_user_spectrum(-1.0, 0.5).is_err());
        assert!(single_user_size(0.5, 0.8, 0.0).is_err());
        assert!(single_user_size(0.5, 0.8, 1.0).is_err());
        assert!(single_user_outage(0.5, 0.8, -1.0).is_err());
    }

    #[test]
    fn round_trip_and_monotonicity_grid() {
        for chi in [0.2, 0.5, 1.0, 2.0] {
            let p = chi / (1.0 + chi);
            let cs: Vec<f64> = (1..=4).map(|k| p + (1.0 - p) * k as f64 / 5.0).collect();
            let mut prev_c: Option<f64> = None;
            for &c in &cs {
                let mut prev_eps: Option<f64> = None;
                for eps in [1e-3, 1e-2, 1e-1] {
                    let b = single_user_size(chi, c, eps).unwrap();
                    if b > 0.0 {
                        let back = single_user_outage(chi, c, b).unwrap();
                        assert!(
                            (back - eps).abs() <= 1e-10 * eps,
                            "chi={chi} c={c} eps={eps}"
                        );
                    }
                    if let Some(pb) = prev_eps {
                        assert!(b <= pb);
                    }
                    prev_eps = Some(b);
                }
                let b = single_user_size(chi, c, 1e-2).unwrap();
                if let Some(pb) = prev_c {
                    assert!(b <= pb);
                }
                prev_c = Some(b);
            }
        }
    }
}
