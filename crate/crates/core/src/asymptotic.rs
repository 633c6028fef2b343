//! Large-N asymptotic approximation of the outage probability.
//!
//! The helper functions are evaluated exactly as printed in the source
//! formula, including terms that look like typesetting slips:
//!
//! * `phi` contains `+ ς ln ς ... - ς ln ς`, which cancels;
//! * the denominator of `u` is `ς (1 - λ)`, which vanishes at `λ = 1`;
//! * `ψ(1 - ς)` in `g` is read as the product `ψ · (1 - ς)`.
//!
//! No agreement with the exact solver is assumed; use
//! [`comparison_table`] to measure the gap.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemModel;
use crate::spectral::SpectralSolution;

/// Helper values for one `(ς, λ, N)` triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticParams {
    /// Grid power per source, `C / N`.
    pub sigma: f64,
    /// Request rate in units of the mean On time (the model's `chi`).
    pub lam: f64,
    pub n_users: usize,
    pub f: f64,
    pub u: f64,
    pub phi: f64,
    pub g: f64,
    pub k: f64,
    pub psi: f64,
}

impl AsymptoticParams {
    /// Capacity above mean demand per user, `ς - λ/(1+λ)`.
    pub fn upsilon(&self) -> f64 {
        self.sigma - self.lam / (1.0 + self.lam)
    }

    /// Storage per user for a community buffer of size `b`.
    pub fn kappa(&self, b: f64) -> f64 {
        b / self.n_users as f64
    }

    /// `ς + λ (1 - ς)`, which recurs throughout.
    fn q(&self) -> f64 {
        self.sigma + self.lam * (1.0 - self.sigma)
    }
}

fn domain(helper: &'static str, reason: impl Into<String>) -> Error {
    Error::Domain {
        helper,
        reason: reason.into(),
    }
}

fn finite(helper: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(helper, format!("evaluates to {v}")))
    }
}

fn ln_checked(helper: &'static str, arg: f64) -> Result<f64> {
    if arg > 0.0 {
        Ok(arg.ln())
    } else {
        Err(domain(
            helper,
            format!("log argument {arg} is not positive"),
        ))
    }
}

fn div_checked(helper: &'static str, num: f64, den: f64) -> Result<f64> {
    if den == 0.0 {
        Err(domain(helper, "denominator is zero"))
    } else {
        finite(helper, num / den)
    }
}

/// `f(ς) = ln(ς / (λ(1-ς))) - 2 (ς(1+λ) - λ) / (ς + λ(1-ς))`.
pub fn f_helper(s: f64, lam: f64) -> Result<f64> {
    let q = s + lam * (1.0 - s);
    let excess = s * (1.0 + lam) - lam;
    finite(
        "f",
        ln_checked("f", s / (lam * (1.0 - s)))? - 2.0 * div_checked("f", excess, q)?,
    )
}

/// `u = (ς(1+λ) - λ) / (ς(1-λ))`.
pub fn u_helper(s: f64, lam: f64) -> Result<f64> {
    div_checked("u", s * (1.0 + lam) - lam, s * (1.0 - lam))
}

/// `φ(ς) = ς ln ς + (1-ς) ln(1-ς) - ς ln ς + ln(1+λ)`.
pub fn phi_helper(s: f64, lam: f64) -> Result<f64> {
    finite(
        "phi",
        s * ln_checked("phi", s)? + (1.0 - s) * ln_checked("phi", 1.0 - s)?
            - s * ln_checked("phi", s)?
            + ln_checked("phi", 1.0 + lam)?,
    )
}

/// `ψ = (2ς-1)(ς(1+λ)-λ)³ / (ς(1-ς)² (ς+λ(1-ς))³)`.
pub fn psi_helper(s: f64, lam: f64) -> Result<f64> {
    let q = s + lam * (1.0 - s);
    div_checked(
        "psi",
        (2.0 * s - 1.0) * (s * (1.0 + lam) - lam).powi(3),
        s * (1.0 - s).powi(2) * q.powi(3),
    )
}

/// `k = (1-λ) + λ(1-2ς) / (ς+λ(1-ς))`.
pub fn k_helper(s: f64, lam: f64) -> Result<f64> {
    let q = s + lam * (1.0 - s);
    finite(
        "k",
        (1.0 - lam) + div_checked("k", lam * (1.0 - 2.0 * s), q)?,
    )
}

/// `g(ς) = k + 0.5 (ς+λ(1-ς)) ψ (1-ς) / f(ς)`.
pub fn g_helper(s: f64, lam: f64) -> Result<f64> {
    let q = s + lam * (1.0 - s);
    let (f, psi, k) = (f_helper(s, lam)?, psi_helper(s, lam)?, k_helper(s, lam)?);
    finite("g", k + 0.5 * q * div_checked("g", psi * (1.0 - s), f)?)
}

/// Evaluates the helper set from `ς = C/N` and `λ = chi`.
pub fn morrison_params(model: &SystemModel) -> Result<AsymptoticParams> {
    model.ensure_stable()?;
    let s = model.capacity_per_user();
    let lam = model.chi();
    if !(s > 0.0 && s < 1.0) {
        return Err(domain(
            "sigma",
            format!("grid power per source must lie in (0, 1), got {s}"),
        ));
    }
    Ok(AsymptoticParams {
        sigma: s,
        lam,
        n_users: model.n_users(),
        f: f_helper(s, lam)?,
        u: u_helper(s, lam)?,
        phi: phi_helper(s, lam)?,
        g: g_helper(s, lam)?,
        k: k_helper(s, lam)?,
        psi: psi_helper(s, lam)?,
    })
}

/// Evaluates the asymptotic outage approximation at total buffer `x`.
pub fn asymptotic_outage_with(params: &AsymptoticParams, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::invalid("x", format!("must be >= 0, got {x}")));
    }
    let n = params.n_users as f64;
    let fq = params.f * params.q();
    let pre_arg = params.u / (PI * fq * n);
    if !(pre_arg >= 0.0) || !pre_arg.is_finite() {
        return Err(domain(
            "prefactor",
            format!("sqrt argument {pre_arg} is negative"),
        ));
    }
    let tail_arg = fq * n * x;
    if !(tail_arg >= 0.0) {
        return Err(domain(
            "tail",
            format!("sqrt argument {tail_arg} is negative"),
        ));
    }
    let value = 0.5
        * pre_arg.sqrt()
        * (-n * params.phi - params.g * x).exp()
        * (-2.0 * tail_arg.sqrt()).exp();
    finite("outage", value)
}

pub fn asymptotic_outage(model: &SystemModel, x: f64) -> Result<f64> {
    asymptotic_outage_with(&morrison_params(model)?, x)
}

/// One row of the asymptotic-versus-exact diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub n_users: usize,
    pub sigma: f64,
    pub b: f64,
    pub kappa: f64,
    pub asymptotic: f64,
    pub exact: f64,
    /// `log10(asymptotic / exact)`; infinite when either side is zero.
    pub log10_ratio: f64,
}

/// Tabulates the approximation against an exact solution over `buffers`.
pub fn comparison_table(exact: &SpectralSolution, buffers: &[f64]) -> Result<Vec<ComparisonRow>> {
    let params = morrison_params(exact.model())?;
    buffers
        .iter()
        .map(|&b| {
            let asym = asymptotic_outage_with(&params, b)?;
            let ex = exact.outage_probability(b);
            Ok(ComparisonRow {
                n_users: params.n_users,
                sigma: params.sigma,
                b,
                kappa: params.kappa(b),
                asymptotic: asym,
                exact: ex,
                log10_ratio: (asym / ex).log10(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // Reference values from a 40-digit re-evaluation of the printed formulas
    // at λ = 0.5, ς = 0.3683.
    const F: f64 = 3.014_577_762_656_393_9e-4;
    const U: f64 = 0.284_822_155_851_208_25;
    const PHI: f64 = 0.115_299_599_871_518_78;
    const PSI: f64 = -8.075_599_671_200_644e-4;
    const K: f64 = 0.692_501_644_376_233_3;
    const G: f64 = 0.113_632_363_859_998;

    fn fig2_model(n: usize) -> SystemModel {
        SystemModel::from_parts(n, 0.5, 0.3683 * n as f64).unwrap()
    }

    #[test]
    fn golden_helpers() {
        let p = morrison_params(&fig2_model(400)).unwrap();
        assert!(rel(p.f, F) < 1e-10, "f {}", p.f);
        assert!(rel(p.u, U) < 1e-12);
        assert!(rel(p.phi, PHI) < 1e-12);
        assert!(rel(p.psi, PSI) < 1e-12);
        assert!(rel(p.k, K) < 1e-12);
        assert!(rel(p.g, G) < 1e-10);
        assert!((p.upsilon() - (0.3683 - 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn golden_outage() {
        let m = fig2_model(400);
        for (x, expect) in [
            (0.0, 4.896_334_164e-21),
            (1.0, 2.460_608_895e-21),
            (5.0, 7.678_396_006e-22),
            (15.0, 9.624_898_219e-23),
        ] {
            let v = asymptotic_outage(&m, x).unwrap();
            assert!(rel(v, expect) < 1e-8, "x={x}: {v:e}");
        }
        let v = asymptotic_outage(&fig2_model(800), 5.0).unwrap();
        assert!(rel(v, 2.979_161_61e-42) < 1e-8);
    }

    #[test]
    fn zero_buffer_is_prefactor() {
        let p = morrison_params(&fig2_model(500)).unwrap();
        let n = 500.0;
        let q = p.sigma + p.lam * (1.0 - p.sigma);
        let expect = 0.5 * (p.u / (PI * p.f * q * n)).sqrt() * (-n * p.phi).exp();
        assert!(rel(asymptotic_outage_with(&p, 0.0).unwrap(), expect) < 1e-14);
    }

    #[test]
    fn u_vanishes_at_mean_demand() {
        let lam: f64 = 0.25;
        let s = lam / (1.0 + lam);
        assert_eq!(u_helper(s, lam).unwrap(), 0.0);
        // f vanishes there too, so g (and the full parameter set) is undefined.
        assert!(matches!(
            g_helper(s, lam),
            Err(Error::Domain { helper: "g", .. })
        ));
        assert!(morrison_params(&SystemModel::from_parts(10, lam, 10.0 * s).unwrap()).is_err());
    }

    #[test]
    fn lam_one_hits_u_denominator() {
        let m = SystemModel::from_parts(100, 1.0, 60.5).unwrap();
        assert_eq!(
            morrison_params(&m).unwrap_err(),
            Error::Domain {
                helper: "u",
                reason: "denominator is zero".into()
            }
        );
    }

    #[test]
    fn negative_prefactor_is_domain_error() {
        // λ > 1 flips the sign of u.
        let m = SystemModel::from_parts(100, 2.0, 70.0).unwrap();
        assert!(matches!(
            asymptotic_outage(&m, 1.0),
            Err(Error::Domain {
                helper: "prefactor",
                ..
            })
        ));
    }

    #[test]
    fn decreasing_in_x_on_fig2_grid() {
        for n in [400, 500, 600, 700, 800] {
            let p = morrison_params(&fig2_model(n)).unwrap();
            let mut prev = f64::INFINITY;
            for i in 0..=60 {
                let v = asymptotic_outage_with(&p, i as f64 * 0.25).unwrap();
                assert!(v > 0.0 && v < prev);
                prev = v;
            }
        }
    }
}
