//! Exact stationary analysis of the Markov-modulated fluid buffer.
//!
//! The stationary joint CDF row vector `F(x)` with `F_i(x) = P(S <= x, state = i)`
//! satisfies `F'(x) D = F(x) M`, with `M` the birth-death generator and
//! `D = diag(i - C)` the drift. Its bounded solution is
//!
//! ```text
//! F(x) = π + Σ_k α_k φ_k exp(z_k x),   z_k < 0,   φ_k (M - z_k D) = 0,
//! ```
//!
//! with the `α_k` fixed by `F_j(0) = 0` for every overload state `j > C`.
//!
//! # Balancing
//!
//! `π` spans hundreds of orders of magnitude for large `N`, so the eigenproblem
//! is solved in the similarity-scaled coordinates `φ = η · diag(sqrt(π_j / |d_j|))`.
//! There `η (A - z J) = 0` with `A` symmetric tridiagonal and `J = sign(D)`, and
//! `J A` is a diagonal similarity of `(M D⁻¹)ᵀ`. Eigenvalues come from a dense
//! nonsymmetric solve of `J A`; eigenvectors from inverse iteration on the
//! tridiagonal pencil. The boundary system becomes
//! `Σ_k α_k η_k[j] = -sqrt(π_j |d_j|)`, which is well scaled.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SymTridiagonal};
use crate::model::{build_generator, log_stationary_distribution, SystemModel};

/// Distance from an integer state below which the capacity is treated as singular.
pub const INTEGER_TOL: f64 = 1e-9;

/// Relative bound on the imaginary part of a retained eigenvalue.
const IMAG_TOL: f64 = 1e-8;

/// Relative eigen-residual bound for a retained eigenpair.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Boundary-system condition number above which a warning is emitted.
const COND_WARN: f64 = 1e12;

/// Boundary-system condition number treated as singular.
const COND_FAIL: f64 = 1e15;

/// Diagonal drift `d_i = i - C` in normalized units.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftMatrix {
    diag: Vec<f64>,
}

impl DriftMatrix {
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }
}

/// Builds the drift matrix, rejecting capacities within [`INTEGER_TOL`] of a state.
pub fn drift_matrix(model: &SystemModel) -> Result<DriftMatrix> {
    let c = model.capacity();
    let nearest = c.round();
    if nearest >= 0.0 && nearest <= model.n_users() as f64 && (c - nearest).abs() <= INTEGER_TOL {
        return Err(Error::DriftSingular {
            capacity: c,
            state: nearest as usize,
        });
    }
    Ok(DriftMatrix {
        diag: (0..model.n_states()).map(|i| model.drift(i)).collect(),
    })
}

/// Value of the stationary CDF at one buffer level.
#[derive(Debug, Clone, PartialEq)]
pub struct Cdf {
    /// `F_i(x)` per chain state.
    pub components: Vec<f64>,
    /// `P(S <= x)`.
    pub total: f64,
}

/// Spectral representation of the stationary buffer distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralSolution {
    model: SystemModel,
    pi: Vec<f64>,
    /// `z_0 = 0` followed by the negative eigenvalues, closest to zero first.
    eigenvalues: Vec<f64>,
    /// `φ_0 = π`, then one vector per negative eigenvalue, scaled so its
    /// largest-magnitude entry is +1.
    eigenvectors: Vec<Vec<f64>>,
    /// `α_k` for each negative eigenvalue.
    coefficients: Vec<f64>,
    /// `φ_k · 1` for each negative eigenvalue.
    masses: Vec<f64>,
    boundary_condition: f64,
}

impl SpectralSolution {
    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    pub fn n_users(&self) -> usize {
        self.model.n_users()
    }

    pub fn capacity(&self) -> f64 {
        self.model.capacity()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// All retained eigenvalues, starting with `z_0 = 0`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn negative_eigenvalues(&self) -> &[f64] {
        &self.eigenvalues[1..]
    }

    /// Left eigenvectors aligned with [`Self::eigenvalues`]; the first is `π`.
    pub fn eigenvectors(&self) -> &[Vec<f64>] {
        &self.eigenvectors
    }

    /// `α_k`, aligned with [`Self::negative_eigenvalues`].
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// 1-norm condition estimate of the boundary system (1 when there is none).
    pub fn boundary_condition(&self) -> f64 {
        self.boundary_condition
    }

    /// `(F_i(x))_i` and `P(S <= x)`.
    pub fn cdf(&self, x: f64) -> Cdf {
        assert!(x >= 0.0, "buffer level must be nonnegative, got {x}");
        let mut components = self.pi.clone();
        for (k, &z) in self.negative_eigenvalues().iter().enumerate() {
            let w = self.coefficients[k] * (z * x).exp();
            for (f, phi) in components.iter_mut().zip(&self.eigenvectors[k + 1]) {
                *f += w * phi;
            }
        }
        let total = clamp_probability(components.iter().sum());
        Cdf { components, total }
    }

    /// `P(S > b) = -Σ_k α_k (φ_k · 1) exp(z_k b)`.
    pub fn outage_probability(&self, b: f64) -> f64 {
        assert!(b >= 0.0, "buffer size must be nonnegative, got {b}");
        let s: f64 = self
            .negative_eigenvalues()
            .iter()
            .zip(&self.coefficients)
            .zip(&self.masses)
            .map(|((z, a), m)| -a * m * (z * b).exp())
            .sum();
        clamp_probability(s)
    }

    /// Normwise backward error `‖z φ D - φ M‖∞ / (‖φ‖∞ (‖M‖∞ + |z| ‖D‖∞))`
    /// for eigenpair `k` (0 is the `π` pair).
    pub fn eigen_residual(&self, k: usize) -> f64 {
        let z = self.eigenvalues[k];
        let phi = &self.eigenvectors[k];
        let gen = build_generator(&self.model);
        let phi_m = gen.left_mul(phi);
        let n = self.model.n_states();
        let m_norm = (0..n)
            .map(|i| (0..n).map(|j| gen.get(i, j).abs()).sum::<f64>())
            .fold(0.0_f64, f64::max);
        let d_norm = (0..n)
            .map(|i| self.model.drift(i).abs())
            .fold(0.0_f64, f64::max);
        let phi_norm = phi.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let res = phi_m
            .iter()
            .enumerate()
            .map(|(i, v)| (z * phi[i] * self.model.drift(i) - v).abs())
            .fold(0.0_f64, f64::max);
        res / (phi_norm * (m_norm + z.abs() * d_norm))
    }
}

/// Rounding slack allowed before a probability is clamped into [0, 1].
const CLAMP_SLACK: f64 = 1e-12;

fn clamp_probability(p: f64) -> f64 {
    debug_assert!(
        p > -CLAMP_SLACK && p < 1.0 + CLAMP_SLACK,
        "probability {p} outside rounding slack"
    );
    p.clamp(0.0, 1.0)
}

/// Solves the fluid model exactly.
///
/// Returns a solution with no negative eigenvalues when `C >= N`.
pub fn solve_spectrum(model: &SystemModel) -> Result<SpectralSolution> {
    solve_with_scaling(model, |_| 1.0)
}

/// As [`solve_spectrum`], but rescales each balanced eigenvector by `scale(k)`
/// before the boundary solve. Used to check that the result is scale-free.
pub(crate) fn solve_with_scaling(
    model: &SystemModel,
    scale: impl Fn(usize) -> f64,
) -> Result<SpectralSolution> {
    model.ensure_stable()?;
    let n = model.n_states();
    let log_pi = log_stationary_distribution(model);
    let pi: Vec<f64> = log_pi.iter().map(|v| v.exp()).collect();

    if model.capacity() >= model.n_users() as f64 {
        return Ok(SpectralSolution {
            model: *model,
            eigenvalues: vec![0.0],
            eigenvectors: vec![pi.clone()],
            pi,
            coefficients: Vec::new(),
            masses: Vec::new(),
            boundary_condition: 1.0,
        });
    }

    let drift = drift_matrix(model)?;
    let d = drift.diag();
    let signs: Vec<f64> = d.iter().map(|v| v.signum()).collect();
    let ln_abs_d: Vec<f64> = d.iter().map(|v| v.abs().ln()).collect();
    let weight: Vec<f64> = d.iter().map(|v| 1.0 / v.abs().sqrt()).collect();

    // A = |D|^{-1/2} Π^{1/2} M Π^{-1/2} |D|^{-1/2}, symmetric tridiagonal.
    let gen = build_generator(model);
    let a = SymTridiagonal {
        diag: (0..n)
            .map(|i| gen.diag()[i] * weight[i] * weight[i])
            .collect(),
        off: (0..n - 1)
            .map(|i| (gen.upper()[i] * gen.lower()[i]).sqrt() * weight[i] * weight[i + 1])
            .collect(),
    };

    let mut dense = vec![0.0; n * n];
    for i in 0..n {
        dense[i * n + i] = signs[i] * a.diag[i];
        if i + 1 < n {
            dense[i * n + i + 1] = signs[i] * a.off[i];
            dense[(i + 1) * n + i] = signs[i + 1] * a.off[i];
        }
    }
    let mut eig = linalg::dense_eigenvalues(n, &dense);
    eig.sort_by(|x, y| x.re.total_cmp(&y.re));

    let first_overload = (0..n)
        .find(|&i| d[i] > 0.0)
        .expect("C < N leaves an overload state");
    let m = n - first_overload;
    let zmax = eig.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    // The eigenvalue nearest zero is the stationary one; its computed sign is noise.
    let zero_idx = (0..n)
        .min_by(|&x, &y| eig[x].norm().total_cmp(&eig[y].norm()))
        .expect("nonempty spectrum");
    eig.remove(zero_idx);
    let neg_count = eig.iter().filter(|z| z.re < 0.0).count();
    if neg_count != m {
        return Err(Error::NumericalInstability(format!(
            "found {neg_count} negative eigenvalues, expected one per overload state ({m})"
        )));
    }

    let mut eigenvalues = Vec::with_capacity(m);
    let mut balanced = Vec::with_capacity(m);
    // Closest to zero first.
    for z in eig[..m].iter().rev() {
        if z.im.abs() > IMAG_TOL * zmax {
            return Err(Error::NumericalInstability(format!(
                "eigenvalue {} + {}i is not real",
                z.re, z.im
            )));
        }
        let (zr, eta) = linalg::pencil_eigenvector(&a, &signs, z.re);
        let residual = {
            let ea = a.mul(&eta);
            let num = ea
                .iter()
                .zip(&eta)
                .zip(&signs)
                .map(|((x, e), s)| (x - zr * s * e).abs())
                .fold(0.0_f64, f64::max);
            num / ea.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
        };
        if !(residual <= RESIDUAL_TOL) {
            return Err(Error::NumericalInstability(format!(
                "eigenpair at z = {zr} has relative residual {residual:e}"
            )));
        }
        eigenvalues.push(zr);
        balanced.push(eta);
    }
    for (k, eta) in balanced.iter_mut().enumerate() {
        let s = scale(k);
        eta.iter_mut().for_each(|v| *v *= s);
    }

    // Boundary conditions F_j(0) = 0 for overload states j.
    let mut system = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    for (r, j) in (first_overload..n).enumerate() {
        rhs[r] = -(0.5 * (log_pi[j] + ln_abs_d[j])).exp();
        for (k, eta) in balanced.iter().enumerate() {
            system[r * m + k] = eta[j];
        }
    }
    let (alpha_balanced, cond) = linalg::solve_dense(m, &system, &rhs)
        .ok_or_else(|| Error::NumericalInstability("boundary system is singular".to_string()))?;
    if cond > COND_FAIL {
        return Err(Error::NumericalInstability(format!(
            "boundary system condition estimate {cond:e} is too large"
        )));
    }
    if cond > COND_WARN {
        warn!(
            "boundary system for N={} C={} is ill-conditioned (cond ≈ {cond:e})",
            model.n_users(),
            model.capacity()
        );
    }

    // Back to the unbalanced eigenvectors φ_k = η_k diag(sqrt(π_j / |d_j|)).
    let unscale: Vec<f64> = (0..n)
        .map(|j| (0.5 * (log_pi[j] - ln_abs_d[j])).exp())
        .collect();
    let mut eigenvectors = Vec::with_capacity(m + 1);
    eigenvectors.push(pi.clone());
    let mut coefficients = Vec::with_capacity(m);
    let mut masses = Vec::with_capacity(m);
    for (eta, a_bal) in balanced.iter().zip(&alpha_balanced) {
        let mut phi: Vec<f64> = eta.iter().zip(&unscale).map(|(e, s)| e * s).collect();
        let norm = phi
            .iter()
            .copied()
            .max_by(|x, y| x.abs().total_cmp(&y.abs()))
            .expect("nonempty eigenvector");
        phi.iter_mut().for_each(|v| *v /= norm);
        coefficients.push(a_bal * norm);
        masses.push(phi.iter().sum());
        eigenvectors.push(phi);
    }

    let mut all_eigenvalues = Vec::with_capacity(m + 1);
    all_eigenvalues.push(0.0);
    all_eigenvalues.extend(eigenvalues);

    Ok(SpectralSolution {
        model: *model,
        pi,
        eigenvalues: all_eigenvalues,
        eigenvectors,
        coefficients,
        masses,
        boundary_condition: cond,
    })
}

/// `P(S > b)` for the model, solving the spectrum on the way.
pub fn outage_probability(model: &SystemModel, b: f64) -> Result<f64> {
    Ok(solve_spectrum(model)?.outage_probability(b))
}

/// Discrete surrogate for a time-varying grid capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityMixture {
    components: Vec<(f64, f64)>,
}

impl CapacityMixture {
    /// Components are `(capacity, weight)`; weights must be positive and sum to 1.
    pub fn new(components: Vec<(f64, f64)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("mixture", "needs at least one component"));
        }
        if let Some((i, _)) = components
            .iter()
            .enumerate()
            .find(|(_, (c, w))| !(c.is_finite() && *c >= 0.0 && w.is_finite() && *w > 0.0))
        {
            return Err(Error::invalid(
                "mixture",
                format!("component {i} needs a finite capacity >= 0 and positive weight"),
            ));
        }
        let total: f64 = components.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "mixture",
                format!("weights sum to {total}, expected 1"),
            ));
        }
        Ok(Self { components })
    }

    pub fn single(capacity: f64) -> Self {
        Self {
            components: vec![(capacity, 1.0)],
        }
    }

    pub fn components(&self) -> &[(f64, f64)] {
        &self.components
    }
}

/// Weighted outage `Σ_j w_j P(S > b | C = c_j)`.
///
/// The capacity of `base` is ignored; each component supplies its own.
pub fn outage_probability_mixture(
    base: &SystemModel,
    mix: &CapacityMixture,
    b: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for (index, &(capacity, weight)) in mix.components().iter().enumerate() {
        let wrap = |source: Error| Error::MixtureComponent {
            index,
            capacity,
            source: Box::new(source),
        };
        let model = base.with_capacity(capacity).map_err(wrap)?;
        let p = outage_probability(&model, b).map_err(wrap)?;
        total += weight * p;
    }
    Ok(total)
}
