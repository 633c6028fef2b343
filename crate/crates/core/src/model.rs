//! Normalized On/Off demand model and the birth-death chain counting active users.
//!
//! Time is measured in mean On durations (1/μ) and power in per-user peak
//! demand R_p. In these units a user switches On at rate `chi = λ/μ` and Off at
//! rate 1, and chain state `i` (0..=N active users) drains the storage at net
//! rate `i - C`.
//!
//! States are indexed from 0; state `i` here is row `i + 1` of the textbook
//! 1-based generator.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};

/// Single consumer On/Off parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserModel {
    chi: f64,
}

impl UserModel {
    pub fn new(chi: f64) -> Result<Self> {
        if !(chi.is_finite() && chi > 0.0) {
            return Err(Error::invalid(
                "chi",
                format!("must be finite and > 0, got {chi}"),
            ));
        }
        Ok(Self { chi })
    }

    /// Builds the model from a target On-probability `p = chi / (1 + chi)`.
    pub fn from_on_probability(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid("p", format!("must lie in (0, 1), got {p}")));
        }
        Self::new(p / (1.0 - p))
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    /// Stationary probability that the user is On.
    pub fn on_probability(&self) -> f64 {
        self.chi / (1.0 + self.chi)
    }
}

/// A community of `n_users` identical consumers sharing a grid feed of
/// `capacity` (in units of R_p).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    n_users: usize,
    user: UserModel,
    capacity: f64,
}

impl SystemModel {
    pub fn new(n_users: usize, user: UserModel, capacity: f64) -> Result<Self> {
        if n_users == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        if !(capacity.is_finite() && capacity >= 0.0) {
            return Err(Error::invalid(
                "capacity",
                format!("must be finite and >= 0, got {capacity}"),
            ));
        }
        Ok(Self {
            n_users,
            user,
            capacity,
        })
    }

    /// Shorthand for `SystemModel::new(n, UserModel::new(chi)?, capacity)`.
    pub fn from_parts(n_users: usize, chi: f64, capacity: f64) -> Result<Self> {
        Self::new(n_users, UserModel::new(chi)?, capacity)
    }

    pub fn with_capacity(&self, capacity: f64) -> Result<Self> {
        Self::new(self.n_users, self.user, capacity)
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn user(&self) -> UserModel {
        self.user
    }

    pub fn chi(&self) -> f64 {
        self.user.chi
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    /// Number of chain states, `N + 1`.
    pub fn n_states(&self) -> usize {
        self.n_users + 1
    }

    /// Mean aggregate demand `N p`.
    pub fn mean_demand(&self) -> f64 {
        self.n_users as f64 * self.user.on_probability()
    }

    /// Grid capacity per user, `C / N`.
    pub fn capacity_per_user(&self) -> f64 {
        self.capacity / self.n_users as f64
    }

    pub fn is_stable(&self) -> bool {
        self.mean_demand() < self.capacity
    }

    pub(crate) fn ensure_stable(&self) -> Result<()> {
        if self.is_stable() {
            Ok(())
        } else {
            Err(Error::Unstable {
                mean_demand: self.mean_demand(),
                capacity: self.capacity,
            })
        }
    }

    /// Rate of the transition `i -> i + 1`.
    pub fn up_rate(&self, i: usize) -> f64 {
        (self.n_users - i) as f64 * self.user.chi
    }

    /// Rate of the transition `i -> i - 1`.
    pub fn down_rate(&self, i: usize) -> f64 {
        i as f64
    }

    /// Net storage drain rate in state `i`.
    pub fn drift(&self, i: usize) -> f64 {
        i as f64 - self.capacity
    }
}

/// Tridiagonal generator of the birth-death chain.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    /// `lower[i]` is entry `(i + 1, i)`.
    lower: Vec<f64>,
    diag: Vec<f64>,
    /// `upper[i]` is entry `(i, i + 1)`.
    upper: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if j == i + 1 {
            self.upper[i]
        } else if i == j + 1 {
            self.lower[j]
        } else {
            0.0
        }
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Row vector times matrix, `v M`.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(v.len(), n, "vector length must match generator dimension");
        (0..n)
            .map(|j| {
                let mut acc = v[j] * self.diag[j];
                if j > 0 {
                    acc += v[j - 1] * self.upper[j - 1];
                }
                if j + 1 < n {
                    acc += v[j + 1] * self.lower[j];
                }
                acc
            })
            .collect()
    }
}

/// Builds the generator with up-rate `(N - i) chi` and down-rate `i` out of state `i`.
pub fn build_generator(model: &SystemModel) -> GeneratorMatrix {
    let n = model.n_states();
    let upper: Vec<f64> = (0..n - 1).map(|i| model.up_rate(i)).collect();
    let lower: Vec<f64> = (1..n).map(|i| model.down_rate(i)).collect();
    let diag = (0..n)
        .map(|i| {
            let up = if i + 1 < n { upper[i] } else { 0.0 };
            let down = if i > 0 { lower[i - 1] } else { 0.0 };
            -(up + down)
        })
        .collect();
    GeneratorMatrix { lower, diag, upper }
}

/// `ln π_i` for the Binomial(N, p) stationary law of the chain.
pub fn log_stationary_distribution(model: &SystemModel) -> Vec<f64> {
    let n = model.n_users() as u64;
    let chi = model.chi();
    // ln p and ln(1 - p) without forming p.
    let ln_q = -chi.ln_1p();
    let ln_p = chi.ln() + ln_q;
    (0..=n)
        .map(|i| ln_binomial(n, i) + i as f64 * ln_p + (n - i) as f64 * ln_q)
        .collect()
}

/// Stationary distribution `π` with `π M = 0`, equal to Binomial(N, p).
///
/// Built by the detailed-balance ratio `π_{i+1}/π_i = (N - i) χ / (i + 1)`
/// outward from the mode, so each balance equation holds to a few ulps.
/// Far tails underflow to zero for very large `N`.
pub fn stationary_distribution(model: &SystemModel) -> Vec<f64> {
    let n = model.n_users();
    let chi = model.chi();
    let mode = (((n + 1) as f64 * model.user().on_probability()).floor() as usize).min(n);
    let mut w = vec![0.0; n + 1];
    w[mode] = 1.0;
    for i in mode..n {
        w[i + 1] = w[i] * ((n - i) as f64 * chi) / (i + 1) as f64;
    }
    for i in (0..mode).rev() {
        w[i] = w[i + 1] * (i + 1) as f64 / ((n - i) as f64 * chi);
    }
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Per-user capacity headroom over mean demand, `C/N - p`.
pub fn capacity_headroom(model: &SystemModel) -> f64 {
    model.capacity_per_user() - model.user().on_probability()
}

/// Conversion between physical units and the normalized model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalUnits {
    rp_kw: f64,
    mean_on_hours: f64,
}

impl PhysicalUnits {
    pub fn new(rp_kw: f64, mean_on_hours: f64) -> Result<Self> {
        if !(rp_kw.is_finite() && rp_kw > 0.0) {
            return Err(Error::invalid("rp_kw", format!("must be > 0, got {rp_kw}")));
        }
        if !(mean_on_hours.is_finite() && mean_on_hours > 0.0) {
            return Err(Error::invalid(
                "mean_on_hours",
                format!("must be > 0, got {mean_on_hours}"),
            ));
        }
        Ok(Self {
            rp_kw,
            mean_on_hours,
        })
    }

    pub fn rp_kw(&self) -> f64 {
        self.rp_kw
    }

    pub fn mean_on_hours(&self) -> f64 {
        self.mean_on_hours
    }

    /// Normalized model for `n` users behind a `grid_kw` feed.
    pub fn to_normalized(&self, n: usize, user: UserModel, grid_kw: f64) -> Result<SystemModel> {
        SystemModel::new(n, user, grid_kw / self.rp_kw)
    }

    /// Storage size in kWh for a normalized size measured in R_p / μ.
    pub fn storage_kwh(&self, b_norm: f64) -> f64 {
        b_norm * self.rp_kw * self.mean_on_hours
    }

    pub fn storage_normalized(&self, kwh: f64) -> f64 {
        kwh / (self.rp_kw * self.mean_on_hours)
    }
}
