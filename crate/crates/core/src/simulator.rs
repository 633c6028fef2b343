//! Monte Carlo oracle for the fluid model.
//!
//! Each replication simulates the birth-death jump chain of active users and
//! integrates the piecewise-linear buffer between jumps. Estimates are
//! time averages after a warmup, summarized across independent replications.
//!
//! Replication `r` draws from `ChaCha8Rng::seed_from_u64(seed)` with its stream
//! set to `r`, so results are bit-identical for a given seed regardless of
//! how replications are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemModel;
use crate::spectral::solve_spectrum;

/// Quantity estimated by a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMetric {
    /// Time fraction with infinite-buffer backlog above `b`; estimates `P(S > b)`.
    BacklogExceedance,
    /// Unserved energy over total demand with a finite store of size `b`.
    LossFraction,
}

/// Run-length and seeding shared by every point of a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub horizon: f64,
    pub warmup: f64,
    pub replications: usize,
    pub seed: u64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            horizon: 1e5,
            warmup: 1e3,
            replications: 20,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: SystemModel,
    pub b: f64,
    /// Normalized time simulated per replication, warmup included.
    pub horizon: f64,
    pub warmup: f64,
    pub replications: usize,
    pub seed: u64,
    pub metric: SimMetric,
}

impl SimConfig {
    pub fn new(model: SystemModel, b: f64, settings: SimSettings, metric: SimMetric) -> Self {
        Self {
            model,
            b,
            horizon: settings.horizon,
            warmup: settings.warmup,
            replications: settings.replications,
            seed: settings.seed,
            metric,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.warmup >= 0.0 && self.horizon > self.warmup && self.horizon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "need horizon > warmup >= 0, got horizon={} warmup={}",
                self.horizon, self.warmup
            )));
        }
        if self.replications < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 replications, got {}",
                self.replications
            )));
        }
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "b must be >= 0, got {}",
                self.b
            )));
        }
        Ok(())
    }

    fn measured_time(&self) -> f64 {
        self.horizon - self.warmup
    }
}

/// Across-replication summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub replications: usize,
    /// Measured (post-warmup) normalized time summed over replications.
    pub total_sim_time: f64,
    pub seed: u64,
}

impl SimEstimate {
    fn from_samples(samples: &[f64], measured_time: f64, seed: u64) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let stderr = (var / n).sqrt();
        Self {
            mean,
            stderr,
            ci95: (mean - 1.96 * stderr, mean + 1.96 * stderr),
            replications: samples.len(),
            total_sim_time: measured_time * n,
            seed,
        }
    }

    /// `(value - mean) / stderr`; zero when both coincide exactly.
    pub fn z_score(&self, value: f64) -> f64 {
        let diff = value - self.mean;
        if diff == 0.0 {
            0.0
        } else {
            diff / self.stderr
        }
    }
}

fn replication_rng(seed: u64, replication: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication as u64);
    rng
}

/// Walks one path of the jump chain, starting from the stationary law.
///
/// `visit(state, dt, measured_from)` is called for each holding interval of
/// length `dt`; only the part after offset `measured_from` lies past the warmup.
fn walk_path(
    model: &SystemModel,
    horizon: f64,
    warmup: f64,
    rng: &mut ChaCha8Rng,
    mut visit: impl FnMut(usize, f64, f64),
) {
    let n = model.n_users();
    let start = Binomial::new(n as u64, model.user().on_probability())
        .expect("on-probability lies in (0, 1)");
    let mut state = start.sample(rng) as usize;
    let mut t = 0.0;
    while t < horizon {
        let up = model.up_rate(state);
        let rate = up + model.down_rate(state);
        let u: f64 = rng.random();
        let hold = -(1.0 - u).ln() / rate;
        let end = (t + hold).min(horizon);
        let dt = end - t;
        visit(state, dt, (warmup - t).clamp(0.0, dt));
        t = end;
        if t >= horizon {
            break;
        }
        if rng.random::<f64>() * rate < up {
            state += 1;
        } else {
            state -= 1;
        }
    }
}

/// Time within `[from, dt]` during which a reflected backlog starting at
/// `s0` with slope `r` stays strictly above `b`.
fn time_above(s0: f64, r: f64, dt: f64, from: f64, b: f64) -> f64 {
    if r > 0.0 {
        let cross = if s0 > b { 0.0 } else { (b - s0) / r };
        (dt - cross.max(from)).max(0.0)
    } else if r < 0.0 {
        if s0 <= b {
            0.0
        } else {
            let cross = (s0 - b) / -r;
            (cross.min(dt) - from).max(0.0)
        }
    } else if s0 > b {
        dt - from
    } else {
        0.0
    }
}

fn backlog_replication(cfg: &SimConfig, thresholds: &[f64], rep: usize) -> Vec<f64> {
    let mut rng = replication_rng(cfg.seed, rep);
    let mut above = vec![0.0; thresholds.len()];
    let mut backlog = 0.0_f64;
    let model = cfg.model;
    walk_path(
        &model,
        cfg.horizon,
        cfg.warmup,
        &mut rng,
        |state, dt, from| {
            let r = model.drift(state);
            if from < dt {
                for (acc, &b) in above.iter_mut().zip(thresholds) {
                    *acc += time_above(backlog, r, dt, from, b);
                }
            }
            backlog = (backlog + r * dt).max(0.0);
        },
    );
    let measured = cfg.measured_time();
    above.into_iter().map(|a| a / measured).collect()
}

fn loss_replication(cfg: &SimConfig, rep: usize) -> f64 {
    let mut rng = replication_rng(cfg.seed, rep);
    let model = cfg.model;
    let cap = cfg.b;
    let mut charge = cap;
    let (mut unserved, mut demand) = (0.0, 0.0);
    walk_path(
        &model,
        cfg.horizon,
        cfg.warmup,
        &mut rng,
        |state, dt, from| {
            let net = model.capacity() - state as f64;
            let span = dt - from;
            if net < 0.0 {
                let empty_at = charge / -net;
                if span > 0.0 {
                    unserved += -net * (dt - empty_at.max(from)).max(0.0);
                }
            }
            if span > 0.0 {
                demand += state as f64 * span;
            }
            charge = (charge + net * dt).clamp(0.0, cap);
        },
    );
    if demand > 0.0 {
        unserved / demand
    } else {
        0.0
    }
}

/// Estimates `P(S > b)` for every threshold from one set of paths.
pub fn simulate_outage_curve(cfg: &SimConfig, thresholds: &[f64]) -> Result<Vec<SimEstimate>> {
    cfg.validate()?;
    cfg.model.ensure_stable()?;
    if let Some(b) = thresholds.iter().find(|b| !(**b >= 0.0)) {
        return Err(Error::InvalidConfig(format!("threshold {b} must be >= 0")));
    }
    let per_rep: Vec<Vec<f64>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| backlog_replication(cfg, thresholds, rep))
        .collect();
    Ok((0..thresholds.len())
        .map(|k| {
            let samples: Vec<f64> = per_rep.iter().map(|r| r[k]).collect();
            SimEstimate::from_samples(&samples, cfg.measured_time(), cfg.seed)
        })
        .collect())
}

/// Estimates `P(S > b)` as the time-average backlog exceedance.
pub fn simulate_outage(cfg: &SimConfig) -> Result<SimEstimate> {
    Ok(simulate_outage_curve(cfg, &[cfg.b])?.remove(0))
}

/// Estimates the fraction of demand left unserved by a store of size `b`.
pub fn simulate_loss_fraction(cfg: &SimConfig) -> Result<SimEstimate> {
    cfg.validate()?;
    let samples: Vec<f64> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| loss_replication(cfg, rep))
        .collect();
    Ok(SimEstimate::from_samples(
        &samples,
        cfg.measured_time(),
        cfg.seed,
    ))
}

/// Runs the metric selected in the config.
pub fn simulate(cfg: &SimConfig) -> Result<SimEstimate> {
    match cfg.metric {
        SimMetric::BacklogExceedance => simulate_outage(cfg),
        SimMetric::LossFraction => simulate_loss_fraction(cfg),
    }
}

/// Time fraction spent in each chain state, one estimate per state.
pub fn simulate_occupancy(cfg: &SimConfig) -> Result<Vec<SimEstimate>> {
    cfg.validate()?;
    let n = cfg.model.n_states();
    let per_rep: Vec<Vec<f64>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(cfg.seed, rep);
            let mut time = vec![0.0; n];
            walk_path(
                &cfg.model,
                cfg.horizon,
                cfg.warmup,
                &mut rng,
                |state, dt, from| {
                    time[state] += dt - from;
                },
            );
            let measured = cfg.measured_time();
            time.into_iter().map(|t| t / measured).collect()
        })
        .collect();
    Ok((0..n)
        .map(|i| {
            let samples: Vec<f64> = per_rep.iter().map(|r| r[i]).collect();
            SimEstimate::from_samples(&samples, cfg.measured_time(), cfg.seed)
        })
        .collect())
}

/// Flag threshold for [`ComparisonRow::flagged`].
pub const Z_FLAG: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub n_users: usize,
    pub chi: f64,
    pub capacity: f64,
    pub b: f64,
    pub analytic: Option<f64>,
    pub sim: Option<SimEstimate>,
    pub z_score: Option<f64>,
    /// `|z| > 3`.
    pub flagged: bool,
    pub error: Option<String>,
}

/// Spectral `P(S > b)` against the simulator for each model and threshold.
///
/// Failures are reported per row rather than aborting the table.
pub fn compare_exact_vs_sim(
    cases: &[(SystemModel, Vec<f64>)],
    settings: SimSettings,
) -> Vec<ComparisonRow> {
    let mut rows = Vec::new();
    for (model, thresholds) in cases {
        let cfg = SimConfig::new(*model, 0.0, settings, SimMetric::BacklogExceedance);
        let exact = solve_spectrum(model);
        let sims = simulate_outage_curve(&cfg, thresholds);
        for (k, &b) in thresholds.iter().enumerate() {
            let mut row = ComparisonRow {
                n_users: model.n_users(),
                chi: model.chi(),
                capacity: model.capacity(),
                b,
                analytic: None,
                sim: None,
                z_score: None,
                flagged: false,
                error: None,
            };
            match (&exact, &sims) {
                (Ok(sol), Ok(est)) => {
                    let a = sol.outage_probability(b);
                    let z = est[k].z_score(a);
                    row.analytic = Some(a);
                    row.sim = Some(est[k]);
                    row.z_score = Some(z);
                    row.flagged = z.abs() > Z_FLAG;
                }
                (Err(e), _) | (_, Err(e)) => row.error = Some(e.to_string()),
            }
            rows.push(row);
        }
    }
    rows
}
