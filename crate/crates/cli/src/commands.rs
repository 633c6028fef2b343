use rayon::prelude::*;
use storesize::asymptotic::comparison_table;
use storesize::model::{PhysicalUnits, SystemModel, UserModel};
use storesize::presets;
use storesize::simulator::{
    compare_exact_vs_sim, simulate, simulate_outage_curve, SimConfig, SimMetric, SimSettings,
};
use storesize::sizing::{
    self, contour, grid_savings, size_storage, sweep, Method, OutageCurve, SweepRow, SweepSpec,
};
use storesize::spectral::{outage_probability_mixture, CapacityMixture};
use storesize::Error;

use crate::config::ScenarioConfig;
use crate::output::{fmt_num, Cell, Table};
use crate::{CliError, VERSION};

/// A computed table plus the line printed for the user.
pub struct Outcome {
    pub table: Table,
    pub summary: String,
    /// Set when every row failed; decides the exit code.
    pub total_failure: Option<CliError>,
}

impl Outcome {
    fn ok(table: Table, summary: String) -> Self {
        Self {
            table,
            summary,
            total_failure: None,
        }
    }
}

fn require<T: Clone>(v: &Option<T>, field: &'static str) -> Result<T, CliError> {
    v.clone()
        .ok_or_else(|| CliError::invalid(field, "required but not given"))
}

fn user(cfg: &ScenarioConfig) -> Result<UserModel, CliError> {
    Ok(UserModel::new(require(&cfg.chi, "chi")?)?)
}

fn units(cfg: &ScenarioConfig) -> Result<Option<PhysicalUnits>, CliError> {
    match (cfg.rp_kw, cfg.mean_on_hours) {
        (Some(rp), Some(h)) => Ok(Some(PhysicalUnits::new(rp, h)?)),
        (None, None) => Ok(None),
        (None, Some(_)) => Err(CliError::invalid("rp_kw", "required with mean_on_hours")),
        (Some(_), None) => Err(CliError::invalid("mean_on_hours", "required with rp_kw")),
    }
}

fn capacity_for(cfg: &ScenarioConfig, n: usize) -> Result<f64, CliError> {
    match (cfg.capacity, cfg.capacity_per_user, cfg.grid_kw) {
        (Some(c), None, None) => Ok(c),
        (None, Some(s), None) => Ok(s * n as f64),
        (None, None, Some(kw)) => {
            let rp = require(&cfg.rp_kw, "rp_kw")?;
            Ok(kw / rp)
        }
        (None, None, None) => Err(CliError::invalid("capacity", "required but not given")),
        _ => Err(CliError::invalid(
            "capacity",
            "give only one of capacity, capacity_per_user, grid_kw",
        )),
    }
}

fn model(cfg: &ScenarioConfig) -> Result<SystemModel, CliError> {
    let n = require(&cfg.n, "n")?;
    Ok(SystemModel::new(n, user(cfg)?, capacity_for(cfg, n)?)?)
}

fn buffers(cfg: &ScenarioConfig) -> Result<Vec<f64>, CliError> {
    match (&cfg.buffers, cfg.b) {
        (Some(list), None) if !list.is_empty() => Ok(list.clone()),
        (None, Some(b)) => Ok(vec![b]),
        (Some(_), Some(_)) => Err(CliError::invalid("b", "give either b or buffers, not both")),
        _ => Err(CliError::invalid("b", "required but not given")),
    }
}

fn check_buffers(bs: &[f64]) -> Result<(), CliError> {
    match bs.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
        Some(b) => Err(CliError::invalid(
            "b",
            format!("must be finite and >= 0, got {b}"),
        )),
        None => Ok(()),
    }
}

fn sim_settings(cfg: &ScenarioConfig) -> SimSettings {
    let d = SimSettings::default();
    SimSettings {
        horizon: cfg.horizon.unwrap_or(d.horizon),
        warmup: cfg.warmup.unwrap_or(d.warmup),
        replications: cfg.replications.unwrap_or(d.replications),
        seed: cfg.seed.unwrap_or(d.seed),
    }
}

fn failure_of<'a>(mut errors: impl Iterator<Item = &'a Error>) -> CliError {
    let first = errors.next().cloned();
    match first {
        Some(e) => CliError::Core(e),
        None => CliError::invalid("output", "no rows were produced"),
    }
}

pub fn size(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let m = model(cfg)?;
    let eps = require(&cfg.epsilon, "epsilon")?;
    let method = cfg.method.unwrap_or(Method::Exact);
    let res = size_storage(&m, eps, method)?;
    let kwh = units(cfg)?.map(|u| u.storage_kwh(res.b_eps));
    let mut t = Table::new(&[
        "N",
        "chi",
        "C",
        "epsilon",
        "method",
        "b_eps",
        "achieved_outage",
        "iterations",
        "perturbed_capacity",
        "storage_kwh",
        "version",
    ]);
    t.push(vec![
        m.n_users().into(),
        m.chi().into(),
        m.capacity().into(),
        eps.into(),
        method.to_string().into(),
        res.b_eps.into(),
        res.achieved_outage.into(),
        res.iterations.into(),
        res.perturbed_capacity.into(),
        kwh.into(),
        VERSION.into(),
    ]);
    let mut summary = format!(
        "B(epsilon={}) = {} for N={}, chi={}, C={} ({method})",
        fmt_num(eps),
        fmt_num(res.b_eps),
        m.n_users(),
        fmt_num(m.chi()),
        fmt_num(m.capacity()),
    );
    if let Some(k) = kwh {
        summary.push_str(&format!(", {} kWh", fmt_num(k)));
    }
    Ok(Outcome::ok(t, summary))
}

pub fn outage(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let bs = buffers(cfg)?;
    check_buffers(&bs)?;
    let method = cfg.method.unwrap_or(Method::Exact);
    let mut t = Table::new(&[
        "N", "chi", "C", "B", "method", "p_outage", "notes", "version",
    ]);

    if let Some(components) = &cfg.mixture {
        if method != Method::Exact {
            return Err(CliError::invalid(
                "method",
                "mixtures need the exact method",
            ));
        }
        let n = require(&cfg.n, "n")?;
        let mix = CapacityMixture::new(components.clone())?;
        let base = SystemModel::new(n, user(cfg)?, n as f64)?;
        let note = components
            .iter()
            .map(|(c, w)| format!("{}:{}", fmt_num(*c), fmt_num(*w)))
            .collect::<Vec<_>>()
            .join(" ");
        for &b in &bs {
            let p = outage_probability_mixture(&base, &mix, b)?;
            t.push(vec![
                n.into(),
                base.chi().into(),
                Cell::Empty,
                b.into(),
                method.to_string().into(),
                p.into(),
                format!("capacity mixture {note}").into(),
                VERSION.into(),
            ]);
        }
        let summary = format!("mixture outage at {} buffer sizes for N={n}", bs.len());
        return Ok(Outcome::ok(t, summary));
    }

    let m = model(cfg)?;
    let (curve, nudged) = OutageCurve::new(&m, method)?;
    let note = nudged.map(|c| format!("capacity nudged to {}", fmt_num(c)));
    for &b in &bs {
        t.push(vec![
            m.n_users().into(),
            m.chi().into(),
            m.capacity().into(),
            b.into(),
            method.to_string().into(),
            curve.outage(b)?.into(),
            note.clone().into(),
            VERSION.into(),
        ]);
    }
    let summary = if bs.len() == 1 {
        format!(
            "P(S > {}) = {} for N={}, chi={}, C={} ({method})",
            fmt_num(bs[0]),
            fmt_num(curve.outage(bs[0])?),
            m.n_users(),
            fmt_num(m.chi()),
            fmt_num(m.capacity())
        )
    } else {
        format!("outage at {} buffer sizes for N={}", bs.len(), m.n_users())
    };
    Ok(Outcome::ok(t, summary))
}

pub fn capacity(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let n = require(&cfg.n, "n")?;
    let b = require(&cfg.b, "b")?;
    let eps = require(&cfg.epsilon, "epsilon")?;
    let u = user(cfg)?;
    let res = grid_savings(n, u, b, eps)?;
    let c = &res.capacity;
    let notes = if c.perturbed_points.is_empty() {
        String::new()
    } else {
        format!(
            "{} capacity test points nudged by {}",
            c.perturbed_points.len(),
            sizing::CAPACITY_NUDGE
        )
    };
    let mut t = Table::new(&[
        "N",
        "chi",
        "B",
        "epsilon",
        "C",
        "achieved_outage",
        "savings_pct",
        "iterations",
        "notes",
        "version",
    ]);
    t.push(vec![
        n.into(),
        u.chi().into(),
        b.into(),
        eps.into(),
        c.capacity.into(),
        c.achieved_outage.into(),
        res.percent.into(),
        c.iterations.into(),
        notes.into(),
        VERSION.into(),
    ]);
    let summary = format!(
        "C = {} ({}% below peak) for N={n}, B={}, epsilon={}",
        fmt_num(c.capacity),
        fmt_num(res.percent),
        fmt_num(b),
        fmt_num(eps)
    );
    Ok(Outcome::ok(t, summary))
}

pub fn contour_cmd(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let n = require(&cfg.n, "n")?;
    let eps = require(&cfg.epsilon, "epsilon")?;
    let grid = require(&cfg.capacities, "capacities")?;
    if grid.is_empty() {
        return Err(CliError::invalid("capacities", "needs at least one value"));
    }
    let u = user(cfg)?;
    let points = contour(n, u, eps, &grid);
    let mut t = Table::new(&[
        "N",
        "chi",
        "epsilon",
        "C",
        "B",
        "achieved_outage",
        "perturbed_capacity",
        "error",
        "version",
    ]);
    for p in &points {
        let (b, ach, pert, err) = match &p.result {
            Ok(r) => (
                Some(r.b_eps),
                Some(r.achieved_outage),
                r.perturbed_capacity,
                None,
            ),
            Err(e) => (None, None, None, Some(e.to_string())),
        };
        t.push(vec![
            n.into(),
            u.chi().into(),
            eps.into(),
            p.capacity.into(),
            b.into(),
            ach.into(),
            pert.into(),
            err.into(),
            VERSION.into(),
        ]);
    }
    let failed = points.iter().filter(|p| p.result.is_err()).count();
    let summary = format!(
        "contour: {} points, {failed} errors, N={n}, epsilon={}",
        points.len(),
        fmt_num(eps)
    );
    let total_failure = (failed == points.len())
        .then(|| failure_of(points.iter().filter_map(|p| p.result.as_ref().err())));
    Ok(Outcome {
        table: t,
        summary,
        total_failure,
    })
}

fn custom_spec(cfg: &ScenarioConfig) -> Result<SweepSpec, CliError> {
    let axes = require(&cfg.axes, "axes")?
        .iter()
        .map(|a| a.to_axis())
        .collect::<storesize::Result<Vec<_>>>()?;
    let mut fixed = Vec::new();
    use storesize::sizing::Param;
    if let Some(n) = cfg.n {
        fixed.push((Param::N, n as f64));
    }
    for (p, v) in [
        (Param::Chi, cfg.chi),
        (Param::Capacity, cfg.capacity),
        (Param::CapacityPerUser, cfg.capacity_per_user),
        (Param::B, cfg.b),
        (Param::Epsilon, cfg.epsilon),
    ] {
        if let Some(v) = v {
            fixed.push((p, v));
        }
    }
    Ok(SweepSpec {
        axes,
        fixed,
        target: require(&cfg.target, "target")?,
        method: cfg.method.unwrap_or(Method::Exact),
        notes: String::new(),
    })
}

pub const SWEEP_COLUMNS: [&str; 12] = [
    "N", "chi", "C", "B", "epsilon", "p_outage", "method", "target", "value", "notes", "error",
    "version",
];

fn sweep_cells(r: &SweepRow) -> Vec<Cell> {
    vec![
        r.n.into(),
        r.chi.into(),
        r.capacity.into(),
        r.b.into(),
        r.epsilon.into(),
        r.p_outage.into(),
        r.method.to_string().into(),
        r.target.to_string().into(),
        r.value.into(),
        r.notes.clone().into(),
        r.error.clone().into(),
        VERSION.into(),
    ]
}

pub fn sweep_cmd(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let (label, specs) = match (&cfg.preset, &cfg.axes) {
        (Some(_), Some(_)) => {
            return Err(CliError::invalid(
                "preset",
                "cannot be combined with custom axes",
            ))
        }
        (Some(name), None) => (name.clone(), presets::preset(name)?),
        (None, _) => ("custom".to_string(), vec![custom_spec(cfg)?]),
    };
    let mut rows = Vec::new();
    for spec in &specs {
        rows.extend(sweep(spec)?);
    }
    let mut t = Table::new(&SWEEP_COLUMNS);
    for r in &rows {
        t.push(sweep_cells(r));
    }
    let failed: Vec<&SweepRow> = rows.iter().filter(|r| r.error.is_some()).collect();
    let summary = format!(
        "sweep {label}: {} rows, {} errors",
        rows.len(),
        failed.len()
    );
    let total_failure = (!rows.is_empty() && failed.len() == rows.len()).then(|| {
        let msg = failed[0].error.clone().unwrap_or_default();
        if failed.iter().any(|r| r.numerical_failure) {
            CliError::Core(Error::NumericalInstability(msg))
        } else {
            CliError::invalid("sweep", msg)
        }
    });
    Ok(Outcome {
        table: t,
        summary,
        total_failure,
    })
}

pub fn simulate_cmd(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let m = model(cfg)?;
    let bs = buffers(cfg)?;
    check_buffers(&bs)?;
    let metric = cfg.metric.unwrap_or(SimMetric::BacklogExceedance);
    let settings = sim_settings(cfg);
    let base = SimConfig::new(m, bs[0], settings, metric);
    let estimates = match metric {
        SimMetric::BacklogExceedance => simulate_outage_curve(&base, &bs)?,
        SimMetric::LossFraction => bs
            .iter()
            .map(|&b| simulate(&SimConfig { b, ..base }))
            .collect::<storesize::Result<Vec<_>>>()?,
    };
    let metric_name = match metric {
        SimMetric::BacklogExceedance => "backlog_exceedance",
        SimMetric::LossFraction => "loss_fraction",
    };
    let mut t = Table::new(&[
        "N",
        "chi",
        "C",
        "B",
        "metric",
        "mean",
        "stderr",
        "ci_lo",
        "ci_hi",
        "replications",
        "horizon",
        "warmup",
        "total_sim_time",
        "seed",
        "version",
    ]);
    for (b, e) in bs.iter().zip(&estimates) {
        t.push(vec![
            m.n_users().into(),
            m.chi().into(),
            m.capacity().into(),
            (*b).into(),
            metric_name.into(),
            e.mean.into(),
            e.stderr.into(),
            e.ci95.0.into(),
            e.ci95.1.into(),
            e.replications.into(),
            settings.horizon.into(),
            settings.warmup.into(),
            e.total_sim_time.into(),
            e.seed.into(),
            VERSION.into(),
        ]);
    }
    let summary = format!(
        "{metric_name} at {} thresholds, {} replications, seed {}; first mean {} +/- {}",
        bs.len(),
        settings.replications,
        settings.seed,
        fmt_num(estimates[0].mean),
        fmt_num(estimates[0].stderr)
    );
    Ok(Outcome::ok(t, summary))
}

pub fn asymptotic_cmd(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let ns = match &cfg.ns {
        Some(ns) if !ns.is_empty() => ns.clone(),
        _ => vec![require(&cfg.n, "n")?],
    };
    let u = user(cfg)?;
    let bs = match (&cfg.buffers, cfg.b) {
        (None, None) => (0..=15).map(f64::from).collect(),
        _ => buffers(cfg)?,
    };
    check_buffers(&bs)?;
    let models = ns
        .iter()
        .map(|&n| Ok(SystemModel::new(n, u, capacity_for(cfg, n)?)?))
        .collect::<Result<Vec<_>, CliError>>()?;

    let tables: Vec<_> = models
        .par_iter()
        .map(|m| {
            let (sol, _) = sizing::solve_nudged(m)?;
            comparison_table(&sol, &bs)
        })
        .collect();

    let mut t = Table::new(&[
        "N",
        "chi",
        "C",
        "sigma",
        "B",
        "kappa",
        "asymptotic",
        "exact",
        "log10_ratio",
        "error",
        "version",
    ]);
    let mut errors = Vec::new();
    for (m, res) in models.iter().zip(tables) {
        match res {
            Ok(rows) => {
                for r in rows {
                    t.push(vec![
                        r.n_users.into(),
                        m.chi().into(),
                        m.capacity().into(),
                        r.sigma.into(),
                        r.b.into(),
                        r.kappa.into(),
                        r.asymptotic.into(),
                        r.exact.into(),
                        r.log10_ratio.into(),
                        Cell::Empty,
                        VERSION.into(),
                    ]);
                }
            }
            Err(e) => {
                t.push(vec![
                    m.n_users().into(),
                    m.chi().into(),
                    m.capacity().into(),
                    m.capacity_per_user().into(),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    e.to_string().into(),
                    VERSION.into(),
                ]);
                errors.push(e);
            }
        }
    }
    let summary = format!(
        "asymptotic vs exact: {} populations x {} buffer sizes, {} errors",
        models.len(),
        bs.len(),
        errors.len()
    );
    let total_failure = (errors.len() == models.len()).then(|| failure_of(errors.iter()));
    Ok(Outcome {
        table: t,
        summary,
        total_failure,
    })
}

pub fn compare_cmd(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let m = model(cfg)?;
    let bs = buffers(cfg)?;
    check_buffers(&bs)?;
    let settings = sim_settings(cfg);
    let rows = compare_exact_vs_sim(&[(m, bs)], settings);
    let mut t = Table::new(&[
        "N",
        "chi",
        "C",
        "B",
        "analytic",
        "sim_mean",
        "sim_stderr",
        "z_score",
        "flagged",
        "seed",
        "error",
        "version",
    ]);
    for r in &rows {
        t.push(vec![
            r.n_users.into(),
            r.chi.into(),
            r.capacity.into(),
            r.b.into(),
            r.analytic.into(),
            r.sim.map(|s| s.mean).into(),
            r.sim.map(|s| s.stderr).into(),
            r.z_score.into(),
            r.flagged.into(),
            settings.seed.into(),
            r.error.clone().into(),
            VERSION.into(),
        ]);
    }
    let flagged = rows.iter().filter(|r| r.flagged).count();
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let summary = format!(
        "compare: {} thresholds, {flagged} with |z| > 3, {failed} errors",
        rows.len()
    );
    let total_failure = (failed == rows.len())
        .then(|| CliError::invalid("compare", rows[0].error.clone().unwrap_or_default()));
    Ok(Outcome {
        table: t,
        summary,
        total_failure,
    })
}

pub fn units_cmd(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let u = units(cfg)?.ok_or_else(|| CliError::invalid("rp_kw", "required but not given"))?;
    let (b_norm, kwh) = match (cfg.b_norm, cfg.kwh) {
        (Some(b), None) => (b, u.storage_kwh(b)),
        (None, Some(k)) => (u.storage_normalized(k), k),
        (Some(_), Some(_)) => return Err(CliError::invalid("b_norm", "give either b_norm or kwh")),
        (None, None) => return Err(CliError::invalid("b_norm", "required but not given")),
    };
    if !(b_norm >= 0.0 && b_norm.is_finite()) {
        return Err(CliError::invalid(
            "b_norm",
            format!("must be finite and >= 0, got {b_norm}"),
        ));
    }
    let mut t = Table::new(&["rp_kw", "mean_on_hours", "b_norm", "storage_kwh", "version"]);
    t.push(vec![
        u.rp_kw().into(),
        u.mean_on_hours().into(),
        b_norm.into(),
        kwh.into(),
        VERSION.into(),
    ]);
    let summary = format!(
        "{} normalized = {} kWh at R_p = {} kW, mean On = {} h",
        fmt_num(b_norm),
        fmt_num(kwh),
        fmt_num(u.rp_kw()),
        fmt_num(u.mean_on_hours())
    );
    Ok(Outcome::ok(t, summary))
}
