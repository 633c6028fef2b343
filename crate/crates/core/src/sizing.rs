//! Storage and grid sizing by inverting the outage probability, plus the
//! parameter sweep engine that drives figure datasets.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotic::{self, AsymptoticParams};
use crate::closed_form;
use crate::error::{Error, Result};
use crate::model::{SystemModel, UserModel};
use crate::spectral::{self, SpectralSolution, INTEGER_TOL};

/// Offset applied to a capacity that lands on an integer state.
pub const CAPACITY_NUDGE: f64 = 1e-6;

/// Iteration cap shared by every bisection here.
pub const MAX_ITERATIONS: usize = 200;

/// Relative outage tolerance for the storage bisection.
const OUTAGE_RTOL: f64 = 1e-12;

/// Absolute bracket width at which the storage bisection stops.
const BUFFER_WIDTH_TOL: f64 = 1e-12;

/// Absolute bracket width at which the capacity bisection stops.
pub const CAPACITY_WIDTH_TOL: f64 = 1e-7;

/// How the outage probability is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    ClosedForm,
    Asymptotic,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::ClosedForm => "closed_form",
            Method::Asymptotic => "asymptotic",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Method::Exact),
            "closed_form" | "closed-form" => Ok(Method::ClosedForm),
            "asymptotic" => Ok(Method::Asymptotic),
            other => Err(Error::invalid(
                "method",
                format!("unknown method `{other}`"),
            )),
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "epsilon",
            format!("must lie in (0, 1), got {epsilon}"),
        ))
    }
}

fn check_buffer(b: f64) -> Result<()> {
    if b >= 0.0 && b.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            "b",
            format!("must be finite and >= 0, got {b}"),
        ))
    }
}

fn near_integer_state(model: &SystemModel) -> bool {
    let c = model.capacity();
    let r = c.round();
    r >= 0.0 && r <= model.n_users() as f64 && (c - r).abs() <= INTEGER_TOL
}

/// Exact solution, nudging an integer capacity by [`CAPACITY_NUDGE`].
///
/// Returns the solution and the nudged capacity when a nudge happened.
pub fn solve_nudged(model: &SystemModel) -> Result<(SpectralSolution, Option<f64>)> {
    if model.capacity() < model.n_users() as f64 && near_integer_state(model) {
        let nudged = model.with_capacity(model.capacity() + CAPACITY_NUDGE)?;
        return Ok((spectral::solve_spectrum(&nudged)?, Some(nudged.capacity())));
    }
    Ok((spectral::solve_spectrum(model)?, None))
}

/// An outage function `b -> P(S > b)` for one model and method.
#[derive(Debug, Clone)]
pub enum OutageCurve {
    Exact(Arc<SpectralSolution>),
    ClosedForm {
        chi: f64,
        capacity: f64,
    },
    Asymptotic(AsymptoticParams),
    /// `C >= N`: the buffer never fills.
    Zero,
}

impl OutageCurve {
    /// Builds the curve; also returns the nudged capacity if one was needed.
    pub fn new(model: &SystemModel, method: Method) -> Result<(Self, Option<f64>)> {
        model.ensure_stable()?;
        if model.capacity() >= model.n_users() as f64 {
            return Ok((OutageCurve::Zero, None));
        }
        match method {
            Method::Exact => {
                let (sol, nudged) = solve_nudged(model)?;
                Ok((OutageCurve::Exact(Arc::new(sol)), nudged))
            }
            Method::ClosedForm => {
                if model.n_users() != 1 {
                    return Err(Error::invalid(
                        "method",
                        format!("closed_form needs n = 1, got {}", model.n_users()),
                    ));
                }
                closed_form::single_user_spectrum(model.chi(), model.capacity())?;
                Ok((
                    OutageCurve::ClosedForm {
                        chi: model.chi(),
                        capacity: model.capacity(),
                    },
                    None,
                ))
            }
            Method::Asymptotic => Ok((
                OutageCurve::Asymptotic(asymptotic::morrison_params(model)?),
                None,
            )),
        }
    }

    pub fn outage(&self, b: f64) -> Result<f64> {
        match self {
            OutageCurve::Exact(sol) => Ok(sol.outage_probability(b)),
            OutageCurve::ClosedForm { chi, capacity } => {
                closed_form::single_user_outage(*chi, *capacity, b)
            }
            OutageCurve::Asymptotic(p) => asymptotic::asymptotic_outage_with(p, b),
            OutageCurve::Zero => Ok(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizingResult {
    /// Smallest normalized storage with outage at most epsilon.
    pub b_eps: f64,
    pub achieved_outage: f64,
    pub iterations: usize,
    /// Capacity actually solved when the requested one sat on an integer state.
    pub perturbed_capacity: Option<f64>,
}

/// Smallest `b >= 0` with `P(S > b) <= epsilon` on an already built curve.
pub fn size_on_curve(curve: &OutageCurve, epsilon: f64) -> Result<SizingResult> {
    check_epsilon(epsilon)?;
    let f = |b: f64| curve.outage(b);
    let p0 = f(0.0)?;
    if p0 <= epsilon {
        return Ok(SizingResult {
            b_eps: 0.0,
            achieved_outage: p0,
            iterations: 0,
            perturbed_capacity: None,
        });
    }

    let mut iterations = 0;
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut p_hi = f(hi)?;
    while p_hi >= epsilon {
        iterations += 1;
        if iterations > MAX_ITERATIONS {
            return Err(Error::NoConvergence { iterations });
        }
        lo = hi;
        hi *= 2.0;
        p_hi = f(hi)?;
    }

    loop {
        iterations += 1;
        if iterations > MAX_ITERATIONS {
            return Err(Error::NoConvergence { iterations });
        }
        let mid = 0.5 * (lo + hi);
        let p = f(mid)?;
        if (p - epsilon).abs() <= OUTAGE_RTOL * epsilon {
            return Ok(SizingResult {
                b_eps: mid,
                achieved_outage: p,
                iterations,
                perturbed_capacity: None,
            });
        }
        if p > epsilon {
            lo = mid;
        } else {
            hi = mid;
            p_hi = p;
        }
        if hi - lo <= BUFFER_WIDTH_TOL {
            return Ok(SizingResult {
                b_eps: hi,
                achieved_outage: p_hi,
                iterations,
                perturbed_capacity: None,
            });
        }
    }
}

/// Minimum storage `B(ε)` for the model.
pub fn size_storage(model: &SystemModel, epsilon: f64, method: Method) -> Result<SizingResult> {
    check_epsilon(epsilon)?;
    let (curve, nudged) = OutageCurve::new(model, method)?;
    let mut res = size_on_curve(&curve, epsilon)?;
    res.perturbed_capacity = nudged;
    Ok(res)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    /// Smallest normalized grid capacity meeting the target.
    pub capacity: f64,
    pub achieved_outage: f64,
    pub iterations: usize,
    /// Bisection points that sat on an integer state and were nudged.
    pub perturbed_points: Vec<f64>,
}

/// Smallest grid capacity `C` in `(N p, N]` with `P(S > b) <= epsilon`.
pub fn size_capacity(n: usize, user: UserModel, b: f64, epsilon: f64) -> Result<CapacityResult> {
    check_buffer(b)?;
    check_epsilon(epsilon)?;
    let base = SystemModel::new(n, user, n as f64)?;
    let mut lo = base.mean_demand();
    let mut hi = n as f64;
    let mut p_hi = 0.0;
    let mut perturbed_points = Vec::new();
    let mut iterations = 0;

    while hi - lo > CAPACITY_WIDTH_TOL {
        iterations += 1;
        if iterations > MAX_ITERATIONS {
            return Err(Error::NoConvergence { iterations });
        }
        let mut mid = 0.5 * (lo + hi);
        let candidate = base.with_capacity(mid)?;
        if near_integer_state(&candidate) {
            perturbed_points.push(mid);
            mid += CAPACITY_NUDGE;
        }
        let p = spectral::outage_probability(&base.with_capacity(mid)?, b)?;
        if p <= epsilon {
            hi = mid;
            p_hi = p;
        } else {
            lo = mid;
        }
    }
    if p_hi > epsilon {
        return Err(Error::InfeasibleTarget { epsilon });
    }
    Ok(CapacityResult {
        capacity: hi,
        achieved_outage: p_hi,
        iterations,
        perturbed_points,
    })
}

/// One `(C, B)` point of an iso-outage contour.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourPoint {
    pub capacity: f64,
    pub result: Result<SizingResult>,
}

/// `B(ε)` along a grid of capacities; failures are kept per point.
pub fn contour(
    n: usize,
    user: UserModel,
    epsilon: f64,
    capacity_grid: &[f64],
) -> Vec<ContourPoint> {
    capacity_grid
        .par_iter()
        .map(|&capacity| ContourPoint {
            capacity,
            result: SystemModel::new(n, user, capacity)
                .and_then(|m| size_storage(&m, epsilon, Method::Exact)),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSavings {
    pub capacity: CapacityResult,
    /// Reduction relative to peak provisioning `N R_p`, in percent.
    pub percent: f64,
}

/// Grid capacity saved by a store of size `b` relative to peak allocation.
pub fn grid_savings(n: usize, user: UserModel, b: f64, epsilon: f64) -> Result<GridSavings> {
    let capacity = size_capacity(n, user, b, epsilon)?;
    let percent = 100.0 * (n as f64 - capacity.capacity) / n as f64;
    Ok(GridSavings { capacity, percent })
}

/// Community size used as the ESS savings baseline.
pub const ESS_BASELINE_USERS: usize = 10;

/// Per-user storage reduction relative to a 10-user community at the same
/// per-user capacity, in percent, for each `N`.
pub fn ess_savings_vs_baseline(
    n_list: &[usize],
    user: UserModel,
    capacity_per_user: f64,
    epsilon: f64,
) -> Result<Vec<(usize, f64)>> {
    let per_user = |n: usize| -> Result<f64> {
        let m = SystemModel::new(n, user, capacity_per_user * n as f64)?;
        Ok(size_storage(&m, epsilon, Method::Exact)?.b_eps / n as f64)
    };
    let baseline = per_user(ESS_BASELINE_USERS)?;
    if baseline <= 0.0 {
        return Err(Error::invalid(
            "epsilon",
            "the 10-user baseline needs no storage, savings are undefined",
        ));
    }
    n_list
        .par_iter()
        .map(|&n| Ok((n, 100.0 * (1.0 - per_user(n)? / baseline))))
        .collect()
}

/// Sweepable inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    N,
    Chi,
    Capacity,
    CapacityPerUser,
    B,
    Epsilon,
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" | "N" => Ok(Param::N),
            "chi" => Ok(Param::Chi),
            "capacity" | "C" => Ok(Param::Capacity),
            "capacity_per_user" | "sigma" => Ok(Param::CapacityPerUser),
            "b" | "B" => Ok(Param::B),
            "epsilon" => Ok(Param::Epsilon),
            other => Err(Error::invalid(
                "axis",
                format!("unknown parameter `{other}`"),
            )),
        }
    }
}

/// Quantity computed for each sweep row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// `P(S > b)`.
    Outage,
    /// `B(ε)`.
    Size,
    /// Minimal grid capacity for `(b, ε)`.
    Capacity,
    /// Grid savings over peak provisioning, percent.
    Savings,
    /// Per-user storage savings over the 10-user baseline, percent.
    EssSavings,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Outage => "outage",
            Target::Size => "size",
            Target::Capacity => "capacity",
            Target::Savings => "savings",
            Target::EssSavings => "ess_savings",
        })
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "outage" => Ok(Target::Outage),
            "size" => Ok(Target::Size),
            "capacity" => Ok(Target::Capacity),
            "savings" => Ok(Target::Savings),
            "ess_savings" => Ok(Target::EssSavings),
            other => Err(Error::invalid(
                "target",
                format!("unknown target `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: Param,
    pub values: Vec<f64>,
}

impl Axis {
    /// `points` evenly spaced values from `min` to `max` inclusive.
    pub fn linspace(param: Param, min: f64, max: f64, points: usize) -> Result<Self> {
        if points == 0 {
            return Err(Error::invalid("axis", "needs at least one point"));
        }
        if !(min <= max) {
            return Err(Error::invalid(
                "axis",
                format!("bounds out of order: {min} > {max}"),
            ));
        }
        let values = if points == 1 {
            vec![min]
        } else {
            let step = (max - min) / (points - 1) as f64;
            (0..points).map(|i| min + step * i as f64).collect()
        };
        Ok(Self { param, values })
    }

    pub fn list(param: Param, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("axis", "needs at least one value"));
        }
        Ok(Self { param, values })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Outermost axis first.
    pub axes: Vec<Axis>,
    pub fixed: Vec<(Param, f64)>,
    pub target: Target,
    pub method: Method,
    /// Copied into every row.
    pub notes: String,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::invalid("axes", "at least one axis is required"));
        }
        if self.axes.iter().any(|a| a.values.is_empty()) {
            return Err(Error::invalid(
                "axes",
                "every axis needs at least one value",
            ));
        }
        Ok(())
    }

    fn points(&self) -> Vec<Vec<(Param, f64)>> {
        let mut out = vec![self.fixed.clone()];
        for axis in &self.axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.values.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push((axis.param, v));
                        p
                    })
                })
                .collect();
        }
        out
    }
}

/// One evaluated sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: Option<usize>,
    pub chi: Option<f64>,
    pub capacity: Option<f64>,
    pub b: Option<f64>,
    pub epsilon: Option<f64>,
    pub p_outage: Option<f64>,
    pub method: Method,
    pub target: Target,
    pub value: Option<f64>,
    pub notes: String,
    pub error: Option<String>,
    /// Set when `error` came from the numerics rather than the inputs.
    #[serde(skip)]
    pub numerical_failure: bool,
}

#[derive(Debug, Clone, Copy, Default)]
struct Point {
    n: Option<usize>,
    chi: Option<f64>,
    capacity: Option<f64>,
    capacity_per_user: Option<f64>,
    b: Option<f64>,
    epsilon: Option<f64>,
}

impl Point {
    fn resolve(values: &[(Param, f64)]) -> Result<Self> {
        let mut p = Point::default();
        // Later entries (axes) override earlier ones (fixed).
        for &(param, v) in values {
            match param {
                Param::N => {
                    if !(v >= 1.0 && v.fract() == 0.0) {
                        return Err(Error::invalid(
                            "n",
                            format!("must be a positive integer, got {v}"),
                        ));
                    }
                    p.n = Some(v as usize);
                }
                Param::Chi => p.chi = Some(v),
                Param::Capacity => {
                    p.capacity = Some(v);
                    p.capacity_per_user = None;
                }
                Param::CapacityPerUser => {
                    p.capacity_per_user = Some(v);
                    p.capacity = None;
                }
                Param::B => p.b = Some(v),
                Param::Epsilon => p.epsilon = Some(v),
            }
        }
        if let (Some(s), Some(n)) = (p.capacity_per_user, p.n) {
            p.capacity = Some(s * n as f64);
        }
        Ok(p)
    }

    fn require<T: Copy>(v: Option<T>, name: &'static str) -> Result<T> {
        v.ok_or_else(|| Error::invalid(name, "missing for this sweep target"))
    }

    fn model(&self) -> Result<SystemModel> {
        SystemModel::from_parts(
            Self::require(self.n, "n")?,
            Self::require(self.chi, "chi")?,
            Self::require(self.capacity, "capacity")?,
        )
    }

    fn user(&self) -> Result<UserModel> {
        UserModel::new(Self::require(self.chi, "chi")?)
    }
}

type CurveKey = (usize, u64, u64, Method);

fn curve_key(m: &SystemModel, method: Method) -> CurveKey {
    (
        m.n_users(),
        m.chi().to_bits(),
        m.capacity().to_bits(),
        method,
    )
}

type CurveCache = HashMap<CurveKey, std::result::Result<(OutageCurve, Option<f64>), Error>>;

fn nudge_note(nudged: Option<f64>) -> Option<String> {
    nudged.map(|c| format!("capacity nudged to {c}"))
}

fn evaluate(spec: &SweepSpec, point: Point, curves: &CurveCache) -> SweepRow {
    let mut row = SweepRow {
        n: point.n,
        chi: point.chi,
        capacity: point.capacity,
        b: point.b,
        epsilon: point.epsilon,
        p_outage: None,
        method: spec.method,
        target: spec.target,
        value: None,
        notes: spec.notes.clone(),
        error: None,
        numerical_failure: false,
    };
    let mut extra_notes = Vec::new();
    let result: Result<()> = (|| {
        match spec.target {
            Target::Outage | Target::Size => {
                let model = point.model()?;
                let (curve, nudged) = curves
                    .get(&curve_key(&model, spec.method))
                    .expect("curve cached for every outage/size point")
                    .clone()?;
                extra_notes.extend(nudge_note(nudged));
                if spec.target == Target::Outage {
                    let b = Point::require(point.b, "b")?;
                    check_buffer(b)?;
                    let p = curve.outage(b)?;
                    row.p_outage = Some(p);
                    row.value = Some(p);
                } else {
                    let res = size_on_curve(&curve, Point::require(point.epsilon, "epsilon")?)?;
                    row.b = Some(res.b_eps);
                    row.p_outage = Some(res.achieved_outage);
                    row.value = Some(res.b_eps);
                }
            }
            Target::Capacity | Target::Savings => {
                let n = Point::require(point.n, "n")?;
                let b = Point::require(point.b, "b")?;
                let eps = Point::require(point.epsilon, "epsilon")?;
                let res = grid_savings(n, point.user()?, b, eps)?;
                if !res.capacity.perturbed_points.is_empty() {
                    extra_notes.push(format!(
                        "{} capacity test points nudged by {CAPACITY_NUDGE}",
                        res.capacity.perturbed_points.len()
                    ));
                }
                row.capacity = Some(res.capacity.capacity);
                row.p_outage = Some(res.capacity.achieved_outage);
                row.value = Some(if spec.target == Target::Capacity {
                    res.capacity.capacity
                } else {
                    res.percent
                });
            }
            Target::EssSavings => {
                let n = Point::require(point.n, "n")?;
                let sigma = match (point.capacity_per_user, point.capacity) {
                    (Some(s), _) => s,
                    (None, Some(c)) => c / n as f64,
                    (None, None) => return Err(Error::invalid("capacity_per_user", "missing")),
                };
                let eps = Point::require(point.epsilon, "epsilon")?;
                let user = point.user()?;
                let model = SystemModel::new(n, user, sigma * n as f64)?;
                let own = size_storage(&model, eps, Method::Exact)?;
                extra_notes.extend(nudge_note(own.perturbed_capacity));
                let pct = ess_savings_vs_baseline(&[n], user, sigma, eps)?[0].1;
                row.b = Some(own.b_eps);
                row.p_outage = Some(own.achieved_outage);
                row.value = Some(pct);
            }
        }
        Ok(())
    })();
    if let Err(e) = result {
        row.numerical_failure = e.is_numerical();
        row.error = Some(e.to_string());
    }
    if !extra_notes.is_empty() {
        if !row.notes.is_empty() {
            row.notes.push_str("; ");
        }
        row.notes.push_str(&extra_notes.join("; "));
    }
    row
}

/// Evaluates every point of the sweep.
///
/// Rows follow the lexicographic order of the axes regardless of the order in
/// which points finish. Per-point failures land in the row's `error` field.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let points: Vec<Point> = spec
        .points()
        .iter()
        .map(|p| Point::resolve(p))
        .collect::<Result<_>>()?;

    let mut models: Vec<SystemModel> = Vec::new();
    if matches!(spec.target, Target::Outage | Target::Size) {
        let mut seen = std::collections::HashSet::new();
        for p in &points {
            if let Ok(m) = p.model() {
                if seen.insert(curve_key(&m, spec.method)) {
                    models.push(m);
                }
            }
        }
    }
    let curves: CurveCache = models
        .par_iter()
        .map(|m| (curve_key(m, spec.method), OutageCurve::new(m, spec.method)))
        .collect();

    Ok(points
        .par_iter()
        .map(|&p| evaluate(spec, p, &curves))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(n: usize, chi: f64, c: f64) -> SystemModel {
        SystemModel::from_parts(n, chi, c).unwrap()
    }

    #[test]
    fn single_user_matches_closed_form() {
        let exact = size_storage(&model(1, 0.5, 0.8), 0.01, Method::Exact).unwrap();
        let closed = closed_form::single_user_size(0.5, 0.8, 0.01).unwrap();
        assert!((exact.b_eps - closed).abs() <= 1e-9 * closed);
        let cf = size_storage(&model(1, 0.5, 0.8), 0.01, Method::ClosedForm).unwrap();
        assert!((cf.b_eps - closed).abs() <= 1e-9 * closed);
        assert!((exact.achieved_outage - 0.01).abs() <= 1e-9 * 0.01);
    }

    #[test]
    fn two_user_analytic_inversion() {
        let res = size_storage(&model(2, 1.0, 1.5), 0.01, Method::Exact).unwrap();
        let expect = 3.0 / 8.0 * ((4.0 / 9.0) / 0.01_f64).ln();
        assert!(
            (res.b_eps - expect).abs() < 1e-9,
            "{} vs {expect}",
            res.b_eps
        );
    }

    #[test]
    fn overprovisioned_needs_no_storage() {
        for method in [Method::Exact, Method::Asymptotic] {
            let r = size_storage(&model(3, 0.5, 3.5), 0.01, method).unwrap();
            assert_eq!(r.b_eps, 0.0);
            assert_eq!(r.achieved_outage, 0.0);
        }
    }

    #[test]
    fn closed_form_rejects_multiuser() {
        assert!(size_storage(&model(2, 1.0, 1.5), 0.01, Method::ClosedForm).is_err());
    }

    #[test]
    fn integer_capacity_is_nudged_and_recorded() {
        let r = size_storage(&model(6, 0.5, 3.0), 0.05, Method::Exact).unwrap();
        assert_eq!(r.perturbed_capacity, Some(3.0 + CAPACITY_NUDGE));
    }

    #[test]
    fn sizing_errors() {
        assert!(matches!(
            size_storage(&model(4, 1.0, 1.5), 0.01, Method::Exact),
            Err(Error::Unstable { .. })
        ));
        assert!(size_storage(&model(4, 1.0, 2.5), 0.0, Method::Exact).is_err());
        assert!(size_storage(&model(4, 1.0, 2.5), 1.0, Method::Exact).is_err());
    }

    #[test]
    fn capacity_round_trip() {
        let user = UserModel::new(0.5).unwrap();
        let m = SystemModel::new(20, user, 8.3).unwrap();
        let b = size_storage(&m, 0.01, Method::Exact).unwrap().b_eps;
        let c = size_capacity(20, user, b, 0.01).unwrap();
        assert!(c.capacity <= 8.3 + 1e-6, "{c:?}");
        assert!(c.capacity >= 8.3 - 1e-4, "{c:?}");
        assert!(c.achieved_outage <= 0.01);
    }

    #[test]
    fn capacity_approaches_mean_demand_for_huge_buffers() {
        let user = UserModel::new(0.5).unwrap();
        let c = size_capacity(10, user, 1e4, 0.01).unwrap();
        let mean = 10.0 / 3.0;
        assert!(c.capacity > mean && c.capacity < mean + 0.01, "{c:?}");
    }

    #[test]
    fn zero_storage_tiny_target_needs_near_peak() {
        let user = UserModel::new(0.5).unwrap();
        let s = grid_savings(8, user, 0.0, 1e-6).unwrap();
        // Only the all-On state can overload once C > 7.
        assert!(s.capacity.capacity > 7.0);
        assert!(s.percent < 12.5);
    }

    #[test]
    fn contour_is_monotone() {
        let user = UserModel::new(0.5).unwrap();
        let grid: Vec<f64> = (0..6).map(|k| 8.05 + 0.5 * k as f64).collect();
        let tight = contour(20, user, 0.01, &grid);
        let loose = contour(20, user, 0.1, &grid);
        for w in tight.windows(2) {
            let (a, b) = (w[0].result.as_ref().unwrap(), w[1].result.as_ref().unwrap());
            assert!(a.b_eps >= b.b_eps);
        }
        for (t, l) in tight.iter().zip(&loose) {
            assert!(t.result.as_ref().unwrap().b_eps >= l.result.as_ref().unwrap().b_eps);
        }
        let bad = contour(20, user, 0.01, &[5.0]);
        assert!(bad[0].result.is_err());
    }

    #[test]
    fn ess_baseline_is_zero_percent() {
        let user = UserModel::new(0.5).unwrap();
        let s = ess_savings_vs_baseline(&[10, 40], user, 0.42, 0.01).unwrap();
        assert_eq!(s[0], (10, 0.0));
        assert!(s[1].1 > 0.0);
    }

    #[test]
    fn sweep_row_order_and_single_point() {
        let spec = SweepSpec {
            axes: vec![
                Axis::list(Param::N, vec![5.0, 10.0]).unwrap(),
                Axis::linspace(Param::B, 0.0, 2.0, 3).unwrap(),
            ],
            fixed: vec![(Param::Chi, 0.5), (Param::CapacityPerUser, 0.45)],
            target: Target::Outage,
            method: Method::Exact,
            notes: String::new(),
        };
        let rows = sweep(&spec).unwrap();
        let order: Vec<(usize, f64)> = rows.iter().map(|r| (r.n.unwrap(), r.b.unwrap())).collect();
        assert_eq!(
            order,
            vec![
                (5, 0.0),
                (5, 1.0),
                (5, 2.0),
                (10, 0.0),
                (10, 1.0),
                (10, 2.0)
            ]
        );
        let direct = spectral::outage_probability(&model(10, 0.5, 4.5), 1.0).unwrap();
        assert_eq!(rows[4].p_outage, Some(direct));
    }

    #[test]
    fn sweep_collects_row_errors() {
        let spec = SweepSpec {
            axes: vec![Axis::list(Param::Capacity, vec![1.0, 3.0, 3.5]).unwrap()],
            fixed: vec![(Param::N, 5.0), (Param::Chi, 0.5), (Param::Epsilon, 0.01)],
            target: Target::Size,
            method: Method::Exact,
            notes: "x".into(),
        };
        let rows = sweep(&spec).unwrap();
        assert!(rows[0].error.as_deref().unwrap().contains("unstable"));
        assert!(rows[1].error.is_none());
        assert!(rows[1].notes.contains("nudged"));
        assert!(rows[2].error.is_none());
    }

    #[test]
    fn axis_validation() {
        assert!(Axis::linspace(Param::B, 2.0, 1.0, 3).is_err());
        assert!(Axis::linspace(Param::B, 0.0, 1.0, 0).is_err());
        assert!(Axis::list(Param::B, vec![]).is_err());
        let spec = SweepSpec {
            axes: vec![],
            fixed: vec![],
            target: Target::Outage,
            method: Method::Exact,
            notes: String::new(),
        };
        assert!(sweep(&spec).is_err());
    }
}
