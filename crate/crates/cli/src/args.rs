use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use storesize::simulator::SimMetric;
use storesize::sizing::{Method, Target};

use crate::config::{AxisConfig, Format};

#[derive(Debug, Parser)]
#[command(
    name = "storesize",
    version,
    about = "Size shared energy storage for a community of On/Off consumers",
    long_about = "All quantities are normalized: time in mean On durations, power in the \
                  per-user peak R_p. Results go to --output (CSV by default) or to stdout; \
                  a one-line summary is printed on stdout (stderr when the table itself goes \
                  to stdout). Exit codes: 0 success, 2 invalid input, 3 numerical failure."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Smallest storage B with P(S > B) <= epsilon.
    Size(SizeArgs),
    /// Outage probability P(S > B) for one or more buffer sizes.
    Outage(OutageArgs),
    /// Smallest grid capacity C with P(S > B) <= epsilon.
    Capacity(CapacityArgs),
    /// Iso-outage (C, B) pairs over a capacity grid.
    Contour(ContourArgs),
    /// Parameter sweep, either a named figure preset or custom axes.
    Sweep(SweepArgs),
    /// Monte Carlo estimate of the backlog exceedance or loss fraction.
    Simulate(SimulateArgs),
    /// Large-population approximation tabulated against the exact solution.
    Asymptotic(AsymptoticArgs),
    /// Exact solution against the simulator with z-scores.
    Compare(CompareArgs),
    /// Convert normalized storage to kWh and back.
    Units(UnitsArgs),
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: storesize::Error| e.to_string())
}

fn parse_target(s: &str) -> Result<Target, String> {
    s.parse().map_err(|e: storesize::Error| e.to_string())
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum MetricArg {
    BacklogExceedance,
    LossFraction,
}

impl From<MetricArg> for SimMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::BacklogExceedance => SimMetric::BacklogExceedance,
            MetricArg::LossFraction => SimMetric::LossFraction,
        }
    }
}

fn parse_component(s: &str) -> Result<(f64, f64), String> {
    let (c, w) = s
        .split_once(':')
        .ok_or_else(|| format!("expected CAPACITY:WEIGHT, got `{s}`"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((num(c)?, num(w)?))
}

fn parse_axis(s: &str) -> Result<AxisConfig, String> {
    AxisConfig::parse_flag(s)
}

/// Options shared by every subcommand.
#[derive(Debug, Args, Serialize)]
pub struct OutputArgs {
    /// JSON scenario file; flags override its values.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Table format; csv by default.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Output file, written atomically. Defaults to stdout.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PopulationArgs {
    /// Number of users N.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Off-to-On rate in units of the On-to-Off rate.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub population: PopulationArgs,
    /// Grid capacity C in units of R_p.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
    /// Grid capacity per user, C / N.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacity_per_user: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct UnitArgs {
    /// Per-user peak power in kW.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rp_kw: Option<f64>,
    /// Mean On duration in hours.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_on_hours: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimArgs {
    /// Normalized time per replication, warmup included.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Normalized time discarded at the start of each replication.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup: Option<f64>,
    /// Independent replications (at least 2).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
    /// Base seed; replication k uses stream k.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct SizeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Grid capacity in kW; needs --rp-kw.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_kw: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub units: UnitArgs,
    /// Outage target, 0 < epsilon < 1.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// exact, closed_form or asymptotic.
    #[arg(long, value_parser = parse_method)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct OutageArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Buffer size B in units of R_p / mu.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Comma-separated buffer sizes.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buffers: Option<Vec<f64>>,
    /// exact (default), closed_form (N = 1 only) or asymptotic.
    #[arg(long, value_parser = parse_method)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    /// Capacity mixture as CAPACITY:WEIGHT pairs, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1.., value_parser = parse_component)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mixture: Option<Vec<(f64, f64)>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct CapacityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub population: PopulationArgs,
    /// Buffer size B in units of R_p / mu.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Outage target, 0 < epsilon < 1.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct ContourArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub population: PopulationArgs,
    /// Outage target, 0 < epsilon < 1.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Comma-separated grid capacities.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacities: Option<Vec<f64>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct SweepArgs {
    /// fig2, fig3, fig4, fig5 or fig6.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Custom axis, `PARAM:MIN:MAX:POINTS` or `PARAM:V1,V2,...`; repeatable.
    #[arg(long = "axis", value_parser = parse_axis)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axes: Option<Vec<AxisConfig>>,
    /// outage, size, capacity, savings or ess_savings.
    #[arg(long, value_parser = parse_target)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<Target>,
    /// exact (default), closed_form (N = 1 only) or asymptotic.
    #[arg(long, value_parser = parse_method)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Buffer size B in units of R_p / mu.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Outage target, 0 < epsilon < 1.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Buffer size B in units of R_p / mu.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Comma-separated thresholds (backlog metric only).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buffers: Option<Vec<f64>>,
    /// Quantity to estimate; backlog_exceedance by default.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricArg>,
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct AsymptoticArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Comma-separated populations; overrides --n.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ns: Option<Vec<usize>>,
    /// Comma-separated buffer sizes.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buffers: Option<Vec<f64>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct CompareArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Comma-separated buffer sizes.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buffers: Option<Vec<f64>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct UnitsArgs {
    /// Normalized storage to convert to kWh.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_norm: Option<f64>,
    /// Storage in kWh to convert to normalized units.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kwh: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub units: UnitArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}
