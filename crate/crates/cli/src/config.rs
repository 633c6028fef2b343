//! Scenario files and flag overrides.
//!
//! A scenario is a flat JSON object whose keys mirror the long flags with
//! underscores. Flags are serialized into the same shape and merged on top,
//! so a flag always wins and every replaced file value is recorded.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use storesize::simulator::SimMetric;
use storesize::sizing::{Axis, Method, Param, Target};

use crate::CliError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Sweep axis: evenly spaced `points` over `[min, max]`, or explicit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisConfig {
    Range {
        param: Param,
        min: f64,
        max: f64,
        points: usize,
    },
    List {
        param: Param,
        values: Vec<f64>,
    },
}

impl AxisConfig {
    /// Parses `PARAM:MIN:MAX:POINTS` or `PARAM:V1,V2,...`.
    pub fn parse_flag(s: &str) -> Result<Self, String> {
        let (name, rest) = s.split_once(':').ok_or_else(|| {
            format!("expected PARAM:MIN:MAX:POINTS or PARAM:V1,V2,..., got `{s}`")
        })?;
        let param: Param = name.parse().map_err(|e: storesize::Error| e.to_string())?;
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
        let parts: Vec<&str> = rest.split(':').collect();
        match parts.as_slice() {
            [min, max, points] => Ok(AxisConfig::Range {
                param,
                min: num(min)?,
                max: num(max)?,
                points: points
                    .trim()
                    .parse()
                    .map_err(|e| format!("`{points}`: {e}"))?,
            }),
            [list] => Ok(AxisConfig::List {
                param,
                values: list.split(',').map(num).collect::<Result<_, _>>()?,
            }),
            _ => Err(format!("malformed axis `{s}`")),
        }
    }

    pub fn to_axis(&self) -> storesize::Result<Axis> {
        match self {
            AxisConfig::Range {
                param,
                min,
                max,
                points,
            } => Axis::linspace(*param, *min, *max, *points),
            AxisConfig::List { param, values } => Axis::list(*param, values.clone()),
        }
    }
}

/// Every input a subcommand may read. Unset fields fall back to defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: Option<usize>,
    pub ns: Option<Vec<usize>>,
    pub chi: Option<f64>,
    pub capacity: Option<f64>,
    pub capacity_per_user: Option<f64>,
    pub grid_kw: Option<f64>,
    pub rp_kw: Option<f64>,
    pub mean_on_hours: Option<f64>,

    pub b: Option<f64>,
    pub buffers: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
    pub method: Option<Method>,
    pub mixture: Option<Vec<(f64, f64)>>,
    pub capacities: Option<Vec<f64>>,

    pub preset: Option<String>,
    pub axes: Option<Vec<AxisConfig>>,
    pub target: Option<Target>,

    pub horizon: Option<f64>,
    pub warmup: Option<f64>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub metric: Option<SimMetric>,

    pub b_norm: Option<f64>,
    pub kwh: Option<f64>,

    pub format: Option<Format>,
    pub output: Option<PathBuf>,
}

/// Keys that all set the grid capacity; a flag for one drops the others.
const CAPACITY_KEYS: [&str; 3] = ["capacity", "capacity_per_user", "grid_kw"];

#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ScenarioConfig,
    /// `key: old -> new` for every file value replaced by a flag.
    pub overrides: Vec<String>,
}

impl Resolved {
    /// The resolved configuration with unset keys omitted.
    pub fn to_json(&self) -> Value {
        let mut v = serde_json::to_value(&self.config).expect("config serializes");
        if let Value::Object(map) = &mut v {
            map.retain(|_, v| !v.is_null());
        }
        v
    }
}

fn read_file(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::invalid("config", format!("{}: {e}", path.display())))?;
    if text.trim().is_empty() {
        return Ok(Map::new());
    }
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::invalid("config", "expected a JSON object")),
        Err(e) => Err(CliError::invalid(
            "config",
            format!("{}: {e}", path.display()),
        )),
    }
}

/// Merges serialized flags over an optional scenario file.
pub fn resolve(path: Option<&Path>, flags: &impl Serialize) -> Result<Resolved, CliError> {
    let mut merged = match path {
        Some(p) => read_file(p)?,
        None => Map::new(),
    };
    let flags = match serde_json::to_value(flags).expect("flags serialize") {
        Value::Object(map) => map,
        _ => unreachable!("flag structs serialize to objects"),
    };

    let mut overrides = Vec::new();
    if flags.keys().any(|k| CAPACITY_KEYS.contains(&k.as_str())) {
        for key in CAPACITY_KEYS {
            if !flags.contains_key(key) {
                if let Some(old) = merged.remove(key) {
                    overrides.push(format!("{key}: {old} -> unset"));
                }
            }
        }
    }
    for (key, new) in flags {
        if let Some(old) = merged.get(&key) {
            if *old != new {
                overrides.push(format!("{key}: {old} -> {new}"));
            }
        }
        merged.insert(key, new);
    }

    let config = serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::invalid("config", e.to_string()))?;
    Ok(Resolved { config, overrides })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[derive(Serialize)]
    struct Flags {
        #[serde(skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(skip_serializing_if = "Option::is_none")]
        capacity_per_user: Option<f64>,
    }

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn empty_file_gives_flags_only() {
        let f = file("  \n");
        let r = resolve(
            Some(f.path()),
            &Flags {
                n: Some(4),
                capacity_per_user: None,
            },
        )
        .unwrap();
        assert_eq!(r.config.n, Some(4));
        assert!(r.overrides.is_empty());
    }

    #[test]
    fn flag_wins_and_is_recorded() {
        let f = file(r#"{"n": 10, "chi": 0.5, "capacity": 4.2}"#);
        let r = resolve(
            Some(f.path()),
            &Flags {
                n: Some(12),
                capacity_per_user: Some(0.4),
            },
        )
        .unwrap();
        assert_eq!(r.config.n, Some(12));
        assert_eq!(r.config.chi, Some(0.5));
        assert_eq!(r.config.capacity, None);
        assert_eq!(r.config.capacity_per_user, Some(0.4));
        assert!(r.overrides.iter().any(|o| o == "n: 10 -> 12"));
        assert!(r
            .overrides
            .iter()
            .any(|o| o.starts_with("capacity: 4.2 -> unset")));
    }

    #[test]
    fn unknown_key_is_named() {
        let f = file(r#"{"users": 10}"#);
        let err = resolve(
            Some(f.path()),
            &Flags {
                n: None,
                capacity_per_user: None,
            },
        )
        .unwrap_err();
        assert!(err.to_string().contains("users"));
    }

    #[test]
    fn axis_flags() {
        assert_eq!(
            AxisConfig::parse_flag("b:0:15:61").unwrap(),
            AxisConfig::Range {
                param: Param::B,
                min: 0.0,
                max: 15.0,
                points: 61
            }
        );
        assert_eq!(
            AxisConfig::parse_flag("n:400,500").unwrap(),
            AxisConfig::List {
                param: Param::N,
                values: vec![400.0, 500.0]
            }
        );
        assert!(AxisConfig::parse_flag("b").is_err());
        assert!(AxisConfig::parse_flag("q:1,2").is_err());
        let from_json: Vec<AxisConfig> = serde_json::from_str(
            r#"[{"param":"b","min":0,"max":1,"points":3},{"param":"n","values":[5]}]"#,
        )
        .unwrap();
        assert_eq!(from_json.len(), 2);
    }
}
