//! Sweep definitions that regenerate the figure datasets.
//!
//! Every preset pins `chi = 0.5` (`p = 1/3`), the value implied by a grid
//! allowance of `C = 0.3683 N` sitting 0.035 above mean demand per user.

use crate::error::{Error, Result};
use crate::sizing::{Axis, Method, Param, SweepSpec, Target};

pub const PRESET_NAMES: [&str; 5] = ["fig2", "fig3", "fig4", "fig5", "fig6"];

/// On/off rate ratio shared by all presets.
pub const FIGURE_CHI: f64 = 0.5;

/// Grid power per user shared by the fig2 and fig6 presets.
pub const FIGURE_SIGMA: f64 = 0.3683;

const NOTE: &str = "chi pinned to 0.5 (p = 1/3)";

fn spec(axes: Vec<Axis>, fixed: Vec<(Param, f64)>, target: Target, notes: &str) -> SweepSpec {
    let mut fixed = fixed;
    fixed.insert(0, (Param::Chi, FIGURE_CHI));
    SweepSpec {
        axes,
        fixed,
        target,
        method: Method::Exact,
        notes: notes.to_string(),
    }
}

fn list(param: Param, values: &[f64]) -> Axis {
    Axis::list(param, values.to_vec()).expect("preset axes are nonempty")
}

/// Sweeps for a named preset; their rows are meant to be concatenated.
pub fn preset(name: &str) -> Result<Vec<SweepSpec>> {
    let eps = [0.01, 0.05, 0.1];
    let specs = match name {
        // Outage curves and storage sizes for N = 400..800 at C = 0.3683 N.
        "fig2" => {
            let ns = [400.0, 500.0, 600.0, 700.0, 800.0];
            let fixed = vec![(Param::CapacityPerUser, FIGURE_SIGMA)];
            vec![
                spec(
                    vec![
                        list(Param::N, &ns),
                        Axis::linspace(Param::B, 0.0, 15.0, 61)?,
                    ],
                    fixed.clone(),
                    Target::Outage,
                    NOTE,
                ),
                spec(
                    vec![list(Param::N, &ns), list(Param::Epsilon, &eps)],
                    fixed,
                    Target::Size,
                    NOTE,
                ),
            ]
        }
        // Outage at B = 5 against grid power per user.
        "fig3" => vec![spec(
            vec![
                list(Param::N, &[200.0, 400.0, 600.0]),
                Axis::linspace(Param::CapacityPerUser, 0.345, 0.405, 13)?,
            ],
            vec![(Param::B, 5.0)],
            Target::Outage,
            NOTE,
        )],
        // Iso-outage (C, B) contours for N = 500.
        "fig4" => {
            let cs: Vec<f64> = (0..20).map(|k| 172.55 + 2.5 * k as f64).collect();
            vec![spec(
                vec![list(Param::Epsilon, &eps), list(Param::Capacity, &cs)],
                vec![(Param::N, 500.0)],
                Target::Size,
                NOTE,
            )]
        }
        // Grid savings over peak provisioning with B = 5.
        "fig5" => vec![spec(
            vec![
                list(Param::Epsilon, &eps),
                list(Param::N, &[25.0, 50.0, 100.0, 200.0, 400.0]),
            ],
            vec![(Param::B, 5.0)],
            Target::Savings,
            "chi pinned to 0.5 (p = 1/3) rather than 4, matching the other presets",
        )],
        // Per-user storage savings relative to N = 10.
        "fig6" => vec![spec(
            vec![list(
                Param::N,
                &[10.0, 25.0, 50.0, 100.0, 200.0, 400.0, 800.0],
            )],
            vec![
                (Param::CapacityPerUser, FIGURE_SIGMA),
                (Param::Epsilon, 0.01),
            ],
            Target::EssSavings,
            NOTE,
        )],
        other => {
            return Err(Error::invalid(
                "preset",
                format!("unknown preset `{other}`, expected one of {PRESET_NAMES:?}"),
            ))
        }
    };
    Ok(specs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves() {
        for name in PRESET_NAMES {
            let specs = preset(name).unwrap();
            assert!(!specs.is_empty());
            for s in specs {
                s.validate().unwrap();
                assert!(s.notes.contains("chi pinned to 0.5"));
            }
        }
        assert!(preset("fig7").is_err());
    }

    #[test]
    fn fig4_grid_is_stable_and_non_integer() {
        let s = &preset("fig4").unwrap()[0];
        let cs = &s.axes[1].values;
        assert_eq!(cs.len(), 20);
        assert!(cs
            .iter()
            .all(|c| *c > 500.0 / 3.0 && (c - c.round()).abs() > 1e-3));
    }
}
