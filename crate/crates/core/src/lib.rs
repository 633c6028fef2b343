//! Sizing of shared energy storage for a community of On/Off consumers.
//!
//! Each user alternates between exponentially distributed Off and On periods
//! and draws a fixed peak power while On. The community is fed by a grid
//! connection of capacity `C` backed by a shared store. The store level is a
//! Markov-modulated fluid queue, and the probability that a store of size
//! `B` fails to cover demand is the stationary probability `P(S > B)` of the
//! corresponding infinite-buffer queue.
//!
//! All quantities are normalized: time in mean On durations, power in the
//! per-user peak `R_p`, energy in `R_p` times the mean On duration.
//!
//! ```
//! use storesize::{model::SystemModel, sizing::{size_storage, Method}};
//!
//! let model = SystemModel::from_parts(2, 1.0, 1.5)?;
//! let res = size_storage(&model, 0.01, Method::Exact)?;
//! let expect = 3.0 / 8.0 * ((4.0 / 9.0) / 0.01_f64).ln();
//! assert!((res.b_eps - expect).abs() < 1e-9);
//! # Ok::<(), storesize::Error>(())
//! ```

// Guards like `!(x >= 0.0)` are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod closed_form;
pub mod error;
mod linalg;
pub mod model;
pub mod presets;
pub mod simulator;
pub mod sizing;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{SystemModel, UserModel};
pub use sizing::Method;
pub use spectral::{solve_spectrum, SpectralSolution};

/// Library version, stamped into every output row.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
