//! Parametric aerodynamic wall-field regression.
//!
//! The crate covers the whole benchmark pipeline: flow-condition physics and
//! design of experiments ([`flow`]), the dataset model with its split protocol
//! and file formats ([`dataset`]), a deterministic analytic field generator
//! standing in for CFD data ([`oracle`]), shared linear-algebra and graph
//! kernels ([`numerics`]), pointwise and global regressors ([`pointwise`],
//! [`global`]), and the challenge scoring criteria ([`metrics`]).

pub mod dataset;
pub mod error;
pub mod flow;
pub mod global;
pub mod metrics;
pub mod model_io;
pub mod numerics;
pub mod oracle;
pub mod pointwise;

pub use dataset::{Dataset, Scaler, Split, SurfaceGeometry, WallField};
pub use error::{Error, Result};
pub use flow::{DoeSpec, FlowCondition, GasModel};
pub use metrics::ScoreReport;
pub use oracle::OracleConfig;

/// Names of the four output variables, in column order.
pub const VARIABLES: [&str; 4] = ["cp", "cfx", "cfy", "cfz"];

/// Number of output variables per wall point.
pub const N_VARIABLES: usize = 4;
