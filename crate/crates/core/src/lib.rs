//! Shift-share (Bartik) design toolkit: data loading and validation,
//! instrument construction, Bartik regressions, decomposition weights,
//! the correlated-random-coefficients estimator and a data simulator.

pub mod crc;
pub mod dataset;
pub mod error;
pub mod instrument;
pub mod linalg;
pub mod par;
pub mod regress;
pub mod report;
pub mod simulate;
pub mod weights;

pub use dataset::{load_dataset, validate_dataset, LoadOptions, ShiftShareDataset, Shares, Shocks};
pub use error::{Error, Result};
pub use instrument::{build_bartik, BartikPanel};
pub use regress::{fit_bartik_system, fit_linear, FitSpec};
