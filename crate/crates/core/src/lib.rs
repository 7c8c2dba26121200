//! Coverage probability, area spectral efficiency and optimal antenna
//! downtilt for downlink cellular networks with Poisson-distributed base
//! stations, LoS/NLoS path loss and a vertical dipole antenna pattern.
//!
//! - [`channel`]: geometry, path loss, LoS probability and antenna gains.
//! - [`quadrature`]: adaptive Gauss–Kronrod integration used throughout.
//! - [`analytic`]: serving-distance densities, conditional and total coverage, ASE.
//! - [`optimizer`]: optimal downtilt by stationarity root-finding and by direct scan.
//! - [`mcsim`]: Monte Carlo network simulator used as an independent oracle.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod channel;
pub mod error;
pub mod mcsim;
pub mod optimizer;
pub mod quadrature;

pub use error::{Error, Result};
