//! Physics-compliant modelling, estimation and optimization of wireless channels
//! parametrized by beyond-diagonal reconfigurable intelligent surfaces (BD-RIS).
//!
//! Any BD-RIS channel is a chain cascade of a static, non-diagonal system `K`
//! (radio environment plus the static part of the load circuit) terminated by a
//! diagonal system of individually tunable loads. The crate provides:
//!
//! - [`network`]: scattering-matrix algebra (cascade loading, Redheffer star product,
//!   S/Z conversion, truncated multiple-scattering series);
//! - [`circuits`]: canonical static load circuits and two-state load banks;
//! - [`environment`]: radio environments, the cascade `K`, both channel routes and
//!   matrix/Touchstone file ingestion;
//! - [`physfad`]: the coupled-dipole formulation and its reduced closed form;
//! - [`estimation`]: gradient-based fitting of the cascade parameters from
//!   `(configuration, channel)` pairs;
//! - [`optimization`]: RSSI maximization by coordinate ascent with rank-1 updates.

pub mod circuits;
pub mod environment;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod network;
pub mod optimization;
pub mod physfad;

pub use error::{Error, Result};
pub use linalg::CMatrix;
pub use num_complex::Complex64;
