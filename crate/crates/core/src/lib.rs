//! Simulation and analysis toolkit for a single organic molecule coupled to a
//! silicon-nitride ridge waveguide.
//!
//! * [`stratified`]: dipole radiation, decay rate and objective collection in
//!   planar multilayers.
//! * [`modesolver`]: finite-difference guided modes of the ridge cross-section.
//! * [`coupling`]: emitter–waveguide coupling efficiency and its maps over
//!   emitter height and crystal thickness.
//! * [`photostats`]: photon-stream Monte Carlo, detection chain, coincidence
//!   histograms and antibunching fits.
//! * [`budget`]: efficiency-budget algebra with uncertainty propagation.
//! * [`cli`]: configuration files, reproducible runs and reports.

pub mod budget;
pub mod cli;
pub mod coupling;
pub mod error;
pub mod modesolver;
pub mod photostats;
pub mod quad;
pub mod stratified;
mod svg;

pub use error::{Error, Result};

pub const AIR_INDEX: f64 = 1.0;
pub const ANTHRACENE_INDEX: f64 = 1.8;
pub const NITRIDE_INDEX: f64 = 2.0;
pub const GLASS_INDEX: f64 = 1.51;
pub const NITRIDE_THICKNESS_NM: f64 = 175.0;
pub const RIDGE_WIDTH_NM: f64 = 500.0;
pub const EMISSION_WAVELENGTH_NM: f64 = 785.0;
