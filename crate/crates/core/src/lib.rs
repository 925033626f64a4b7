//! Numerical laboratory for outer billiards around circular sectors.

pub mod adiabatic;
pub mod asymptotic;
pub mod error;
pub mod geometry;
pub mod normal_form;
pub mod real;
pub mod return_map;
pub mod sawtooth;
pub mod stats;
pub mod suites;

pub use error::{LabError, Result};
pub use geometry::{Half, Point2, PolarPoint, RegionId, SectorShape, SupportKind};
pub use real::{Mp, Real};
