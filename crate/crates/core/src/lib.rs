//! Husimi phase-space distributions for matter waves passing a time-dependent
//! aperture.
//!
//! A Gaussian packet moving towards a barrier at the origin is transmitted
//! through one or more apodized time windows. The Husimi amplitude at a
//! phase-space point is a time integral over the window. This crate evaluates
//! it by adaptive quadrature, by a residue expansion built from complex Bessel
//! functions, and by closed forms valid for narrow slits.

pub mod aperture;
pub mod cbessel;
mod error;
pub mod gaussian;
pub mod grid;
pub mod parallel;
pub mod quadrature;
pub mod report;
pub mod residue;
pub mod scaled;
pub mod scenario;
pub mod slitforms;

pub use aperture::{ApodizationBarrier, TimeGrating, Window};
pub use error::{Error, Result};
pub use gaussian::FrozenConstants;
pub use scaled::ScaledComplex;
pub use scenario::{PhaseSpacePoint, PhysicalScenario};

/// Complex number type used throughout.
pub type Complex = num_complex::Complex64;
