//! Finite-dimensional laboratory for spectral cluster and resolvent estimates.

pub mod basis;
pub mod error;
pub mod exponents;
pub mod inequality;
pub mod linalg;
pub mod lp;
pub mod manifolds;
pub mod perturbation;
pub mod quadrature;
mod serde_float;
pub mod spectral;
pub mod sweep;

pub use basis::{Eigenbasis, TorusBasis};
pub use error::{Error, Result};
pub use exponents::{CatalogKey, Exponent, ExponentProfile, QExponent, SpectralRegion};
pub use linalg::{FiniteMeasureSpace, LinearMap, C64};
pub use spectral::{ResolventQuery, SpectralMap, SpectralOperator, SpectralWindow};
