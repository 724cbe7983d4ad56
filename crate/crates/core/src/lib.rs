//! Implicit shape templates learned with part deformation consistency.
//!
//! Shapes are signed distance fields `F(x) = T(x + Δx) + Δs`: a shared
//! template `T` evaluated at points moved by a per-shape deformation field
//! whose weights come from a hypernetwork over the shape's latent code and
//! whose input carries a per-point mixture of learned part priors.

pub mod autodiff;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod training;
pub mod transfer;

pub use error::{Error, Result};
