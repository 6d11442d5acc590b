//! Numerical laboratory for linear cocycles over partially hyperbolic
//! skew-products.
//!
//! The base dynamics is a two-sided full shift on a finite alphabet, the
//! fiber is the circle, and the linear part is a Hölder family of invertible
//! complex matrices. On top of that the crate provides Lyapunov-spectrum
//! estimators, strong stable/unstable holonomies, pinching and twisting
//! diagnostics for spectrum simplicity, and push-forward experiments for
//! measures on Grassmannian bundles.

pub mod error;
pub mod linalg;
pub mod lincocycle;
pub mod simplicity;
pub mod skewprod;
pub mod spectrum;
pub mod symbolic;
pub mod ustates;

pub use error::{CocycleError, Result};
