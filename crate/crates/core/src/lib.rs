//! Quasi-spherical upper bounds for the Bartnik mass of sphere boundary data
//! `(Σ, γ, H)`, with a numerical extension that cross-checks them.
//!
//! Pipeline: a [`grid::SphereGrid`] discretizes the round sphere; a
//! [`metric::ConformalMetric`] stores `γ = r² e^{2φ} σ_o`; [`path`] builds the
//! conformal path to the round metric and its roundness functionals `α`, `β`;
//! [`bound`] evaluates the mass bounds; [`extension`] integrates the lapse
//! equation and extracts the mass; [`fillin`] gives the fill-in lower bound.

pub mod bound;
pub mod error;
pub mod extension;
pub mod field;
pub mod fillin;
pub mod grid;
pub mod io;
pub mod metric;
pub mod numeric;
pub mod path;
pub mod uniformization;

pub use error::{QsbError, Result};
pub use field::{CovectorField, ScalarField, SymTensorField};
pub use grid::{Harmonics, SphereGrid};
pub use metric::{BoundaryData, ConformalMetric};
