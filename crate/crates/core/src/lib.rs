//! Classical two-axis cavity field that carries the same mode algebra as a
//! pair of entangled oscillators.
//!
//! The crate works in oscillator units throughout (ħ = m = ω̃ = 1). Physical
//! cavity dimensions enter only through [`cavity::CavityParams`].
//!
//! * [`modes`]: Hermite polynomials, oscillator eigenfunctions, 1D grids.
//! * [`fock`]: truncated mode-space states and operators, CHSH oracle and optimizer.
//! * [`field`]: envelope on a 2D grid, spectral differential operators, plane integrals.
//! * [`cavity`]: physical parameter mapping and time evolution.
//! * [`antenna`]: sampled measurement, least-squares reconstruction, parity-feedback collapse.

pub mod antenna;
pub mod cavity;
pub mod error;
pub mod field;
pub mod fock;
pub mod modes;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

/// Transverse cavity axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}
