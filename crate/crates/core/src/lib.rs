//! Steady-state correlations of two remote optomechanical mirrors driven by
//! two-mode squeezed light, plus the all-optical readout of their entanglement.
//!
//! Covariance matrices use the symmetrized convention with vacuum = 1/2.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod measures;
pub mod output;
pub mod params;
pub mod pipeline;
pub mod readout;
pub mod steady_state;
pub mod sweep;

pub use error::{MechError, Result};
pub use params::{derive, DerivedParams, PhysicalParams};
