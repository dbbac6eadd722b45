//! Photon trapping and bound states in the continuum for emitters coupled to
//! a tight-binding waveguide, in the sectors of at most three excitations.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod bic;
pub mod error;
pub mod hamiltonian;
pub mod model;
pub mod observables;
pub mod io;
pub mod optimizer;
pub mod propagator;
pub mod scenario;
pub mod state;
pub mod wavepacket;

pub use error::{Error, Result};
