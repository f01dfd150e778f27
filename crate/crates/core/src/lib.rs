//! Cascaded inelastic photon scattering in a Bose-Hubbard waveguide coupled
//! to far-detuned two-level emitters.
//!
//! The crate provides
//! * closed-form and numeric band structure ([`band`]),
//! * an exact sparse solver for the few-excitation dynamics ([`hilbert`],
//!   [`propagator`]),
//! * a Lippmann-Schwinger solver for the effective pseudo-giant-atom model
//!   in real and momentum space ([`pga`]),
//! * scenario runners that tie everything together ([`experiments`]).
//!
//! All numerics are generic over [`Real`]; the `f64` aliases below are what
//! the command-line tool uses.

pub mod band;
pub mod error;
pub mod experiments;
pub mod hilbert;
pub mod lattice;
pub mod linalg;
pub mod pga;
pub mod propagator;
pub mod scalar;
pub mod wavepacket;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Complex64 = num_complex::Complex<f64>;
pub type Lattice = lattice::LatticeSpec<f64>;
pub type Emitter = lattice::EmitterSpec<f64>;
pub type Bands = band::BandModel<f64>;
pub type Wavepacket = wavepacket::WavepacketSpec<f64>;
