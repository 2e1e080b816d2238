//! Collective dipole dynamics of a Raman-driven atomic chain: couplings,
//! spectra, scattering, time evolution and disorder ensembles.

pub mod chain;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod farfield;
pub mod green;
pub mod hamiltonian;
pub mod io;
pub mod linalg;
pub mod polylog;
pub mod scattering;
pub mod spectrum;

pub use chain::{Chain, ChainConfig, ExcitationIndex, Polarization};
pub use error::{Error, Result};
pub use green::{build_couplings, CouplingMatrices};
pub use hamiltonian::{assemble, disorder_sample, DisorderRealization, DisorderShape, NonHermitianHamiltonian};
