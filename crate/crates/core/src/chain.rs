//! Chain geometry, drive parameters and the single-excitation index space.
//!
//! Natural units throughout: Γ₀ = λ₀ = c = ħ = 1. Frequencies are in Γ₀,
//! lengths in λ₀, so the resonant wavenumber is k₀ = 2π. The chain lies on
//! the z axis with atom n at z_n = n·a.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resonant wavenumber k₀ = 2π/λ₀ with λ₀ = 1.
pub const K0: f64 = 2.0 * PI;

/// Single-atom decay rate, the unit of frequency.
pub const GAMMA0: f64 = 1.0;

/// Largest lattice constant (in λ₀) that supports subradiant guided modes.
pub const SUBRADIANT_LIMIT: f64 = 0.5;

/// Raw chain parameters as they appear in a config file.
///
/// `control_wavevector` is given in units of 1/a (so k_c = π/5a is written
/// as `0.6283185307179586`); every other length is in λ₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n_atoms: usize,
    pub lattice_const: f64,
    pub delta_shift: f64,
    pub mixing_angle: f64,
    pub control_wavevector: f64,
    #[serde(default)]
    pub detuning: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ChainConfig {
    /// The transport parameter set used throughout: a = λ₀/8, δ = 10Γ₀/3,
    /// k_c = π/5a. `mixing_angle = 0` is the reciprocal chain, `π/4` the
    /// directional one.
    pub fn standard(n_atoms: usize, mixing_angle: f64) -> Self {
        ChainConfig {
            n_atoms,
            lattice_const: 0.125,
            delta_shift: 10.0 / 3.0,
            mixing_angle,
            control_wavevector: PI / 5.0,
            detuning: 0.0,
            seed: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(self) -> Result<Chain> {
        if self.n_atoms < 2 {
            return Err(Error::config("n_atoms", format!("must be at least 2, got {}", self.n_atoms)));
        }
        Chain::checked(self)
    }
}

/// A validated chain configuration together with its derived constants.
///
/// Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    config: ChainConfig,
    control_wavevector: f64,
    subradiant: bool,
}

impl Chain {
    fn checked(config: ChainConfig) -> Result<Self> {
        if !(config.lattice_const > 0.0) || !config.lattice_const.is_finite() {
            return Err(Error::config(
                "lattice_const",
                format!("must be positive and finite, got {}", config.lattice_const),
            ));
        }
        for (field, value) in [
            ("delta_shift", config.delta_shift),
            ("mixing_angle", config.mixing_angle),
            ("control_wavevector", config.control_wavevector),
            ("detuning", config.detuning),
        ] {
            if !value.is_finite() {
                return Err(Error::config(field, format!("must be finite, got {value}")));
            }
        }
        Ok(Chain {
            control_wavevector: config.control_wavevector / config.lattice_const,
            subradiant: config.lattice_const <= SUBRADIANT_LIMIT,
            config,
        })
    }

    /// A lone emitter with the drive of `config`, used as the single-atom
    /// reference. Chains proper need at least two atoms.
    pub fn single_atom(config: ChainConfig) -> Result<Self> {
        Chain::checked(ChainConfig { n_atoms: 1, ..config })
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn n_atoms(&self) -> usize {
        self.config.n_atoms
    }

    /// Dimension of the single-excitation space, 2𝒩.
    pub fn dim(&self) -> usize {
        2 * self.config.n_atoms
    }

    pub fn lattice_const(&self) -> f64 {
        self.config.lattice_const
    }

    pub fn k0(&self) -> f64 {
        K0
    }

    /// k_c in units of 1/λ₀.
    pub fn control_wavevector(&self) -> f64 {
        self.control_wavevector
    }

    pub fn delta_shift(&self) -> f64 {
        self.config.delta_shift
    }

    pub fn mixing_angle(&self) -> f64 {
        self.config.mixing_angle
    }

    pub fn detuning(&self) -> f64 {
        self.config.detuning
    }

    pub fn is_subradiant(&self) -> bool {
        self.subradiant
    }

    pub fn position(&self, site: usize) -> f64 {
        site as f64 * self.config.lattice_const
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_atoms()).map(|n| self.position(n)).collect()
    }

    pub fn length(&self) -> f64 {
        self.position(self.n_atoms() - 1)
    }

    /// Same chain with a different mixing angle.
    pub fn with_mixing_angle(&self, mixing_angle: f64) -> Result<Chain> {
        Chain::checked(ChainConfig { mixing_angle, ..self.config })
    }
}

/// Circular polarization of the excited state, s = ±.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    Plus,
    Minus,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::Plus, Polarization::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Polarization::Plus => 1.0,
            Polarization::Minus => -1.0,
        }
    }

    /// Spherical unit vector d̂_± = ∓(x̂ ± iŷ)/√2.
    pub fn dipole(self) -> [C64; 3] {
        let h = FRAC_1_SQRT_2;
        match self {
            Polarization::Plus => [C64::new(-h, 0.0), C64::new(0.0, -h), C64::new(0.0, 0.0)],
            Polarization::Minus => [C64::new(h, 0.0), C64::new(0.0, -h), C64::new(0.0, 0.0)],
        }
    }
}

/// One basis state |e_sⁿ⟩ of the single-excitation space.
///
/// Flattening is site-major with plus before minus: index = 2n + (s == −).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ExcitationIndex {
    pub site: usize,
    pub pol: Polarization,
}

impl ExcitationIndex {
    pub fn new(site: usize, pol: Polarization) -> Self {
        ExcitationIndex { site, pol }
    }

    pub fn flatten(self) -> usize {
        2 * self.site + usize::from(self.pol == Polarization::Minus)
    }

    pub fn unflatten(index: usize) -> Self {
        let pol = if index % 2 == 0 { Polarization::Plus } else { Polarization::Minus };
        ExcitationIndex { site: index / 2, pol }
    }
}
