//! Driven single-atom blocks, on-site disorder and the collective
//! non-Hermitian Hamiltonian H̃ = H_S + Δ − (i/2)γ + V on the
//! single-excitation space.

use faer::{Mat, MatRef};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::chain::{Chain, Polarization};
use crate::error::{Error, Result};
use crate::green::CouplingMatrices;
use crate::linalg::{fingerprint, CMat};

/// Raman-dressed Hamiltonian of atom `site` in the {|e₊ⁿ⟩, |e₋ⁿ⟩} basis,
/// relative to the all-ground energy.
pub fn single_atom_block(chain: &Chain, site: usize) -> [[C64; 2]; 2] {
    let delta = chain.delta_shift();
    let theta = chain.mixing_angle();
    let on_site = |s: Polarization| (chain.detuning() + delta) - 0.25 * delta * (1.0 - s.sign() * theta.cos());
    let raman = 0.25 * delta * theta.sin();
    let phase = -2.0 * chain.control_wavevector() * chain.position(site);
    let coupling = C64::from_polar(raman, phase);
    [
        [C64::new(on_site(Polarization::Plus), 0.0), coupling],
        [coupling.conj(), C64::new(on_site(Polarization::Minus), 0.0)],
    ]
}

/// Block-diagonal drive Hamiltonian H_S = Σ_n H⁽ⁿ⁾.
pub fn drive_hamiltonian(chain: &Chain) -> CMat {
    let mut h = Mat::<C64>::zeros(chain.dim(), chain.dim());
    for n in 0..chain.n_atoms() {
        let b = single_atom_block(chain, n);
        for (a, row) in b.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                h[(2 * n + a, 2 * n + c)] = *v;
            }
        }
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisorderShape {
    /// Uniform on [−√(3W), √(3W)].
    #[default]
    Uniform,
    Gaussian,
}

impl std::str::FromStr for DisorderShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(DisorderShape::Uniform),
            "gaussian" => Ok(DisorderShape::Gaussian),
            other => Err(Error::Domain(format!("unknown disorder shape `{other}`"))),
        }
    }
}

impl std::fmt::Display for DisorderShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DisorderShape::Uniform => "uniform",
            DisorderShape::Gaussian => "gaussian",
        })
    }
}

/// One draw of the on-site energies ℰ_n (zero mean, variance W).
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderRealization {
    pub seed: u64,
    pub variance: f64,
    pub shape: DisorderShape,
    pub energies: Vec<f64>,
}

impl DisorderRealization {
    pub fn none(n_atoms: usize) -> Self {
        DisorderRealization {
            seed: 0,
            variance: 0.0,
            shape: DisorderShape::Uniform,
            energies: vec![0.0; n_atoms],
        }
    }
}

pub fn disorder_sample(seed: u64, variance: f64, n_atoms: usize, shape: DisorderShape) -> Result<DisorderRealization> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::Domain(format!("disorder variance must be non-negative, got {variance}")));
    }
    let energies = if variance == 0.0 {
        vec![0.0; n_atoms]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match shape {
            DisorderShape::Uniform => {
                let half_width = (3.0 * variance).sqrt();
                (0..n_atoms).map(|_| half_width * (2.0 * rng.random::<f64>() - 1.0)).collect()
            }
            DisorderShape::Gaussian => {
                let normal = Normal::new(0.0, variance.sqrt()).expect("finite positive width");
                (0..n_atoms).map(|_| normal.sample(&mut rng)).collect()
            }
        }
    };
    Ok(DisorderRealization { seed, variance, shape, energies })
}

/// Dense H̃ on the 2𝒩-dimensional single-excitation space.
#[derive(Debug, Clone)]
pub struct NonHermitianHamiltonian {
    matrix: CMat,
    fingerprint: u64,
}

impl NonHermitianHamiltonian {
    pub fn from_matrix(matrix: CMat) -> Self {
        let fingerprint = fingerprint(matrix.as_ref());
        NonHermitianHamiltonian { matrix, fingerprint }
    }

    pub fn matrix(&self) -> MatRef<'_, C64> {
        self.matrix.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

pub fn assemble(
    chain: &Chain,
    couplings: &CouplingMatrices,
    disorder: Option<&DisorderRealization>,
) -> Result<NonHermitianHamiltonian> {
    let dim = chain.dim();
    if couplings.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: couplings.dim() });
    }
    if let Some(d) = disorder {
        if d.energies.len() != chain.n_atoms() {
            return Err(Error::DimensionMismatch { expected: chain.n_atoms(), got: d.energies.len() });
        }
    }
    let mut h = drive_hamiltonian(chain);
    let half_i = C64::new(0.0, 0.5);
    for j in 0..dim {
        for i in 0..dim {
            h[(i, j)] += couplings.shift[(i, j)] - half_i * couplings.decay[(i, j)];
        }
    }
    if let Some(d) = disorder {
        for (n, e) in d.energies.iter().enumerate() {
            h[(2 * n, 2 * n)] += e;
            h[(2 * n + 1, 2 * n + 1)] += e;
        }
    }
    Ok(NonHermitianHamiltonian::from_matrix(h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ChainConfig;
    use crate::green::build_couplings;
    use std::f64::consts::PI;

    #[test]
    fn no_raman_mixing_without_angle() {
        let chain = ChainConfig::standard(4, 0.0).validate().unwrap();
        let b = single_atom_block(&chain, 2);
        assert_eq!(b[0][1], C64::new(0.0, 0.0));
        assert!(((b[0][0] - b[1][1]).re - chain.delta_shift() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn raman_coupling_magnitude_and_phase() {
        let chain = ChainConfig::standard(10, PI / 4.0).validate().unwrap();
        for n in 0..10 {
            let b = single_atom_block(&chain, n);
            assert!((b[0][1].norm() - 10.0 / 12.0 * (PI / 4.0).sin()).abs() < 1e-14);
            let expected = C64::from_polar(1.0, -2.0 * PI * n as f64 / 5.0);
            assert!((b[0][1] / b[0][1].norm() - expected).norm() < 1e-12);
            assert_eq!(b[1][0], b[0][1].conj());
            assert_eq!(b[0][0].im, 0.0);
        }
    }

    #[test]
    fn zero_variance_gives_exact_zeros() {
        let d = disorder_sample(3, 0.0, 50, DisorderShape::Uniform).unwrap();
        assert!(d.energies.iter().all(|&e| e == 0.0));
        assert!(disorder_sample(3, -1.0, 5, DisorderShape::Uniform).is_err());
    }

    #[test]
    fn disorder_is_reproducible() {
        for shape in [DisorderShape::Uniform, DisorderShape::Gaussian] {
            let a = disorder_sample(99, 0.4, 100, shape).unwrap();
            let b = disorder_sample(99, 0.4, 100, shape).unwrap();
            assert!(a.energies.iter().zip(&b.energies).all(|(x, y)| x.to_bits() == y.to_bits()));
            let c = disorder_sample(100, 0.4, 100, shape).unwrap();
            assert_ne!(a.energies, c.energies);
        }
    }

    #[test]
    fn disorder_statistics() {
        // Sample variance of 10⁴ draws: relative standard error is
        // √((μ₄/σ⁴ − 1)/n) = √(0.8/n) ≈ 0.9% (uniform), √(2/n) ≈ 1.4% (Gaussian);
        // 5% is > 3.5σ in both cases.
        for shape in [DisorderShape::Uniform, DisorderShape::Gaussian] {
            let d = disorder_sample(1, 1.0, 10_000, shape).unwrap();
            let n = d.energies.len() as f64;
            let mean = d.energies.iter().sum::<f64>() / n;
            let var = d.energies.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
            assert!(mean.abs() < 0.04, "{shape}: mean {mean}");
            assert!((var - 1.0).abs() < 0.05, "{shape}: var {var}");
        }
    }

    #[test]
    fn polarizations_decouple_without_mixing() {
        let chain = ChainConfig::standard(6, 0.0).validate().unwrap();
        let h = assemble(&chain, &build_couplings(&chain), None).unwrap();
        for i in (0..12).step_by(2) {
            for j in (1..12).step_by(2) {
                assert_eq!(h.matrix()[(i, j)], C64::new(0.0, 0.0));
                assert_eq!(h.matrix()[(j, i)], C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn anti_hermitian_part_is_minus_half_decay() {
        for theta in [0.0, PI / 4.0, 1.1] {
            let chain = ChainConfig::standard(9, theta).validate().unwrap();
            let c = build_couplings(&chain);
            let d = disorder_sample(5, 0.7, 9, DisorderShape::Uniform).unwrap();
            let h = assemble(&chain, &c, Some(&d)).unwrap();
            let m = h.matrix();
            for i in 0..18 {
                for j in 0..18 {
                    let anti = m[(i, j)] - m[(j, i)].conj();
                    assert!((anti + C64::i() * c.decay[(i, j)]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let chain = ChainConfig::standard(4, 0.0).validate().unwrap();
        let other = ChainConfig::standard(5, 0.0).validate().unwrap();
        let c = build_couplings(&other);
        assert!(matches!(assemble(&chain, &c, None), Err(Error::DimensionMismatch { .. })));
        let d = DisorderRealization::none(3);
        assert!(assemble(&chain, &build_couplings(&chain), Some(&d)).is_err());
    }
}
