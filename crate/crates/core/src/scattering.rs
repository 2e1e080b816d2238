//! Scattering matrix S(E) = 𝟙 − i·t(E) in the atomic channel basis,
//! end-to-end transmittance spectra and reciprocity diagnostics.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::chain::Chain;
use crate::error::{Error, Result};
use crate::farfield::{detector_decay_matrix, DetectorGrid};
use crate::green::CouplingMatrices;
use crate::hamiltonian::{drive_hamiltonian, NonHermitianHamiltonian};
use crate::linalg::{frobenius, identity_defect, max_abs, CMat};
use crate::spectrum::NormalModes;

/// Default boxcar width for smoothed spectra, in units of Γ₀.
pub const DEFAULT_SMOOTHING: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct SMatrixResult {
    pub energy: f64,
    pub matrix: CMat,
    /// ‖S†S − 𝟙‖_max
    pub unitarity_defect: f64,
}

/// H̃ together with γ^{1/2}, shared read-only across energies.
#[derive(Debug, Clone)]
pub struct Scatterer<'a> {
    h: &'a NonHermitianHamiltonian,
    sqrt_decay: CMat,
}

impl<'a> Scatterer<'a> {
    pub fn new(h: &'a NonHermitianHamiltonian, modes: &NormalModes) -> Result<Self> {
        if modes.dim() != h.dim() {
            return Err(Error::DimensionMismatch { expected: h.dim(), got: modes.dim() });
        }
        Ok(Scatterer { h, sqrt_decay: modes.sqrt_decay() })
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// t(E) = γ^{1/2}(E − H̃)⁻¹γ^{1/2} from one LU of E − H̃ and 2𝒩
    /// right-hand sides.
    pub fn t_matrix(&self, energy: f64) -> Result<CMat> {
        let n = self.dim();
        let h = self.h.matrix();
        let shifted = Mat::from_fn(n, n, |i, j| if i == j { energy - h[(i, j)] } else { -h[(i, j)] });
        let x = shifted.partial_piv_lu().solve(&self.sqrt_decay);
        let singular = (0..n).any(|j| (0..n).any(|i| !x[(i, j)].re.is_finite() || !x[(i, j)].im.is_finite()));
        if singular {
            return Err(Error::Singular { energy, distance: 0.0 });
        }
        Ok(&self.sqrt_decay * &x)
    }

    pub fn s_matrix(&self, energy: f64) -> Result<SMatrixResult> {
        let t = self.t_matrix(energy)?;
        let n = self.dim();
        let minus_i = C64::new(0.0, -1.0);
        let s = Mat::from_fn(n, n, |i, j| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) } + minus_i * t[(i, j)]);
        let unitarity_defect = identity_defect((s.adjoint() * &s).as_ref());
        Ok(SMatrixResult { energy, matrix: s, unitarity_defect })
    }
}

pub fn t_matrix(h: &NonHermitianHamiltonian, modes: &NormalModes, energy: f64) -> Result<CMat> {
    Scatterer::new(h, modes)?.t_matrix(energy)
}

/// Σ_{s,s'} |S_{(to,s),(from,s')}|².
pub fn transmittance(s: &SMatrixResult, from_site: usize, to_site: usize) -> f64 {
    let m = s.matrix.as_ref();
    let mut acc = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            acc += m[(2 * to_site + a, 2 * from_site + b)].norm_sqr();
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRow {
    pub energy: f64,
    /// from → to
    pub forward: f64,
    /// to → from
    pub backward: f64,
    pub forward_smoothed: f64,
    pub backward_smoothed: f64,
    pub unitarity_defect: f64,
}

/// Centred moving average over `points` grid points (truncated at the
/// edges); `points` ≤ 1 returns the data unchanged.
pub fn boxcar(values: &[f64], points: usize) -> Vec<f64> {
    if points <= 1 {
        return values.to_vec();
    }
    let half = points / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(values.len() - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Number of grid points spanned by an energy window on a uniform grid,
/// rounded to the nearest odd count.
pub fn window_points(energies: &[f64], width: f64) -> usize {
    if energies.len() < 2 {
        return 1;
    }
    let step = (energies[energies.len() - 1] - energies[0]) / (energies.len() - 1) as f64;
    let raw = (width / step).round().max(1.0) as usize;
    if raw % 2 == 0 {
        raw + 1
    } else {
        raw
    }
}

/// Transmittance in both directions between `from_site` and `to_site` on a
/// sorted energy grid, with an optional boxcar of the given energy width.
pub fn spectrum_scan(
    scatterer: &Scatterer<'_>,
    energies: &[f64],
    from_site: usize,
    to_site: usize,
    smoothing_width: Option<f64>,
) -> Result<Vec<SpectrumRow>> {
    let sites = scatterer.dim() / 2;
    if from_site >= sites || to_site >= sites {
        return Err(Error::Domain(format!("site indices must be below {sites}")));
    }
    if energies.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Domain("energy grid must be sorted".into()));
    }
    let raw: Vec<(f64, f64, f64)> = energies
        .par_iter()
        .map(|&e| {
            let s = scatterer.s_matrix(e)?;
            Ok((transmittance(&s, from_site, to_site), transmittance(&s, to_site, from_site), s.unitarity_defect))
        })
        .collect::<Result<_>>()?;
    let forward: Vec<f64> = raw.iter().map(|r| r.0).collect();
    let backward: Vec<f64> = raw.iter().map(|r| r.1).collect();
    let points = smoothing_width.map_or(1, |w| window_points(energies, w));
    let fs = boxcar(&forward, points);
    let bs = boxcar(&backward, points);
    Ok((0..energies.len())
        .map(|i| SpectrumRow {
            energy: energies[i],
            forward: forward[i],
            backward: backward[i],
            forward_smoothed: fs[i],
            backward_smoothed: bs[i],
            unitarity_defect: raw[i].2,
        })
        .collect())
}

/// ‖[H_S, γ]‖_F / (‖H_S‖_F·‖γ‖_F); nonzero iff transport is nonreciprocal.
pub fn reciprocity_defect(chain: &Chain, couplings: &CouplingMatrices) -> Result<f64> {
    if couplings.dim() != chain.dim() {
        return Err(Error::DimensionMismatch { expected: chain.dim(), got: couplings.dim() });
    }
    let hs = drive_hamiltonian(chain);
    let g = &couplings.decay;
    let comm = &hs * g - g * &hs;
    let denom = frobenius(hs.as_ref()) * frobenius(g.as_ref());
    Ok(if denom == 0.0 { 0.0 } else { frobenius(comm.as_ref()) / denom })
}

/// Max-norm defects of γ rebuilt from normal-mode and from detector jump
/// operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepresentationDefects {
    pub normal_modes: f64,
    pub detectors: f64,
}

pub fn representation_equivalence_check(
    chain: &Chain,
    couplings: &CouplingMatrices,
    modes: &NormalModes,
    grid: &DetectorGrid,
) -> RepresentationDefects {
    let decay: MatRef<'_, C64> = couplings.decay.as_ref();
    let detectors = detector_decay_matrix(chain, grid);
    RepresentationDefects {
        normal_modes: modes.reconstruction_defect(decay),
        detectors: max_abs((&detectors - decay).as_ref()),
    }
}
