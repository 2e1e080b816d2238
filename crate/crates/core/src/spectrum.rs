//! Normal modes of the decay matrix, the complex spectrum of H̃ and the
//! infinite-chain Bloch bands with their transparency window.

use faer::{Mat, MatRef, Side};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::chain::{Chain, Polarization};
use crate::error::{Error, Result};
use crate::green::CouplingMatrices;
use crate::hamiltonian::NonHermitianHamiltonian;
use crate::linalg::{max_abs, spectral_synthesis, CMat};
use crate::polylog::bloch_self_energy;

/// Eigenvalues of γ below this (relative to its largest) mean a broken
/// coupling matrix rather than round-off.
const PSD_TOLERANCE: f64 = 1e-9;

/// Imaginary-part threshold separating guided from radiating Bloch modes.
pub const GUIDED_TOLERANCE: f64 = 1e-6;

/// Eigen-decomposition γ = Σ_ν γ_ν c^{(ν)} c^{(ν)†}.
#[derive(Debug, Clone)]
pub struct NormalModes {
    /// Ascending, clamped to be non-negative.
    pub rates: Vec<f64>,
    /// Orthonormal columns c^{(ν)}.
    pub vectors: CMat,
}

impl NormalModes {
    pub fn dim(&self) -> usize {
        self.rates.len()
    }

    /// Σ_ν γ_ν c^{(ν)} c^{(ν)†}.
    pub fn reconstruct(&self) -> CMat {
        spectral_synthesis(self.vectors.as_ref(), &self.rates)
    }

    /// γ^{1/2} = Σ_ν √γ_ν c^{(ν)} c^{(ν)†}.
    pub fn sqrt_decay(&self) -> CMat {
        let roots: Vec<f64> = self.rates.iter().map(|r| r.sqrt()).collect();
        spectral_synthesis(self.vectors.as_ref(), &roots)
    }

    /// Row of the jump operator of mode ν, √γ_ν c^{(ν)†}.
    pub fn jump_row(&self, nu: usize) -> Vec<C64> {
        let s = self.rates[nu].sqrt();
        (0..self.dim()).map(|i| self.vectors[(i, nu)].conj() * s).collect()
    }

    /// ‖Σ_ν γ_ν c c† − γ‖_max.
    pub fn reconstruction_defect(&self, decay: MatRef<'_, C64>) -> f64 {
        let r = self.reconstruct();
        max_abs((&r - decay).as_ref())
    }
}

pub fn decay_modes(couplings: &CouplingMatrices) -> Result<NormalModes> {
    let eig = couplings
        .decay
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::EigenSolver { fingerprint: crate::linalg::fingerprint(couplings.decay.as_ref()) })?;
    let raw: Vec<f64> = eig.S().column_vector().iter().map(|x| x.re).collect();
    let largest = raw.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let smallest = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    if smallest < -PSD_TOLERANCE * largest.max(1.0) {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: smallest });
    }
    Ok(NormalModes {
        rates: raw.into_iter().map(|x| x.max(0.0)).collect(),
        vectors: eig.U().to_owned(),
    })
}

/// Eigenvalues ω − iΓ/2 of H̃ with right eigenvectors, sorted by real part.
#[derive(Debug, Clone)]
pub struct ComplexSpectrum {
    pub values: Vec<C64>,
    /// Column j is the right eigenvector of `values[j]`.
    pub vectors: CMat,
}

impl ComplexSpectrum {
    pub fn widths(&self) -> Vec<f64> {
        self.values.iter().map(|v| -2.0 * v.im).collect()
    }
}

/// Unsorted eigen-decomposition of H̃, shared with the propagator.
pub(crate) fn raw_eigen(h: MatRef<'_, C64>) -> Result<(Vec<C64>, CMat)> {
    let eig = h
        .eigen()
        .map_err(|_| Error::EigenSolver { fingerprint: crate::linalg::fingerprint(h) })?;
    let values: Vec<C64> = eig.S().column_vector().iter().copied().collect();
    if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::EigenSolver { fingerprint: crate::linalg::fingerprint(h) });
    }
    Ok((values, eig.U().to_owned()))
}

pub fn complex_spectrum(h: &NonHermitianHamiltonian) -> Result<ComplexSpectrum> {
    let (values, vectors) = raw_eigen(h.matrix())?;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].re.total_cmp(&values[b].re).then(values[a].im.total_cmp(&values[b].im)));
    let sorted = order.iter().map(|&j| values[j]).collect();
    let vectors = Mat::from_fn(vectors.nrows(), order.len(), |i, j| vectors[(i, order[j])]);
    Ok(ComplexSpectrum { values: sorted, vectors })
}

/// Two-branch Bloch dispersion of the infinite chain.
#[derive(Debug, Clone)]
pub struct BlochBands {
    pub k_grid: Vec<f64>,
    pub upper: Vec<C64>,
    pub lower: Vec<C64>,
    /// |e₊⟩ weight of the normalized right eigenvector, upper branch.
    pub polarization_weight_upper: Vec<f64>,
    pub polarization_weight_lower: Vec<f64>,
}

impl BlochBands {
    /// Smallest and largest real energy over both branches.
    pub fn real_range(&self) -> (f64, f64) {
        self.upper
            .iter()
            .chain(&self.lower)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.re), hi.max(v.re)))
    }

    pub fn branch(&self, upper: bool) -> &[C64] {
        if upper {
            &self.upper
        } else {
            &self.lower
        }
    }
}

/// `points` uniform quasimomenta at the cell midpoints of (−π/a, π/a].
///
/// The midpoint grid is symmetric under k → −k and does not land on the
/// light lines |k| = k₀, where the lattice sums diverge, for the usual
/// lattice constants λ₀/m.
pub fn default_k_grid(chain: &Chain, points: usize) -> Vec<f64> {
    let a = chain.lattice_const();
    (0..points).map(|j| -PI / a + 2.0 * PI * (j as f64 + 0.5) / (points as f64 * a)).collect()
}

pub const DEFAULT_K_POINTS: usize = 1024;

/// Fold k into (−π/a, π/a].
pub(crate) fn fold(k: f64, a: f64) -> f64 {
    let period = 2.0 * PI / a;
    let mut f = k - period * (k / period).round();
    if f <= -PI / a {
        f += period;
    }
    f
}

/// Gauge-transformed 2×2 Bloch Hamiltonian at quasimomentum k; the
/// polarization-s component carries physical momentum k − s·k_c.
pub fn bloch_matrix(chain: &Chain, k: f64) -> Result<[[C64; 2]; 2]> {
    let kc = chain.control_wavevector();
    let a = chain.lattice_const();
    let mut m = [[C64::new(0.0, 0.0); 2]; 2];
    for (idx, s) in Polarization::BOTH.into_iter().enumerate() {
        let sigma = bloch_self_energy(k - s.sign() * kc, chain.k0(), a)?;
        m[idx][idx] = on_site(chain, s) + sigma - C64::new(0.0, 0.5);
    }
    let h = C64::new(0.25 * chain.delta_shift() * chain.mixing_angle().sin(), 0.0);
    m[0][1] = h;
    m[1][0] = h;
    Ok(m)
}

/// Eigenpairs of a 2×2 matrix, larger real part first, with the |e₊⟩
/// weight of each normalized right eigenvector.
fn eigen2(m: &[[C64; 2]; 2]) -> [(C64, f64); 2] {
    let (a, b) = (m[0][0], m[1][1]);
    let mean = 0.5 * (a + b);
    let root = (0.25 * (a - b) * (a - b) + m[0][1] * m[1][0]).sqrt();
    let pair = |lambda: C64| {
        let v1 = [m[0][1], lambda - a];
        let v2 = [lambda - b, m[1][0]];
        let n1 = v1[0].norm_sqr() + v1[1].norm_sqr();
        let n2 = v2[0].norm_sqr() + v2[1].norm_sqr();
        let (v, n) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
        (lambda, v[0].norm_sqr() / n)
    };
    let (p, q) = (pair(mean + root), pair(mean - root));
    if p.0.re >= q.0.re {
        [p, q]
    } else {
        [q, p]
    }
}

/// Branches at one k. Without Raman mixing the two polarizations decouple,
/// need no gauge, and each pure band is reported against its own physical
/// quasimomentum; the branch with the higher on-site energy is `upper`.
fn branches_at(chain: &Chain, k: f64, decoupled: bool) -> Result<[(C64, f64); 2]> {
    if !decoupled {
        return Ok(eigen2(&bloch_matrix(chain, k)?));
    }
    let sigma = bloch_self_energy(k, chain.k0(), chain.lattice_const())? - C64::new(0.0, 0.5);
    let plus = (on_site(chain, Polarization::Plus) + sigma, 1.0);
    let minus = (on_site(chain, Polarization::Minus) + sigma, 0.0);
    Ok(if plus.0.re >= minus.0.re { [plus, minus] } else { [minus, plus] })
}

fn on_site(chain: &Chain, s: Polarization) -> f64 {
    let delta = chain.delta_shift();
    (chain.detuning() + delta) - 0.25 * delta * (1.0 - s.sign() * chain.mixing_angle().cos())
}

/// Whether the Raman coupling vanishes and the polarizations decouple.
pub fn is_decoupled(chain: &Chain) -> bool {
    let raman = 0.25 * chain.delta_shift() * chain.mixing_angle().sin();
    raman.abs() <= 1e-14 * chain.delta_shift().abs().max(1.0)
}

pub fn bloch_bands(chain: &Chain, k_grid: &[f64]) -> Result<BlochBands> {
    let a = chain.lattice_const();
    let folded: Vec<f64> = k_grid
        .iter()
        .map(|&k| {
            let f = fold(k, a);
            if f != k {
                log::warn!("quasimomentum {k} outside the first Brillouin zone, folded to {f}");
            }
            f
        })
        .collect();
    let decoupled = is_decoupled(chain);
    let rows: Vec<[(C64, f64); 2]> =
        folded.par_iter().map(|&k| branches_at(chain, k, decoupled)).collect::<Result<_>>()?;
    Ok(BlochBands {
        k_grid: folded,
        upper: rows.iter().map(|r| r[0].0).collect(),
        lower: rows.iter().map(|r| r[1].0).collect(),
        polarization_weight_upper: rows.iter().map(|r| r[0].1).collect(),
        polarization_weight_lower: rows.iter().map(|r| r[1].1).collect(),
    })
}

/// Energy span of guided, lossless modes.
///
/// For each branch the span runs between the lowest and highest stationary
/// point (band extremum) of Re ω(k) among guided points, with the k grid
/// treated as periodic. The logarithmic light-line tails are therefore
/// excluded. The window width is that of the wider branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransparencyWindow {
    pub upper: (f64, f64),
    pub lower: (f64, f64),
}

impl TransparencyWindow {
    pub fn width(&self) -> f64 {
        (self.upper.1 - self.upper.0).max(self.lower.1 - self.lower.0)
    }

    /// Energy interval of the wider branch.
    pub fn interval(&self) -> (f64, f64) {
        if self.upper.1 - self.upper.0 >= self.lower.1 - self.lower.0 {
            self.upper
        } else {
            self.lower
        }
    }
}

fn branch_span(values: &[C64]) -> Option<(f64, f64)> {
    let m = values.len();
    let guided = |i: usize| values[i].im.abs() < GUIDED_TOLERANCE;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let (prev, next) = ((i + m - 1) % m, (i + 1) % m);
        if !(guided(i) && guided(prev) && guided(next)) {
            continue;
        }
        let r = values[i].re;
        if (r - values[prev].re) * (values[next].re - r) <= 0.0 {
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

pub fn transparency_window(bands: &BlochBands) -> Result<TransparencyWindow> {
    let span = |upper: bool| {
        branch_span(bands.branch(upper))
            .ok_or_else(|| Error::Domain("no guided band extremum on the k grid".to_string()))
    };
    Ok(TransparencyWindow { upper: span(true)?, lower: span(false)? })
}

/// Transparency window on the default grid.
pub fn chain_transparency_window(chain: &Chain) -> Result<TransparencyWindow> {
    let bands = bloch_bands(chain, &default_k_grid(chain, DEFAULT_K_POINTS))?;
    transparency_window(&bands)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ChainConfig;
    use crate::green::build_couplings;
    use crate::hamiltonian::assemble;

    fn chain(n: usize, theta: f64) -> Chain {
        ChainConfig::standard(n, theta).validate().unwrap()
    }

    #[test]
    fn single_atom_rates() {
        let c = Chain::single_atom(ChainConfig::standard(2, 0.0)).unwrap();
        let modes = decay_modes(&build_couplings(&c)).unwrap();
        assert_eq!(modes.rates.len(), 2);
        assert!(modes.rates.iter().all(|r| (r - 1.0).abs() < 1e-14));
    }

    #[test]
    fn two_atom_rates_pair_up() {
        let c = chain(2, 0.0);
        let cp = build_couplings(&c);
        let modes = decay_modes(&cp).unwrap();
        let g = cp.decay[(0, 2)].re;
        let expected = [1.0 - g.abs(), 1.0 - g.abs(), 1.0 + g.abs(), 1.0 + g.abs()];
        for (r, e) in modes.rates.iter().zip(expected) {
            assert!((r - e).abs() < 1e-12);
        }
        assert!(modes.reconstruction_defect(cp.decay.as_ref()) < 1e-12);
    }

    #[test]
    fn non_psd_is_rejected() {
        let c = chain(3, 0.0);
        let mut cp = build_couplings(&c);
        cp.decay[(0, 0)] = C64::new(-1.0, 0.0);
        assert!(matches!(decay_modes(&cp), Err(Error::NotPositiveSemidefinite { .. })));
    }

    #[test]
    fn spectrum_trace_and_sorting() {
        let c = chain(30, PI / 4.0);
        let h = assemble(&c, &build_couplings(&c), None).unwrap();
        let s = complex_spectrum(&h).unwrap();
        let sum_im: f64 = s.values.iter().map(|v| v.im).sum();
        assert!((sum_im + 30.0).abs() < 1e-8 * 30.0);
        assert!(s.values.iter().all(|v| v.im <= 1e-10));
        assert!(s.values.windows(2).all(|w| w[0].re <= w[1].re));
        // Right eigenvectors.
        for j in [0, 17, 59] {
            let v: Vec<C64> = (0..60).map(|i| s.vectors[(i, j)]).collect();
            let hv = crate::linalg::mat_vec(h.matrix(), &v);
            let err: f64 = hv.iter().zip(&v).map(|(a, b)| (a - s.values[j] * b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-9);
        }
    }

    #[test]
    fn fold_into_zone() {
        let a = 0.125;
        assert!((fold(PI / a + 0.1, a) - (-PI / a + 0.1)).abs() < 1e-12);
        assert_eq!(fold(PI / a, a), PI / a);
        assert!((fold(-PI / a, a) - PI / a).abs() < 1e-12);
    }

    #[test]
    fn reciprocal_bands_are_even() {
        let c = chain(2, 0.0);
        let ks = default_k_grid(&c, 64);
        let neg: Vec<f64> = ks.iter().map(|k| -k).collect();
        let b = bloch_bands(&c, &ks).unwrap();
        let bn = bloch_bands(&c, &neg).unwrap();
        for i in 0..ks.len() {
            assert!((b.upper[i] - bn.upper[i]).norm() < 1e-10);
            assert!((b.lower[i] - bn.lower[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn directional_bands_are_asymmetric() {
        let c = chain(2, PI / 4.0);
        let b = bloch_bands(&c, &[3.0, -3.0]).unwrap();
        assert!((b.upper[0] - b.upper[1]).norm() > 1e-2);
    }

    #[test]
    fn guided_modes_are_lossless() {
        for theta in [0.0, PI / 4.0] {
            let c = chain(2, theta);
            let ks = default_k_grid(&c, 256);
            let b = bloch_bands(&c, &ks).unwrap();
            let kc = if is_decoupled(&c) { 0.0 } else { c.control_wavevector() };
            let k0 = c.k0();
            for (i, &k) in ks.iter().enumerate() {
                let far = |q: f64| (fold(q, c.lattice_const()).abs() - k0).abs() > 1e-6;
                if fold(k - kc, c.lattice_const()).abs() > k0
                    && fold(k + kc, c.lattice_const()).abs() > k0
                    && far(k - kc)
                    && far(k + kc)
                {
                    assert!(b.upper[i].im.abs() < GUIDED_TOLERANCE, "k={k}");
                    assert!(b.lower[i].im.abs() < GUIDED_TOLERANCE, "k={k}");
                }
            }
        }
    }

    /// Ten-band supercell of the raw (un-gauged) Hamiltonian with period 5a.
    fn supercell(c: &Chain, big_k: f64) -> Vec<C64> {
        let a = c.lattice_const();
        let cells = 5usize;
        let mut h = Mat::<C64>::zeros(2 * cells, 2 * cells);
        for i in 0..cells {
            let block = crate::hamiltonian::single_atom_block(c, i);
            for (s, row) in block.iter().enumerate() {
                for (t, v) in row.iter().enumerate() {
                    h[(2 * i + s, 2 * i + t)] += *v;
                }
            }
            for j in 0..cells {
                let r = j as i64 - i as i64;
                // Σ_{d ≡ r mod 5} g(d) e^{iKda} by a roots-of-unity filter.
                let mut acc = C64::new(0.0, 0.0);
                for m in 0..cells {
                    let q = big_k + 2.0 * PI * m as f64 / (cells as f64 * a);
                    let sigma = bloch_self_energy(q, c.k0(), a).unwrap() - C64::new(0.0, 0.5);
                    acc += C64::from_polar(1.0, -2.0 * PI * (m as i64 * r) as f64 / cells as f64) * sigma;
                }
                acc = acc / cells as f64 * C64::from_polar(1.0, -big_k * r as f64 * a);
                for s in 0..2 {
                    h[(2 * i + s, 2 * j + s)] += acc;
                }
            }
        }
        let (mut vals, _) = raw_eigen(h.as_ref()).unwrap();
        vals.sort_by(|x, y| x.re.total_cmp(&y.re));
        vals
    }

    #[test]
    fn supercell_matches_gauge_bands() {
        for theta in [0.0, PI / 4.0, 1.2] {
            let c = chain(2, theta);
            let a = c.lattice_const();
            let kc = c.control_wavevector();
            for big_k in [0.37, 1.9, -4.1] {
                let ks: Vec<f64> = (0..5).map(|m| big_k + kc + 2.0 * PI * m as f64 / (5.0 * a)).collect();
                let mut expected: Vec<C64> =
                    ks.iter().flat_map(|&k| eigen2(&bloch_matrix(&c, k).unwrap()).map(|p| p.0)).collect();
                expected.sort_by(|x, y| x.re.total_cmp(&y.re));
                let got = supercell(&c, big_k);
                for (x, y) in got.iter().zip(&expected) {
                    assert!((x - y).norm() < 1e-9, "theta={theta} K={big_k}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn window_of_standard_set() {
        let w = chain_transparency_window(&chain(2, PI / 4.0)).unwrap();
        assert!((w.width() - 2.449).abs() < 5e-3, "{w:?}");
        let w0 = chain_transparency_window(&chain(2, 0.0)).unwrap();
        assert!((w0.width() - 2.832).abs() < 5e-3, "{w0:?}");
    }
}
