//! Time evolution of single-excitation states under H̃, spin-wave
//! preparation and the population and quasimomentum observables.

use faer::Mat;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::chain::{Chain, Polarization};
use crate::error::{Error, Result};
use crate::hamiltonian::NonHermitianHamiltonian;
use crate::linalg::{expm, inverse, mat_vec, norm_one, norm_sqr, CMat};
use crate::spectrum::{bloch_bands, fold, is_decoupled, raw_eigen, GUIDED_TOLERANCE};

/// Eigenvector condition numbers above this switch evolution to the
/// dense matrix exponential.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationState {
    pub ground_amp: C64,
    pub amps: Vec<C64>,
    pub time: f64,
}

impl ExcitationState {
    /// Σ|c_{ns}|²
    pub fn excited_population(&self) -> f64 {
        norm_sqr(&self.amps)
    }

    pub fn norm(&self) -> f64 {
        self.ground_amp.norm_sqr() + self.excited_population()
    }
}

/// Spin-wave parameters in lattice units: `width_sq` is Δx²/a² and
/// `wavevector` is k·a, like the control wavevector of the chain config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpinWave {
    pub center_site: f64,
    pub width_sq: f64,
    pub wavevector: f64,
    pub excited_fraction: f64,
}

impl Default for SpinWave {
    /// Packet at site 100 with Δx² = 60a², k = 0 and |c_e|² = 0.2.
    fn default() -> Self {
        SpinWave { center_site: 100.0, width_sq: 60.0, wavevector: 0.0, excited_fraction: 0.2 }
    }
}

/// Gaussian packet in the |e₋⟩ manifold,
/// c_{n,−} ∝ e^{i(k + k_c)z_n}·e^{−a²(n − n₀)²/Δx²},
/// scaled to Σ|c|² = excited_fraction with c_g = √(1 − excited_fraction).
pub fn spin_wave(chain: &Chain, params: &SpinWave) -> Result<ExcitationState> {
    let SpinWave { center_site, width_sq, wavevector, excited_fraction } = *params;
    if !(width_sq > 0.0) || !width_sq.is_finite() {
        return Err(Error::Domain(format!("spin-wave width² must be positive, got {width_sq}")));
    }
    if !(0.0..=1.0).contains(&excited_fraction) {
        return Err(Error::Domain(format!("excited fraction must lie in [0, 1], got {excited_fraction}")));
    }
    if !(center_site >= 0.0 && center_site < chain.n_atoms() as f64) {
        return Err(Error::Domain(format!("spin-wave centre {center_site} outside the chain")));
    }
    if !wavevector.is_finite() {
        return Err(Error::Domain(format!("spin-wave wavevector must be finite, got {wavevector}")));
    }
    let carrier = wavevector / chain.lattice_const() + chain.control_wavevector();
    let mut amps = vec![C64::new(0.0, 0.0); chain.dim()];
    for n in 0..chain.n_atoms() {
        let offset = n as f64 - center_site;
        let envelope = (-offset * offset / width_sq).exp();
        amps[2 * n + 1] = C64::from_polar(envelope, carrier * chain.position(n));
    }
    let total = norm_sqr(&amps);
    let scale = if total > 0.0 { (excited_fraction / total).sqrt() } else { 0.0 };
    for c in &mut amps {
        *c *= scale;
    }
    Ok(ExcitationState { ground_amp: C64::new((1.0 - excited_fraction).sqrt(), 0.0), amps, time: 0.0 })
}

#[derive(Debug, Clone)]
enum Kind {
    Spectral { values: Vec<C64>, vectors: CMat, inverse: CMat },
    Dense { generator: CMat },
}

/// exp(−iH̃t), from one eigendecomposition when the eigenvectors are well
/// conditioned and from scaling and squaring otherwise.
#[derive(Debug, Clone)]
pub struct Propagator {
    kind: Kind,
    condition: f64,
}

impl Propagator {
    pub fn new(h: &NonHermitianHamiltonian) -> Result<Self> {
        let n = h.dim();
        let generator = Mat::from_fn(n, n, |i, j| C64::new(0.0, -1.0) * h.matrix()[(i, j)]);
        match raw_eigen(h.matrix()) {
            Ok((values, vectors)) => {
                let inv = inverse(vectors.as_ref());
                let condition = norm_one(vectors.as_ref()) * norm_one(inv.as_ref());
                if condition.is_finite() && condition <= CONDITION_LIMIT {
                    return Ok(Propagator { kind: Kind::Spectral { values, vectors, inverse: inv }, condition });
                }
                log::warn!("eigenvector condition number {condition:.3e}, using the dense matrix exponential");
                Ok(Propagator { kind: Kind::Dense { generator }, condition })
            }
            Err(e) => {
                log::warn!("eigendecomposition failed ({e}), using the dense matrix exponential");
                Ok(Propagator { kind: Kind::Dense { generator }, condition: f64::INFINITY })
            }
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            Kind::Spectral { values, .. } => values.len(),
            Kind::Dense { generator } => generator.nrows(),
        }
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self.kind, Kind::Spectral { .. })
    }

    /// 1-norm condition number of the eigenvector matrix.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn matrix(&self, t: f64) -> CMat {
        match &self.kind {
            Kind::Spectral { values, vectors, inverse } => {
                let n = values.len();
                let scaled = Mat::from_fn(n, n, |i, j| vectors[(i, j)] * (C64::new(0.0, -t) * values[j]).exp());
                &scaled * inverse
            }
            Kind::Dense { generator } => {
                let n = generator.nrows();
                expm(Mat::from_fn(n, n, |i, j| generator[(i, j)] * t).as_ref())
            }
        }
    }

    /// Amplitudes at times `times` after `amps`.
    pub fn apply(&self, amps: &[C64], times: &[f64]) -> Vec<Vec<C64>> {
        match &self.kind {
            Kind::Spectral { values, vectors, inverse } => {
                let modal = mat_vec(inverse.as_ref(), amps);
                times
                    .par_iter()
                    .map(|&t| {
                        let weighted: Vec<C64> =
                            modal.iter().zip(values).map(|(x, l)| x * (C64::new(0.0, -t) * l).exp()).collect();
                        mat_vec(vectors.as_ref(), &weighted)
                    })
                    .collect()
            }
            Kind::Dense { .. } => times.par_iter().map(|&t| mat_vec(self.matrix(t).as_ref(), amps)).collect(),
        }
    }
}

/// Snapshots of `state` at the given absolute times; c_g is unchanged.
pub fn evolve_at(state: &ExcitationState, propagator: &Propagator, times: &[f64]) -> Result<Vec<ExcitationState>> {
    if state.amps.len() != propagator.dim() {
        return Err(Error::DimensionMismatch { expected: propagator.dim(), got: state.amps.len() });
    }
    if let Some(t) = times.iter().find(|&&t| !(t >= state.time) || !t.is_finite()) {
        return Err(Error::Domain(format!("snapshot time {t} precedes the state time {}", state.time)));
    }
    let elapsed: Vec<f64> = times.iter().map(|t| t - state.time).collect();
    Ok(propagator
        .apply(&state.amps, &elapsed)
        .into_iter()
        .zip(times)
        .map(|(amps, &time)| ExcitationState { ground_amp: state.ground_amp, amps, time })
        .collect())
}

/// `n_snapshots` evenly spaced snapshots on [0, t_final] after the state.
pub fn evolve(
    state: &ExcitationState,
    h: &NonHermitianHamiltonian,
    t_final: f64,
    n_snapshots: usize,
) -> Result<Vec<ExcitationState>> {
    if !(t_final >= 0.0) {
        return Err(Error::Domain(format!("final time must be non-negative, got {t_final}")));
    }
    let times: Vec<f64> = match n_snapshots {
        0 => Vec::new(),
        1 => vec![state.time + t_final],
        n => (0..n).map(|j| state.time + t_final * j as f64 / (n - 1) as f64).collect(),
    };
    evolve_at(state, &Propagator::new(h)?, &times)
}

/// Per-site (p₊(n), p₋(n)).
pub fn populations(state: &ExcitationState) -> Vec<(f64, f64)> {
    state.amps.chunks_exact(2).map(|c| (c[0].norm_sqr(), c[1].norm_sqr())).collect()
}

/// Σp²/(Σp)²; zero for an empty distribution.
pub fn inverse_participation_ratio(p: &[f64]) -> f64 {
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    p.iter().map(|x| x * x).sum::<f64>() / (total * total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumDistribution {
    pub k: Vec<f64>,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    pub ipr_plus: f64,
    pub ipr_minus: f64,
}

impl MomentumDistribution {
    /// Inverse participation ratio of the summed distribution |ψ₊|² + |ψ₋|².
    pub fn ipr_total(&self) -> f64 {
        let sum: Vec<f64> = self.plus.iter().zip(&self.minus).map(|(a, b)| a + b).collect();
        inverse_participation_ratio(&sum)
    }
}

/// ψ_s(k_j) = Σ_n e^{−i(k_j − s·k_c)z_n} c_{ns} on k_j = −π/a + 2πj/(𝒩a),
/// so each polarization is resolved in its physical quasimomentum.
pub fn momentum_distribution(chain: &Chain, state: &ExcitationState) -> Result<MomentumDistribution> {
    if state.amps.len() != chain.dim() {
        return Err(Error::DimensionMismatch { expected: chain.dim(), got: state.amps.len() });
    }
    let n = chain.n_atoms();
    let a = chain.lattice_const();
    let k: Vec<f64> = (0..n).map(|j| -PI / a + 2.0 * PI * j as f64 / (n as f64 * a)).collect();
    let transform = |s: Polarization| -> Vec<f64> {
        let idx = s as usize;
        k.par_iter()
            .map(|&kj| {
                let q = kj - s.sign() * chain.control_wavevector();
                (0..n)
                    .map(|site| C64::from_polar(1.0, -q * chain.position(site)) * state.amps[2 * site + idx])
                    .sum::<C64>()
                    .norm_sqr()
            })
            .collect()
    };
    let plus = transform(Polarization::Plus);
    let minus = transform(Polarization::Minus);
    Ok(MomentumDistribution {
        ipr_plus: inverse_participation_ratio(&plus),
        ipr_minus: inverse_participation_ratio(&minus),
        k,
        plus,
        minus,
    })
}

/// Site reflection c'_{n,s} = c_{𝒩−1−n,s}.
pub fn mirror(amps: &[C64]) -> Vec<C64> {
    let n = amps.len() / 2;
    (0..2 * n).map(|i| amps[2 * (n - 1 - i / 2) + i % 2]).collect()
}

/// Relative population max-norm between evolving the mirrored initial
/// state and mirroring the evolved one, at each of `times`.
pub fn mirror_defect(state: &ExcitationState, propagator: &Propagator, times: &[f64]) -> Result<Vec<f64>> {
    let direct = evolve_at(state, propagator, times)?;
    let reflected = ExcitationState { amps: mirror(&state.amps), ..state.clone() };
    let from_mirror = evolve_at(&reflected, propagator, times)?;
    Ok(direct
        .iter()
        .zip(&from_mirror)
        .map(|(d, m)| {
            let expected = mirror(&d.amps);
            let scale = expected.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
            let diff = expected
                .iter()
                .zip(&m.amps)
                .map(|(x, y)| (x.norm_sqr() - y.norm_sqr()).abs())
                .fold(0.0, f64::max);
            if scale > 0.0 {
                diff / scale
            } else {
                diff
            }
        })
        .collect())
}

/// Snapshot times of the bounce protocol: before the packet reaches the
/// first chain end, as it reflects there, and as it reflects off the
/// opposite end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BounceTimes {
    /// Transport velocity in λ₀Γ₀.
    pub velocity: f64,
    /// +1 when the packet first heads to the last site, −1 otherwise.
    pub direction: f64,
    pub before: f64,
    pub first: f64,
    pub second: f64,
}

impl BounceTimes {
    pub fn as_array(&self) -> [f64; 3] {
        [self.before, self.first, self.second]
    }
}

/// Group velocities dω/dk of the guided Bloch components of `state`, each
/// with its weight |ψ|² projected on the branch. Returns (velocity, weight).
pub fn guided_velocities(chain: &Chain, state: &ExcitationState) -> Result<Vec<(f64, f64)>> {
    let m = momentum_distribution(chain, state)?;
    let decoupled = is_decoupled(chain);
    let kc = chain.control_wavevector();
    let a = chain.lattice_const();
    // Stencils are folded here since the bands are periodic in k.
    let h = 1e-5 / a;
    let mut out = Vec::new();
    if decoupled {
        // Pure bands in physical momentum; both share the same dispersion.
        for (s, weights) in [(Polarization::Plus, &m.plus), (Polarization::Minus, &m.minus)] {
            let shifted: Vec<f64> = m.k.iter().flat_map(|&k| {
                let q = k - s.sign() * kc;
                [q - h, q, q + h].map(|x| fold(x, a))
            }).collect();
            let b = bloch_bands(chain, &shifted)?;
            for (j, w) in weights.iter().enumerate() {
                let band = b.branch(true);
                if band[3 * j + 1].im.abs() < GUIDED_TOLERANCE && *w > 0.0 {
                    out.push(((band[3 * j + 2].re - band[3 * j].re) / (2.0 * h), *w));
                }
            }
        }
    } else {
        let grid: Vec<f64> = m.k.iter().flat_map(|&k| [k - h, k, k + h].map(|x| fold(x, a))).collect();
        let b = bloch_bands(chain, &grid)?;
        for j in 0..m.k.len() {
            for upper in [true, false] {
                let band = b.branch(upper);
                let plus_weight =
                    if upper { b.polarization_weight_upper[3 * j + 1] } else { b.polarization_weight_lower[3 * j + 1] };
                let w = m.plus[j] * plus_weight + m.minus[j] * (1.0 - plus_weight);
                if band[3 * j + 1].im.abs() < GUIDED_TOLERANCE && w > 0.0 {
                    out.push(((band[3 * j + 2].re - band[3 * j].re) / (2.0 * h), w));
                }
            }
        }
    }
    Ok(out)
}

/// Bounce snapshot times from the guided part of the packet.
///
/// The transport velocity is the weighted harmonic mean of |dω/dk| over
/// guided components, so that distance/velocity is their mean arrival time;
/// the plain maximum diverges at the light lines. The first edge is the one
/// the weighted mean group velocity points to.
pub fn bounce_times(chain: &Chain, state: &ExcitationState) -> Result<BounceTimes> {
    let comps = guided_velocities(chain, state)?;
    let total: f64 = comps.iter().map(|c| c.1).sum();
    let inverse: f64 = comps.iter().filter(|c| c.0 != 0.0).map(|c| c.1 / c.0.abs()).sum();
    if !(total > 0.0) || !(inverse > 0.0) {
        return Err(Error::Domain("state has no guided components to set snapshot times".into()));
    }
    let velocity = total / inverse;
    let drift: f64 = comps.iter().map(|c| c.0 * c.1).sum();
    let direction = if drift >= 0.0 { 1.0 } else { -1.0 };
    let pop: Vec<f64> = populations(state).iter().map(|p| p.0 + p.1).collect();
    let norm: f64 = pop.iter().sum();
    let centre = pop.iter().enumerate().map(|(n, p)| n as f64 * p).sum::<f64>() / norm;
    let a = chain.lattice_const();
    let to_edge = if direction > 0.0 { (chain.n_atoms() as f64 - 1.0 - centre) * a } else { centre * a };
    let first = state.time + to_edge / velocity;
    let second = first + chain.length() / velocity;
    Ok(BounceTimes { velocity, direction, before: state.time + 0.5 * to_edge / velocity, first, second })
}
