//! Far-field radiation of the chain: detector quadrature grids, jump
//! operators into (direction, polarization) channels and intensity maps.

use faer::Mat;
use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::num::NonZeroUsize;

use crate::chain::{Chain, Polarization};
use crate::error::{Error, Result};
use crate::linalg::CMat;

/// Minimum detector distance in units of the chain length (or λ₀ if larger).
pub const FAR_FIELD_FACTOR: f64 = 50.0;

type Vec3 = [f64; 3];

fn dot_c(a: &Vec3, b: &[C64; 3]) -> C64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// One detector direction with its solid-angle weight and the transverse
/// polarization basis (e_Θ, e_φ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorNode {
    pub theta: f64,
    pub phi: f64,
    pub weight: f64,
    pub direction: Vec3,
    pub polarizations: [Vec3; 2],
}

impl DetectorNode {
    pub fn new(theta: f64, phi: f64, weight: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        DetectorNode {
            theta,
            phi,
            weight,
            direction: [st * cp, st * sp, ct],
            polarizations: [[ct * cp, ct * sp, -st], [-sp, cp, 0.0]],
        }
    }
}

/// Spherical product quadrature: Gauss–Legendre in cos Θ times a uniform
/// φ rule, placed at distance `radius` from the chain centre.
#[derive(Debug, Clone)]
pub struct DetectorGrid {
    pub nodes: Vec<DetectorNode>,
    pub radius: f64,
}

impl DetectorGrid {
    pub fn gauss_product(n_theta: usize, n_phi: usize, radius: f64) -> Result<Self> {
        let n_theta = NonZeroUsize::new(n_theta).ok_or_else(|| Error::Domain("n_theta must be positive".into()))?;
        if n_phi == 0 {
            return Err(Error::Domain("n_phi must be positive".into()));
        }
        if !(radius > 0.0) {
            return Err(Error::Domain(format!("detector radius must be positive, got {radius}")));
        }
        let rule = GaussLegendre::new(n_theta);
        let dphi = 2.0 * PI / n_phi as f64;
        let mut nodes = Vec::with_capacity(n_theta.get() * n_phi);
        for &(x, w) in rule.as_node_weight_pairs() {
            for j in 0..n_phi {
                nodes.push(DetectorNode::new(x.acos(), j as f64 * dphi, w * dphi));
            }
        }
        Ok(DetectorGrid { nodes, radius })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    pub fn is_far_field(&self, chain: &Chain) -> bool {
        self.radius >= FAR_FIELD_FACTOR * chain.length().max(1.0)
    }
}

fn chain_centre(chain: &Chain) -> Vec3 {
    [0.0, 0.0, 0.5 * chain.length()]
}

/// Per-atom far-field amplitude (|R|/R_n)·P⊥(R̂_n)·d̂_s·e^{ik₀R_n} at the
/// absolute position `point`, with |R| measured from the chain centre.
fn atom_fields(chain: &Chain, point: &Vec3) -> Vec<[C64; 3]> {
    let centre = chain_centre(chain);
    let r_abs = ((point[0] - centre[0]).powi(2) + (point[1] - centre[1]).powi(2) + (point[2] - centre[2]).powi(2)).sqrt();
    let mut out = Vec::with_capacity(chain.dim());
    for n in 0..chain.n_atoms() {
        let sep = [point[0], point[1], point[2] - chain.position(n)];
        let rn = (sep[0] * sep[0] + sep[1] * sep[1] + sep[2] * sep[2]).sqrt();
        let unit = sep.map(|x| x / rn);
        let phase = C64::from_polar(r_abs / rn, chain.k0() * rn);
        for s in Polarization::BOTH {
            let d = s.dipole();
            let along = dot_c(&unit, &d);
            out.push([0, 1, 2].map(|i| (d[i] - unit[i] * along) * phase));
        }
    }
    out
}

/// Jump operator rows J_{(node, λ)}, one per detector node and transverse
/// polarization, so that Σ J†J reconstructs γ as the grid is refined.
pub fn jump_matrix(chain: &Chain, grid: &DetectorGrid) -> CMat {
    let centre = chain_centre(chain);
    let rows: Vec<[Vec<C64>; 2]> = grid
        .nodes
        .par_iter()
        .map(|node| {
            let point = [0, 1, 2].map(|i| centre[i] + grid.radius * node.direction[i]);
            let fields = atom_fields(chain, &point);
            let scale = (3.0 * node.weight / (8.0 * PI)).sqrt();
            [0, 1].map(|l| {
                let eps = node.polarizations[l];
                fields.iter().map(|f| scale * dot_c(&eps, f)).collect()
            })
        })
        .collect();
    Mat::from_fn(2 * grid.len(), chain.dim(), |r, c| rows[r / 2][r % 2][c])
}

/// Σ_α J_α†J_α over all detector channels.
pub fn detector_decay_matrix(chain: &Chain, grid: &DetectorGrid) -> CMat {
    let j = jump_matrix(chain, grid);
    j.adjoint() * &j
}

/// Click probability dt·|J_{node,λ}·amps|² for one detector channel.
pub fn detection_probability(
    chain: &Chain,
    grid: &DetectorGrid,
    amps: &[C64],
    node: usize,
    polarization: usize,
    dt: f64,
) -> Result<f64> {
    if amps.len() != chain.dim() {
        return Err(Error::DimensionMismatch { expected: chain.dim(), got: amps.len() });
    }
    let n = grid.nodes.get(node).ok_or_else(|| Error::Domain(format!("detector node {node} out of range")))?;
    if polarization > 1 {
        return Err(Error::Domain(format!("detector polarization must be 0 or 1, got {polarization}")));
    }
    let centre = chain_centre(chain);
    let point = [0, 1, 2].map(|i| centre[i] + grid.radius * n.direction[i]);
    let fields = atom_fields(chain, &point);
    let eps = n.polarizations[polarization];
    let scale = (3.0 * n.weight / (8.0 * PI)).sqrt();
    let amp: C64 = fields.iter().zip(amps).map(|(f, c)| scale * dot_c(&eps, f) * c).sum();
    Ok(dt * amp.norm_sqr())
}

/// Rectangular x–z grid of observation points around the chain centre with
/// everything closer than the far-field distance left out.
#[derive(Debug, Clone)]
pub struct PlanarGrid {
    pub points: Vec<Vec3>,
}

impl PlanarGrid {
    /// `n × n` points over a square of half-width twice the far-field
    /// distance, keeping those at least that distance from the centre.
    pub fn xz(chain: &Chain, n: usize) -> Self {
        let centre = chain_centre(chain);
        let inner = FAR_FIELD_FACTOR * chain.length().max(1.0);
        let half = 2.0 * inner;
        let step = if n > 1 { 2.0 * half / (n - 1) as f64 } else { 0.0 };
        let mut points = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let x = -half + step * i as f64;
                let dz = -half + step * j as f64;
                if x.hypot(dz) >= inner {
                    points.push([x, 0.0, centre[2] + dz]);
                }
            }
        }
        PlanarGrid { points }
    }
}

/// I(R) = |Σ_{n,s} (|R|/R_n)·P⊥(R̂_n)·d̂_s·e^{ik₀R_n}·c_{ns}|², normalized
/// so a single atom in |e₊⟩ has peak intensity 1 along the chain axis and
/// pattern (1 + cos²Θ)/2.
pub fn far_field_intensity(chain: &Chain, amps: &[C64], points: &[Vec3]) -> Result<Vec<f64>> {
    if amps.len() != chain.dim() {
        return Err(Error::DimensionMismatch { expected: chain.dim(), got: amps.len() });
    }
    let pad = chain.lattice_const().max(1.0);
    for (index, p) in points.iter().enumerate() {
        let inside = p[0].abs() <= pad && p[1].abs() <= pad && p[2] >= -pad && p[2] <= chain.length() + pad;
        if inside {
            return Err(Error::NodeInsideChain { index, position: *p });
        }
    }
    Ok(points
        .par_iter()
        .map(|p| {
            let fields = atom_fields(chain, p);
            let mut e = [C64::new(0.0, 0.0); 3];
            for (f, c) in fields.iter().zip(amps) {
                for i in 0..3 {
                    e[i] += f[i] * c;
                }
            }
            e.iter().map(|x| x.norm_sqr()).sum()
        })
        .collect())
}

/// Total intensity on each side of the chain centre along z, (left, right).
pub fn edge_intensities(chain: &Chain, points: &[Vec3], intensity: &[f64]) -> (f64, f64) {
    let zc = chain_centre(chain)[2];
    let mut left = 0.0;
    let mut right = 0.0;
    for (p, i) in points.iter().zip(intensity) {
        if p[2] > zc {
            right += i;
        } else if p[2] < zc {
            left += i;
        }
    }
    (left, right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ChainConfig;
    use crate::green::build_couplings;
    use crate::linalg::max_abs;

    fn single() -> Chain {
        Chain::single_atom(ChainConfig::standard(2, 0.0)).unwrap()
    }

    #[test]
    fn weights_cover_the_sphere() {
        let g = DetectorGrid::gauss_product(18, 20, 1e3).unwrap();
        assert_eq!(g.len(), 360);
        assert!((g.weight_sum() - 4.0 * PI).abs() < 1e-12);
        for n in &g.nodes {
            let [e1, e2] = n.polarizations;
            let d = n.direction;
            let dot = |a: Vec3, b: Vec3| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            assert!(dot(e1, d).abs() < 1e-14 && dot(e2, d).abs() < 1e-14 && dot(e1, e2).abs() < 1e-14);
        }
        assert!(DetectorGrid::gauss_product(0, 4, 1.0).is_err());
    }

    #[test]
    fn single_atom_total_rate_is_one() {
        let c = single();
        let g = DetectorGrid::gauss_product(12, 8, 1e3).unwrap();
        for s in 0..2 {
            let mut amps = vec![C64::new(0.0, 0.0); 2];
            amps[s] = C64::new(1.0, 0.0);
            let total: f64 = (0..g.len())
                .flat_map(|n| (0..2).map(move |l| (n, l)))
                .map(|(n, l)| detection_probability(&c, &g, &amps, n, l, 1.0).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-6, "{total}");
        }
    }

    #[test]
    fn two_atom_decay_matrix_from_detectors() {
        let c = ChainConfig::standard(2, 0.0).validate().unwrap();
        let g = DetectorGrid::gauss_product(18, 20, 1e3).unwrap();
        let recon = detector_decay_matrix(&c, &g);
        let cp = build_couplings(&c);
        assert!(max_abs((&recon - &cp.decay).as_ref()) < 1e-4);
    }

    #[test]
    fn dipole_pattern() {
        let c = single();
        let amps = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let r = 1e4;
        let thetas: Vec<f64> = (0..=12).map(|i| i as f64 * PI / 12.0).collect();
        let points: Vec<Vec3> = thetas.iter().map(|t| [r * t.sin(), 0.0, r * t.cos()]).collect();
        let i = far_field_intensity(&c, &amps, &points).unwrap();
        for (t, v) in thetas.iter().zip(&i) {
            assert!((v - 0.5 * (1.0 + t.cos().powi(2))).abs() < 1e-8, "{t}: {v}");
        }
        let zero = far_field_intensity(&c, &[C64::new(0.0, 0.0); 2], &points).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn points_inside_chain_are_rejected() {
        let c = ChainConfig::standard(10, 0.0).validate().unwrap();
        let amps = vec![C64::new(0.0, 0.0); 20];
        let res = far_field_intensity(&c, &amps, &[[1e4, 0.0, 0.0], [0.1, 0.0, 0.5]]);
        assert!(matches!(res, Err(Error::NodeInsideChain { index: 1, .. })));
    }

    #[test]
    fn planar_grid_respects_far_field() {
        let c = ChainConfig::standard(20, 0.0).validate().unwrap();
        let g = PlanarGrid::xz(&c, 21);
        let zc = 0.5 * c.length();
        let inner = FAR_FIELD_FACTOR * c.length().max(1.0);
        assert!(!g.points.is_empty());
        assert!(g.points.iter().all(|p| p[0].hypot(p[2] - zc) >= inner - 1e-9));
    }
}
