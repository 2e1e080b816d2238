//! Free-space dyadic Green's function and the collective shift/decay
//! matrices it induces on the chain.
//!
//! G(r) = e^{ik₀r}/(4πr) [ (1 + i/(k₀r) − 1/(k₀r)²) 𝟙 + (−1 − 3i/(k₀r) + 3/(k₀r)²) r̂⊗r̂ ]
//!
//! For n ≠ m the couplings are
//!   γ_{ss'}^{nm} = (6πΓ₀/k₀) Im[d̂_s*·G(r_n − r_m)·d̂_{s'}],
//!   Δ_{ss'}^{nm} = −(3πΓ₀/k₀) Re[d̂_s*·G(r_n − r_m)·d̂_{s'}],
//! with γ^{nn}_{ss} = Γ₀ and Δ^{nn} = 0 (the Lamb shift is absorbed in ω₀).

use std::f64::consts::PI;
use std::io::{Read, Write};

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::chain::{Chain, ExcitationIndex, Polarization, GAMMA0};
use crate::error::{Error, Result};
use crate::linalg::CMat;

pub type Tensor3 = [[C64; 3]; 3];

pub fn dyadic_green(separation: [f64; 3], k0: f64) -> Result<Tensor3> {
    let r = separation.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(r > 0.0) {
        return Err(Error::Domain("dyadic Green's function at zero separation".into()));
    }
    let kr = k0 * r;
    let i = C64::i();
    let prefactor = (i * kr).exp() / (4.0 * PI * r);
    let transverse = prefactor * (1.0 + i / kr - 1.0 / (kr * kr));
    let longitudinal = prefactor * (-1.0 - 3.0 * i / kr + 3.0 / (kr * kr));
    let unit = separation.map(|x| x / r);
    let mut g = [[C64::new(0.0, 0.0); 3]; 3];
    for (a, row) in g.iter_mut().enumerate() {
        for (b, entry) in row.iter_mut().enumerate() {
            let delta = if a == b { 1.0 } else { 0.0 };
            *entry = transverse * delta + longitudinal * unit[a] * unit[b];
        }
    }
    Ok(g)
}

/// d_left* · G · d_right
pub fn contract(d_left: &[C64; 3], g: &Tensor3, d_right: &[C64; 3]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for a in 0..3 {
        for b in 0..3 {
            acc += d_left[a].conj() * g[a][b] * d_right[b];
        }
    }
    acc
}

/// Collective frequency shifts Δ and decay rates γ over the flattened
/// (site, polarization) index.
#[derive(Debug, Clone)]
pub struct CouplingMatrices {
    pub shift: CMat,
    pub decay: CMat,
}

impl CouplingMatrices {
    pub fn dim(&self) -> usize {
        self.shift.nrows()
    }

    /// Complex pair amplitude Δ − iγ/2 entering the non-Hermitian Hamiltonian.
    pub fn non_hermitian_part(&self) -> CMat {
        let half_i = C64::new(0.0, 0.5);
        Mat::from_fn(self.dim(), self.dim(), |i, j| self.shift[(i, j)] - half_i * self.decay[(i, j)])
    }

    /// Binary dump: magic `CWCM`, u32 version (1), u64 dimension, then the
    /// shift and decay matrices, each row-major as (re, im) f64 pairs, all
    /// little-endian.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(b"CWCM")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.dim() as u64).to_le_bytes())?;
        for m in [&self.shift, &self.decay] {
            for i in 0..self.dim() {
                for j in 0..self.dim() {
                    w.write_all(&m[(i, j)].re.to_le_bytes())?;
                    w.write_all(&m[(i, j)].im.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"CWCM" {
            return Err(Error::Domain("not a coupling-matrix dump".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        if u32::from_le_bytes(word) != 1 {
            return Err(Error::Domain("unsupported coupling dump version".into()));
        }
        let mut long = [0u8; 8];
        r.read_exact(&mut long)?;
        let dim = u64::from_le_bytes(long) as usize;
        let mut read_matrix = |r: &mut dyn Read| -> Result<CMat> {
            let mut m = Mat::zeros(dim, dim);
            for i in 0..dim {
                for j in 0..dim {
                    r.read_exact(&mut long)?;
                    let re = f64::from_le_bytes(long);
                    r.read_exact(&mut long)?;
                    let im = f64::from_le_bytes(long);
                    m[(i, j)] = C64::new(re, im);
                }
            }
            Ok(m)
        };
        let shift = read_matrix(&mut r)?;
        let decay = read_matrix(&mut r)?;
        Ok(CouplingMatrices { shift, decay })
    }
}

/// 2×2 polarization block (Δ, γ) between two atoms separated by `dz` along ẑ.
fn pair_block(dz: f64, k0: f64) -> [[(f64, f64); 2]; 2] {
    let g = dyadic_green([0.0, 0.0, dz], k0).expect("distinct sites have nonzero separation");
    let mut block = [[(0.0, 0.0); 2]; 2];
    for (a, sa) in Polarization::BOTH.iter().enumerate() {
        for (b, sb) in Polarization::BOTH.iter().enumerate() {
            let c = contract(&sa.dipole(), &g, &sb.dipole());
            // Δ and γ are Hermitian by construction; for a z-axis chain the
            // contraction is real-symmetric in (s, s') so Re/Im split cleanly.
            block[a][b] = (-3.0 * PI * GAMMA0 / k0 * c.re, 6.0 * PI * GAMMA0 / k0 * c.im);
        }
    }
    block
}

pub fn build_couplings(chain: &Chain) -> CouplingMatrices {
    let n = chain.n_atoms();
    let dim = chain.dim();
    let k0 = chain.k0();
    // Block-Toeplitz: one Green's function evaluation per separation.
    let blocks: Vec<_> = (1..n).map(|d| pair_block(d as f64 * chain.lattice_const(), k0)).collect();
    let mut shift = Mat::<C64>::zeros(dim, dim);
    let mut decay = Mat::<C64>::zeros(dim, dim);
    for i in 0..dim {
        let a = ExcitationIndex::unflatten(i);
        for j in 0..dim {
            let b = ExcitationIndex::unflatten(j);
            let (sa, sb) = (a.pol as usize, b.pol as usize);
            if a.site == b.site {
                if sa == sb {
                    decay[(i, j)] = C64::new(GAMMA0, 0.0);
                }
                continue;
            }
            let (s, g) = blocks[a.site.abs_diff(b.site) - 1][sa][sb];
            shift[(i, j)] = C64::new(s, 0.0);
            decay[(i, j)] = C64::new(g, 0.0);
        }
    }
    CouplingMatrices { shift, decay }
}
