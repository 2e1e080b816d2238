//! Small dense helpers on top of `faer` shared by the physics modules.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};
use num_complex::Complex64 as C64;

pub type CMat = Mat<C64>;

/// Largest entry modulus.
pub fn max_abs(m: MatRef<'_, C64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

pub fn frobenius(m: MatRef<'_, C64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// ‖M − M†‖_max.
pub fn hermitian_defect(m: MatRef<'_, C64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    best
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

/// ‖A − 𝟙‖_max.
pub fn identity_defect(m: MatRef<'_, C64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            best = best.max((m[(i, j)] - target).norm());
        }
    }
    best
}

pub fn mat_vec(m: MatRef<'_, C64>, v: &[C64]) -> Vec<C64> {
    assert_eq!(m.ncols(), v.len());
    let mut out = vec![C64::new(0.0, 0.0); m.nrows()];
    for (j, &x) in v.iter().enumerate() {
        if x == C64::new(0.0, 0.0) {
            continue;
        }
        let col = m.col(j);
        for (i, o) in out.iter_mut().enumerate() {
            *o += col[i] * x;
        }
    }
    out
}

/// v† M v, real part.
pub fn quadratic_form(m: MatRef<'_, C64>, v: &[C64]) -> f64 {
    let mv = mat_vec(m, v);
    v.iter().zip(&mv).map(|(a, b)| (a.conj() * b).re).sum()
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

/// 1-norm (max column sum).
pub fn norm_one(m: MatRef<'_, C64>) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn inverse(m: MatRef<'_, C64>) -> CMat {
    m.partial_piv_lu().solve(identity(m.nrows()))
}

/// Principal square root of a Hermitian positive semidefinite matrix,
/// clamping eigenvalues below zero to zero.
pub fn psd_sqrt(m: MatRef<'_, C64>) -> Option<CMat> {
    let eig = m.self_adjoint_eigen(Side::Lower).ok()?;
    let vals: Vec<f64> = eig.S().column_vector().iter().map(|x| x.re.max(0.0).sqrt()).collect();
    Some(spectral_synthesis(eig.U(), &vals))
}

/// Σ_ν f_ν u_ν u_ν† for orthonormal columns u_ν.
pub fn spectral_synthesis(u: MatRef<'_, C64>, weights: &[f64]) -> CMat {
    let n = u.nrows();
    let scaled = Mat::from_fn(n, weights.len(), |i, j| u[(i, j)] * weights[j]);
    &scaled * u.adjoint()
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm(m: MatRef<'_, C64>) -> CMat {
    let n = m.nrows();
    let norm = norm_one(m);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(squarings);
    let a = Mat::from_fn(n, n, |i, j| m[(i, j)] * scale);
    let mut result = identity(n);
    let mut term = identity(n);
    for k in 1..=30 {
        term = &term * &a;
        let inv = 1.0 / k as f64;
        term = Mat::from_fn(n, n, |i, j| term[(i, j)] * inv);
        result = &result + &term;
        if max_abs(term.as_ref()) < 1e-18 * max_abs(result.as_ref()) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Order-sensitive FNV-1a over the bit patterns of all entries.
pub fn fingerprint(m: MatRef<'_, C64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |x: u64| {
        for b in x.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    feed(m.nrows() as u64);
    feed(m.ncols() as u64);
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            feed(m[(i, j)].re.to_bits());
            feed(m[(i, j)].im.to_bits());
        }
    }
    h
}
