//! Polylogarithms on the unit circle and the Bloch lattice sum of the
//! same-polarization dipole couplings.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

const ZETA3: f64 = 1.202_056_903_159_594_3;

/// ζ(2m) for m ≥ 1.
fn zeta_even(m: u32) -> f64 {
    match m {
        1 => PI.powi(2) / 6.0,
        2 => PI.powi(4) / 90.0,
        3 => PI.powi(6) / 945.0,
        4 => PI.powi(8) / 9450.0,
        _ => {
            let s = 2 * m as i32;
            // Tail beyond n = 64 is below 64^{1-s} < 1e-16 for s ≥ 10.
            (1..=64).rev().map(|n| (n as f64).powi(-s)).sum()
        }
    }
}

/// ζ(p) for p ∈ {2, 3}.
fn zeta_small(p: u32) -> f64 {
    match p {
        2 => zeta_even(1),
        3 => ZETA3,
        _ => unreachable!(),
    }
}

/// Σ_{d≥1} e^{iqd}/d^p = Li_p(e^{iq}) for p ∈ {1, 2, 3}.
///
/// Uses the expansion of Li_p(e^μ) around μ = 0 with μ = iq reduced to
/// |q| ≤ π, where it converges geometrically with ratio (q/2π)².
pub fn lattice_sum(p: u32, q: f64) -> Result<C64> {
    if !(1..=3).contains(&p) {
        return Err(Error::Domain(format!("lattice sum order must be 1, 2 or 3, got {p}")));
    }
    if !q.is_finite() {
        return Err(Error::Domain(format!("lattice sum phase must be finite, got {q}")));
    }
    let theta = q - 2.0 * PI * (q / (2.0 * PI)).round();
    if theta == 0.0 {
        return if p == 1 {
            Err(Error::DivergentLatticeSum { order: p, phase: q })
        } else {
            Ok(C64::new(zeta_small(p), 0.0))
        };
    }
    let mu = C64::new(0.0, theta);
    let mut sum = C64::new(0.0, 0.0);

    // Positive-argument zeta terms, k = 0 .. p−2.
    let mut power = C64::new(1.0, 0.0);
    let mut factorial = 1.0;
    for k in 0..p.saturating_sub(1) {
        if k > 0 {
            power *= mu;
            factorial *= k as f64;
        }
        sum += zeta_small(p - k) * power / factorial;
    }

    // Logarithmic term, k = p − 1.
    let log_power = mu.powi(p as i32 - 1) / (1..p).map(|j| j as f64).product::<f64>();
    let harmonic: f64 = (1..p).map(|j| 1.0 / j as f64).sum();
    sum += log_power * (harmonic - (-mu).ln());

    // k = p: ζ(0) = −1/2.
    sum += -0.5 * mu.powi(p as i32) / (1..=p).map(|j| j as f64).product::<f64>();

    // k = p − 1 + 2m: ζ(1 − 2m) = (−1)^m·2·(2m−1)!·ζ(2m)/(2π)^{2m}.
    let x = theta / (2.0 * PI);
    let mu_p1 = mu.powi(p as i32 - 1);
    for m in 1..=60u32 {
        let k = p - 1 + 2 * m;
        // (2m−1)!/k! as a product over (2m, k].
        let ratio: f64 = 1.0 / ((2 * m)..=k).map(|j| j as f64).product::<f64>();
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        // μ^{2m}/(2π)^{2m} = (−1)^m x^{2m}
        let scaled = sign * x.powi(2 * m as i32);
        let term = sign * 2.0 * zeta_even(m) * ratio * scaled * mu_p1;
        sum += term;
        if term.norm() < 1e-18 * sum.norm().max(1e-300) {
            break;
        }
    }
    Ok(sum)
}

/// Bloch-summed non-Hermitian same-polarization coupling
/// Σ_{d≠0} (Δ − iγ/2)(|d|a)·e^{−iqda} at quasimomentum q.
///
/// Diverges on the light lines q = ±k₀ (mod 2π/a).
pub fn bloch_self_energy(q: f64, k0: f64, a: f64) -> Result<C64> {
    let x = k0 * a;
    let mut total = C64::new(0.0, 0.0);
    for sigma in [1.0, -1.0] {
        let phase = (k0 + sigma * q) * a;
        let li1 = lattice_sum(1, phase)?;
        let li2 = lattice_sum(2, phase)?;
        let li3 = lattice_sum(3, phase)?;
        total += li1 / x + C64::i() * li2 / (x * x) - li3 / (x * x * x);
    }
    Ok(-0.75 * total)
}

/// Kahan-compensated direct summation of Σ_{d=1}^{terms} e^{iqd}/d^p.
pub fn direct_sum(p: u32, q: f64, terms: u64) -> C64 {
    let mut re = 0.0;
    let mut im = 0.0;
    let mut c_re = 0.0;
    let mut c_im = 0.0;
    for d in (1..=terms).rev() {
        let df = d as f64;
        let w = df.powi(-(p as i32));
        let arg = (q * df) % (2.0 * PI);
        let (s, c) = arg.sin_cos();
        let y = c * w - c_re;
        let t = re + y;
        c_re = (t - re) - y;
        re = t;
        let y = s * w - c_im;
        let t = im + y;
        c_im = (t - im) - y;
        im = t;
    }
    C64::new(re, im)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_constants() {
        let li2 = lattice_sum(2, PI).unwrap();
        assert!((li2 - C64::new(-PI * PI / 12.0, 0.0)).norm() < 1e-14);
        let li1 = lattice_sum(1, PI).unwrap();
        assert!((li1 - C64::new(-(2f64).ln(), 0.0)).norm() < 1e-14);
        let li3 = lattice_sum(3, PI).unwrap();
        assert!((li3.re + 0.75 * ZETA3).abs() < 1e-14);
        assert!((lattice_sum(2, 0.0).unwrap().re - PI * PI / 6.0).abs() < 1e-15);
        assert!((lattice_sum(3, 4.0 * PI).unwrap().re - ZETA3).abs() < 1e-15);
    }

    #[test]
    fn divergence_at_origin() {
        assert!(matches!(lattice_sum(1, 0.0), Err(Error::DivergentLatticeSum { order: 1, .. })));
        assert!(matches!(lattice_sum(1, 2.0 * PI), Err(Error::DivergentLatticeSum { .. })));
        assert!(lattice_sum(4, 1.0).is_err());
    }

    #[test]
    fn bernoulli_closed_forms() {
        // On 0 < q < 2π: Li₁ = −ln(2 sin(q/2)) + i(π − q)/2,
        // Re Li₂ = π²/6 − q(2π − q)/4, Im Li₃ = π²q/6 − πq²/4 + q³/12.
        for &q in &[1e-6, 0.3, 1.0, 2.5, PI, 3.7, 5.9, 2.0 * PI - 1e-2] {
            let li1 = lattice_sum(1, q).unwrap();
            let expected = C64::new(-(2.0 * (q / 2.0).sin()).ln(), (PI - q) / 2.0);
            assert!((li1 - expected).norm() < 1e-12, "q={q}");
            let li2 = lattice_sum(2, q).unwrap();
            assert!((li2.re - (PI * PI / 6.0 - q * (2.0 * PI - q) / 4.0)).abs() < 1e-12, "q={q}");
            let li3 = lattice_sum(3, q).unwrap();
            let im3 = PI * PI * q / 6.0 - PI * q * q / 4.0 + q.powi(3) / 12.0;
            assert!((li3.im - im3).abs() < 1e-12, "q={q}");
        }
    }

    #[test]
    fn periodic_in_phase() {
        for p in 1..=3 {
            let a = lattice_sum(p, 0.7).unwrap();
            let b = lattice_sum(p, 0.7 + 6.0 * PI).unwrap();
            let c = lattice_sum(p, 0.7 - 4.0 * PI).unwrap();
            assert!((a - b).norm() < 1e-12 && (a - c).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_short_direct_sums_for_fast_orders() {
        for &q in &[0.4, 1.9, -2.2] {
            let d = direct_sum(3, q, 200_000);
            assert!((lattice_sum(3, q).unwrap() - d).norm() < 1e-10);
        }
    }

    #[test]
    fn self_energy_is_even_and_lossless_outside_light_cone() {
        let a = 0.125;
        let k0 = 2.0 * PI;
        for &q in &[0.1, 1.0, 3.0, 5.5] {
            let plus = bloch_self_energy(q, k0, a).unwrap();
            let minus = bloch_self_energy(-q, k0, a).unwrap();
            assert!((plus - minus).norm() < 1e-12);
        }
        for &q in &[7.0, 10.0, 20.0, 25.0] {
            let s = bloch_self_energy(q, k0, a).unwrap();
            // −iγ/2 of the sum cancels the on-site −i/2 when guided.
            assert!((s.im - 0.5).abs() < 1e-10, "q={q}: {s}");
        }
        assert!(bloch_self_energy(k0, k0, a).is_err());
    }
}
