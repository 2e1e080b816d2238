use std::f64::consts::PI;

use chainwave::dynamics::{evolve_at, spin_wave, Propagator, SpinWave};
use chainwave::linalg::{hermitian_defect, max_abs};
use chainwave::polylog::lattice_sum;
use chainwave::scattering::{transmittance, Scatterer};
use chainwave::spectrum::{bloch_bands, decay_modes, is_decoupled};
use chainwave::{assemble, build_couplings, disorder_sample, ChainConfig, DisorderShape};
use proptest::prelude::*;

fn config() -> impl Strategy<Value = ChainConfig> {
    (2usize..12, 0.05f64..0.45, 0.0f64..6.0, -PI..PI, 0.0f64..PI, -2.0f64..2.0).prop_map(
        |(n_atoms, lattice_const, delta_shift, mixing_angle, control_wavevector, detuning)| ChainConfig {
            n_atoms,
            lattice_const,
            delta_shift,
            mixing_angle,
            control_wavevector,
            detuning,
            seed: None,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn couplings_are_symmetric_and_decay_is_psd(cfg in config()) {
        let chain = cfg.validate().unwrap();
        let c = build_couplings(&chain);
        prop_assert!(hermitian_defect(c.shift.as_ref()) < 1e-12);
        prop_assert!(hermitian_defect(c.decay.as_ref()) < 1e-12);
        let modes = decay_modes(&c).unwrap();
        prop_assert!(modes.rates.iter().all(|&r| r >= 0.0));
        prop_assert!((modes.rates.iter().sum::<f64>() - chain.dim() as f64).abs() < 1e-9 * chain.dim() as f64);
    }

    #[test]
    fn scattering_is_unitary(cfg in config(), e in -8.0f64..8.0, w in 0.0f64..2.0, seed in any::<u64>()) {
        let chain = cfg.validate().unwrap();
        let c = build_couplings(&chain);
        let disorder = disorder_sample(seed, w, chain.n_atoms(), DisorderShape::Uniform).unwrap();
        let h = assemble(&chain, &c, Some(&disorder)).unwrap();
        let modes = decay_modes(&c).unwrap();
        let s = Scatterer::new(&h, &modes).unwrap().s_matrix(e).unwrap();
        prop_assert!(s.unitarity_defect < 1e-8);
        let t = transmittance(&s, 0, chain.n_atoms() - 1);
        prop_assert!((0.0..=2.0 + 1e-9).contains(&t));
    }

    #[test]
    fn decoupled_chains_are_reciprocal(cfg in config(), e in -4.0f64..6.0) {
        let cfg = ChainConfig { mixing_angle: 0.0, ..cfg };
        let chain = cfg.validate().unwrap();
        let c = build_couplings(&chain);
        let h = assemble(&chain, &c, None).unwrap();
        let modes = decay_modes(&c).unwrap();
        let s = Scatterer::new(&h, &modes).unwrap().s_matrix(e).unwrap();
        let last = chain.n_atoms() - 1;
        prop_assert!((transmittance(&s, 0, last) - transmittance(&s, last, 0)).abs() < 1e-10);
    }

    #[test]
    fn norm_never_grows(cfg in config(), t1 in 0.0f64..3.0, dt in 0.0f64..3.0) {
        let cfg = ChainConfig { n_atoms: cfg.n_atoms.max(6), ..cfg };
        let chain = cfg.validate().unwrap();
        let h = assemble(&chain, &build_couplings(&chain), None).unwrap();
        let p = Propagator::new(&h).unwrap();
        let params = SpinWave { center_site: 2.0, width_sq: 4.0, wavevector: 1.0, excited_fraction: 0.3 };
        let s = evolve_at(&spin_wave(&chain, &params).unwrap(), &p, &[t1, t1 + dt]).unwrap();
        prop_assert!(s[1].excited_population() <= s[0].excited_population() * (1.0 + 1e-10));
        prop_assert!(s[0].excited_population() <= 0.3 * (1.0 + 1e-10));
        let composed = &p.matrix(t1) * &p.matrix(dt);
        prop_assert!(max_abs((&composed - &p.matrix(t1 + dt)).as_ref()) < 1e-8);
    }

    #[test]
    fn lattice_sums_are_periodic_and_conjugate_symmetric(p in 1u32..4, q in 0.05f64..6.2) {
        let a = lattice_sum(p, q).unwrap();
        prop_assert!((a - lattice_sum(p, q + 2.0 * PI).unwrap()).norm() < 1e-9);
        prop_assert!((a.conj() - lattice_sum(p, 2.0 * PI - q).unwrap()).norm() < 1e-9);
    }

    #[test]
    fn guided_bloch_modes_are_lossless(theta in -PI..PI, k in -24.0f64..24.0) {
        let chain = ChainConfig::standard(10, theta).validate().unwrap();
        let kc = if is_decoupled(&chain) { 0.0 } else { chain.control_wavevector() };
        let period = 2.0 * PI / chain.lattice_const();
        let fold = |q: f64| (q - period * (q / period).round()).abs();
        prop_assume!(fold(k - kc) > chain.k0() + 0.05 && fold(k + kc) > chain.k0() + 0.05);
        let b = bloch_bands(&chain, &[k]).unwrap();
        prop_assert!(b.upper[0].im.abs() < 1e-6 && b.lower[0].im.abs() < 1e-6);
    }
}
