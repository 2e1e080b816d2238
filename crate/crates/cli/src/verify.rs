//! Fast invariant suite behind the hidden `verify` subcommand.

use std::f64::consts::PI;

use chainwave::dynamics::{evolve_at, spin_wave, Propagator, SpinWave};
use chainwave::farfield::DetectorGrid;
use chainwave::linalg::max_abs;
use chainwave::polylog::lattice_sum;
use chainwave::scattering::{reciprocity_defect, representation_equivalence_check, Scatterer};
use chainwave::spectrum::{complex_spectrum, decay_modes};
use chainwave::{assemble, build_couplings, ChainConfig};

use crate::commands::CliError;

pub fn run() -> Result<(), CliError> {
    let mut checks: Vec<(String, bool, String)> = Vec::new();
    let mut check = |name: &str, value: f64, pass: bool| checks.push((name.to_string(), pass, format!("{value:.3e}")));

    let li2 = lattice_sum(2, PI)?;
    check("polylog Li2(-1)", (li2.re + PI * PI / 12.0).abs(), (li2.re + PI * PI / 12.0).abs() < 1e-12);

    for theta in [0.0, PI / 4.0] {
        let chain = ChainConfig::standard(20, theta).validate()?;
        let couplings = build_couplings(&chain);
        let h = assemble(&chain, &couplings, None)?;
        let modes = decay_modes(&couplings)?;
        let sc = Scatterer::new(&h, &modes)?;
        let worst = [-1.0, 0.7, 2.3, 3.9]
            .iter()
            .map(|&e| sc.s_matrix(e).map(|s| s.unitarity_defect))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(0.0, f64::max);
        check(&format!("unitarity, θ = {theta:.4}"), worst, worst < 1e-8);
        let spec = complex_spectrum(&h)?;
        let trace: f64 = spec.values.iter().map(|v| v.im).sum::<f64>() + 20.0;
        check(&format!("trace identity, θ = {theta:.4}"), trace.abs(), trace.abs() < 1e-8 * 20.0);
        let defect = reciprocity_defect(&chain, &couplings)?;
        check(&format!("reciprocity defect, θ = {theta:.4}"), defect, if theta == 0.0 { defect < 1e-12 } else { defect > 1e-3 });
        let p = Propagator::new(&h)?;
        let composed = &p.matrix(0.8) * &p.matrix(1.1);
        let err = max_abs((&composed - &p.matrix(1.9)).as_ref());
        check(&format!("propagator composition, θ = {theta:.4}"), err, err < 1e-9);
        let params = SpinWave { center_site: 10.0, width_sq: 9.0, wavevector: 0.5, excited_fraction: 0.5 };
        let state = spin_wave(&chain, &params)?;
        let later = evolve_at(&state, &p, &[0.5])?;
        let grew = later[0].excited_population() > state.excited_population();
        check(&format!("norm decreases, θ = {theta:.4}"), later[0].excited_population(), !grew);
    }

    let two = ChainConfig::standard(2, 0.0).validate()?;
    let couplings = build_couplings(&two);
    let modes = decay_modes(&couplings)?;
    let grid = DetectorGrid::gauss_product(18, 20, 1e3)?;
    let d = representation_equivalence_check(&two, &couplings, &modes, &grid);
    check("normal-mode reconstruction", d.normal_modes, d.normal_modes < 1e-10);
    check("detector reconstruction", d.detectors, d.detectors < 1e-4);

    let mut failed = 0;
    for (name, pass, value) in &checks {
        println!("{} {name}: {value}", if *pass { "PASS" } else { "FAIL" });
        failed += usize::from(!pass);
    }
    if failed > 0 {
        return Err(CliError::SelfTest(format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}
