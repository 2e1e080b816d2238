//! Subcommand implementations and output bookkeeping.

use clap::Parser;
use serde::Serialize;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chainwave::dynamics::{bounce_times, evolve_at, momentum_distribution, spin_wave, Propagator, SpinWave};
use chainwave::ensemble::{compare_configs, EnsembleResult, EnsembleSpec, Observable, RealizationRecord};
use chainwave::farfield::{edge_intensities, far_field_intensity, PlanarGrid};
use chainwave::io::{
    band_rows, intensity_rows, momentum_rows, norm_rows, observable_rows, population_rows, write_rows, Conventions,
    OutputFormat, RunManifest, TransmitRow,
};
use chainwave::scattering::{reciprocity_defect, spectrum_scan, Scatterer};
use chainwave::spectrum::{
    bloch_bands, chain_transparency_window, decay_modes, default_k_grid, is_decoupled, transparency_window,
    GUIDED_TOLERANCE,
};
use chainwave::{assemble, build_couplings, disorder_sample, Chain, ChainConfig, DisorderShape, Error};

use crate::{Cli, Command, DisorderFlags};

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    SelfTest(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::SelfTest(msg) => write!(f, "self-test failed: {msg}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::InvalidConfig { .. } | Error::Parse(_)) => 3,
            CliError::Core(Error::Io(_) | Error::Json(_)) => 4,
            CliError::Core(_) => 1,
            CliError::SelfTest(_) => 5,
        }
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Flags that are captured by the manifest's config snapshot or do not
/// affect results, paired with whether they take a value.
const UNRECORDED_FLAGS: [(&str, bool); 8] = [
    ("--config", true),
    ("--out", true),
    ("--threads", true),
    ("--seed", true),
    ("--mixing-angle", true),
    ("--n-atoms", true),
    ("--spec", true),
    ("--verbose", false),
];

/// Arguments after the subcommand name with unrecorded flags removed.
fn recorded_arguments(argv: &[String], subcommand: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut iter = argv.iter().peekable();
    while let Some(arg) = iter.next() {
        if arg == subcommand && out.is_empty() {
            continue;
        }
        if arg == "-v" {
            continue;
        }
        let name = arg.split('=').next().unwrap_or(arg);
        if let Some((_, takes_value)) = UNRECORDED_FLAGS.iter().find(|(f, _)| *f == name) {
            if *takes_value && !arg.contains('=') {
                iter.next();
            }
            continue;
        }
        out.push(arg.clone());
    }
    out
}

struct Output {
    dir: PathBuf,
    format: OutputFormat,
    files: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path, format: OutputFormat) -> CliResult<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Output { dir: dir.to_path_buf(), format, files: Vec::new() })
    }

    fn table<T: Serialize>(&mut self, stem: &str, rows: &[T]) -> CliResult {
        let name = PathBuf::from(format!("{stem}.{}", self.format.extension()));
        let f = std::io::BufWriter::new(std::fs::File::create(self.dir.join(&name))?);
        write_rows(f, rows, self.format)?;
        self.files.push(name);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, stem: &str, value: &T) -> CliResult {
        let name = PathBuf::from(format!("{stem}.json"));
        let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
        text.push('\n');
        std::fs::write(self.dir.join(&name), text)?;
        self.files.push(name);
        Ok(())
    }
}

fn chain_config(cli: &Cli, injected: Option<&serde_json::Value>) -> CliResult<ChainConfig> {
    if let Some(v) = injected.and_then(|v| v.get("chain")) {
        return Ok(serde_json::from_value(v.clone()).map_err(Error::from)?);
    }
    let mut config = match &cli.config {
        Some(path) => ChainConfig::from_path(path)?,
        None => ChainConfig::standard(205, 0.0),
    };
    if let Some(theta) = cli.mixing_angle {
        config.mixing_angle = theta;
    }
    if let Some(n) = cli.n_atoms {
        config.n_atoms = n;
    }
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    Ok(config)
}

pub fn run(cli: Cli, argv: Vec<String>, injected: Option<serde_json::Value>) -> CliResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::config("threads", "must be positive").into());
        }
        // A second call (replay) finds the pool already built; results do
        // not depend on its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let started = Instant::now();
    let (name, conventions_shape, config_snapshot, mut out) = match &cli.command {
        Command::Replay(args) => return replay(&cli, &args.manifest),
        Command::Verify => return crate::verify::run(),
        Command::Disorder(args) => {
            let spec = ensemble_spec(&cli, args, injected.as_ref())?;
            let mut out = Output::new(&cli.out, cli.format.into())?;
            let shape = spec.disorder_shape;
            cmd_disorder(&spec, args.pair_theta, &mut out)?;
            ("disorder", shape, serde_json::json!({ "ensemble": spec }), out)
        }
        command => {
            let config = chain_config(&cli, injected.as_ref())?;
            let chain = config.clone().validate()?;
            let mut out = Output::new(&cli.out, cli.format.into())?;
            let (name, shape, result) = match command {
                Command::Dispersion(a) => ("dispersion", DisorderShape::Uniform, cmd_dispersion(&chain, a, &mut out)),
                Command::Transmit(a) => ("transmit", a.disorder.disorder_shape.into(), cmd_transmit(&chain, a, &mut out)),
                Command::Evolve(a) => ("evolve", a.disorder.disorder_shape.into(), cmd_evolve(&chain, a, &mut out)),
                _ => unreachable!(),
            };
            let snapshot = serde_json::json!({ "chain": config });
            // The manifest is written even when a self-check fails.
            finish(&cli, &argv, name, shape, snapshot, &mut out, started)?;
            return result;
        }
    };
    finish(&cli, &argv, name, conventions_shape, config_snapshot, &mut out, started)
}

fn finish(
    cli: &Cli,
    argv: &[String],
    name: &str,
    shape: DisorderShape,
    config: serde_json::Value,
    out: &mut Output,
    started: Instant,
) -> CliResult {
    let seed = config
        .get("chain")
        .and_then(|c| c.get("seed"))
        .or_else(|| config.get("ensemble").and_then(|e| e.get("master_seed")))
        .and_then(|s| s.as_u64());
    let manifest = RunManifest {
        subcommand: name.to_string(),
        arguments: recorded_arguments(argv, name),
        config,
        seed,
        conventions: Conventions::current(&shape.to_string()),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        outputs: out.files.clone(),
    };
    manifest.write(&out.dir)?;
    log::info!("wrote {} files and the manifest to {}", out.files.len(), cli.out.display());
    Ok(())
}

fn replay(cli: &Cli, manifest_path: &Path) -> CliResult {
    let manifest = RunManifest::read(manifest_path)?;
    let mut argv = vec![manifest.subcommand.clone()];
    argv.extend(manifest.arguments.iter().cloned());
    argv.push("--out".into());
    argv.push(cli.out.display().to_string());
    let replayed = Cli::try_parse_from(std::iter::once("chainwave".to_string()).chain(argv.iter().cloned()))
        .map_err(|e| Error::Domain(format!("manifest arguments do not parse: {e}")))?;
    run(replayed, argv, Some(manifest.config))
}

fn cmd_dispersion(chain: &Chain, args: &crate::DispersionArgs, out: &mut Output) -> CliResult {
    if args.k_points < 3 {
        return Err(Error::config("k_points", "need at least 3 points").into());
    }
    let grid = default_k_grid(chain, args.k_points);
    let bands = bloch_bands(chain, &grid)?;
    out.table("bands", &band_rows(&bands))?;
    match transparency_window(&bands) {
        Ok(w) => out.json(
            "window",
            &serde_json::json!({ "upper": w.upper, "lower": w.lower, "width": w.width() }),
        )?,
        Err(e) => log::warn!("no transparency window: {e}"),
    }
    if !args.self_test {
        return Ok(());
    }
    let m = grid.len();
    let decoupled = is_decoupled(chain);
    let kc = if decoupled { 0.0 } else { chain.control_wavevector() };
    let period = 2.0 * PI / chain.lattice_const();
    let fold = |q: f64| (q - period * (q / period).round()).abs();
    let mut failures = Vec::new();
    for i in 0..m {
        if decoupled {
            let j = m - 1 - i;
            for (x, y) in [(bands.upper[i], bands.upper[j]), (bands.lower[i], bands.lower[j])] {
                if (x - y).norm() > 1e-9 * x.norm().max(1.0) {
                    failures.push(format!("k → −k asymmetry at k = {}", grid[i]));
                }
            }
        }
        let guided = fold(grid[i] - kc) > chain.k0() * (1.0 + 1e-9) && fold(grid[i] + kc) > chain.k0() * (1.0 + 1e-9);
        if guided && (bands.upper[i].im.abs() >= GUIDED_TOLERANCE || bands.lower[i].im.abs() >= GUIDED_TOLERANCE) {
            failures.push(format!("guided mode loses at k = {}", grid[i]));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::SelfTest(format!("{} band checks failed, first: {}", failures.len(), failures[0])))
    }
}

fn disorder_realization(chain: &Chain, flags: &DisorderFlags) -> CliResult<Option<chainwave::DisorderRealization>> {
    if flags.disorder_w == 0.0 {
        return Ok(None);
    }
    let seed = chain.config().seed.unwrap_or(0);
    Ok(Some(disorder_sample(seed, flags.disorder_w, chain.n_atoms(), flags.disorder_shape.into())?))
}

fn cmd_transmit(chain: &Chain, args: &crate::TransmitArgs, out: &mut Output) -> CliResult {
    let couplings = build_couplings(chain);
    let disorder = disorder_realization(chain, &args.disorder)?;
    let h = assemble(chain, &couplings, disorder.as_ref())?;
    let modes = decay_modes(&couplings)?;
    let (lo, hi) = match (args.e_min, args.e_max) {
        (Some(lo), Some(hi)) => (lo, hi),
        (lo, hi) => {
            let w = chain_transparency_window(chain)?;
            let low = w.upper.0.min(w.lower.0) - 1.0;
            let high = w.upper.1.max(w.lower.1) + 1.0;
            (lo.unwrap_or(low), hi.unwrap_or(high))
        }
    };
    if !(hi > lo) || args.n_points < 2 {
        return Err(Error::config("e_max", "need e_max > e_min and at least two points").into());
    }
    let to = args.to.unwrap_or(chain.n_atoms() - 1);
    let energies: Vec<f64> =
        (0..args.n_points).map(|i| lo + (hi - lo) * i as f64 / (args.n_points - 1) as f64).collect();
    let scatterer = Scatterer::new(&h, &modes)?;
    let rows = spectrum_scan(&scatterer, &energies, args.from, to, Some(args.smoothing))?;
    let table: Vec<TransmitRow> = rows.iter().map(TransmitRow::from).collect();
    out.table("transmit", &table)?;
    let peak = rows.iter().map(|r| r.forward.max(r.backward)).fold(0.0, f64::max);
    let asymmetry = rows.iter().map(|r| (r.forward - r.backward).abs()).fold(0.0, f64::max);
    let worst = rows.iter().map(|r| r.unitarity_defect).fold(0.0, f64::max);
    out.json(
        "reciprocity",
        &serde_json::json!({
            "reciprocity_defect": reciprocity_defect(chain, &couplings)?,
            "max_abs_asymmetry": asymmetry,
            "max_relative_asymmetry": if peak > 0.0 { asymmetry / peak } else { 0.0 },
            "max_unitarity_defect": worst,
        }),
    )?;
    if worst >= 1e-8 {
        return Err(CliError::SelfTest(format!("unitarity defect {worst:.3e} ≥ 1e-8")));
    }
    Ok(())
}

#[derive(Serialize)]
struct SnapshotRow {
    index: usize,
    t: f64,
    norm: f64,
    edge_left: f64,
    edge_right: f64,
}

fn cmd_evolve(chain: &Chain, args: &crate::EvolveArgs, out: &mut Output) -> CliResult {
    let couplings = build_couplings(chain);
    let disorder = disorder_realization(chain, &args.disorder)?;
    let h = assemble(chain, &couplings, disorder.as_ref())?;
    let params = SpinWave {
        center_site: args.center_site,
        width_sq: args.width_sq,
        wavevector: args.wavevector,
        excited_fraction: args.excited_fraction,
    };
    let initial = spin_wave(chain, &params)?;
    let mut times = match &args.times {
        Some(t) => t.clone(),
        None if initial.excited_population() == 0.0 => vec![0.0],
        None => {
            let b = bounce_times(chain, &initial)?;
            out.json("bounce_times", &b)?;
            b.as_array().to_vec()
        }
    };
    times.sort_by(f64::total_cmp);
    let propagator = Propagator::new(&h)?;
    let snapshots = evolve_at(&initial, &propagator, &times)?;
    out.table("populations", &population_rows(&snapshots))?;
    out.table("norm", &norm_rows(&snapshots))?;
    let mut momentum = Vec::new();
    for s in &snapshots {
        momentum.extend(momentum_rows(s.time, &momentum_distribution(chain, s)?));
    }
    out.table("momentum", &momentum)?;
    let grid = PlanarGrid::xz(chain, args.grid_points);
    let mut summary = Vec::new();
    for (i, s) in snapshots.iter().enumerate() {
        let intensity = far_field_intensity(chain, &s.amps, &grid.points)?;
        out.table(&format!("intensity_{i}"), &intensity_rows(&grid.points, &intensity))?;
        let (edge_left, edge_right) = edge_intensities(chain, &grid.points, &intensity);
        summary.push(SnapshotRow { index: i, t: s.time, norm: s.excited_population(), edge_left, edge_right });
    }
    out.table("snapshots", &summary)?;
    let rising = snapshots.windows(2).any(|w| w[1].excited_population() > w[0].excited_population() * (1.0 + 1e-12));
    if rising || initial.norm() > 1.0 + 1e-10 {
        return Err(CliError::SelfTest("excited population increased between snapshots".into()));
    }
    Ok(())
}

fn ensemble_spec(
    cli: &Cli,
    args: &crate::DisorderArgs,
    injected: Option<&serde_json::Value>,
) -> CliResult<EnsembleSpec> {
    if let Some(v) = injected.and_then(|v| v.get("ensemble")) {
        return Ok(serde_json::from_value(v.clone()).map_err(Error::from)?);
    }
    let mut spec = match &args.spec {
        Some(path) => EnsembleSpec::from_path(path)?,
        None => {
            let mut spec = EnsembleSpec::standard(chain_config(cli, None)?, 0);
            let n = spec.base_config.n_atoms;
            if (spec.spin_wave.center_site as usize) >= n {
                spec.spin_wave.center_site = (n as f64 - 1.0) / 2.0;
            }
            spec
        }
    };
    if args.spec.is_some() {
        if let Some(theta) = cli.mixing_angle {
            spec.base_config.mixing_angle = theta;
        }
        if let Some(n) = cli.n_atoms {
            spec.base_config.n_atoms = n;
        }
    }
    if let Some(seed) = cli.seed.or(if args.spec.is_none() { spec.base_config.seed } else { None }) {
        spec.master_seed = seed;
    }
    if let Some(r) = args.realizations {
        spec.n_realizations = r;
    }
    spec.validate()?;
    Ok(spec)
}

#[derive(Serialize)]
struct VectorRow {
    sqrt_w: f64,
    realization: usize,
    index: usize,
    first: f64,
    second: f64,
}

#[derive(Serialize)]
struct MomentumEnsembleRow {
    sqrt_w: f64,
    realization: usize,
    k: f64,
    psi2_plus: f64,
    psi2_minus: f64,
}

#[derive(Serialize)]
struct PairedRow {
    observable: &'static str,
    sqrt_w: f64,
    mean: f64,
    sem: f64,
    n: usize,
    significance: f64,
}

fn write_ensemble(spec: &EnsembleSpec, res: &EnsembleResult, label: &str, out: &mut Output) -> CliResult {
    let scalars: [(Observable, fn(&RealizationRecord) -> f64); 2] =
        [(Observable::Survival, |r| r.survival), (Observable::KspaceIpr, |r| r.kspace_ipr)];
    for (obs, f) in scalars {
        if spec.records(obs) {
            out.table(&format!("{}_{label}", obs.name()), &observable_rows(&res.records, f))?;
            out.table(&format!("aggregate_{}_{label}", obs.name()), &res.aggregates(spec, f))?;
        }
    }
    if spec.records(Observable::Populations) {
        let rows: Vec<VectorRow> = res
            .records
            .iter()
            .flat_map(|r| {
                r.populations.iter().flatten().enumerate().map(move |(index, p)| VectorRow {
                    sqrt_w: r.sqrt_w,
                    realization: r.realization,
                    index,
                    first: p.0,
                    second: p.1,
                })
            })
            .collect();
        out.table(&format!("populations_{label}"), &rows)?;
    }
    if spec.records(Observable::Momentum) {
        let rows: Vec<MomentumEnsembleRow> = res
            .records
            .iter()
            .flat_map(|r| {
                r.momentum.iter().flatten().map(move |m| MomentumEnsembleRow {
                    sqrt_w: r.sqrt_w,
                    realization: r.realization,
                    k: m.0,
                    psi2_plus: m.1,
                    psi2_minus: m.2,
                })
            })
            .collect();
        out.table(&format!("momentum_{label}"), &rows)?;
    }
    Ok(())
}

fn cmd_disorder(spec: &EnsembleSpec, pair_theta: Option<f64>, out: &mut Output) -> CliResult {
    let base = spec.base_config.clone();
    let theta_b = pair_theta.unwrap_or(if base.mixing_angle.sin().abs() < 1e-12 { PI / 4.0 } else { 0.0 });
    let other = ChainConfig { mixing_angle: theta_b, ..base.clone() };
    let report = compare_configs(spec, &base, &other)?;
    write_ensemble(spec, &report.a, "a", out)?;
    write_ensemble(spec, &report.b, "b", out)?;
    let mut paired = Vec::new();
    for (name, diffs) in [("survival", &report.survival), ("kspace_ipr", &report.kspace_ipr)] {
        for d in diffs {
            paired.push(PairedRow {
                observable: name,
                sqrt_w: d.sqrt_w,
                mean: d.mean,
                sem: d.sem,
                n: d.n,
                significance: d.significance,
            });
        }
    }
    out.table("paired", &paired)?;
    out.json(
        "ensemble",
        &serde_json::json!({
            "a": { "mixing_angle": base.mixing_angle, "window_width": report.a.window_width, "failures": report.a.failures },
            "b": { "mixing_angle": theta_b, "window_width": report.b.window_width, "failures": report.b.failures },
            "sqrt_w": spec.w_values.iter().map(|w| w.sqrt()).collect::<Vec<_>>(),
        }),
    )?;
    Ok(())
}
