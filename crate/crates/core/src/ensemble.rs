//! Seeded disorder ensembles of the spin-wave dynamics and paired
//! comparisons between two drive configurations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::chain::{Chain, ChainConfig};
use crate::dynamics::{evolve_at, momentum_distribution, populations, spin_wave, Propagator, SpinWave};
use crate::error::{Error, Result};
use crate::green::{build_couplings, CouplingMatrices};
use crate::hamiltonian::{assemble, disorder_sample, DisorderShape};
use crate::spectrum::chain_transparency_window;

/// Largest tolerated fraction of failed realizations.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Populations,
    Momentum,
    KspaceIpr,
    Survival,
}

impl Observable {
    pub const ALL: [Observable; 4] =
        [Observable::Populations, Observable::Momentum, Observable::KspaceIpr, Observable::Survival];

    pub fn name(self) -> &'static str {
        match self {
            Observable::Populations => "populations",
            Observable::Momentum => "momentum",
            Observable::KspaceIpr => "kspace_ipr",
            Observable::Survival => "survival",
        }
    }
}

fn default_realizations() -> usize {
    50
}

fn default_observation_time() -> f64 {
    13.0
}

fn default_observables() -> Vec<Observable> {
    Observable::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub base_config: ChainConfig,
    /// Disorder variances W in units of Γ₀².
    pub w_values: Vec<f64>,
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    pub master_seed: u64,
    #[serde(default = "default_observation_time")]
    pub observation_time: f64,
    #[serde(default = "default_observables")]
    pub observables: Vec<Observable>,
    #[serde(default)]
    pub disorder_shape: DisorderShape,
    #[serde(default)]
    pub spin_wave: SpinWave,
}

impl EnsembleSpec {
    /// √W ∈ {0, 0.625, 1} Γ₀ at t = 13/Γ₀ with 50 realizations.
    pub fn standard(base_config: ChainConfig, master_seed: u64) -> Self {
        EnsembleSpec {
            base_config,
            w_values: vec![0.0, 0.625f64.powi(2), 1.0],
            n_realizations: default_realizations(),
            master_seed,
            observation_time: default_observation_time(),
            observables: default_observables(),
            disorder_shape: DisorderShape::Uniform,
            spin_wave: SpinWave::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: EnsembleSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("ensemble spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_realizations == 0 {
            return Err(Error::config("n_realizations", "must be positive"));
        }
        if self.w_values.is_empty() {
            return Err(Error::config("w_values", "must not be empty"));
        }
        if let Some(w) = self.w_values.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::config("w_values", format!("variances must be non-negative, got {w}")));
        }
        if !(self.observation_time >= 0.0) || !self.observation_time.is_finite() {
            return Err(Error::config("observation_time", "must be non-negative and finite"));
        }
        let chain = self.base_config.clone().validate()?;
        let centre = self.spin_wave.center_site;
        if !(centre >= 0.0 && centre <= (chain.n_atoms() - 1) as f64) {
            return Err(Error::config("spin_wave", format!("centre site {centre} outside the {}-atom chain", chain.n_atoms())));
        }
        Ok(())
    }

    pub fn records(&self, o: Observable) -> bool {
        self.observables.contains(&o)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-realization seed, a SplitMix64 chain over (master, W index,
/// realization index).
pub fn realization_seed(master: u64, w_index: usize, realization: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ w_index as u64) ^ realization as u64)
}

/// Observables of one disorder realization at the observation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub w_index: usize,
    pub realization: usize,
    pub seed: u64,
    pub sqrt_w: f64,
    /// Σ|c_{ns}|² at the observation time.
    pub survival: f64,
    /// Inverse participation ratio of |ψ₊(k)|² + |ψ₋(k)|².
    pub kspace_ipr: f64,
    pub populations: Option<Vec<(f64, f64)>>,
    pub momentum: Option<Vec<(f64, f64, f64)>>,
}

impl RealizationRecord {
    /// Number of quasimomentum components the state is spread over, 1/IPR.
    pub fn kspace_participation(&self) -> f64 {
        1.0 / self.kspace_ipr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub w_index: usize,
    pub realization: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub sqrt_w: f64,
    pub mean: f64,
    pub sem: f64,
    pub n: usize,
}

/// Mean and standard error of the mean, summed in the given order.
pub fn aggregate(sqrt_w: f64, values: &[f64]) -> Aggregate {
    let n = values.len();
    if n == 0 {
        return Aggregate { sqrt_w, mean: f64::NAN, sem: f64::NAN, n };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sem = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 / n as f64).sqrt()
    } else {
        0.0
    };
    Aggregate { sqrt_w, mean, sem, n }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub config: ChainConfig,
    /// Transparency-window width of the clean chain, Γ₀.
    pub window_width: f64,
    pub records: Vec<RealizationRecord>,
    pub failures: Vec<CellFailure>,
}

impl EnsembleResult {
    pub fn values(&self, w_index: usize, f: impl Fn(&RealizationRecord) -> f64) -> Vec<f64> {
        self.records.iter().filter(|r| r.w_index == w_index).map(f).collect()
    }

    /// Per-W aggregates of a scalar observable.
    pub fn aggregates(&self, spec: &EnsembleSpec, f: impl Fn(&RealizationRecord) -> f64 + Copy) -> Vec<Aggregate> {
        spec.w_values.iter().enumerate().map(|(i, w)| aggregate(w.sqrt(), &self.values(i, f))).collect()
    }
}

/// Clean-chain data shared by all realizations of one configuration.
struct Prepared {
    chain: Chain,
    couplings: CouplingMatrices,
}

fn run_cell(p: &Prepared, spec: &EnsembleSpec, w_index: usize, realization: usize) -> Result<RealizationRecord> {
    let w = spec.w_values[w_index];
    let seed = realization_seed(spec.master_seed, w_index, realization);
    let disorder = disorder_sample(seed, w, p.chain.n_atoms(), spec.disorder_shape)?;
    let h = assemble(&p.chain, &p.couplings, Some(&disorder))?;
    let initial = spin_wave(&p.chain, &spec.spin_wave)?;
    let state = evolve_at(&initial, &Propagator::new(&h)?, &[spec.observation_time])?.remove(0);
    let momentum = momentum_distribution(&p.chain, &state)?;
    Ok(RealizationRecord {
        w_index,
        realization,
        seed,
        sqrt_w: w.sqrt(),
        survival: state.excited_population(),
        kspace_ipr: momentum.ipr_total(),
        populations: spec.records(Observable::Populations).then(|| populations(&state)),
        momentum: spec.records(Observable::Momentum).then(|| {
            momentum.k.iter().zip(&momentum.plus).zip(&momentum.minus).map(|((k, p), m)| (*k, *p, *m)).collect()
        }),
    })
}

fn run_cells(config: &ChainConfig, spec: &EnsembleSpec) -> Result<(Vec<RealizationRecord>, Vec<CellFailure>)> {
    let chain = config.clone().validate()?;
    let prepared = Prepared { couplings: build_couplings(&chain), chain };
    let cells: Vec<(usize, usize)> = (0..spec.w_values.len())
        .flat_map(|w| (0..spec.n_realizations).map(move |r| (w, r)))
        .collect();
    let outcomes: Vec<Result<RealizationRecord>> =
        cells.par_iter().map(|&(w, r)| run_cell(&prepared, spec, w, r)).collect();
    let mut records = Vec::with_capacity(cells.len());
    let mut failures = Vec::new();
    for ((w, r), outcome) in cells.iter().zip(outcomes) {
        match outcome {
            Ok(rec) => records.push(rec),
            Err(e) => {
                log::warn!("realization (W index {w}, #{r}) failed: {e}");
                failures.push(CellFailure { w_index: *w, realization: *r, message: e.to_string() });
            }
        }
    }
    if failures.len() as f64 > MAX_FAILURE_FRACTION * cells.len() as f64 {
        return Err(Error::EnsembleAborted { failed: failures.len(), total: cells.len() });
    }
    Ok((records, failures))
}

pub fn run_ensemble(spec: &EnsembleSpec) -> Result<EnsembleResult> {
    run_ensemble_for(spec, &spec.base_config)
}

/// The ensemble of `spec` with its base configuration replaced.
pub fn run_ensemble_for(spec: &EnsembleSpec, config: &ChainConfig) -> Result<EnsembleResult> {
    spec.validate()?;
    let chain = config.clone().validate()?;
    let window_width = chain_transparency_window(&chain).map(|w| w.width()).unwrap_or(f64::NAN);
    for w in &spec.w_values {
        log::info!("√W = {:.4} Γ₀, transparency window {:.4} Γ₀ (ratio {:.3})", w.sqrt(), window_width, w.sqrt() / window_width);
    }
    let (records, failures) = run_cells(config, spec)?;
    Ok(EnsembleResult { config: config.clone(), window_width, records, failures })
}

/// Paired differences a − b of one observable for each W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedDifference {
    pub sqrt_w: f64,
    pub mean: f64,
    pub sem: f64,
    pub n: usize,
    /// mean/sem; infinite when every difference is identical and nonzero.
    pub significance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairedReport {
    pub a: EnsembleResult,
    pub b: EnsembleResult,
    pub survival: Vec<PairedDifference>,
    pub kspace_ipr: Vec<PairedDifference>,
}

pub fn paired_differences(
    spec: &EnsembleSpec,
    a: &EnsembleResult,
    b: &EnsembleResult,
    f: impl Fn(&RealizationRecord) -> f64,
) -> Vec<PairedDifference> {
    spec.w_values
        .iter()
        .enumerate()
        .map(|(wi, w)| {
            let diffs: Vec<f64> = a
                .records
                .iter()
                .filter(|r| r.w_index == wi)
                .filter_map(|ra| {
                    b.records.iter().find(|rb| rb.w_index == wi && rb.realization == ra.realization).map(|rb| f(ra) - f(rb))
                })
                .collect();
            let agg = aggregate(w.sqrt(), &diffs);
            let significance = if agg.sem > 0.0 {
                agg.mean / agg.sem
            } else if agg.mean == 0.0 {
                0.0
            } else {
                agg.mean.signum() * f64::INFINITY
            };
            PairedDifference { sqrt_w: agg.sqrt_w, mean: agg.mean, sem: agg.sem, n: agg.n, significance }
        })
        .collect()
}

/// Runs both configurations on identical disorder draws.
pub fn compare_configs(spec: &EnsembleSpec, config_a: &ChainConfig, config_b: &ChainConfig) -> Result<PairedReport> {
    if config_a.n_atoms != config_b.n_atoms {
        return Err(Error::DimensionMismatch { expected: config_a.n_atoms, got: config_b.n_atoms });
    }
    if config_a.lattice_const != config_b.lattice_const {
        return Err(Error::config("lattice_const", "paired configurations must share the lattice"));
    }
    let a = run_ensemble_for(spec, config_a)?;
    let b = run_ensemble_for(spec, config_b)?;
    let survival = paired_differences(spec, &a, &b, |r| r.survival);
    let kspace_ipr = paired_differences(spec, &a, &b, |r| r.kspace_ipr);
    Ok(PairedReport { a, b, survival, kspace_ipr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn small_spec(theta: f64) -> EnsembleSpec {
        let mut spec = EnsembleSpec::standard(ChainConfig::standard(24, theta), 7);
        spec.n_realizations = 4;
        spec.observation_time = 2.0;
        spec.spin_wave = SpinWave { center_site: 12.0, width_sq: 10.0, wavevector: 0.0, excited_fraction: 0.2 };
        spec
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = realization_seed(1, 0, 0);
        assert_eq!(a, realization_seed(1, 0, 0));
        assert_ne!(a, realization_seed(1, 0, 1));
        assert_ne!(a, realization_seed(1, 1, 0));
        assert_ne!(a, realization_seed(2, 0, 0));
        assert_ne!(realization_seed(1, 1, 2), realization_seed(1, 2, 1));
    }

    #[test]
    fn clean_realizations_coincide() {
        let spec = small_spec(PI / 4.0);
        let res = run_ensemble(&spec).unwrap();
        let clean = res.values(0, |r| r.survival);
        assert!(clean.iter().all(|v| v.to_bits() == clean[0].to_bits()));
        assert_eq!(res.aggregates(&spec, |r| r.survival)[0].sem, 0.0);
        assert_eq!(res.records.len(), 12);
        assert!(res.failures.is_empty());
    }

    #[test]
    fn rerun_is_bitwise_identical() {
        let spec = small_spec(0.3);
        let a = run_ensemble(&spec).unwrap();
        let b = run_ensemble(&spec).unwrap();
        assert_eq!(serde_json::to_string(&a.records).unwrap(), serde_json::to_string(&b.records).unwrap());
    }

    #[test]
    fn identical_configs_pair_to_zero() {
        let spec = small_spec(PI / 4.0);
        let report = compare_configs(&spec, &spec.base_config, &spec.base_config).unwrap();
        for d in report.survival.iter().chain(&report.kspace_ipr) {
            assert_eq!(d.mean, 0.0);
            assert_eq!(d.sem, 0.0);
        }
    }

    #[test]
    fn mismatched_sizes_are_rejected() {
        let spec = small_spec(0.0);
        let other = ChainConfig::standard(25, 0.0);
        assert!(matches!(compare_configs(&spec, &spec.base_config, &other), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn spec_toml_round_trip_and_validation() {
        let spec = small_spec(0.0);
        let back = EnsembleSpec::from_toml_str(&spec.to_toml_string()).unwrap();
        assert_eq!(back, spec);
        let mut bad = spec.clone();
        bad.w_values = vec![-1.0];
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig { field: "w_values", .. })));
    }

    #[test]
    fn aggregate_statistics() {
        let a = aggregate(0.5, &[1.0, 2.0, 3.0]);
        assert_eq!(a.mean, 2.0);
        assert!((a.sem - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(a.n, 3);
    }
}
