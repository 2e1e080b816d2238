//! Tabular output (CSV or JSON) for every observable and the run manifest
//! written next to each output set.

use faer::MatRef;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::dynamics::{populations, ExcitationState, MomentumDistribution};
use crate::ensemble::RealizationRecord;
use crate::error::{Error, Result};
use crate::scattering::SpectrumRow;
use crate::spectrum::BlochBands;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Domain(format!("unknown output format `{other}`"))),
        }
    }
}

/// Writes `rows` as CSV with a header from the field names, or as a JSON
/// array of objects.
pub fn write_rows<T: Serialize>(w: impl Write, rows: &[T], format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut out = csv::Writer::from_writer(w);
            for r in rows {
                out.serialize(r).map_err(csv_error)?;
            }
            out.flush()?;
        }
        OutputFormat::Json => {
            let mut w = w;
            serde_json::to_writer_pretty(&mut w, rows)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Domain(format!("csv serialization failed: {other:?}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub k: f64,
    pub re_upper: f64,
    pub im_upper: f64,
    pub re_lower: f64,
    pub im_lower: f64,
    pub pol_weight_upper: f64,
}

pub fn band_rows(bands: &BlochBands) -> Vec<BandRow> {
    (0..bands.k_grid.len())
        .map(|i| BandRow {
            k: bands.k_grid[i],
            re_upper: bands.upper[i].re,
            im_upper: bands.upper[i].im,
            re_lower: bands.lower[i].re,
            im_lower: bands.lower[i].im,
            pol_weight_upper: bands.polarization_weight_upper[i],
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmitRow {
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "T_forward")]
    pub forward: f64,
    #[serde(rename = "T_backward")]
    pub backward: f64,
    #[serde(rename = "T_forward_smoothed")]
    pub forward_smoothed: f64,
    #[serde(rename = "T_backward_smoothed")]
    pub backward_smoothed: f64,
    pub unitarity_defect: f64,
}

impl From<&SpectrumRow> for TransmitRow {
    fn from(r: &SpectrumRow) -> Self {
        TransmitRow {
            energy: r.energy,
            forward: r.forward,
            backward: r.backward,
            forward_smoothed: r.forward_smoothed,
            backward_smoothed: r.backward_smoothed,
            unitarity_defect: r.unitarity_defect,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationRow {
    pub t: f64,
    pub n: usize,
    pub p_plus: f64,
    pub p_minus: f64,
}

pub fn population_rows(snapshots: &[ExcitationState]) -> Vec<PopulationRow> {
    snapshots
        .iter()
        .flat_map(|s| {
            populations(s).into_iter().enumerate().map(move |(n, (p_plus, p_minus))| PopulationRow {
                t: s.time,
                n,
                p_plus,
                p_minus,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub t: f64,
    pub norm: f64,
    pub ground: f64,
}

pub fn norm_rows(snapshots: &[ExcitationState]) -> Vec<NormRow> {
    snapshots
        .iter()
        .map(|s| NormRow { t: s.time, norm: s.excited_population(), ground: s.ground_amp.norm_sqr() })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumRow {
    pub t: f64,
    pub k: f64,
    pub psi2_plus: f64,
    pub psi2_minus: f64,
}

pub fn momentum_rows(t: f64, m: &MomentumDistribution) -> Vec<MomentumRow> {
    (0..m.k.len()).map(|j| MomentumRow { t, k: m.k[j], psi2_plus: m.plus[j], psi2_minus: m.minus[j] }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityRow {
    pub x: f64,
    pub z: f64,
    #[serde(rename = "I")]
    pub intensity: f64,
}

pub fn intensity_rows(points: &[[f64; 3]], values: &[f64]) -> Vec<IntensityRow> {
    points.iter().zip(values).map(|(p, v)| IntensityRow { x: p[0], z: p[2], intensity: *v }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableRow {
    pub sqrt_w: f64,
    pub realization: usize,
    pub value: f64,
}

pub fn observable_rows(records: &[RealizationRecord], f: impl Fn(&RealizationRecord) -> f64) -> Vec<ObservableRow> {
    records.iter().map(|r| ObservableRow { sqrt_w: r.sqrt_w, realization: r.realization, value: f(r) }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub row: usize,
    pub col: usize,
    pub re: f64,
    pub im: f64,
}

pub fn matrix_rows(m: MatRef<'_, C64>) -> Vec<MatrixRow> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for row in 0..m.nrows() {
        for col in 0..m.ncols() {
            let v = m[(row, col)];
            out.push(MatrixRow { row, col, re: v.re, im: v.im });
        }
    }
    out
}

/// Conventions that change numbers in the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    /// Sign with which Δ enters H̃.
    pub delta_sign: String,
    pub disorder_shape: String,
    /// Physical momentum carried by polarization s at quasimomentum k.
    pub momentum: String,
    pub transparency_window: String,
    pub s_matrix: String,
}

impl Conventions {
    pub fn current(disorder_shape: &str) -> Self {
        Conventions {
            delta_sign: "+".into(),
            disorder_shape: disorder_shape.into(),
            momentum: "k - s*k_c".into(),
            transparency_window: "widest branch, span of guided band extrema".into(),
            s_matrix: "S = 1 - i t, t = sqrt(gamma) (E - H)^-1 sqrt(gamma)".into(),
        }
    }
}

/// Everything needed to repeat a run; `wall_clock_seconds` is the only
/// field that changes between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Command-line arguments after the subcommand, minus output and
    /// thread-count flags.
    pub arguments: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub conventions: Conventions,
    pub code_version: String,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<PathBuf>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let mut f = std::fs::File::create(&path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_values() {
        let rows = [PopulationRow { t: 0.5, n: 3, p_plus: 0.0, p_minus: 0.25 }];
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows, OutputFormat::Csv).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,n,p_plus,p_minus\n0.5,3,0.0,0.25\n");
    }

    #[test]
    fn renamed_transmit_columns() {
        let rows = [TransmitRow {
            energy: 1.0,
            forward: 0.1,
            backward: 0.2,
            forward_smoothed: 0.1,
            backward_smoothed: 0.2,
            unitarity_defect: 1e-15,
        }];
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows, OutputFormat::Csv).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("E,T_forward,T_backward,T_forward_smoothed,T_backward_smoothed,unitarity_defect\n"));
    }

    #[test]
    fn json_rows_parse_back() {
        let rows = [MatrixRow { row: 0, col: 1, re: 0.5, im: -0.25 }];
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows, OutputFormat::Json).unwrap();
        let back: Vec<MatrixRow> = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn format_parsing() {
        assert_eq!("json".parse::<OutputFormat>().unwrap(), OutputFormat::Json);
        assert!("xml".parse::<OutputFormat>().is_err());
    }
}
