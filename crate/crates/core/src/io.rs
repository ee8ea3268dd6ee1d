//! File formats: CSV streams and versioned TOML files for models,
//! mixtures, calibrations, run records, and generator descriptions.
//!
//! Every format is plain text. Floats are written in Rust's shortest
//! round-trip decimal form, so write-then-read is exact and reruns with
//! the same seed produce byte-identical files. CSV files may start with
//! `#`-prefixed comment lines carrying provenance (config echo, seed);
//! readers skip them.

use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::baselines::GaussianParams;
use crate::calibrate::CalibrationResult;
use crate::datagen::NnDatasetDescription;
use crate::detector::RunRecord;
use crate::error::{Error, Result};
use crate::score_net::{Activation, ScoreModel, Standardizer};
use crate::stats::GmmSpec;

pub const MODEL_FORMAT: &str = "scorewatch-model/v1";
pub const GMM_FORMAT: &str = "scorewatch-gmm/v1";
pub const CALIBRATION_FORMAT: &str = "scorewatch-calibration/v1";
pub const RUN_FORMAT: &str = "scorewatch-run/v1";
pub const GENERATOR_FORMAT: &str = "scorewatch-generator/v1";

fn file_err(path: &Path, source: std::io::Error) -> Error {
    Error::File {
        path: path.display().to_string(),
        source,
    }
}

fn toml_parse_err(path: &Path, err: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message: err.to_string(),
    }
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = toml::to_string(value)
        .map_err(|e| Error::invalid(format!("serialization failed: {e}")))?;
    fs::write(path, body).map_err(|e| file_err(path, e))
}

fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let body = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    toml::from_str(&body).map_err(|e| toml_parse_err(path, e))
}

/// In-memory stream: column names plus one row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamData {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl StreamData {
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        Self::from_rows_with_dim(rows, d)
    }

    /// Like [`Self::from_rows`] but keeps the header meaningful when
    /// `rows` is empty.
    pub fn from_rows_with_dim(rows: Vec<Vec<f64>>, dim: usize) -> Self {
        Self {
            columns: (1..=dim).map(|i| format!("x{i}")).collect(),
            rows,
        }
    }
}

/// Reads a stream CSV: optional `#` comment lines, a header row, then
/// rows of finite decimal floats. A leading `t` column holds the time
/// index and is dropped from the data.
pub fn read_stream_csv(path: impl AsRef<Path>) -> Result<StreamData> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let has_time = headers.get(0) == Some("t");
    let skip = usize::from(has_time);
    let columns: Vec<String> = headers.iter().skip(skip).map(str::to_string).collect();
    if columns.is_empty() {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: "no data columns".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line,
            message: e.to_string(),
        })?;
        if record.len() != columns.len() + skip {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line,
                message: format!(
                    "expected {} cells, found {}",
                    columns.len() + skip,
                    record.len()
                ),
            });
        }
        let mut row = Vec::with_capacity(columns.len());
        for cell in record.iter().skip(skip) {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line,
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line,
                    message: format!("non-finite value {v}"),
                });
            }
            row.push(v);
        }
        rows.push(row);
    }
    Ok(StreamData { columns, rows })
}

/// Writes a stream CSV with optional `#` provenance lines before the
/// header.
pub fn write_stream_csv(
    path: impl AsRef<Path>,
    data: &StreamData,
    provenance: &[String],
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for line in provenance {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(&data.columns.join(","));
    out.push('\n');
    for row in &data.rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| file_err(path, e))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    input_dim: usize,
    hidden_dim: usize,
    activation: String,
    sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    standardize_shift: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    standardize_scale: Option<Vec<f64>>,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

/// Serializes a score model to the documented TOML layout
/// (`format = "scorewatch-model/v1"`, parameter arrays row-major).
pub fn save_model(path: impl AsRef<Path>, model: &ScoreModel) -> Result<()> {
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        input_dim: model.input_dim(),
        hidden_dim: model.hidden_dim(),
        activation: model.activation().name().into(),
        sigma: model.sigma(),
        standardize_shift: model.standardizer().map(|s| s.shift.clone()),
        standardize_scale: model.standardizer().map(|s| s.scale.clone()),
        w1: model.w1().to_vec(),
        b1: model.b1().to_vec(),
        w2: model.w2().to_vec(),
        b2: model.b2().to_vec(),
    };
    write_toml(path.as_ref(), &file)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ScoreModel> {
    let path = path.as_ref();
    let file: ModelFile = read_toml(path)?;
    if file.format != MODEL_FORMAT {
        return Err(Error::invalid(format!(
            "{}: unsupported format tag '{}'",
            path.display(),
            file.format
        )));
    }
    let standardizer = match (file.standardize_shift, file.standardize_scale) {
        (Some(shift), Some(scale)) => Some(Standardizer { shift, scale }),
        (None, None) => None,
        _ => {
            return Err(Error::invalid(
                "standardize_shift and standardize_scale must appear together",
            ))
        }
    };
    ScoreModel::from_parts(
        file.input_dim,
        file.hidden_dim,
        Activation::from_name(&file.activation)?,
        file.sigma,
        &file.w1,
        &file.b1,
        &file.w2,
        &file.b2,
        standardizer,
    )
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GmmFile {
    format: String,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    /// Row lists, one per component.
    covariances: Vec<Vec<Vec<f64>>>,
}

pub fn save_gmm(path: impl AsRef<Path>, spec: &GmmSpec) -> Result<()> {
    let file = GmmFile {
        format: GMM_FORMAT.into(),
        weights: spec.components().iter().map(|c| c.weight).collect(),
        means: spec
            .components()
            .iter()
            .map(|c| c.mean.as_slice().to_vec())
            .collect(),
        covariances: spec
            .components()
            .iter()
            .map(|c| {
                (0..c.cov.nrows())
                    .map(|r| (0..c.cov.ncols()).map(|cc| c.cov[(r, cc)]).collect())
                    .collect()
            })
            .collect(),
    };
    write_toml(path.as_ref(), &file)
}

pub fn load_gmm(path: impl AsRef<Path>) -> Result<GmmSpec> {
    let path = path.as_ref();
    let file: GmmFile = read_toml(path)?;
    if file.format != GMM_FORMAT {
        return Err(Error::invalid(format!(
            "{}: unsupported format tag '{}'",
            path.display(),
            file.format
        )));
    }
    GmmSpec::from_parts(&file.weights, &file.means, &file.covariances)
}

/// Fitted Gaussian reference stored as a one-component mixture file.
pub fn save_gaussian(path: impl AsRef<Path>, params: &GaussianParams) -> Result<()> {
    save_gmm(path, &params.to_gmm())
}

pub fn load_gaussian(path: impl AsRef<Path>) -> Result<GaussianParams> {
    let spec = load_gmm(&path)?;
    if spec.components().len() != 1 {
        return Err(Error::invalid(
            "expected a one-component mixture for a Gaussian reference",
        ));
    }
    let c = &spec.components()[0];
    GaussianParams::new(c.mean.as_slice().to_vec(), c.cov.clone())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationFile {
    format: String,
    threshold: f64,
    quantile_level: f64,
    target_arl: f64,
    iterations: usize,
    horizon: usize,
    rng_seed: u64,
    maxima: Vec<f64>,
}

pub fn save_calibration(path: impl AsRef<Path>, result: &CalibrationResult) -> Result<()> {
    let file = CalibrationFile {
        format: CALIBRATION_FORMAT.into(),
        threshold: result.threshold,
        quantile_level: result.quantile_level,
        target_arl: result.config.target_arl,
        iterations: result.config.iterations,
        horizon: result.config.horizon,
        rng_seed: result.config.rng_seed,
        maxima: result.maxima.clone(),
    };
    write_toml(path.as_ref(), &file)
}

pub fn load_calibration(path: impl AsRef<Path>) -> Result<CalibrationResult> {
    let path = path.as_ref();
    let file: CalibrationFile = read_toml(path)?;
    if file.format != CALIBRATION_FORMAT {
        return Err(Error::invalid(format!(
            "{}: unsupported format tag '{}'",
            path.display(),
            file.format
        )));
    }
    Ok(CalibrationResult {
        threshold: file.threshold,
        quantile_level: file.quantile_level,
        maxima: file.maxima,
        config: crate::calibrate::CalibrationConfig {
            target_arl: file.target_arl,
            iterations: file.iterations,
            horizon: file.horizon,
            rng_seed: file.rng_seed,
        },
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSummaryFile {
    format: String,
    alarm_raised: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stopping_time: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    change_point: Option<usize>,
    steps_consumed: usize,
    clipped: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    provenance: Vec<String>,
}

/// Writes a run record as a `(t, statistic, increment)` CSV next to a
/// TOML summary.
pub fn save_run_record(
    csv_path: impl AsRef<Path>,
    summary_path: impl AsRef<Path>,
    record: &RunRecord,
    provenance: &[String],
) -> Result<()> {
    let csv_path = csv_path.as_ref();
    let mut out = String::new();
    for line in provenance {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str("t,statistic,increment\n");
    for (i, &(t, s)) in record.statistic_trace.iter().enumerate() {
        let inc = record.increments.get(i).copied().unwrap_or(f64::NAN);
        out.push_str(&format!("{t},{s},{inc}\n"));
    }
    fs::write(csv_path, out).map_err(|e| file_err(csv_path, e))?;
    let summary = RunSummaryFile {
        format: RUN_FORMAT.into(),
        alarm_raised: record.alarm_raised,
        stopping_time: record.stopping_time,
        change_point: record.change_point,
        steps_consumed: record.steps_consumed,
        clipped: record.clipped,
        provenance: provenance.to_vec(),
    };
    write_toml(summary_path.as_ref(), &summary)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorFile {
    format: String,
    description: NnDatasetDescription,
}

pub fn save_generator(path: impl AsRef<Path>, description: &NnDatasetDescription) -> Result<()> {
    let file = GeneratorFile {
        format: GENERATOR_FORMAT.into(),
        description: description.clone(),
    };
    write_toml(path.as_ref(), &file)
}

pub fn load_generator(path: impl AsRef<Path>) -> Result<NnDatasetDescription> {
    let path = path.as_ref();
    let file: GeneratorFile = read_toml(path)?;
    if file.format != GENERATOR_FORMAT {
        return Err(Error::invalid(format!(
            "{}: unsupported format tag '{}'",
            path.display(),
            file.format
        )));
    }
    Ok(file.description)
}

/// Writes an aligned text table: one header row and stringified cells.
pub fn write_text_table(
    mut w: impl std::io::Write,
    headers: &[&str],
    rows: &[Vec<String>],
) -> std::io::Result<()> {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    for (i, h) in headers.iter().enumerate() {
        write!(w, "{:>width$}  ", h, width = widths[i])?;
    }
    writeln!(w)?;
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            write!(w, "{:>width$}  ", cell, width = widths[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn stream_csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stream.csv");
        let data = StreamData {
            columns: vec!["a".into(), "b".into()],
            rows: vec![
                vec![0.1, -2.5e-17],
                vec![std::f64::consts::PI, 1.0 / 3.0],
            ],
        };
        write_stream_csv(&path, &data, &["seed = 7".into()]).unwrap();
        let back = read_stream_csv(&path).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn stream_csv_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b\n1.0,2.0\n3.0,oops\n").unwrap();
        match read_stream_csv(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn stream_csv_time_column_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "t,x1\n1,0.5\n2,0.75\n").unwrap();
        let data = read_stream_csv(&path).unwrap();
        assert_eq!(data.columns, vec!["x1"]);
        assert_eq!(data.rows, vec![vec![0.5], vec![0.75]]);
    }

    #[test]
    fn model_round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.toml");
        let mut model = ScoreModel::random_init(2, 3, 0.5, 11).unwrap();
        model.set_standardizer(Some(Standardizer {
            shift: vec![0.25, -1.5],
            scale: vec![2.0, 0.125],
        }));
        save_model(&path, &model).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn model_format_tag_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.toml");
        let model = ScoreModel::zeros(1, 1, 1.0).unwrap();
        save_model(&path, &model).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace(MODEL_FORMAT, "other/v9");
        std::fs::write(&path, text).unwrap();
        assert!(load_model(&path).is_err());
    }

    #[test]
    fn model_unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.toml");
        let model = ScoreModel::zeros(1, 1, 1.0).unwrap();
        save_model(&path, &model).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("\nmystery_knob = 3\n");
        std::fs::write(&path, text).unwrap();
        assert!(load_model(&path).is_err());
    }

    #[test]
    fn gmm_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gmm.toml");
        let spec = GmmSpec::from_parts(
            &[0.25, 0.75],
            &[vec![0.1, -0.9], vec![1.0 / 3.0, 2.5]],
            &[
                vec![vec![1.0, 0.2], vec![0.2, 0.8]],
                vec![vec![0.5, 0.0], vec![0.0, 0.5]],
            ],
        )
        .unwrap();
        save_gmm(&path, &spec).unwrap();
        let back = load_gmm(&path).unwrap();
        assert_eq!(back.components().len(), 2);
        for (a, b) in back.components().iter().zip(spec.components()) {
            assert_eq!(a.weight, b.weight);
            assert_eq!(a.mean, b.mean);
            assert_eq!(a.cov, b.cov);
        }
    }

    #[test]
    fn gaussian_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gauss.toml");
        let p = GaussianParams::new(
            vec![1.0, -1.0],
            DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
        )
        .unwrap();
        save_gaussian(&path, &p).unwrap();
        let back = load_gaussian(&path).unwrap();
        assert_eq!(back.mean(), p.mean());
        assert_eq!(back.cov(), p.cov());
    }

    #[test]
    fn calibration_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calib.toml");
        let result = CalibrationResult {
            threshold: 3.25,
            maxima: vec![0.1, 2.0, 3.5],
            quantile_level: 0.9,
            config: crate::calibrate::CalibrationConfig {
                target_arl: 5000.0,
                iterations: 3,
                horizon: 100,
                rng_seed: 9,
            },
        };
        save_calibration(&path, &result).unwrap();
        let back = load_calibration(&path).unwrap();
        assert_eq!(back.threshold, result.threshold);
        assert_eq!(back.maxima, result.maxima);
        assert_eq!(back.config.target_arl, 5000.0);
    }
}
