//! Model persistence: a versioned JSON layout storing marginal samples,
//! transforms, correlation sets, and autoregression coefficients. Loading
//! goes through the validating constructors, so a tampered or truncated
//! file fails instead of producing a silently inconsistent model.

use crate::error::{Error, Result};
use crate::lagcorr::LaggedCorrelationSet;
use crate::marginal::{EmpiricalMarginal, PiecewiseTransform};
use crate::pipeline::{FitReport, VstapModel};
use crate::var::VarModel;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufReader, Read, Write};
use std::path::Path;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Serialize, Deserialize)]
struct TransformSchema {
    breakpoints: Vec<f64>,
    intercepts: Vec<f64>,
    slopes: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CorrSchema {
    channels: usize,
    max_lag: usize,
    /// values[i][j][tau]
    values: Vec<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct VarSchema {
    /// Coefficient matrices in lag order, each row-major.
    coeffs: Vec<Vec<Vec<f64>>>,
    /// Row-major noise covariance.
    noise_cov: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ModelSchema {
    schema_version: String,
    channel_names: Vec<String>,
    /// Per-channel sorted marginal samples.
    marginal_samples: Vec<Vec<f64>>,
    transforms: Vec<TransformSchema>,
    target_corr: CorrSchema,
    gaussian_corr: CorrSchema,
    var: VarSchema,
    fit_report: FitReport,
}

fn mat_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_to_mat(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(Error::Format(format!("{what}: empty matrix")));
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Format(format!("{what}: ragged or empty rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn corr_to_schema(c: &LaggedCorrelationSet) -> CorrSchema {
    let (k, p) = (c.channels(), c.max_lag());
    CorrSchema {
        channels: k,
        max_lag: p,
        values: (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| (0..=p).map(|tau| c.get(i, j, tau)).collect())
                    .collect()
            })
            .collect(),
    }
}

fn corr_from_schema(s: &CorrSchema, what: &str) -> Result<LaggedCorrelationSet> {
    let (k, p) = (s.channels, s.max_lag);
    if k == 0 {
        return Err(Error::Format(format!("{what}: zero channels")));
    }
    if s.values.len() != k
        || s.values.iter().any(|row| row.len() != k)
        || s.values
            .iter()
            .flatten()
            .any(|lags| lags.len() != p + 1)
    {
        return Err(Error::Format(format!(
            "{what}: value array does not match {k} channels x lag {p}"
        )));
    }
    for (i, row) in s.values.iter().enumerate() {
        for (j, lags) in row.iter().enumerate() {
            for (tau, v) in lags.iter().enumerate() {
                if !v.is_finite() || v.abs() > 1.0 {
                    return Err(Error::Format(format!(
                        "{what}: entry ({i}, {j}, {tau}) = {v} outside [-1, 1]"
                    )));
                }
            }
            if lags[0] != s.values[j][i][0] {
                return Err(Error::Format(format!(
                    "{what}: lag-0 block is not symmetric at ({i}, {j})"
                )));
            }
        }
        if s.values[i][i][0] != 1.0 {
            return Err(Error::Format(format!(
                "{what}: diagonal lag-0 entry for channel {i} is not 1"
            )));
        }
    }
    Ok(LaggedCorrelationSet::from_fn(k, p, |i, j, tau| {
        s.values[i][j][tau]
    }))
}

fn to_schema(model: &VstapModel) -> ModelSchema {
    ModelSchema {
        schema_version: SCHEMA_VERSION.to_string(),
        channel_names: model.channel_names().to_vec(),
        marginal_samples: model
            .marginals()
            .iter()
            .map(|m| m.values().to_vec())
            .collect(),
        transforms: model
            .transforms()
            .iter()
            .map(|t| TransformSchema {
                breakpoints: t.breakpoints().to_vec(),
                intercepts: t.intercepts().to_vec(),
                slopes: t.slopes().to_vec(),
            })
            .collect(),
        target_corr: corr_to_schema(model.target_corr()),
        gaussian_corr: corr_to_schema(model.gaussian_corr()),
        var: VarSchema {
            coeffs: model.var().coeffs().iter().map(mat_to_rows).collect(),
            noise_cov: mat_to_rows(model.var().noise_cov()),
        },
        fit_report: model.fit_report().clone(),
    }
}

fn from_schema(s: ModelSchema) -> Result<VstapModel> {
    if s.schema_version != SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "unsupported schema version {:?}, expected {SCHEMA_VERSION:?}",
            s.schema_version
        )));
    }
    let marginals = s
        .marginal_samples
        .iter()
        .map(|v| EmpiricalMarginal::new(v))
        .collect::<Result<Vec<_>>>()?;
    let transforms = s
        .transforms
        .into_iter()
        .map(|t| PiecewiseTransform::from_parts(t.breakpoints, t.intercepts, t.slopes))
        .collect::<Result<Vec<_>>>()?;
    let target_corr = corr_from_schema(&s.target_corr, "target correlations")?;
    let gaussian_corr = corr_from_schema(&s.gaussian_corr, "Gaussian correlations")?;
    let coeffs = s
        .var
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, rows)| rows_to_mat(rows, &format!("coefficient matrix {}", i + 1)))
        .collect::<Result<Vec<_>>>()?;
    let noise_cov = rows_to_mat(&s.var.noise_cov, "noise covariance")?;
    let var = VarModel::new(coeffs, noise_cov)?;
    VstapModel::from_parts(
        s.channel_names,
        marginals,
        transforms,
        target_corr,
        gaussian_corr,
        var,
        s.fit_report,
    )
}

/// Serializes a model as pretty JSON.
pub fn save_model<W: Write>(model: &VstapModel, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, &to_schema(model))
        .map_err(|e| Error::Format(e.to_string()))
}

/// Reads a model, revalidating every component.
pub fn load_model<R: Read>(reader: R) -> Result<VstapModel> {
    let schema: ModelSchema =
        serde_json::from_reader(reader).map_err(|e| Error::Format(e.to_string()))?;
    from_schema(schema)
}

/// Writes bytes to `path` atomically: a sibling temp file is written fully
/// and then renamed over the target.
pub fn atomic_write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(format!(".tmp.{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let write_all = (|| -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        Ok(())
    })();
    if let Err(e) = write_all {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::Io(e.to_string())
    })
}

/// Saves a model to a file atomically.
pub fn save_model_path(model: &VstapModel, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    save_model(model, &mut buf)?;
    buf.push(b'\n');
    atomic_write_bytes(path, &buf)
}

/// Loads a model from a file.
pub fn load_model_path(path: &Path) -> Result<VstapModel> {
    let f = fs::File::open(path)?;
    load_model(BufReader::new(f))
}
