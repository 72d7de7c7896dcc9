//! Tabular regression data: CSV ingestion, standardisation, splitting and a
//! synthetic two-drug generator.
//!
//! Feature columns named `<slice>.<index>` are grouped into input slices by
//! their prefix, so a file written by [`save_csv`] for a [`synth_combo`]
//! dataset reloads with its `cell` / `drug_a` / `drug_b` layout intact.
//! Columns without a dot go into a slice called `x`.
//!
//! # Synthetic target
//!
//! For a cell vector `c` (length `C`) and drug vectors `a`, `b` (length `D`),
//! all standard normal,
//!
//! ```text
//! g(c)    = (1/sqrt C) * sum_i [ 0.5 c_i + sin(c_i) ]
//! h(a)    = (1/sqrt D) * sum_j [ 0.5 a_j + 0.25 (a_j^2 - 1) ]
//! q(a, b) = (0.5/sqrt D) * sum_j a_j b_j
//! y       = g(c) + h(a) + h(b) + q(a, b) + noise_std * N(0, 1)
//! ```
//!
//! The terms are mutually uncorrelated, so
//! `Var y = 0.25 + (1 - e^(-2))/2 + e^(-1/2) + 2 * 0.375 + 0.25 + noise_std^2`,
//! see [`synth_target_variance`].

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::InputSlice;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<S> {
    /// One row per observation.
    pub features: Vec<Vec<S>>,
    pub targets: Vec<S>,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub slice_layout: Vec<InputSlice>,
}

impl<S: Scalar> Dataset<S> {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Rows `idx` in the given order.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            slice_layout: self.slice_layout.clone(),
        }
    }

    pub fn target_variance(&self) -> f64 {
        let n = self.len() as f64;
        let mean = self.targets.iter().map(|t| t.as_f64()).sum::<f64>() / n;
        self.targets
            .iter()
            .map(|t| (t.as_f64() - mean).powi(2))
            .sum::<f64>()
            / n
    }
}

/// Groups consecutive feature columns by the text before their last `.`.
pub fn infer_slices(feature_names: &[String]) -> Vec<InputSlice> {
    let prefix = |name: &str| match name.rfind('.') {
        Some(i) if i > 0 => name[..i].to_string(),
        _ => "x".to_string(),
    };
    let mut slices: Vec<InputSlice> = Vec::new();
    let mut seen = HashSet::new();
    for (i, name) in feature_names.iter().enumerate() {
        let p = prefix(name);
        match slices.last_mut() {
            Some(last) if last.name == p => last.len += 1,
            _ => {
                let mut label = p.clone();
                let mut k = 1;
                while !seen.insert(label.clone()) {
                    k += 1;
                    label = format!("{p}#{k}");
                }
                slices.push(InputSlice::new(label, i, 1));
            }
        }
    }
    slices
}

/// Parses comma-separated text with a header row; `target_column` becomes the
/// target and every other column a feature, in file order.
pub fn read_csv<S: Scalar, R: Read>(reader: R, target_column: &str, source: &str) -> Result<Dataset<S>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let target_idx = header
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::Table {
            path: source.to_string(),
            row: 0,
            column: target_column.to_string(),
            detail: "target column not found".into(),
        })?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut features = Vec::new();
    let mut targets = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Table {
            path: source.to_string(),
            row,
            column: String::new(),
            detail: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(Error::Table {
                path: source.to_string(),
                row,
                column: String::new(),
                detail: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let mut values = Vec::with_capacity(feature_names.len());
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Table {
                path: source.to_string(),
                row,
                column: header[c].clone(),
                detail: format!("non-numeric value {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Table {
                    path: source.to_string(),
                    row,
                    column: header[c].clone(),
                    detail: format!("non-finite value {cell:?}"),
                });
            }
            if c == target_idx {
                targets.push(S::lit(v));
            } else {
                values.push(S::lit(v));
            }
        }
        features.push(values);
    }
    Ok(Dataset {
        slice_layout: infer_slices(&feature_names),
        features,
        targets,
        feature_names,
        target_name: target_column.to_string(),
    })
}

pub fn load_csv<S: Scalar>(path: impl AsRef<Path>, target_column: &str) -> Result<Dataset<S>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(file), target_column, &path.display().to_string())
}

/// Writes features then target, values in shortest round-trip form.
pub fn write_csv<S: Scalar, W: Write>(data: &Dataset<S>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = data.feature_names.clone();
    header.push(data.target_name.clone());
    w.write_record(&header)?;
    for (row, t) in data.features.iter().zip(&data.targets) {
        let cells = row.iter().chain(std::iter::once(t)).map(|v| v.as_f64().to_string());
        w.write_record(cells)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv<S: Scalar>(data: &Dataset<S>, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(data, std::io::BufWriter::new(file))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub cell_dim: usize,
    pub drug_dim: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            cell_dim: 8,
            drug_dim: 8,
            noise_std: 0.1,
            seed: 0,
        }
    }
}

fn cell_effect(c: &[f64]) -> f64 {
    c.iter().map(|&x| 0.5 * x + x.sin()).sum::<f64>() / (c.len() as f64).sqrt()
}

fn drug_effect(a: &[f64]) -> f64 {
    a.iter().map(|&x| 0.5 * x + 0.25 * (x * x - 1.0)).sum::<f64>() / (a.len() as f64).sqrt()
}

fn drug_interaction(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (a.len() as f64).sqrt()
}

/// Noise-free synthetic target for one `[cell | drug_a | drug_b]` row.
pub fn synth_signal(cell: &[f64], drug_a: &[f64], drug_b: &[f64]) -> f64 {
    cell_effect(cell) + drug_effect(drug_a) + drug_effect(drug_b) + drug_interaction(drug_a, drug_b)
}

/// Analytic variance of the [`synth_combo`] target.
pub fn synth_target_variance(noise_std: f64) -> f64 {
    let e = std::f64::consts::E;
    let cell = 0.25 + (1.0 - e.powi(-2)) / 2.0 + e.powf(-0.5);
    let drug = 0.25 + 0.0625 * 2.0;
    cell + 2.0 * drug + 0.25 + noise_std * noise_std
}

/// Synthetic two-drug dataset; the target is symmetric in the two drugs.
pub fn synth_combo<S: Scalar>(cfg: &SynthConfig) -> Result<Dataset<S>> {
    if cfg.cell_dim == 0 || cfg.drug_dim == 0 {
        return Err(Error::InvalidParameter("synthetic dimensions must be positive".into()));
    }
    if !(cfg.noise_std >= 0.0 && cfg.noise_std.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise_std = {}", cfg.noise_std)));
    }
    let (c, d) = (cfg.cell_dim, cfg.drug_dim);
    let width = c + 2 * d;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut features = Vec::with_capacity(cfg.n);
    let mut targets = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let row: Vec<f64> = (0..width).map(|_| StandardNormal.sample(&mut rng)).collect();
        let noise: f64 = StandardNormal.sample(&mut rng);
        let y = synth_signal(&row[..c], &row[c..c + d], &row[c + d..]) + cfg.noise_std * noise;
        features.push(row.into_iter().map(S::lit).collect());
        targets.push(S::lit(y));
    }
    let feature_names: Vec<String> = (0..c)
        .map(|i| format!("cell.{i}"))
        .chain((0..d).map(|i| format!("drug_a.{i}")))
        .chain((0..d).map(|i| format!("drug_b.{i}")))
        .collect();
    Ok(Dataset {
        slice_layout: infer_slices(&feature_names),
        features,
        targets,
        feature_names,
        target_name: "growth".into(),
    })
}

/// Seeded shuffle split into `(train, test)` with `round(n * test_fraction)`
/// test rows.
pub fn train_test_split<S: Scalar>(data: &Dataset<S>, test_fraction: f64, seed: u64) -> (Dataset<S>, Dataset<S>) {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((data.len() as f64) * test_fraction.clamp(0.0, 1.0)).round() as usize;
    let (test, train) = idx.split_at(n_test);
    (data.select(train), data.select(test))
}

/// Per-feature affine map fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler<S> {
    pub mean: Vec<S>,
    /// Population standard deviation; 1 for zero-variance features.
    pub scale: Vec<S>,
}

impl<S: Scalar> Scaler<S> {
    pub fn fit(data: &Dataset<S>) -> Self {
        let n = S::lit(data.len() as f64);
        let p = data.n_features();
        let mut mean = vec![S::zero(); p];
        for row in &data.features {
            for (m, &x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![S::zero(); p];
        for row in &data.features {
            for ((v, &x), &m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > S::zero() {
                    sd
                } else {
                    S::one()
                }
            })
            .collect();
        // zero-variance features keep their values: no centring either
        let mean = mean
            .into_iter()
            .enumerate()
            .map(|(j, m)| {
                let constant = data.features.iter().all(|r| r[j] == data.features[0][j]);
                if constant {
                    S::zero()
                } else {
                    m
                }
            })
            .collect();
        Self { mean, scale }
    }

    /// Standardises one feature row in place.
    pub fn apply(&self, row: &mut [S]) {
        for ((x, &m), &s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
            *x = (*x - m) / s;
        }
    }

    pub fn transform(&self, data: &Dataset<S>) -> Dataset<S> {
        let mut out = data.clone();
        for row in &mut out.features {
            for ((x, &m), &s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *x = (*x - m) / s;
            }
        }
        out
    }

    pub fn inverse(&self, data: &Dataset<S>) -> Dataset<S> {
        let mut out = data.clone();
        for row in &mut out.features {
            for ((x, &m), &s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *x = *x * s + m;
            }
        }
        out
    }
}

/// Standardises `train` and every dataset in `others` with statistics of
/// `train` alone.
pub fn standardize<S: Scalar>(train: &Dataset<S>, others: &[&Dataset<S>]) -> Result<(Dataset<S>, Vec<Dataset<S>>, Scaler<S>)> {
    if train.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(bad) = others.iter().find(|d| d.n_features() != train.n_features()) {
        return Err(Error::Dimension(format!(
            "dataset has {} features, training data has {}",
            bad.n_features(),
            train.n_features()
        )));
    }
    let scaler = Scaler::fit(train);
    let others = others.iter().map(|d| scaler.transform(d)).collect();
    Ok((scaler.transform(train), others, scaler))
}
