//! Tabular datasets: CSV ingestion, z-score normalization, seeded splits.
//!
//! A [`Dataset`] is a feature matrix with named columns plus a raw response
//! vector. Normalization is z-score (center = column mean, scale = population
//! standard deviation), fit on the training partition and applied unchanged
//! to calibration and validation. The response is never normalized, so
//! interval widths downstream stay in response units.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Feature matrix, response vector, and column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    response: Vec<f64>,
    column_names: Vec<String>,
}

impl Dataset {
    /// Assembles a dataset, checking shape agreement and that every value is
    /// finite.
    pub fn new(features: Matrix, response: Vec<f64>, column_names: Vec<String>) -> Result<Self> {
        if features.n_rows() == 0 {
            return Err(Error::Empty("dataset"));
        }
        if features.n_cols() == 0 {
            return Err(Error::Empty("feature set"));
        }
        if response.len() != features.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: features.n_rows(),
                got: response.len(),
            });
        }
        if column_names.len() != features.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: features.n_cols(),
                got: column_names.len(),
            });
        }
        if !features.all_finite() || !response.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig(
                "dataset values must be finite".to_string(),
            ));
        }
        Ok(Dataset {
            features,
            response,
            column_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Feature row `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// New dataset containing the given rows, in order.
    fn take_rows(&self, indices: &[usize]) -> Result<Dataset> {
        let mut m = Matrix::zeros(indices.len(), self.n_features());
        let mut y = Vec::with_capacity(indices.len());
        for (out, &i) in indices.iter().enumerate() {
            m.row_mut(out).copy_from_slice(self.row(i));
            y.push(self.response[i]);
        }
        Dataset::new(m, y, self.column_names.clone())
    }
}

/// Reads a CSV file with a header row, pulling `response_column` out as the
/// response and keeping every other column as a feature, in file order.
///
/// Rows containing non-numeric, missing, or non-finite cells are rejected
/// with the offending row and column named.
pub fn load_csv(path: &Path, response_column: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header = reader.headers()?.clone();
    let response_idx = header
        .iter()
        .position(|name| name == response_column)
        .ok_or_else(|| Error::MissingResponseColumn(response_column.to_string()))?;
    let column_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != response_idx)
        .map(|(_, name)| name.to_string())
        .collect();
    if column_names.is_empty() {
        return Err(Error::Empty("feature set"));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut response = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(column_names.len());
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::BadCell {
                row: row_idx,
                column: header.get(j).unwrap_or("?").to_string(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::BadCell {
                    row: row_idx,
                    column: header.get(j).unwrap_or("?").to_string(),
                    value: cell.to_string(),
                });
            }
            if j == response_idx {
                response.push(value);
            } else {
                row.push(value);
            }
        }
        if row.len() != column_names.len() || response.len() != row_idx + 1 {
            return Err(Error::BadCell {
                row: row_idx,
                column: "<missing>".to_string(),
                value: String::new(),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    Dataset::new(Matrix::from_rows(&rows)?, response, column_names)
}

/// Writes the dataset back to CSV with the response in a final `y` column
/// (or under `response_name` when given).
pub fn write_csv(dataset: &Dataset, path: &Path, response_name: &str) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = dataset.column_names().iter().map(String::as_str).collect();
    header.push(response_name);
    writer.write_record(&header)?;
    for i in 0..dataset.n_rows() {
        let mut record: Vec<String> = dataset.row(i).iter().map(|v| format!("{v}")).collect();
        record.push(format!("{}", dataset.response()[i]));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Per-column z-score parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    center: Vec<f64>,
    scale: Vec<f64>,
}

impl Normalizer {
    /// Fits centers and scales on `d`. A constant column gets scale 1, which
    /// leaves it all-zero after centering.
    pub fn fit(d: &Dataset) -> Result<Self> {
        if d.n_rows() < 2 {
            return Err(Error::TooFew {
                what: "rows",
                needed: 2,
                got: d.n_rows(),
            });
        }
        let n = d.n_rows() as f64;
        let mut center = Vec::with_capacity(d.n_features());
        let mut scale = Vec::with_capacity(d.n_features());
        for j in 0..d.n_features() {
            let mean = (0..d.n_rows()).map(|i| d.features.get(i, j)).sum::<f64>() / n;
            let var = (0..d.n_rows())
                .map(|i| {
                    let delta = d.features.get(i, j) - mean;
                    delta * delta
                })
                .sum::<f64>()
                / n;
            let std = var.sqrt();
            center.push(mean);
            scale.push(if std > 0.0 { std } else { 1.0 });
        }
        Ok(Normalizer { center, scale })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// Transforms every feature to `(x - center) / scale`; the response is
    /// untouched.
    pub fn apply(&self, d: &Dataset) -> Result<Dataset> {
        self.check_dims(d)?;
        let mut m = Matrix::zeros(d.n_rows(), d.n_features());
        for i in 0..d.n_rows() {
            for j in 0..d.n_features() {
                m.set(i, j, (d.features.get(i, j) - self.center[j]) / self.scale[j]);
            }
        }
        Dataset::new(m, d.response().to_vec(), d.column_names().to_vec())
    }

    /// Inverse of [`Normalizer::apply`].
    pub fn invert(&self, d: &Dataset) -> Result<Dataset> {
        self.check_dims(d)?;
        let mut m = Matrix::zeros(d.n_rows(), d.n_features());
        for i in 0..d.n_rows() {
            for j in 0..d.n_features() {
                m.set(i, j, d.features.get(i, j) * self.scale[j] + self.center[j]);
            }
        }
        Dataset::new(m, d.response().to_vec(), d.column_names().to_vec())
    }

    fn check_dims(&self, d: &Dataset) -> Result<()> {
        if d.n_features() != self.center.len() {
            return Err(Error::DimensionMismatch {
                expected: self.center.len(),
                got: d.n_features(),
            });
        }
        Ok(())
    }
}

/// How to cut a dataset into train, calibration, and validation partitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub cal_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, cal: f64, val: f64, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            train_fraction: train,
            cal_fraction: cal,
            val_fraction: val,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fractions = [self.train_fraction, self.cal_fraction, self.val_fraction];
        if fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(Error::InvalidConfig(
                "split fractions must lie in (0,1)".to_string(),
            ));
        }
        if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(
                "split fractions must sum to 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// Splits `d` into (train, calibration, validation) by a seeded uniform
/// shuffle. Calibration and validation get `floor(fraction * N)` rows each
/// and the remainder goes to training.
pub fn split(d: &Dataset, s: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    s.validate()?;
    let n = d.n_rows();
    let n_cal = (s.cal_fraction * n as f64).floor() as usize;
    let n_val = (s.val_fraction * n as f64).floor() as usize;
    let n_train = n - n_cal - n_val;
    if n_train == 0 || n_cal == 0 || n_val == 0 {
        return Err(Error::EmptyPartition {
            n,
            fractions: [s.train_fraction, s.cal_fraction, s.val_fraction],
        });
    }

    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    indices.shuffle(&mut rng);

    let train = d.take_rows(&indices[..n_train])?;
    let cal = d.take_rows(&indices[n_train..n_train + n_cal])?;
    let val = d.take_rows(&indices[n_train + n_cal..])?;
    Ok((train, cal, val))
}
