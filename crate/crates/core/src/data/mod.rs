//! Datasets, ingestion, preprocessing, splitting and result records.

mod csvio;
mod preprocess;
mod records;
mod split;

use serde::{Deserialize, Serialize};

pub use csvio::{load_csv, read_csv, read_table, save_csv, write_csv, CsvOptions, LabelColumn, LoadReport, Table, TaskHint};
pub use preprocess::{preprocess, Preprocessor};
pub use records::{read_ndjson, write_ndjson, Record};
pub use split::{split, split_indices, SplitIndices, SplitSpec};

use crate::error::{Error, Result};

/// Dense column-major matrix; column `j` is the contiguous slice
/// `data[j*n_rows..(j+1)*n_rows]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl ColMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        ColMatrix { n_rows, n_cols, data: vec![0.0; n_rows * n_cols] }
    }

    pub fn from_col_major(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::domain(format!(
                "expected {} entries for a {n_rows}x{n_cols} matrix, got {}",
                n_rows * n_cols,
                data.len()
            )));
        }
        Ok(ColMatrix { n_rows, n_cols, data })
    }

    pub fn from_columns(n_rows: usize, columns: Vec<Vec<f64>>) -> Result<Self> {
        let n_cols = columns.len();
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (j, c) in columns.into_iter().enumerate() {
            if c.len() != n_rows {
                return Err(Error::domain(format!("column {j} has {} rows, expected {n_rows}", c.len())));
            }
            data.extend(c);
        }
        Ok(ColMatrix { n_rows, n_cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut m = ColMatrix::zeros(n_rows, n_cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_cols {
                return Err(Error::domain(format!("row {i} has {} entries, expected {n_cols}", r.len())));
            }
            for (j, &v) in r.iter().enumerate() {
                m.data[j * n_rows + i] = v;
            }
        }
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n_rows..(j + 1) * self.n_rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.n_rows..(j + 1) * self.n_rows]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n_rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.n_rows + i] = v;
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n_cols).map(|j| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `X·θ` for a coefficient vector of length `n_cols`.
    pub fn matvec(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        for (j, &t) in theta.iter().enumerate().take(self.n_cols) {
            if t != 0.0 {
                for (o, &x) in out.iter_mut().zip(self.col(j)) {
                    *o += x * t;
                }
            }
        }
        out
    }

    /// Rows selected by `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> ColMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols);
        for j in 0..self.n_cols {
            let col = self.col(j);
            data.extend(indices.iter().map(|&i| col[i]));
        }
        ColMatrix { n_rows: indices.len(), n_cols: self.n_cols, data }
    }

    /// Appends a constant column (used for the intercept).
    pub fn with_constant_column(&self, value: f64) -> ColMatrix {
        let mut data = self.data.clone();
        data.extend(std::iter::repeat_n(value, self.n_rows));
        ColMatrix { n_rows: self.n_rows, n_cols: self.n_cols + 1, data }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_row_norm(&self) -> f64 {
        let mut sq = vec![0.0; self.n_rows];
        for j in 0..self.n_cols {
            for (s, x) in sq.iter_mut().zip(self.col(j)) {
                *s += x * x;
            }
        }
        sq.into_iter().fold(0.0, f64::max).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Regression,
    /// Labels are stored as −1/+1.
    Binary,
    /// Labels are class indices `0..k`.
    Multiclass { k: usize },
}

impl Task {
    pub fn is_classification(&self) -> bool {
        !matches!(self, Task::Regression)
    }

    pub fn n_classes(&self) -> Option<usize> {
        match self {
            Task::Regression => None,
            Task::Binary => Some(2),
            Task::Multiclass { k } => Some(*k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    /// Values are modality codes `0..modalities.len()` in first-appearance order.
    Categorical { modalities: Vec<String> },
    /// 0/1 indicator produced by one-hot encoding `source`.
    OneHot { source: String, modality: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnMeta {
    pub fn continuous(name: impl Into<String>) -> Self {
        ColumnMeta { name: name.into(), kind: ColumnKind::Continuous }
    }
}

/// Features, labels and column metadata. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: ColMatrix,
    pub labels: Vec<f64>,
    pub columns: Vec<ColumnMeta>,
    pub label_name: String,
    pub task: Task,
    /// Original class names for classification tasks; class `c` (or −1/+1 for
    /// binary tasks, in that order) maps to `classes[c]`.
    pub classes: Vec<String>,
}

impl Dataset {
    pub fn new(features: ColMatrix, labels: Vec<f64>, task: Task) -> Result<Self> {
        let columns = (0..features.n_cols()).map(|j| ColumnMeta::continuous(format!("x{j}"))).collect();
        let classes = match task {
            Task::Regression => Vec::new(),
            Task::Binary => vec!["-1".into(), "1".into()],
            Task::Multiclass { k } => (0..k).map(|c| c.to_string()).collect(),
        };
        let ds = Dataset { features, labels, columns, label_name: "y".into(), task, classes };
        ds.validate()?;
        Ok(ds)
    }

    pub fn regression(features: ColMatrix, labels: Vec<f64>) -> Result<Self> {
        Self::new(features, labels, Task::Regression)
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.features.n_rows() {
            return Err(Error::domain(format!(
                "{} labels for {} rows",
                self.labels.len(),
                self.features.n_rows()
            )));
        }
        if self.columns.len() != self.features.n_cols() {
            return Err(Error::domain("column metadata does not match the feature matrix"));
        }
        if self.features.as_slice().iter().any(|v| !v.is_finite()) || self.labels.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("dataset contains non-finite values"));
        }
        let ok_label = |y: f64| match self.task {
            Task::Regression => true,
            Task::Binary => y == 1.0 || y == -1.0,
            Task::Multiclass { k } => y >= 0.0 && y.fract() == 0.0 && (y as usize) < k,
        };
        if let Some(bad) = self.labels.iter().find(|&&y| !ok_label(y)) {
            return Err(Error::domain(format!("label {bad} does not fit task {:?}", self.task)));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.features.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            columns: self.columns.clone(),
            label_name: self.label_name.clone(),
            task: self.task,
            classes: self.classes.clone(),
        }
    }

    pub fn with_columns(mut self, columns: Vec<ColumnMeta>) -> Result<Self> {
        self.columns = columns;
        self.validate()?;
        Ok(self)
    }
}
