use serde::{Deserialize, Serialize};

use super::csvio::Table;
use super::{ColMatrix, ColumnKind, ColumnMeta, Dataset, Task};
use crate::error::{Error, Result};

const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ColumnTransform {
    Standardize { mean: f64, std: f64 },
    OneHot { modalities: Vec<String> },
    Keep,
}

/// Standardization and one-hot encoding fitted on one split and replayed on
/// others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    source: Vec<ColumnMeta>,
    transforms: Vec<ColumnTransform>,
    label_scale: Option<(f64, f64)>,
    /// Names of continuous columns whose standard deviation hit the floor.
    pub constant_columns: Vec<String>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl Preprocessor {
    pub fn fit(dataset: &Dataset) -> Self {
        let mut constant_columns = Vec::new();
        let transforms = dataset
            .columns
            .iter()
            .enumerate()
            .map(|(j, meta)| match &meta.kind {
                ColumnKind::Continuous => {
                    let (mean, std) = mean_std(dataset.features.col(j));
                    if std <= STD_FLOOR {
                        constant_columns.push(meta.name.clone());
                    }
                    ColumnTransform::Standardize { mean, std: std.max(STD_FLOOR) }
                }
                ColumnKind::Categorical { modalities } => ColumnTransform::OneHot { modalities: modalities.clone() },
                ColumnKind::OneHot { .. } => ColumnTransform::Keep,
            })
            .collect();
        Preprocessor { source: dataset.columns.clone(), transforms, label_scale: None, constant_columns }
    }

    /// Also standardize regression labels with statistics of the fitting split.
    pub fn with_label_scaling(mut self, dataset: &Dataset) -> Self {
        if dataset.task == Task::Regression {
            let (mean, std) = mean_std(&dataset.labels);
            self.label_scale = Some((mean, std.max(STD_FLOOR)));
        }
        self
    }

    pub fn scale_labels(&self, dataset: &Dataset) -> Dataset {
        let mut out = dataset.clone();
        if let Some((mean, std)) = self.label_scale {
            for y in &mut out.labels {
                *y = (*y - mean) / std;
            }
        }
        out
    }

    /// Maps a value on the scaled label axis back to the original units.
    pub fn unscale_label(&self, v: f64) -> f64 {
        match self.label_scale {
            Some((mean, std)) => v * std + mean,
            None => v,
        }
    }

    /// Names of the produced feature columns.
    pub fn output_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (meta, t) in self.source.iter().zip(&self.transforms) {
            match t {
                ColumnTransform::OneHot { modalities } => {
                    out.extend(modalities.iter().map(|m| format!("{}={}", meta.name, m)));
                }
                _ => out.push(meta.name.clone()),
            }
        }
        out
    }

    /// Feature matrix for raw CSV cells, matching columns by name. Categorical
    /// cells are matched by modality name; unseen modalities encode as all
    /// zeros.
    pub fn transform_table(&self, table: &Table) -> Result<ColMatrix> {
        let n = table.rows.len();
        let mut data = Vec::new();
        for (meta, t) in self.source.iter().zip(&self.transforms) {
            let j = table
                .header
                .iter()
                .position(|h| *h == meta.name)
                .ok_or_else(|| Error::Parse { line: 1, msg: format!("column '{}' not found", meta.name) })?;
            let numbers = || -> Result<Vec<f64>> {
                table
                    .rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| {
                        r[j].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                            line: i + 2,
                            msg: format!("column '{}': '{}' is not a finite number", meta.name, r[j]),
                        })
                    })
                    .collect()
            };
            match t {
                ColumnTransform::Standardize { mean, std } => {
                    data.push(numbers()?.into_iter().map(|v| (v - mean) / std).collect());
                }
                ColumnTransform::OneHot { modalities } => {
                    for m in modalities {
                        data.push(table.rows.iter().map(|r| if r[j] == *m { 1.0 } else { 0.0 }).collect());
                    }
                }
                ColumnTransform::Keep => data.push(numbers()?),
            }
        }
        ColMatrix::from_columns(n, data)
    }

    /// Applies label scaling (if any) and the feature transforms.
    pub fn transform(&self, dataset: &Dataset) -> Result<Dataset> {
        if dataset.columns != self.source {
            return Err(Error::domain("dataset columns differ from the fitted preprocessor"));
        }
        let labeled = self.scale_labels(dataset);
        self.transform_features(&labeled)
    }

    pub fn transform_features(&self, dataset: &Dataset) -> Result<Dataset> {
        let n = dataset.n_samples();
        let mut columns = Vec::new();
        let mut data = Vec::new();
        for (j, (meta, t)) in self.source.iter().zip(&self.transforms).enumerate() {
            let col = dataset.features.col(j);
            match t {
                ColumnTransform::Standardize { mean, std } => {
                    data.push(col.iter().map(|v| (v - mean) / std).collect());
                    columns.push(meta.clone());
                }
                ColumnTransform::OneHot { modalities } => {
                    for (m, name) in modalities.iter().enumerate() {
                        data.push(col.iter().map(|&v| if v as usize == m { 1.0 } else { 0.0 }).collect());
                        columns.push(ColumnMeta {
                            name: format!("{}={}", meta.name, name),
                            kind: ColumnKind::OneHot { source: meta.name.clone(), modality: name.clone() },
                        });
                    }
                }
                ColumnTransform::Keep => {
                    data.push(col.to_vec());
                    columns.push(meta.clone());
                }
            }
        }
        let out = Dataset {
            features: ColMatrix::from_columns(n, data)?,
            labels: dataset.labels.clone(),
            columns,
            label_name: dataset.label_name.clone(),
            task: dataset.task,
            classes: dataset.classes.clone(),
        };
        out.validate()?;
        Ok(out)
    }
}

/// Fits on `dataset` and transforms it.
pub fn preprocess(dataset: &Dataset) -> Result<(Dataset, Preprocessor)> {
    let p = Preprocessor::fit(dataset);
    Ok((p.transform(dataset)?, p))
}
