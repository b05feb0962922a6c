use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ColMatrix, ColumnKind, ColumnMeta, Dataset, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

/// How to interpret the label column. `Auto` treats numeric labels as a
/// regression target and non-numeric labels as classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskHint {
    #[default]
    Auto,
    Regression,
    Classification,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    pub label: LabelColumn,
    pub task: TaskHint,
    /// Columns forced to be categorical even when every value parses as a number.
    pub categorical: Vec<String>,
}

impl CsvOptions {
    pub fn label(name: impl Into<String>) -> Self {
        CsvOptions { label: LabelColumn::Name(name.into()), task: TaskHint::Auto, categorical: Vec::new() }
    }

    pub fn task(mut self, task: TaskHint) -> Self {
        self.task = task;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadReport {
    pub dataset: Dataset,
    /// Rows dropped because a cell was missing or non-finite.
    pub dropped_rows: usize,
}

const MISSING: [&str; 4] = ["", "NA", "N/A", "?"];

fn is_missing(cell: &str) -> bool {
    MISSING.contains(&cell)
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok()
}

/// Raw header and trimmed cells, for replaying a fitted preprocessor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn read_table<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            let line = record.position().map_or(r + 2, |p| p.line() as usize);
            return Err(Error::Parse { line, msg: format!("expected {} fields, found {}", header.len(), record.len()) });
        }
        rows.push(record.iter().map(|c| c.trim().to_string()).collect());
    }
    Ok(Table { header, rows })
}

pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<LoadReport> {
    let file = std::fs::File::open(path)?;
    read_csv(file, options)
}

pub fn read_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<LoadReport> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Parse { line: 1, msg: "empty file or missing header".into() });
    }
    let label_idx = match &options.label {
        LabelColumn::Name(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse { line: 1, msg: format!("label column '{name}' not found") })?,
        LabelColumn::Index(i) if *i < header.len() => *i,
        LabelColumn::Index(i) => {
            return Err(Error::Parse { line: 1, msg: format!("label index {i} out of range") });
        }
    };

    let width = header.len();
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut dropped = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(r + 2, |p| p.line() as usize);
        if record.len() != width {
            return Err(Error::Parse {
                line,
                msg: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let cells: Vec<String> = record.iter().map(|c| c.trim().to_string()).collect();
        let bad = cells.iter().any(|c| is_missing(c) || parse_number(c).is_some_and(|v| !v.is_finite()));
        if bad {
            dropped += 1;
        } else {
            rows.push(cells);
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 2, msg: "no data rows".into() });
    }
    let n = rows.len();

    let mut columns = Vec::new();
    let mut data: Vec<Vec<f64>> = Vec::new();
    for (j, name) in header.iter().enumerate() {
        if j == label_idx {
            continue;
        }
        let numeric = !options.categorical.contains(name) && rows.iter().all(|r| parse_number(&r[j]).is_some());
        if numeric {
            data.push(rows.iter().map(|r| parse_number(&r[j]).unwrap_or(f64::NAN)).collect());
            columns.push(ColumnMeta::continuous(name.clone()));
        } else {
            let (codes, modalities) = encode_first_appearance(rows.iter().map(|r| r[j].as_str()));
            data.push(codes);
            columns.push(ColumnMeta { name: name.clone(), kind: ColumnKind::Categorical { modalities } });
        }
    }

    let raw_labels: Vec<&str> = rows.iter().map(|r| r[label_idx].as_str()).collect();
    let numeric_labels: Option<Vec<f64>> = raw_labels.iter().map(|c| parse_number(c)).collect();
    let (labels, task, classes) = match (options.task, numeric_labels) {
        (TaskHint::Regression, None) => {
            return Err(Error::Parse { line: 1, msg: "regression label column is not numeric".into() });
        }
        (TaskHint::Regression | TaskHint::Auto, Some(v)) => (v, Task::Regression, Vec::new()),
        (TaskHint::Classification, Some(v)) => {
            let mut distinct: Vec<f64> = v.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            let names: Vec<String> = distinct.iter().map(|x| format_number(*x)).collect();
            let index: HashMap<u64, usize> = distinct.iter().enumerate().map(|(c, x)| (x.to_bits(), c)).collect();
            let codes = v.iter().map(|x| index[&x.to_bits()] as f64).collect();
            class_labels(codes, names)?
        }
        (TaskHint::Classification | TaskHint::Auto, None) => {
            let (codes, names) = encode_first_appearance(raw_labels.iter().copied());
            class_labels(codes, names)?
        }
    };

    let features = ColMatrix::from_columns(n, data)?;
    let dataset = Dataset { features, labels, columns, label_name: header[label_idx].clone(), task, classes };
    dataset.validate()?;
    Ok(LoadReport { dataset, dropped_rows: dropped })
}

fn class_labels(codes: Vec<f64>, names: Vec<String>) -> Result<(Vec<f64>, Task, Vec<String>)> {
    match names.len() {
        0 | 1 => Err(Error::Parse { line: 1, msg: "classification needs at least two classes".into() }),
        2 => Ok((codes.into_iter().map(|c| if c == 0.0 { -1.0 } else { 1.0 }).collect(), Task::Binary, names)),
        k => Ok((codes, Task::Multiclass { k }, names)),
    }
}

fn encode_first_appearance<'a>(cells: impl Iterator<Item = &'a str>) -> (Vec<f64>, Vec<String>) {
    let mut index: HashMap<&'a str, usize> = HashMap::new();
    let mut names = Vec::new();
    let codes = cells
        .map(|c| {
            let next = index.len();
            let code = *index.entry(c).or_insert_with(|| {
                names.push(c.to_string());
                next
            });
            code as f64
        })
        .collect();
    (codes, names)
}

/// Shortest representation that parses back to the same `f64`.
pub(crate) fn format_number(v: f64) -> String {
    format!("{v:?}").trim_end_matches(".0").to_string()
}

pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(dataset, file)
}

pub fn write_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = dataset.columns.iter().map(|c| c.name.as_str()).collect();
    header.push(&dataset.label_name);
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for i in 0..dataset.n_samples() {
        row.clear();
        for (j, col) in dataset.columns.iter().enumerate() {
            let v = dataset.features.get(i, j);
            row.push(match &col.kind {
                ColumnKind::Categorical { modalities } => modalities[v as usize].clone(),
                _ => format_number(v),
            });
        }
        let y = dataset.labels[i];
        row.push(match dataset.task {
            Task::Regression => format_number(y),
            Task::Binary => dataset.classes[usize::from(y > 0.0)].clone(),
            Task::Multiclass { .. } => dataset.classes[y as usize].clone(),
        });
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, opts: &CsvOptions) -> Result<LoadReport> {
        read_csv(text.as_bytes(), opts)
    }

    #[test]
    fn numeric_csv() {
        let r = read("a,b,y\n1,2,3\n4,5,6\n7,8,9.5\n", &CsvOptions::label("y")).unwrap();
        let ds = r.dataset;
        assert_eq!((ds.n_samples(), ds.n_features()), (3, 2));
        assert_eq!(ds.columns[1].name, "b");
        assert_eq!(ds.features.col(0), &[1.0, 4.0, 7.0]);
        assert_eq!(ds.labels, vec![3.0, 6.0, 9.5]);
        assert_eq!(ds.task, Task::Regression);
        assert_eq!(r.dropped_rows, 0);
    }

    #[test]
    fn categorical_first_appearance() {
        let ds = read("c,x,y\nb,1,0\na,2,1\nb,3,0\n", &CsvOptions::label("y")).unwrap().dataset;
        assert_eq!(ds.columns[0].kind, ColumnKind::Categorical { modalities: vec!["b".into(), "a".into()] });
        assert_eq!(ds.features.col(0), &[0.0, 1.0, 0.0]);
        let ds = read("c,y\na,0\nb,1\na,0\n", &CsvOptions::label("y")).unwrap().dataset;
        assert_eq!(ds.columns[0].kind, ColumnKind::Categorical { modalities: vec!["a".into(), "b".into()] });
    }

    #[test]
    fn nan_rows_are_dropped() {
        let r = read("x,y\n1,2\nNaN,3\n4,5\n", &CsvOptions::label("y")).unwrap();
        assert_eq!(r.dropped_rows, 1);
        assert_eq!(r.dataset.n_samples(), 2);
        let r = read("x,y\n1,\n2,5\n", &CsvOptions::label("y")).unwrap();
        assert_eq!(r.dropped_rows, 1);
    }

    #[test]
    fn label_handling() {
        let opts = CsvOptions::label("y").task(TaskHint::Classification);
        let ds = read("x,y\n1,0\n2,1\n3,1\n", &opts).unwrap().dataset;
        assert_eq!(ds.task, Task::Binary);
        assert_eq!(ds.labels, vec![-1.0, 1.0, 1.0]);
        let ds = read("x,y\n1,cat\n2,dog\n3,bird\n", &CsvOptions::label("y")).unwrap().dataset;
        assert_eq!(ds.task, Task::Multiclass { k: 3 });
        assert_eq!(ds.labels, vec![0.0, 1.0, 2.0]);
        let ds = read("y,x\n5,1\n6,2\n", &CsvOptions { label: LabelColumn::Index(0), ..CsvOptions::label("") })
            .unwrap()
            .dataset;
        assert_eq!(ds.labels, vec![5.0, 6.0]);
    }

    #[test]
    fn parse_errors() {
        let opts = CsvOptions::label("y");
        assert!(matches!(read("x,z\n1,2\n", &opts), Err(Error::Parse { line: 1, .. })));
        match read("x,y\n1,2\n3\n", &opts) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("expected 2 fields"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(read("", &opts).is_err());
        assert!(read("x,y\n", &opts).is_err());
    }

    #[test]
    fn round_trip() {
        let text = "c,x,y\nb,0.1,cat\na,-2.5e-7,dog\nb,3,cat\n";
        let opts = CsvOptions::label("y");
        let ds = read(text, &opts).unwrap().dataset;
        let mut out = Vec::new();
        write_csv(&ds, &mut out).unwrap();
        let back = read(std::str::from_utf8(&out).unwrap(), &opts).unwrap().dataset;
        assert_eq!(back, ds);
    }
}
