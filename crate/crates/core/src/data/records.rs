use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One line of a results/trace NDJSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub run_id: String,
    pub algo: String,
    pub estimator: String,
    pub params: serde_json::Value,
    pub cycle: Option<usize>,
    pub metric_name: String,
    /// `None` for error records or non-finite values.
    pub metric_value: Option<f64>,
    pub elapsed_ns: u64,
    pub seed: u64,
}

pub fn write_ndjson<W: Write>(mut writer: W, records: &[Record]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_ndjson<R: BufRead>(reader: R) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ndjson_round_trip() {
        let r = Record {
            run_id: "r1".into(),
            algo: "cgd".into(),
            estimator: "mom".into(),
            params: serde_json::json!({"blocks": 83}),
            cycle: Some(3),
            metric_name: "mse".into(),
            metric_value: Some(0.25),
            elapsed_ns: 12,
            seed: 7,
        };
        let mut buf = Vec::new();
        write_ndjson(&mut buf, &[r.clone(), r.clone()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("{\"run_id\":\"r1\""));
        assert_eq!(read_ndjson(buf.as_slice()).unwrap(), vec![r.clone(), r]);
    }
}
