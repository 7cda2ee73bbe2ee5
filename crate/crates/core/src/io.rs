//! CSV datasets and experiment report files.
//!
//! Covariates: a header row, then one row of `p` numbers per sample.
//! Responses: long format with header `sample_id,row,col,value` and 0-based
//! indices. Each upper-triangle cell must appear; a lower-triangle cell is
//! optional and, when present, must match its mirror within `1e-10`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::SpdMatrix;
use crate::numeric::NumericConfig;
use crate::regression::Dataset;
use crate::simulation::ExperimentReport;

const MIRROR_TOL: f64 = 1e-10;

fn parse_err(file: &str, line: u64, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_string(),
        line: line as usize,
        column,
        message: message.into(),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn load_dataset(covariates: &Path, responses: &Path) -> Result<Dataset> {
    read_dataset(
        open(covariates)?,
        &covariates.display().to_string(),
        open(responses)?,
        &responses.display().to_string(),
    )
}

/// Reads covariates as an `n × p` matrix.
pub fn read_covariates<R: Read>(reader: R, name: &str) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let p = rdr
        .headers()
        .map_err(|e| parse_err(name, 1, 1, e.to_string()))?
        .len();
    let mut values = Vec::new();
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(name, line, 1, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != p {
            return Err(parse_err(name, line, rec.len().min(p) + 1, format!("expected {p} columns, found {}", rec.len())));
        }
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(name, line, c + 1, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(name, line, c + 1, "covariate must be finite"));
            }
            values.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidDataset(format!("{name}: no covariate rows")));
    }
    Ok(DMatrix::from_row_slice(n, p, &values))
}

/// Reads long-format responses for samples `0..n`.
pub fn read_responses<R: Read>(reader: R, name: &str, n: usize) -> Result<Vec<SpdMatrix>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| parse_err(name, 1, 1, e.to_string()))?.clone();
    let expected = ["sample_id", "row", "col", "value"];
    if header.len() != 4 || header.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(parse_err(name, 1, 1, "header must be sample_id,row,col,value"));
    }
    let mut cells: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    let mut d = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(name, line, 1, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(parse_err(name, line, 1, format!("expected 4 columns, found {}", rec.len())));
        }
        let index = |c: usize| -> Result<usize> {
            rec[c]
                .parse::<usize>()
                .map_err(|_| parse_err(name, line, c + 1, format!("not a non-negative integer: {:?}", &rec[c])))
        };
        let (s, r, c) = (index(0)?, index(1)?, index(2)?);
        let v: f64 = rec[3]
            .parse()
            .map_err(|_| parse_err(name, line, 4, format!("not a number: {:?}", &rec[3])))?;
        if !v.is_finite() {
            return Err(parse_err(name, line, 4, "value must be finite"));
        }
        if s >= n {
            return Err(parse_err(name, line, 1, format!("sample_id {s} has no covariate row (n = {n})")));
        }
        if cells.insert((s, r, c), v).is_some() {
            return Err(parse_err(name, line, 1, format!("duplicate cell ({s}, {r}, {c})")));
        }
        d = d.max(r + 1).max(c + 1);
    }
    if d == 0 {
        return Err(Error::MissingCell { sample: 0, row: 0, col: 0 });
    }
    let cfg = NumericConfig::default();
    let mut out = Vec::with_capacity(n);
    for s in 0..n {
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let upper = cells.get(&(s, i, j)).copied();
                let lower = cells.get(&(s, j, i)).copied();
                let v = match (upper, lower) {
                    (Some(a), Some(b)) if i != j && (a - b).abs() > MIRROR_TOL => {
                        return Err(Error::AsymmetricResponse { sample: s, row: i, col: j });
                    }
                    (Some(a), _) => a,
                    (None, Some(b)) if i != j => b,
                    _ => return Err(Error::MissingCell { sample: s, row: i, col: j }),
                };
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        out.push(SpdMatrix::with_config(m, &cfg).map_err(|e| match e {
            Error::NotPositiveDefinite { min_eigenvalue } => Error::ResponseNotPositiveDefinite { sample: s, min_eigenvalue },
            other => other,
        })?);
    }
    Ok(out)
}

pub fn read_dataset<A: Read, B: Read>(covariates: A, cov_name: &str, responses: B, resp_name: &str) -> Result<Dataset> {
    let cov = read_covariates(covariates, cov_name)?;
    let resp = read_responses(responses, resp_name, cov.nrows())?;
    Dataset::new(cov, resp)
}

/// Writes covariates and upper-triangle responses with round-trip precision.
pub fn write_dataset<A: Write, B: Write>(data: &Dataset, covariates: A, responses: B) -> Result<()> {
    let mut w = csv::Writer::from_writer(covariates);
    let header: Vec<String> = (1..=data.p()).map(|j| format!("x{j}")).collect();
    w.write_record(&header).map_err(csv_io)?;
    for i in 0..data.n() {
        let row: Vec<String> = data.covariate(i).iter().map(|v| format!("{v:?}")).collect();
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(responses);
    w.write_record(["sample_id", "row", "col", "value"]).map_err(csv_io)?;
    for (s, q) in data.responses().iter().enumerate() {
        let m = q.as_matrix();
        for i in 0..data.d() {
            for j in i..data.d() {
                w.write_record([s.to_string(), i.to_string(), j.to_string(), format!("{:?}", m[(i, j)])])
                    .map_err(csv_io)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset(data: &Dataset, covariates: &Path, responses: &Path) -> Result<()> {
    write_dataset(data, File::create(covariates)?, File::create(responses)?)
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Writes the report table as CSV.
pub fn write_report_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&report.columns).map_err(csv_io)?;
    for row in &report.rows {
        w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// The JSON sidecar: everything but the table rows.
pub fn report_sidecar(report: &ExperimentReport) -> serde_json::Value {
    serde_json::json!({
        "kind": report.kind,
        "columns": report.columns,
        "row_count": report.rows.len(),
        "summary": report.summary,
        "metadata": report.metadata,
        "failures": report.failures,
    })
}

/// Writes `<csv_path>` and its JSON sidecar `<json_path>`.
pub fn save_report(report: &ExperimentReport, csv_path: &Path, json_path: &Path) -> Result<()> {
    write_report_csv(report, File::create(csv_path)?)?;
    let mut f = File::create(json_path)?;
    let text = serde_json::to_string_pretty(&report_sidecar(report)).map_err(|e| Error::Io(e.to_string()))?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_identity() {
        let resp = "sample_id,row,col,value\n0,0,0,1\n0,0,1,0\n0,1,1,1\n";
        let q = read_responses(resp.as_bytes(), "r", 1).unwrap();
        assert_eq!(q[0].as_matrix(), &DMatrix::<f64>::identity(2, 2));
    }

    #[test]
    fn fills_from_lower_triangle() {
        let resp = "sample_id,row,col,value\n0,0,0,2\n0,1,0,0.5\n0,1,1,1\n";
        let q = read_responses(resp.as_bytes(), "r", 1).unwrap();
        assert_eq!(q[0].as_matrix()[(0, 1)], 0.5);
    }

    #[test]
    fn located_errors() {
        let resp = "sample_id,row,col,value\n0,0,0,1\n0,0,1,abc\n";
        match read_responses(resp.as_bytes(), "r.csv", 1) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (3, 4)),
            other => panic!("{other:?}"),
        }
        let resp = "sample_id,row,col,value\n0,0,0,1\n0,0,1,0.1\n0,1,0,0.2\n0,1,1,1\n";
        assert!(matches!(read_responses(resp.as_bytes(), "r", 1), Err(Error::AsymmetricResponse { .. })));
        let resp = "sample_id,row,col,value\n0,0,0,1\n0,1,1,1\n";
        assert!(matches!(
            read_responses(resp.as_bytes(), "r", 1),
            Err(Error::MissingCell { sample: 0, row: 0, col: 1 })
        ));
        let resp = "sample_id,row,col,value\n0,0,0,1\n0,0,1,2\n0,1,1,1\n";
        assert!(matches!(
            read_responses(resp.as_bytes(), "r", 1),
            Err(Error::ResponseNotPositiveDefinite { sample: 0, .. })
        ));
        assert!(matches!(read_covariates("x1\nfoo\n".as_bytes(), "c"), Err(Error::Parse { line: 2, column: 1, .. })));
    }
}
