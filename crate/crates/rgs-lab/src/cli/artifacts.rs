//! On-disk artifact formats: whitespace-separated matrix/vector text, the
//! trace CSV, and the generation metadata JSON.
//!
//! The text format is a `rows cols` header line followed by one row per
//! line, entries printed with `{:.16e}` so every `f64` survives a round
//! trip bit-for-bit. Vectors are stored as single-column matrices.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::TraceRecord;
use crate::linalg::{DenseMatrix, Vector};
use crate::solvers::Method;
use crate::testgen::{MatrixSpec, RhsMode};

use super::{usage, CliError};

pub const TRACE_CSV_HEADER: &str = "experiment_id,method,trial,k,quantity,ell,value,status";

pub fn format_matrix(a: &DenseMatrix) -> String {
    let mut s = String::new();
    writeln!(s, "{} {}", a.rows(), a.cols()).expect("string writes cannot fail");
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            if j > 0 {
                s.push(' ');
            }
            write!(s, "{:.16e}", a.get(i, j)).expect("string writes cannot fail");
        }
        s.push('\n');
    }
    s
}

pub fn parse_matrix(text: &str) -> Result<DenseMatrix, CliError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| usage("matrix file is empty"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| usage(format!("bad matrix header {header:?}")))
        })
        .collect::<Result<_, _>>()?;
    if dims.len() != 2 {
        return Err(usage(format!(
            "matrix header must be \"rows cols\", got {header:?}"
        )));
    }
    let (rows, cols) = (dims[0], dims[1]);
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| usage(format!("matrix file ends after {r} of {rows} rows")))?;
        let mut count = 0;
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| {
                usage(format!("line {}: bad number {tok:?}", lineno + 1))
            })?;
            data.push(v);
            count += 1;
        }
        if count != cols {
            return Err(usage(format!(
                "line {}: expected {cols} entries, found {count}",
                lineno + 1
            )));
        }
    }
    if let Some((lineno, _)) = lines.next() {
        return Err(usage(format!(
            "line {}: trailing data after {rows} rows",
            lineno + 1
        )));
    }
    DenseMatrix::new(rows, cols, data).map_err(|e| usage(format!("matrix file: {e}")))
}

pub fn format_vector(v: &Vector) -> String {
    let mut s = String::new();
    writeln!(s, "{} 1", v.len()).expect("string writes cannot fail");
    for x in v.as_slice() {
        writeln!(s, "{x:.16e}").expect("string writes cannot fail");
    }
    s
}

pub fn parse_vector(text: &str) -> Result<Vector, CliError> {
    let m = parse_matrix(text)?;
    if m.cols() != 1 {
        return Err(usage(format!(
            "expected a single-column vector file, found {} columns",
            m.cols()
        )));
    }
    Ok(m.col(0))
}

/// Serializes trace records to the CSV contract. Values use the shortest
/// round-trip float formatting; absent `ell`/`value` fields stay empty.
pub fn format_trace_csv(experiment_id: &str, method: Method, records: &[TraceRecord]) -> String {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(TRACE_CSV_HEADER);
    s.push('\n');
    for r in records {
        let ell = r.ell.map(|l| l.to_string()).unwrap_or_default();
        let value = r.value.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            experiment_id,
            method.as_str(),
            r.trial,
            r.k,
            r.quantity.as_str(),
            ell,
            value,
            r.status.as_str()
        )
        .expect("string writes cannot fail");
    }
    s
}

/// One parsed CSV row; the inverse of [`format_trace_csv`] plus whatever a
/// human may have edited in, so fields are kept as loosely typed as the
/// contract allows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCsvRow {
    pub experiment_id: String,
    pub method: String,
    pub trial: u64,
    pub k: usize,
    pub quantity: String,
    pub ell: Option<usize>,
    pub value: Option<f64>,
    pub status: String,
}

pub fn read_trace_csv(text: &str) -> Result<Vec<TraceCsvRow>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    {
        let headers = reader
            .headers()
            .map_err(|e| usage(format!("trace csv: {e}")))?;
        let expected: Vec<&str> = TRACE_CSV_HEADER.split(',').collect();
        let found: Vec<&str> = headers.iter().collect();
        if found != expected {
            return Err(usage(format!(
                "trace csv header mismatch: expected {TRACE_CSV_HEADER:?}, found {:?}",
                found.join(",")
            )));
        }
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<TraceCsvRow>().enumerate() {
        rows.push(rec.map_err(|e| usage(format!("trace csv row {}: {e}", i + 2)))?);
    }
    Ok(rows)
}

pub fn sha256_hex(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hasher
        .finalize()
        .iter()
        .fold(String::with_capacity(64), |mut acc, b| {
            write!(acc, "{b:02x}").expect("string writes cannot fail");
            acc
        })
}

/// Metadata written next to the generated problem, including checksums of
/// the sibling artifact files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenMeta {
    pub experiment_id: String,
    pub matrix: MatrixSpec,
    pub rhs: RhsMode,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub frob_norm: f64,
    pub sigma_max: f64,
    pub sigma_min_positive: Option<f64>,
    pub x_star_norm: f64,
    pub residual_norm: f64,
    pub sha256: GenChecksums,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenChecksums {
    pub matrix_txt: String,
    pub rhs_txt: String,
    pub x_star_txt: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{Quantity, TraceStatus};
    use crate::sampling::RngStream;

    #[test]
    fn matrix_text_round_trips_bit_for_bit() {
        let mut rng = RngStream::new(11, 0);
        let data: Vec<f64> = (0..5 * 3)
            .map(|i| {
                // Mix magnitudes to stress the formatter.
                rng.next_gaussian() * 10f64.powi(i % 7 - 3)
            })
            .collect();
        let a = DenseMatrix::new(5, 3, data).unwrap();
        let text = format_matrix(&a);
        assert!(text.starts_with("5 3\n"));
        let back = parse_matrix(&text).unwrap();
        for i in 0..5 {
            for j in 0..3 {
                assert_eq!(
                    a.get(i, j).to_bits(),
                    back.get(i, j).to_bits(),
                    "entry ({i}, {j}) changed"
                );
            }
        }
    }

    #[test]
    fn vector_text_round_trips() {
        let v = Vector::new(vec![1.0, -2.5e-13, 3.25e17]).unwrap();
        let text = format_vector(&v);
        assert!(text.starts_with("3 1\n"));
        let back = parse_vector(&text).unwrap();
        assert_eq!(v.as_slice(), back.as_slice());
    }

    #[test]
    fn malformed_matrix_text_is_rejected() {
        assert!(parse_matrix("").is_err());
        assert!(parse_matrix("2\n1 2\n").is_err());
        assert!(parse_matrix("2 2\n1 2\n3\n").is_err());
        assert!(parse_matrix("2 2\n1 2\n").is_err());
        assert!(parse_matrix("1 2\n1 2\n3 4\n").is_err());
        assert!(parse_matrix("1 1\nfoo\n").is_err());
        assert!(parse_vector("1 2\n1 2\n").is_err());
    }

    #[test]
    fn trace_csv_round_trips() {
        let records = vec![
            TraceRecord {
                trial: 0,
                k: 0,
                quantity: Quantity::ProjectionSigned,
                ell: Some(3),
                value: Some(-0.12345678901234567),
                status: TraceStatus::Ok,
            },
            TraceRecord {
                trial: 1,
                k: 50,
                quantity: Quantity::DirectionProjection,
                ell: Some(1),
                value: None,
                status: TraceStatus::Undefined,
            },
            TraceRecord {
                trial: 2,
                k: 0,
                quantity: Quantity::SqError,
                ell: None,
                value: None,
                status: TraceStatus::Error,
            },
        ];
        let text = format_trace_csv("demo", Method::Regs, &records);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(TRACE_CSV_HEADER));
        assert_eq!(
            lines.next(),
            Some("demo,regs,0,0,projection_signed,3,-0.12345678901234566,ok")
        );
        let rows = read_trace_csv(&text).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].value, Some(-0.12345678901234567));
        assert_eq!(rows[1].ell, Some(1));
        assert_eq!(rows[1].value, None);
        assert_eq!(rows[2].status, "error");
    }

    #[test]
    fn csv_header_mismatch_is_rejected() {
        let bad = "experiment,method,trial,k,quantity,ell,value,status\nx,rgs,0,0,sq_error,,1,ok\n";
        assert!(read_trace_csv(bad).is_err());
    }

    #[test]
    fn sha256_matches_a_known_digest() {
        // Well-known digest of the empty string and of "abc".
        assert_eq!(
            sha256_hex(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
