//! Score-file I/O. The score CSV format has header `s_0,...,s_{C-1},label`,
//! one sample per row, zero-based integer labels, and '.' as the decimal
//! point.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::core::LabeledScores;
use crate::error::{Error, Result};

/// Reads and validates a score CSV from a reader.
pub fn read_scores_csv<R: Read>(reader: R) -> Result<LabeledScores> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = csv_reader.headers()?.clone();
    let n_cols = headers.len();
    if n_cols < 3 {
        return Err(Error::CsvFormat(format!(
            "expected at least 3 columns (s_0, s_1, label), got {n_cols}"
        )));
    }
    let n_classes = n_cols - 1;
    for (j, name) in headers.iter().take(n_classes).enumerate() {
        let expected = format!("s_{j}");
        if name != expected {
            return Err(Error::CsvFormat(format!(
                "column {j} must be named {expected}, got {name}"
            )));
        }
    }
    if &headers[n_classes] != "label" {
        return Err(Error::CsvFormat(format!(
            "last column must be named label, got {}",
            &headers[n_classes]
        )));
    }

    let mut rows: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for (i, record) in csv_reader.records().enumerate() {
        let record = record?;
        if record.len() != n_cols {
            return Err(Error::CsvFormat(format!(
                "row {i} has {} fields, expected {n_cols}",
                record.len()
            )));
        }
        for j in 0..n_classes {
            let v: f64 = record[j]
                .parse()
                .map_err(|_| Error::CsvFormat(format!("row {i}: bad score {:?}", &record[j])))?;
            rows.push(v);
        }
        let label: usize = record[n_classes]
            .parse()
            .map_err(|_| Error::CsvFormat(format!("row {i}: bad label {:?}", &record[n_classes])))?;
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("score csv has no data rows"));
    }
    let n = labels.len();
    let scores = Array2::from_shape_vec((n, n_classes), rows)
        .map_err(|e| Error::CsvFormat(e.to_string()))?;
    LabeledScores::new(scores, labels)
}

/// Reads a score CSV from a file path.
pub fn read_scores_file(path: &Path) -> Result<LabeledScores> {
    let file = std::fs::File::open(path)?;
    read_scores_csv(std::io::BufReader::new(file))
}

/// Writes labeled scores in the score CSV format.
pub fn write_scores_csv<W: Write>(out: &mut W, data: &LabeledScores) -> Result<()> {
    let c = data.n_classes();
    let header: Vec<String> = (0..c)
        .map(|j| format!("s_{j}"))
        .chain(std::iter::once("label".to_string()))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (row, &label) in data.scores().rows().into_iter().zip(data.labels()) {
        let values: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{},{label}", values.join(","))?;
    }
    Ok(())
}
