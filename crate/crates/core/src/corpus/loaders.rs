use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Corpus, Split};
use crate::error::{Error, Result};

/// On-disk layouts of the supported benchmark files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchmarkFormat {
    /// `class,title,body` with 1-based class indices and no header (AG News, DBPedia).
    CsvLabelTitleBody,
    /// `class,text` with 0-based class indices and no header.
    CsvLabelText,
    /// One JSON object per line: `{"label": <0-based int>, "text": "..."}`.
    LineJson,
}

impl FromStr for BenchmarkFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv-label-title-body" => Ok(Self::CsvLabelTitleBody),
            "csv-label-text" => Ok(Self::CsvLabelText),
            "line-json" => Ok(Self::LineJson),
            other => Err(Error::InvalidArgument(format!("unknown benchmark format {other:?}"))),
        }
    }
}

#[derive(Deserialize)]
struct JsonRow {
    label: serde_json::Value,
    text: String,
}

/// Loads a labeled benchmark file. `num_classes` is inferred from the largest
/// label when not supplied.
pub fn load_benchmark(
    path: &Path,
    format: BenchmarkFormat,
    num_classes: Option<usize>,
    split: Split,
) -> Result<Corpus> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    let rows = match format {
        BenchmarkFormat::CsvLabelTitleBody => read_csv(&raw, 3)?,
        BenchmarkFormat::CsvLabelText => read_csv(&raw, 2)?,
        BenchmarkFormat::LineJson => read_json_lines(&raw)?,
    };
    if rows.is_empty() {
        return Err(Error::NoDocuments);
    }
    let offset = match format {
        BenchmarkFormat::CsvLabelTitleBody => 1,
        _ => 0,
    };
    let observed: Vec<String> = rows
        .iter()
        .map(|(l, _)| l.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let unknown = |value: &str, row: usize| Error::UnknownClass {
        value: value.to_string(),
        row,
        observed: observed.clone(),
    };
    let mut labels = Vec::with_capacity(rows.len());
    for (i, (raw_label, _)) in rows.iter().enumerate() {
        let v: usize = raw_label.trim().parse().map_err(|_| unknown(raw_label, i + 1))?;
        if v < offset {
            return Err(unknown(raw_label, i + 1));
        }
        labels.push(v - offset);
    }
    let k = match num_classes {
        Some(k) => k,
        None => labels.iter().max().map_or(0, |m| m + 1),
    };
    if let Some(i) = labels.iter().position(|&l| l >= k) {
        return Err(unknown(&rows[i].0, i + 1));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Corpus::new(
        name,
        split,
        k,
        rows.into_iter().zip(labels).map(|((_, text), l)| (text, Some(l))),
    )
    .map_err(|e| match e {
        Error::InvalidCorpus(msg) => Error::MalformedRow { row: 0, message: msg },
        other => other,
    })
}

fn read_csv(raw: &[u8], columns: usize) -> Result<Vec<(String, String)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(raw);
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        if record.len() != columns {
            return Err(Error::MalformedRow {
                row,
                message: format!("expected {columns} columns, found {}", record.len()),
            });
        }
        let text = record.iter().skip(1).collect::<Vec<_>>().join(" ");
        if text.trim().is_empty() {
            return Err(Error::MalformedRow {
                row,
                message: "empty text".into(),
            });
        }
        rows.push((record[0].to_string(), text));
    }
    Ok(rows)
}

fn read_json_lines(raw: &[u8]) -> Result<Vec<(String, String)>> {
    let text = std::str::from_utf8(raw).map_err(|e| Error::MalformedRow {
        row: 0,
        message: e.to_string(),
    })?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = i + 1;
        let parsed: JsonRow = serde_json::from_str(line).map_err(|e| Error::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        let label = match parsed.label {
            serde_json::Value::String(s) => s,
            other => other.to_string(),
        };
        if parsed.text.trim().is_empty() {
            return Err(Error::MalformedRow {
                row,
                message: "empty text".into(),
            });
        }
        rows.push((label, parsed.text));
    }
    Ok(rows)
}
