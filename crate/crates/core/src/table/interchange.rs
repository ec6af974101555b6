//! The toolkit's own table document and sample-file format (JSON).
//!
//! A table document has the fields `id`, `title`, `n_rows`, `n_cols`,
//! `cells`, `top_header_depth` and `left_header_width`. A sample file is
//! line-delimited JSON, one `QaSample` per line:
//! `{"sample_id": .., "question": .., "gold_answers": [..], "table": {..}}`.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Cell, QaSample, Table, TableError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableDoc {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub n_rows: usize,
    pub n_cols: usize,
    pub cells: Vec<Cell>,
    pub top_header_depth: usize,
    pub left_header_width: usize,
}

impl TryFrom<TableDoc> for Table {
    type Error = TableError;

    fn try_from(doc: TableDoc) -> Result<Self, Self::Error> {
        Table::new(
            doc.id,
            doc.title,
            doc.n_rows,
            doc.n_cols,
            doc.cells,
            doc.top_header_depth,
            doc.left_header_width,
        )
    }
}

impl From<Table> for TableDoc {
    fn from(t: Table) -> Self {
        TableDoc {
            id: t.id,
            title: t.title,
            n_rows: t.n_rows,
            n_cols: t.n_cols,
            cells: t.cells,
            top_header_depth: t.top_header_depth,
            left_header_width: t.left_header_width,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TableError + '_ {
    move |source| TableError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_table(path: &Path) -> Result<Table, TableError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| TableError::Json {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_table(path: &Path, table: &Table) -> Result<(), TableError> {
    let text = serde_json::to_string_pretty(table).expect("table serializes");
    fs::write(path, text + "\n").map_err(io_err(path))
}

/// Reads a line-delimited sample file. Blank lines are skipped.
pub fn read_samples(path: &Path) -> Result<Vec<QaSample>, TableError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: QaSample = serde_json::from_str(&line).map_err(|e| TableError::Record {
            path: path.display().to_string(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        // re-run the sample checks that serde bypasses
        let sample =
            QaSample::new(sample.sample_id, sample.table, sample.question, sample.gold_answers).map_err(|e| {
                TableError::Record {
                    path: path.display().to_string(),
                    line: i + 1,
                    reason: e.to_string(),
                }
            })?;
        out.push(sample);
    }
    Ok(out)
}

pub fn write_samples(path: &Path, samples: &[QaSample]) -> Result<(), TableError> {
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    for s in samples {
        let line = serde_json::to_string(s).expect("sample serializes");
        writeln!(file, "{line}").map_err(io_err(path))?;
    }
    Ok(())
}
