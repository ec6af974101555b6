//! Adapter for the HiTab release layout.
//!
//! Question files (`data/{train,dev,test}_samples.jsonl`) hold one JSON
//! record per line; the fields read here are:
//!
//! | HiTab field | used as                         |
//! |-------------|---------------------------------|
//! | `id`        | `QaSample::sample_id`           |
//! | `table_id`  | file stem under the table dir   |
//! | `question`  | `QaSample::question`            |
//! | `answer`    | `QaSample::gold_answers` (list) |
//!
//! Tables live in `data/tables/raw/<table_id>.json`:
//!
//! | HiTab field               | used as                           |
//! |---------------------------|-----------------------------------|
//! | `title`                   | `Table::title`                    |
//! | `texts`                   | dense cell text matrix            |
//! | `merged_regions`          | spans (`first_row`, `last_row`, `first_column`, `last_column`, inclusive) |
//! | `top_header_rows_num`     | `Table::top_header_depth`         |
//! | `left_header_columns_num` | `Table::left_header_width`        |
//!
//! The `top_root`/`left_root` hierarchy annotations are not used; header
//! trees are rebuilt from the cell layout.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::{QaSample, Table, TableError};

/// Loads a HiTab question file, resolving tables from `data/tables/raw`
/// next to the question file (`<dir>/tables/raw`).
pub fn load_hitab(path: &Path) -> Result<Vec<QaSample>, TableError> {
    let tables_dir = path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join("tables")
        .join("raw");
    load_hitab_with_tables(path, &tables_dir)
}

pub fn load_hitab_with_tables(path: &Path, tables_dir: &Path) -> Result<Vec<QaSample>, TableError> {
    let file = fs::File::open(path).map_err(|source| TableError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut tables: HashMap<String, Table> = HashMap::new();
    let mut samples = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| TableError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record_err = |reason: String| TableError::Record {
            path: path.display().to_string(),
            line: i + 1,
            reason,
        };
        let record: Value = serde_json::from_str(&line).map_err(|e| record_err(format!("invalid JSON: {e}")))?;
        let field = |name: &str| -> Result<String, TableError> {
            match record.get(name) {
                Some(Value::String(s)) => Ok(s.clone()),
                Some(Value::Number(n)) => Ok(n.to_string()),
                Some(_) => Err(record_err(format!("field `{name}` has the wrong type"))),
                None => Err(record_err(format!("missing field `{name}`"))),
            }
        };
        let id = field("id")?;
        let table_id = field("table_id")?;
        let question = field("question")?;
        let answers = match record.get("answer") {
            Some(Value::Array(items)) => items.iter().map(value_text).collect::<Vec<_>>(),
            Some(Value::Null) | None => Vec::new(),
            Some(other) => vec![value_text(other)],
        };
        if answers.is_empty() {
            return Err(record_err("missing gold answer (field `answer`)".to_string()));
        }
        let table = match tables.get(&table_id) {
            Some(t) => t.clone(),
            None => {
                let t = read_hitab_table(&tables_dir.join(format!("{table_id}.json")), &table_id)?;
                tables.insert(table_id.clone(), t.clone());
                t
            }
        };
        samples.push(QaSample::new(id, table, question, answers).map_err(|e| record_err(e.to_string()))?);
    }
    Ok(samples)
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.trim().to_string(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Parses one raw HiTab table file.
pub fn read_hitab_table(path: &Path, table_id: &str) -> Result<Table, TableError> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            TableError::MissingTable(table_id.to_string())
        } else {
            TableError::Io {
                path: path.display().to_string(),
                source: e,
            }
        }
    })?;
    let doc: Value = serde_json::from_str(&text).map_err(|source| TableError::Json {
        path: path.display().to_string(),
        source,
    })?;
    let bad = |reason: &str| TableError::Invalid {
        table: table_id.to_string(),
        reason: reason.to_string(),
    };
    let texts: Vec<Vec<String>> = doc
        .get("texts")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing `texts` matrix"))?
        .iter()
        .map(|row| {
            row.as_array()
                .map(|cells| cells.iter().map(value_text).collect())
                .ok_or_else(|| bad("`texts` row is not a list"))
        })
        .collect::<Result<_, _>>()?;
    let count = |name: &str| -> Result<usize, TableError> {
        doc.get(name)
            .and_then(Value::as_u64)
            .map(|n| n as usize)
            .ok_or_else(|| bad(&format!("missing `{name}`")))
    };
    let depth = count("top_header_rows_num")?;
    let width = count("left_header_columns_num")?;
    let mut merged = Vec::new();
    if let Some(regions) = doc.get("merged_regions").and_then(Value::as_array) {
        for region in regions {
            let corner = |name: &str| -> Result<usize, TableError> {
                region
                    .get(name)
                    .and_then(Value::as_u64)
                    .map(|n| n as usize)
                    .ok_or_else(|| bad(&format!("merged region without `{name}`")))
            };
            merged.push((
                corner("first_row")?,
                corner("last_row")?,
                corner("first_column")?,
                corner("last_column")?,
            ));
        }
    }
    let title = doc.get("title").map(value_text).unwrap_or_default();
    Table::from_matrix(table_id, title, &texts, &merged, depth, width)
}

/// Conventional question-file location for a split under a release root.
pub fn split_path(root: &Path, split: &str) -> PathBuf {
    root.join("data").join(format!("{split}_samples.jsonl"))
}
