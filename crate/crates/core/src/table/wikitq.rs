//! Adapter for the WikiTableQuestions release.
//!
//! The question file (e.g. `data/pristine-unseen-tables.tsv`) is
//! tab-separated with a header line `id utterance context targetValue`.
//! Fields use the release escapes `\n` (newline), `\p` (pipe) and `\\`;
//! `targetValue` lists multiple answers separated by a bare `|`.
//! `context` is a path such as `csv/204-csv/590.csv`, resolved against the
//! release root (the parent of the question file's directory). Both the
//! `.csv` and the escaped `.tsv` table variants are accepted.
//!
//! WikiTQ tables are flat: one header row, no row-header columns.

use std::fs;
use std::path::{Path, PathBuf};

use super::{QaSample, Table, TableError};

pub fn load_wikitq(path: &Path) -> Result<Vec<QaSample>, TableError> {
    let qdir = path.parent().unwrap_or_else(|| Path::new("."));
    let root = qdir.parent().unwrap_or(qdir);
    load_wikitq_with_root(path, root)
}

pub fn load_wikitq_with_root(path: &Path, root: &Path) -> Result<Vec<QaSample>, TableError> {
    let text = fs::read_to_string(path).map_err(|source| TableError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let qdir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l).unwrap_or_default();
    let columns: Vec<&str> = header.split('\t').collect();
    let col = |name: &str| -> Result<usize, TableError> {
        columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| TableError::Record {
                path: path.display().to_string(),
                line: 1,
                reason: format!("header lacks column `{name}`"),
            })
    };
    let (id_col, q_col, ctx_col, ans_col) = (col("id")?, col("utterance")?, col("context")?, col("targetValue")?);
    let mut samples = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let record_err = |reason: String| TableError::Record {
            path: path.display().to_string(),
            line: i + 1,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let get = |idx: usize, name: &str| {
            fields
                .get(idx)
                .copied()
                .ok_or_else(|| record_err(format!("missing field `{name}`")))
        };
        let id = get(id_col, "id")?;
        let question = unescape(get(q_col, "utterance")?);
        let context = get(ctx_col, "context")?;
        let answers: Vec<String> = get(ans_col, "targetValue")?
            .split('|')
            .map(|a| unescape(a).trim().to_string())
            .filter(|a| !a.is_empty())
            .collect();
        if answers.is_empty() {
            return Err(record_err("missing gold answer (field `targetValue`)".to_string()));
        }
        let table_path =
            resolve_table(context, root, qdir).ok_or_else(|| TableError::MissingTable(context.to_string()))?;
        let table = read_wikitq_table(&table_path, context)?;
        samples.push(QaSample::new(id, table, question, answers).map_err(|e| record_err(e.to_string()))?);
    }
    Ok(samples)
}

fn resolve_table(context: &str, root: &Path, qdir: &Path) -> Option<PathBuf> {
    let rel = Path::new(context);
    for base in [root, qdir] {
        let direct = base.join(rel);
        if direct.is_file() {
            return Some(direct);
        }
        for ext in ["tsv", "csv"] {
            let alt = direct.with_extension(ext);
            if alt.is_file() {
                return Some(alt);
            }
        }
    }
    None
}

/// Reads one WikiTQ table file; the first line is the header row.
pub fn read_wikitq_table(path: &Path, table_id: &str) -> Result<Table, TableError> {
    let io = |source| TableError::Io {
        path: path.display().to_string(),
        source,
    };
    let rows: Vec<Vec<String>> = if path.extension().is_some_and(|e| e == "tsv") {
        fs::read_to_string(path)
            .map_err(io)?
            .lines()
            .filter(|l| !l.is_empty())
            .map(|l| l.split('\t').map(unescape).collect())
            .collect()
    } else {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .escape(Some(b'\\'))
            .from_path(path)
            .map_err(|e| TableError::Invalid {
                table: table_id.to_string(),
                reason: e.to_string(),
            })?;
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| TableError::Invalid {
                table: table_id.to_string(),
                reason: match e.kind() {
                    csv::ErrorKind::UnequalLengths { .. } => format!("ragged table row: {e}"),
                    _ => e.to_string(),
                },
            })?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        rows
    };
    if let Some(width) = rows.first().map(Vec::len) {
        if let Some((r, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
            return Err(TableError::Invalid {
                table: table_id.to_string(),
                reason: format!("ragged table row {r}: {} cells, expected {width}", row.len()),
            });
        }
    }
    Table::from_matrix(table_id, "", &rows, &[], 1, 0)
}

fn unescape(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('p') => out.push('|'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}
