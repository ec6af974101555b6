//! Canonical table representation.
//!
//! A [`Table`] is a rectangular grid of [`Cell`]s where each cell may span
//! several rows and columns. The first `top_header_depth` rows hold column
//! headers and the first `left_header_width` columns hold row headers; the
//! rest of the grid is data. Dataset adapters ([`hitab`], [`wikitq`]) map
//! upstream formats onto this one schema, and the interchange document
//! (see [`interchange`]) is how tables travel between tools.

pub mod hitab;
pub mod interchange;
mod markdown;
pub mod wikitq;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use markdown::render_markdown;

/// Placeholder substituted for header cells whose text is empty.
pub const EMPTY_HEADER: &str = "(empty)";

#[derive(Debug, Error)]
pub enum TableError {
    #[error("table {table}: {reason}")]
    Invalid { table: String, reason: String },
    #[error("{path}:{line}: {reason}")]
    Record { path: String, line: usize, reason: String },
    #[error("table not found: {0}")]
    MissingTable(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl TableError {
    fn invalid(table: &str, reason: impl Into<String>) -> Self {
        TableError::Invalid {
            table: table.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub text: String,
    pub row: usize,
    pub col: usize,
    pub row_span: usize,
    pub col_span: usize,
    pub is_header: bool,
}

impl Cell {
    pub fn new(text: impl Into<String>, row: usize, col: usize) -> Self {
        Cell {
            text: text.into(),
            row,
            col,
            row_span: 1,
            col_span: 1,
            is_header: false,
        }
    }

    pub fn spanning(mut self, row_span: usize, col_span: usize) -> Self {
        self.row_span = row_span;
        self.col_span = col_span;
        self
    }

    pub fn header(mut self) -> Self {
        self.is_header = true;
        self
    }

    /// One past the last row covered by this cell.
    pub fn row_end(&self) -> usize {
        self.row + self.row_span
    }

    /// One past the last column covered by this cell.
    pub fn col_end(&self) -> usize {
        self.col + self.col_span
    }
}

/// A validated table. Immutable once constructed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "interchange::TableDoc", into = "interchange::TableDoc")]
pub struct Table {
    id: String,
    title: String,
    n_rows: usize,
    n_cols: usize,
    cells: Vec<Cell>,
    top_header_depth: usize,
    left_header_width: usize,
    /// Row-major map from grid coordinate to index into `cells`.
    grid: Vec<usize>,
}

impl Table {
    /// Validates the layout and builds the coordinate index. Cells are
    /// stored sorted by anchor position (row-major).
    pub fn new(
        id: impl Into<String>,
        title: impl Into<String>,
        n_rows: usize,
        n_cols: usize,
        mut cells: Vec<Cell>,
        top_header_depth: usize,
        left_header_width: usize,
    ) -> Result<Self, TableError> {
        let id = id.into();
        if n_rows == 0 || n_cols == 0 {
            return Err(TableError::invalid(&id, "table has no rows or columns"));
        }
        if top_header_depth >= n_rows {
            return Err(TableError::invalid(
                &id,
                format!("top header depth {top_header_depth} leaves no data row in {n_rows} rows"),
            ));
        }
        if left_header_width >= n_cols {
            return Err(TableError::invalid(
                &id,
                format!("left header width {left_header_width} leaves no data column in {n_cols} columns"),
            ));
        }
        cells.sort_by_key(|c| (c.row, c.col));
        let mut grid = vec![usize::MAX; n_rows * n_cols];
        for (idx, cell) in cells.iter().enumerate() {
            if cell.row_span == 0 || cell.col_span == 0 {
                return Err(TableError::invalid(
                    &id,
                    format!("cell at ({}, {}) has a zero span", cell.row, cell.col),
                ));
            }
            if cell.row_end() > n_rows || cell.col_end() > n_cols {
                return Err(TableError::invalid(
                    &id,
                    format!(
                        "cell at ({}, {}) spanning {}x{} exceeds the {}x{} grid",
                        cell.row, cell.col, cell.row_span, cell.col_span, n_rows, n_cols
                    ),
                ));
            }
            for r in cell.row..cell.row_end() {
                for c in cell.col..cell.col_end() {
                    let slot = &mut grid[r * n_cols + c];
                    if *slot != usize::MAX {
                        return Err(TableError::invalid(
                            &id,
                            format!(
                                "cells at ({}, {}) and ({}, {}) overlap at ({r}, {c})",
                                cells[*slot].row, cells[*slot].col, cell.row, cell.col
                            ),
                        ));
                    }
                    *slot = idx;
                }
            }
        }
        if let Some(pos) = grid.iter().position(|&s| s == usize::MAX) {
            return Err(TableError::invalid(
                &id,
                format!(
                    "grid position ({}, {}) is not covered by any cell",
                    pos / n_cols,
                    pos % n_cols
                ),
            ));
        }
        Ok(Table {
            id,
            title: title.into(),
            n_rows,
            n_cols,
            cells,
            top_header_depth,
            left_header_width,
            grid,
        })
    }

    /// Builds a table from a dense text matrix plus merged regions given as
    /// `(first_row, last_row, first_col, last_col)` inclusive rectangles.
    /// The text of a merged region is taken from its top-left position.
    /// Text is trimmed and empty header cells get [`EMPTY_HEADER`].
    pub fn from_matrix(
        id: impl Into<String>,
        title: impl Into<String>,
        texts: &[Vec<String>],
        merged: &[(usize, usize, usize, usize)],
        top_header_depth: usize,
        left_header_width: usize,
    ) -> Result<Self, TableError> {
        let id = id.into();
        let n_rows = texts.len();
        let n_cols = texts.first().map_or(0, Vec::len);
        if let Some((r, row)) = texts.iter().enumerate().find(|(_, row)| row.len() != n_cols) {
            return Err(TableError::invalid(
                &id,
                format!("row {r} has {} cells, expected {n_cols}", row.len()),
            ));
        }
        let mut covered = vec![false; n_rows * n_cols];
        let mut cells = Vec::new();
        for &(r0, r1, c0, c1) in merged {
            if r1 < r0 || c1 < c0 || r1 >= n_rows || c1 >= n_cols {
                return Err(TableError::invalid(
                    &id,
                    format!("merged region rows {r0}-{r1}, cols {c0}-{c1} is out of range"),
                ));
            }
            for r in r0..=r1 {
                for c in c0..=c1 {
                    if std::mem::replace(&mut covered[r * n_cols + c], true) {
                        return Err(TableError::invalid(
                            &id,
                            format!("merged regions overlap at ({r}, {c})"),
                        ));
                    }
                }
            }
            cells.push(
                make_cell(&texts[r0][c0], r0, c0, top_header_depth, left_header_width)
                    .spanning(r1 - r0 + 1, c1 - c0 + 1),
            );
        }
        for (r, row) in texts.iter().enumerate() {
            for (c, text) in row.iter().enumerate() {
                if !covered[r * n_cols + c] {
                    cells.push(make_cell(text, r, c, top_header_depth, left_header_width));
                }
            }
        }
        Table::new(id, title, n_rows, n_cols, cells, top_header_depth, left_header_width)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn top_header_depth(&self) -> usize {
        self.top_header_depth
    }

    pub fn left_header_width(&self) -> usize {
        self.left_header_width
    }

    /// Grid rows holding data (below the column headers).
    pub fn data_rows(&self) -> std::ops::Range<usize> {
        self.top_header_depth..self.n_rows
    }

    /// Grid columns holding data (right of the row headers).
    pub fn data_cols(&self) -> std::ops::Range<usize> {
        self.left_header_width..self.n_cols
    }

    /// The cell whose span covers grid position `(row, col)`.
    pub fn cell_at(&self, row: usize, col: usize) -> &Cell {
        &self.cells[self.cell_index_at(row, col)]
    }

    /// Index into [`Table::cells`] of the cell covering `(row, col)`.
    pub fn cell_index_at(&self, row: usize, col: usize) -> usize {
        assert!(row < self.n_rows && col < self.n_cols, "({row}, {col}) outside grid");
        self.grid[row * self.n_cols + col]
    }

    /// Text at every grid position, merged cells repeated over their span.
    pub fn text_matrix(&self) -> Vec<Vec<&str>> {
        (0..self.n_rows)
            .map(|r| (0..self.n_cols).map(|c| self.cell_at(r, c).text.as_str()).collect())
            .collect()
    }

    /// Keeps only the listed grid rows and columns (each sorted ascending,
    /// no duplicates). Merged cells are clipped to the retained positions;
    /// header depth and width shrink by the number of dropped header lines.
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> Result<Table, TableError> {
        let row_pos = position_map(rows, self.n_rows);
        let col_pos = position_map(cols, self.n_cols);
        let mut cells = Vec::new();
        for cell in &self.cells {
            let kept_rows: Vec<usize> = (cell.row..cell.row_end()).filter_map(|r| row_pos[r]).collect();
            let kept_cols: Vec<usize> = (cell.col..cell.col_end()).filter_map(|c| col_pos[c]).collect();
            if let (Some(&r0), Some(&c0)) = (kept_rows.first(), kept_cols.first()) {
                let mut clipped = cell.clone();
                clipped.row = r0;
                clipped.col = c0;
                clipped.row_span = kept_rows.len();
                clipped.col_span = kept_cols.len();
                cells.push(clipped);
            }
        }
        let depth = rows.iter().filter(|&&r| r < self.top_header_depth).count();
        let width = cols.iter().filter(|&&c| c < self.left_header_width).count();
        Table::new(
            self.id.clone(),
            self.title.clone(),
            rows.len(),
            cols.len(),
            cells,
            depth,
            width,
        )
    }
}

fn position_map(keep: &[usize], len: usize) -> Vec<Option<usize>> {
    let mut map = vec![None; len];
    for (pos, &idx) in keep.iter().enumerate() {
        map[idx] = Some(pos);
    }
    map
}

fn make_cell(raw: &str, row: usize, col: usize, depth: usize, width: usize) -> Cell {
    let is_header = row < depth || col < width;
    let trimmed = raw.trim();
    let text = if is_header && trimmed.is_empty() {
        EMPTY_HEADER.to_string()
    } else {
        trimmed.to_string()
    };
    Cell {
        text,
        row,
        col,
        row_span: 1,
        col_span: 1,
        is_header,
    }
}

/// One scored question over one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaSample {
    pub sample_id: String,
    pub table: Table,
    pub question: String,
    pub gold_answers: Vec<String>,
}

impl QaSample {
    pub fn new(
        sample_id: impl Into<String>,
        table: Table,
        question: impl Into<String>,
        gold_answers: Vec<String>,
    ) -> Result<Self, TableError> {
        let sample_id = sample_id.into();
        let question = question.into();
        if question.trim().is_empty() {
            return Err(TableError::invalid(
                table.id(),
                format!("sample {sample_id}: empty question"),
            ));
        }
        if gold_answers.is_empty() {
            return Err(TableError::invalid(
                table.id(),
                format!("sample {sample_id}: missing gold answer"),
            ));
        }
        Ok(QaSample {
            sample_id,
            table,
            question,
            gold_answers,
        })
    }
}
