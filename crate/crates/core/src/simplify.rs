//! Task simplification from a Seek result: the sub-table and the hint line.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{Table, TableError};
use crate::tree::{render_tuple, Axis, HeaderTree, TreePathTuple};

pub const HINT_PREFIX: &str = "Look at these rows and columns: ";

#[derive(Debug, Error)]
pub enum SimplifyError {
    #[error("empty seek result")]
    EmptySelection,
    #[error("tuple {0} does not belong to this table's header trees")]
    UnknownTuple(String),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Tuples chosen by the Seek stage plus mentions that matched nothing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeekResult {
    pub selected: Vec<TreePathTuple>,
    pub unmatched_mentions: Vec<String>,
}

impl SeekResult {
    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }
}

/// Grid indices kept along one axis: every selected leaf widened to its
/// parent's span, or the whole data range when nothing on this axis was
/// selected. Sorted, deduplicated, data indices only.
pub fn retained_data_indices(tree: &HeaderTree, selected: &[TreePathTuple]) -> Result<Vec<usize>, SimplifyError> {
    let leaves = tree.leaf_paths();
    let mut keep = Vec::new();
    let mut any = false;
    for t in selected.iter().filter(|t| t.axis == tree.axis) {
        any = true;
        let path = leaves
            .get(t.leaf_index)
            .ok_or_else(|| SimplifyError::UnknownTuple(t.tuple_id.clone()))?;
        keep.extend(path.parent_span().indices());
    }
    if !any {
        keep.extend(tree.root.span.indices());
    }
    keep.sort_unstable();
    keep.dedup();
    Ok(keep)
}

pub fn extract_subtable(
    table: &Table,
    row_tree: &HeaderTree,
    col_tree: &HeaderTree,
    result: &SeekResult,
) -> Result<Table, SimplifyError> {
    if result.is_empty() {
        return Err(SimplifyError::EmptySelection);
    }
    debug_assert_eq!(row_tree.axis, Axis::Row);
    debug_assert_eq!(col_tree.axis, Axis::Column);
    let mut rows: Vec<usize> = (0..table.top_header_depth()).collect();
    rows.extend(retained_data_indices(row_tree, &result.selected)?);
    let mut cols: Vec<usize> = (0..table.left_header_width()).collect();
    cols.extend(retained_data_indices(col_tree, &result.selected)?);
    Ok(table.restrict(&rows, &cols)?)
}

/// `Look at these rows and columns: (row: ..), (column: ..).`
pub fn format_hint(result: &SeekResult) -> Result<String, SimplifyError> {
    if result.is_empty() {
        return Err(SimplifyError::EmptySelection);
    }
    let rendered: Vec<String> = result.selected.iter().map(render_tuple).collect();
    Ok(format!("{HINT_PREFIX}{}.", rendered.join(", ")))
}
