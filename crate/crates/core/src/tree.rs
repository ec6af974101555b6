//! Row and column header trees.
//!
//! Each header cell becomes a node holding its text, its row (or column)
//! index and the inclusive index span of the data rows (or columns) its
//! subtree governs. A root-to-leaf path, linearized, names one data row or
//! column by its whole header hierarchy.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Row,
    Column,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Row => "row",
            Axis::Column => "column",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "row" | "rows" => Ok(Axis::Row),
            "column" | "columns" | "col" => Ok(Axis::Column),
            other => Err(format!("unknown axis `{other}`")),
        }
    }
}

/// Inclusive index interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error(
        "{axis} header cell {text:?} at ({row}, {col}) covers {axis}s {start}-{end}, crossing its parent's span {parent_start}-{parent_end}"
    )]
    NonLaminar {
        axis: Axis,
        text: String,
        row: usize,
        col: usize,
        start: usize,
        end: usize,
        parent_start: usize,
        parent_end: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeaderNode {
    pub value: String,
    pub axis: Axis,
    pub index: usize,
    pub span: Span,
    pub children: Vec<HeaderNode>,
}

impl HeaderNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    fn leaf_count(&self) -> usize {
        if self.is_leaf() {
            1
        } else {
            self.children.iter().map(HeaderNode::leaf_count).sum()
        }
    }
}

pub const ROOT_VALUE: &str = "(root)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeaderTree {
    pub axis: Axis,
    pub root: HeaderNode,
    pub leaf_count: usize,
}

/// A leaf with the node path leading to it (root excluded).
#[derive(Debug, Clone)]
pub struct LeafPath<'a> {
    pub nodes: Vec<&'a HeaderNode>,
}

impl<'a> LeafPath<'a> {
    pub fn leaf(&self) -> &'a HeaderNode {
        self.nodes.last().expect("path is nonempty")
    }

    /// Span of the leaf's parent, or of the leaf itself when the parent is
    /// the root.
    pub fn parent_span(&self) -> Span {
        match self.nodes.len() {
            0 | 1 => self.leaf().span,
            n => self.nodes[n - 2].span,
        }
    }
}

impl HeaderTree {
    /// Leaves in left-to-right depth-first order.
    pub fn leaf_paths(&self) -> Vec<LeafPath<'_>> {
        fn walk<'a>(node: &'a HeaderNode, stack: &mut Vec<&'a HeaderNode>, out: &mut Vec<LeafPath<'a>>) {
            for child in &node.children {
                stack.push(child);
                if child.is_leaf() {
                    out.push(LeafPath { nodes: stack.clone() });
                } else {
                    walk(child, stack, out);
                }
                stack.pop();
            }
        }
        let mut out = Vec::with_capacity(self.leaf_count);
        walk(&self.root, &mut Vec::new(), &mut out);
        out
    }
}

impl fmt::Display for HeaderTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn node(f: &mut fmt::Formatter<'_>, n: &HeaderNode, depth: usize) -> fmt::Result {
            writeln!(
                f,
                "{:indent$}{} [{} {}, span {}-{}]",
                "",
                n.value,
                n.axis,
                n.index,
                n.span.start,
                n.span.end,
                indent = depth * 2
            )?;
            n.children.iter().try_for_each(|c| node(f, c, depth + 1))
        }
        writeln!(f, "{} tree, {} leaves", self.axis, self.leaf_count)?;
        self.root.children.iter().try_for_each(|c| node(f, c, 1))
    }
}

pub fn build_row_tree(table: &Table) -> Result<HeaderTree, TreeError> {
    build_tree(table, Axis::Row)
}

pub fn build_column_tree(table: &Table) -> Result<HeaderTree, TreeError> {
    build_tree(table, Axis::Column)
}

/// Builds the header tree for one axis. "Along" is the axis the tree
/// indexes (rows for the row tree); "level" is the header depth direction
/// (columns for the row tree).
pub fn build_tree(table: &Table, axis: Axis) -> Result<HeaderTree, TreeError> {
    let (data, levels) = match axis {
        Axis::Row => (table.data_rows(), table.left_header_width()),
        Axis::Column => (table.data_cols(), table.top_header_depth()),
    };
    let children = if levels == 0 {
        data.clone()
            .enumerate()
            .map(|(k, i)| HeaderNode {
                value: format!("{axis} {}", k + 1),
                axis,
                index: i,
                span: Span::new(i, i),
                children: Vec::new(),
            })
            .collect()
    } else {
        let builder = Builder {
            table,
            axis,
            levels,
            data_start: data.start,
        };
        builder.children(data.start, data.end, 0)?
    };
    let root = HeaderNode {
        value: ROOT_VALUE.to_string(),
        axis,
        index: data.start,
        span: Span::new(data.start, data.end - 1),
        children,
    };
    let leaf_count = root.leaf_count();
    Ok(HeaderTree { axis, root, leaf_count })
}

struct Builder<'a> {
    table: &'a Table,
    axis: Axis,
    levels: usize,
    data_start: usize,
}

impl Builder<'_> {
    /// Nodes for the header cells at `level` covering along-indices
    /// `lo..hi`.
    fn children(&self, lo: usize, hi: usize, level: usize) -> Result<Vec<HeaderNode>, TreeError> {
        let mut out = Vec::new();
        let mut at = lo;
        while at < hi {
            let cell = match self.axis {
                Axis::Row => self.table.cell_at(at, level),
                Axis::Column => self.table.cell_at(level, at),
            };
            let (along_start, along_end, level_end) = match self.axis {
                Axis::Row => (cell.row, cell.row_end(), cell.col_end()),
                Axis::Column => (cell.col, cell.col_end(), cell.row_end()),
            };
            // cells reaching into the corner block are clipped to the data range
            let start = along_start.max(self.data_start);
            if start < lo || along_end > hi {
                return Err(TreeError::NonLaminar {
                    axis: self.axis,
                    text: cell.text.clone(),
                    row: cell.row,
                    col: cell.col,
                    start,
                    end: along_end - 1,
                    parent_start: lo,
                    parent_end: hi - 1,
                });
            }
            let children = if level_end >= self.levels {
                Vec::new()
            } else {
                self.children(start, along_end, level_end)?
            };
            out.push(HeaderNode {
                value: cell.text.clone(),
                axis: self.axis,
                index: start,
                span: Span::new(start, along_end - 1),
                children,
            });
            at = along_end;
        }
        Ok(out)
    }
}

/// A linearized root-to-leaf path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreePathTuple {
    pub axis: Axis,
    pub values: Vec<String>,
    pub leaf_index: usize,
    pub tuple_id: String,
}

/// One tuple per leaf, depth-first left to right. Tuple ids are
/// `axis:v1/v2/..`, with `#leaf_index` appended when two leaves share the
/// same path text.
pub fn linearize(tree: &HeaderTree) -> Vec<TreePathTuple> {
    let paths: Vec<Vec<String>> = tree
        .leaf_paths()
        .iter()
        .map(|p| p.nodes.iter().map(|n| n.value.clone()).collect())
        .collect();
    let base_ids: Vec<String> = paths
        .iter()
        .map(|values| format!("{}:{}", tree.axis, values.join("/")))
        .collect();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for id in &base_ids {
        *counts.entry(id.as_str()).or_default() += 1;
    }
    paths
        .into_iter()
        .zip(&base_ids)
        .enumerate()
        .map(|(leaf_index, (values, base))| TreePathTuple {
            axis: tree.axis,
            values,
            leaf_index,
            tuple_id: if counts[base.as_str()] > 1 {
                format!("{base}#{leaf_index}")
            } else {
                base.clone()
            },
        })
        .collect()
}

/// `(axis: v1 | v2 | ... )`, with `\` and `|` inside values escaped.
pub fn render_tuple(t: &TreePathTuple) -> String {
    let values: Vec<String> = t
        .values
        .iter()
        .map(|v| v.replace('\\', "\\\\").replace('|', "\\|"))
        .collect();
    format!("({}: {})", t.axis, values.join(" | "))
}

/// Inverse of [`render_tuple`] for the text inside the outer parentheses
/// (or including them). Returns the axis if one was given and the
/// unescaped, trimmed values.
pub fn parse_tuple_body(text: &str) -> (Option<Axis>, Vec<String>) {
    let mut body = text.trim();
    if body.starts_with('(') && body.ends_with(')') && body.len() >= 2 {
        body = &body[1..body.len() - 1];
    }
    let mut axis = None;
    if let Some((head, rest)) = body.split_once(':') {
        if let Ok(a) = head.parse::<Axis>() {
            axis = Some(a);
            body = rest;
        }
    }
    let mut values = Vec::new();
    let mut current = String::new();
    let mut chars = body.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some(next @ ('|' | '\\')) => current.push(next),
                Some(other) => {
                    current.push('\\');
                    current.push(other);
                }
                None => current.push('\\'),
            },
            '|' => values.push(std::mem::take(&mut current).trim().to_string()),
            _ => current.push(c),
        }
    }
    values.push(current.trim().to_string());
    (axis, values)
}

/// All row tuples followed by all column tuples. Display numbering is the
/// 1-based position in this list.
pub fn merged_tuple_list(row_tree: &HeaderTree, col_tree: &HeaderTree) -> Vec<TreePathTuple> {
    let mut out = linearize(row_tree);
    out.extend(linearize(col_tree));
    out
}
