use super::Table;

/// Renders the grid as a pipe table. Merged cells repeat their text into
/// every covered position so columns stay aligned. The separator line
/// follows the last column-header row; a table without column headers
/// gets a synthetic `column N` header line.
pub fn render_markdown(table: &Table) -> String {
    let matrix = table.text_matrix();
    let mut lines = Vec::with_capacity(table.n_rows() + 2);
    let separator = row_line((0..table.n_cols()).map(|_| "---".to_string()));
    if table.top_header_depth() == 0 {
        lines.push(row_line((1..=table.n_cols()).map(|c| format!("column {c}"))));
        lines.push(separator.clone());
    }
    for (r, row) in matrix.iter().enumerate() {
        lines.push(row_line(row.iter().map(|t| escape_cell(t))));
        if r + 1 == table.top_header_depth() {
            lines.push(separator.clone());
        }
    }
    lines.join("\n")
}

fn row_line(cells: impl Iterator<Item = String>) -> String {
    let mut line = String::from("|");
    for cell in cells {
        line.push(' ');
        line.push_str(&cell);
        line.push_str(" |");
    }
    line
}

fn escape_cell(text: &str) -> String {
    text.replace('|', "\\|")
        .replace("\r\n", "\\n")
        .replace(['\n', '\r'], "\\n")
}
