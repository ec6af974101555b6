//! Generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::Rng;

use seeksolve::eval::{effective_variant, DEMO_HITAB};
use seeksolve::gateway::prompt_digest;
use seeksolve::parse::parse_seek;
use seeksolve::prompt::{
    build_seek_prompt, build_solve_prompt, build_tqa_prompt, DemoCotKind, Demonstration, Materials, PreparedDemo,
    SolveVariant,
};
use seeksolve::table::{interchange, Cell, QaSample, Table};
use seeksolve::tree::{build_column_tree, build_row_tree, merged_tuple_list, Axis, HeaderNode, TreePathTuple};

pub fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

// ---------------------------------------------------------------------------
// random laminar tables

/// A header node as the generator laid it out. `start..=end` along the
/// axis, occupying header levels `level..level + level_span`.
#[derive(Debug, Clone)]
pub struct GenNode {
    pub label: String,
    pub start: usize,
    pub end: usize,
    pub level: usize,
    pub level_span: usize,
    pub children: Vec<GenNode>,
}

/// A leaf's own span and the span it widens to, both inclusive.
pub type LeafSpans = ((usize, usize), (usize, usize));

#[derive(Debug, Clone)]
pub struct GenAxis {
    pub axis: Axis,
    pub levels: usize,
    pub lo: usize,
    pub hi: usize,
    pub forest: Vec<GenNode>,
}

impl GenAxis {
    /// Expected top-level nodes, including the implicit numbering used
    /// when the axis has no header levels.
    pub fn expected_forest(&self) -> Vec<GenNode> {
        if self.levels > 0 {
            return self.forest.clone();
        }
        (self.lo..self.hi)
            .enumerate()
            .map(|(k, i)| GenNode {
                label: format!("{} {}", self.axis, k + 1),
                start: i,
                end: i,
                level: 0,
                level_span: 0,
                children: Vec::new(),
            })
            .collect()
    }

    /// `(leaf span, widened span)` per leaf, depth-first left to right.
    pub fn leaves(&self) -> Vec<LeafSpans> {
        fn walk(nodes: &[GenNode], parent: Option<(usize, usize)>, out: &mut Vec<LeafSpans>) {
            for n in nodes {
                let own = (n.start, n.end);
                if n.children.is_empty() {
                    out.push((own, parent.unwrap_or(own)));
                } else {
                    walk(&n.children, Some(own), out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.expected_forest(), None, &mut out);
        out
    }
}

pub struct GenTable {
    pub table: Table,
    pub rows: GenAxis,
    pub cols: GenAxis,
}

const VOCAB: [&str; 8] = ["total", "Total", "men", "a | b", "x\\y", "(p)", "2019", "per cent (%)"];

struct Labeler {
    next: usize,
    dup_rate: f64,
}

impl Labeler {
    fn label(&mut self, rng: &mut StdRng) -> String {
        if rng.gen_bool(self.dup_rate) {
            return VOCAB[rng.gen_range(0..VOCAB.len())].to_string();
        }
        self.next += 1;
        format!("h{}", self.next)
    }
}

/// Random contiguous groups covering `lo..hi`, as half-open ranges.
pub fn partition(rng: &mut StdRng, lo: usize, hi: usize, max_group: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut a = lo;
    while a < hi {
        let len = rng.gen_range(1..=max_group.min(hi - a));
        out.push((a, a + len));
        a += len;
    }
    out
}

fn gen_forest(
    rng: &mut StdRng,
    lo: usize,
    hi: usize,
    level: usize,
    levels: usize,
    labels: &mut Labeler,
) -> Vec<GenNode> {
    partition(rng, lo, hi, 4)
        .into_iter()
        .map(|(a, b)| {
            let remaining = levels - level;
            let label = labels.label(rng);
            if remaining == 1 || rng.gen_bool(0.25) {
                GenNode {
                    label,
                    start: a,
                    end: b - 1,
                    level,
                    level_span: remaining,
                    children: Vec::new(),
                }
            } else {
                let k = rng.gen_range(1..remaining);
                let children = gen_forest(rng, a, b, level + k, levels, labels);
                GenNode {
                    label,
                    start: a,
                    end: b - 1,
                    level,
                    level_span: k,
                    children,
                }
            }
        })
        .collect()
}

fn push_header_cells(nodes: &[GenNode], axis: Axis, cells: &mut Vec<Cell>) {
    for n in nodes {
        let along = n.end - n.start + 1;
        let cell = match axis {
            Axis::Column => Cell::new(n.label.clone(), n.level, n.start).spanning(n.level_span, along),
            Axis::Row => Cell::new(n.label.clone(), n.start, n.level).spanning(along, n.level_span),
        };
        cells.push(cell.header());
        push_header_cells(&n.children, axis, cells);
    }
}

/// Data cells: mostly single, with occasional 2-wide or 2-tall merges.
fn push_data_cells(rng: &mut StdRng, rows: (usize, usize), cols: (usize, usize), cells: &mut Vec<Cell>) {
    let mut taken = BTreeSet::new();
    for r in rows.0..rows.1 {
        for c in cols.0..cols.1 {
            if taken.contains(&(r, c)) {
                continue;
            }
            let (mut rs, mut cs) = (1, 1);
            if rng.gen_bool(0.1) && c + 1 < cols.1 && !taken.contains(&(r, c + 1)) {
                cs = 2;
            } else if rng.gen_bool(0.1) && r + 1 < rows.1 {
                rs = 2;
            }
            for dr in 0..rs {
                for dc in 0..cs {
                    taken.insert((r + dr, c + dc));
                }
            }
            cells.push(Cell::new(format!("d{r}x{c}"), r, c).spanning(rs, cs));
        }
    }
}

/// A random laminar table of at most `max` x `max` cells with header depth
/// and width at most 3.
pub fn random_laminar_table(rng: &mut StdRng, max: usize, dup_rate: f64) -> GenTable {
    let depth = rng.gen_range(0..=3usize.min(max - 1));
    let width = rng.gen_range(0..=3usize.min(max - 1));
    let n_rows = rng.gen_range(depth + 1..=max);
    let n_cols = rng.gen_range(width + 1..=max);
    let mut labels = Labeler { next: 0, dup_rate };
    let col_forest = if depth > 0 {
        gen_forest(rng, width, n_cols, 0, depth, &mut labels)
    } else {
        Vec::new()
    };
    let row_forest = if width > 0 {
        gen_forest(rng, depth, n_rows, 0, width, &mut labels)
    } else {
        Vec::new()
    };
    let mut cells = Vec::new();
    if depth > 0 && width > 0 {
        cells.push(Cell::new("(empty)", 0, 0).spanning(depth, width).header());
    }
    push_header_cells(&col_forest, Axis::Column, &mut cells);
    push_header_cells(&row_forest, Axis::Row, &mut cells);
    push_data_cells(rng, (depth, n_rows), (width, n_cols), &mut cells);
    let table =
        Table::new("gen", "generated", n_rows, n_cols, cells, depth, width).expect("generator builds valid grids");
    GenTable {
        table,
        rows: GenAxis {
            axis: Axis::Row,
            levels: width,
            lo: depth,
            hi: n_rows,
            forest: row_forest,
        },
        cols: GenAxis {
            axis: Axis::Column,
            levels: depth,
            lo: width,
            hi: n_cols,
            forest: col_forest,
        },
    }
}

/// A table whose header levels on one axis are independent random
/// partitions, so it may or may not be laminar. Returns the table, the
/// axis under test and whether every level refines the one above it.
pub fn random_level_partition_table(rng: &mut StdRng) -> (Table, Axis, bool) {
    let levels = rng.gen_range(2..=3usize);
    let data = rng.gen_range(2..=9usize);
    let other = rng.gen_range(1..=4usize);
    let parts: Vec<Vec<(usize, usize)>> = (0..levels).map(|_| partition(rng, 0, data, 4)).collect();
    let laminar = parts.windows(2).all(|w| {
        let upper: BTreeSet<usize> = w[0].iter().map(|g| g.0).collect();
        let lower: BTreeSet<usize> = w[1].iter().map(|g| g.0).collect();
        upper.is_subset(&lower)
    });
    let axis = if rng.gen_bool(0.5) { Axis::Column } else { Axis::Row };
    let mut cells = Vec::new();
    for (level, groups) in parts.iter().enumerate() {
        for &(a, b) in groups {
            let cell = match axis {
                Axis::Column => Cell::new(format!("l{level}g{a}"), level, a).spanning(1, b - a),
                Axis::Row => Cell::new(format!("l{level}g{a}"), a, level).spanning(b - a, 1),
            };
            cells.push(cell.header());
        }
    }
    for i in 0..data {
        for j in 0..other {
            let (r, c) = match axis {
                Axis::Column => (levels + j, i),
                Axis::Row => (i, levels + j),
            };
            cells.push(Cell::new(format!("d{r}x{c}"), r, c));
        }
    }
    let table = match axis {
        Axis::Column => Table::new("cross", "", levels + other, data, cells, levels, 0),
        Axis::Row => Table::new("cross", "", data, levels + other, cells, 0, levels),
    }
    .expect("partition grid is valid");
    (table, axis, laminar)
}

/// Recursive equality between a built node and the generator's node.
pub fn same_node(built: &HeaderNode, expected: &GenNode) -> Result<(), String> {
    if built.value != expected.label || built.span.start != expected.start || built.span.end != expected.end {
        return Err(format!(
            "node {:?} {}-{} vs expected {:?} {}-{}",
            built.value, built.span.start, built.span.end, expected.label, expected.start, expected.end
        ));
    }
    if built.children.len() != expected.children.len() {
        return Err(format!(
            "node {:?}: {} children, expected {}",
            built.value,
            built.children.len(),
            expected.children.len()
        ));
    }
    built
        .children
        .iter()
        .zip(&expected.children)
        .try_for_each(|(b, e)| same_node(b, e))
}

// ---------------------------------------------------------------------------
// sub-table oracle

/// Retained grid indices along one axis: header lines, then the union of
/// widened spans of the selected leaves (all data lines when none).
pub fn oracle_keep(header_lines: usize, axis: &GenAxis, selected_leaves: &[usize]) -> Vec<usize> {
    let leaves = axis.leaves();
    let mut keep: BTreeSet<usize> = (0..header_lines).collect();
    if selected_leaves.is_empty() {
        keep.extend(axis.lo..axis.hi);
    }
    for &i in selected_leaves {
        let (_, (a, b)) = leaves[i];
        keep.extend(a..=b);
    }
    keep.into_iter().collect()
}

/// `(text, row, col, row_span, col_span, is_header)` for the grid made of
/// the retained positions, grouping positions by their source cell.
pub fn oracle_cells(table: &Table, rows: &[usize], cols: &[usize]) -> Vec<(String, usize, usize, usize, usize, bool)> {
    let mut groups: BTreeMap<(usize, usize), (BTreeSet<usize>, BTreeSet<usize>)> = BTreeMap::new();
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            let src = table.cell_at(r, c);
            let g = groups.entry((src.row, src.col)).or_default();
            g.0.insert(i);
            g.1.insert(j);
        }
    }
    let mut out: Vec<_> = groups
        .into_iter()
        .map(|((r, c), (is, js))| {
            let src = table.cell_at(r, c);
            (
                src.text.clone(),
                *is.iter().next().unwrap(),
                *js.iter().next().unwrap(),
                is.len(),
                js.len(),
                src.is_header,
            )
        })
        .collect();
    out.sort_by_key(|t| (t.1, t.2));
    out
}

pub fn cell_tuples(table: &Table) -> Vec<(String, usize, usize, usize, usize, bool)> {
    let mut out: Vec<_> = table
        .cells()
        .iter()
        .map(|c| (c.text.clone(), c.row, c.col, c.row_span, c.col_span, c.is_header))
        .collect();
    out.sort_by_key(|t| (t.1, t.2));
    out
}

pub fn tuples_of(table: &Table) -> Vec<TreePathTuple> {
    merged_tuple_list(&build_row_tree(table).unwrap(), &build_column_tree(table).unwrap())
}

// ---------------------------------------------------------------------------
// end-to-end fixture

#[derive(Debug, Clone, serde::Deserialize)]
pub struct ScriptedResponses {
    pub seek: String,
    pub solve: String,
    pub tqa: String,
}

pub fn e2e_samples() -> Vec<QaSample> {
    interchange::read_samples(&fixture_path("e2e_samples.jsonl")).unwrap()
}

pub fn e2e_responses() -> BTreeMap<String, ScriptedResponses> {
    let text = std::fs::read_to_string(fixture_path("e2e_responses.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn hitab_demo() -> PreparedDemo {
    Demonstration::from_json(DEMO_HITAB).unwrap().prepare().unwrap()
}

/// Mock script answering every prompt a run over `samples` can issue:
/// the Seek prompt, the Solve prompt for each of `variants`, and both
/// single-stage prompts.
pub fn build_script(
    samples: &[QaSample],
    responses: &BTreeMap<String, ScriptedResponses>,
    demo: &PreparedDemo,
    variants: &[SolveVariant],
) -> BTreeMap<String, String> {
    let mut script = BTreeMap::new();
    for s in samples {
        let r = &responses[&s.sample_id];
        let tuples = tuples_of(&s.table);
        let seek_prompt = build_seek_prompt(&s.question, s.table.title(), &tuples, demo).unwrap();
        script.insert(prompt_digest(&seek_prompt), r.seek.clone());
        let outcome = parse_seek(&r.seek, &tuples).ok();
        for &v in variants {
            let eff = effective_variant(v, outcome.as_ref());
            let materials = Materials::derive(&s.table, outcome.as_ref().map(|o| &o.result)).unwrap();
            let p = build_solve_prompt(&s.question, &s.table, eff, outcome.as_ref(), &materials, demo).unwrap();
            script.insert(prompt_digest(&p), r.solve.clone());
        }
        for kind in [DemoCotKind::Vanilla, DemoCotKind::SsCot] {
            let p = build_tqa_prompt(&s.question, &s.table, &tuples, demo, kind).unwrap();
            script.insert(prompt_digest(&p), r.tqa.clone());
        }
    }
    script
}

// ---------------------------------------------------------------------------
// prompt snapshots

pub fn snapshot_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("snapshots")
}

pub fn snapshot_text(p: &seeksolve::prompt::Prompt) -> String {
    format!("[system]\n{}\n\n[user]\n{}\n", p.system_text, p.user_text)
}

/// Every prompt kind for the first end-to-end sample, keyed by snapshot
/// file stem.
pub fn snapshot_prompts() -> Vec<(String, seeksolve::prompt::Prompt)> {
    let demo = hitab_demo();
    let sample = e2e_samples().into_iter().next().unwrap();
    let responses = e2e_responses();
    let tuples = tuples_of(&sample.table);
    let mut out = vec![(
        "seek".to_string(),
        build_seek_prompt(&sample.question, sample.table.title(), &tuples, &demo).unwrap(),
    )];
    let seek = parse_seek(&responses[&sample.sample_id].seek, &tuples).unwrap();
    let materials = Materials::derive(&sample.table, Some(&seek.result)).unwrap();
    for v in SolveVariant::all_realizable() {
        let p = build_solve_prompt(&sample.question, &sample.table, v, Some(&seek), &materials, &demo).unwrap();
        out.push((format!("solve_{}", v.to_string().replace('/', "_")), p));
    }
    for kind in [DemoCotKind::Vanilla, DemoCotKind::SsCot] {
        let p = build_tqa_prompt(&sample.question, &sample.table, &tuples, &demo, kind).unwrap();
        out.push((format!("tqa_{}", kind.as_str()), p));
    }
    out
}

/// Compares each prompt with its snapshot file, rewriting the files
/// instead when `UPDATE_SNAPSHOTS` is set. Returns the mismatching stems.
pub fn check_snapshots() -> Vec<String> {
    let dir = snapshot_dir();
    let update = std::env::var_os("UPDATE_SNAPSHOTS").is_some();
    let mut bad = Vec::new();
    for (name, prompt) in snapshot_prompts() {
        let path = dir.join(format!("{name}.txt"));
        let text = snapshot_text(&prompt);
        if update {
            std::fs::create_dir_all(&dir).unwrap();
            std::fs::write(&path, &text).unwrap();
        } else if std::fs::read_to_string(&path).ok().as_deref() != Some(text.as_str()) {
            bad.push(name);
        }
    }
    bad
}

/// Lead-in sentences a prompt must carry verbatim, by snapshot stem.
pub fn required_leads(name: &str) -> Vec<&'static str> {
    use seeksolve::parse::{CONSECUTIVE_LEAD, SCRATCH_LEAD};
    use seeksolve::simplify::HINT_PREFIX;
    let mut leads = Vec::new();
    if name.starts_with("solve_") {
        if name.contains("from_scratch") {
            leads.push(SCRATCH_LEAD);
        }
        if name.contains("consecutive") {
            leads.push(CONSECUTIVE_LEAD);
        }
        if name.contains("_hint_") {
            leads.push(HINT_PREFIX.trim_end());
        }
    }
    match name {
        "tqa_vanilla" => leads.push(SCRATCH_LEAD),
        "tqa_ss_cot" => leads.push(CONSECUTIVE_LEAD),
        _ => {}
    }
    leads
}

/// Data-cell texts of `table` that are not also header texts and that
/// occur in `text` as a standalone token.
pub fn leaked_data_cells(table: &Table, text: &str) -> Vec<String> {
    let headers: BTreeSet<&str> = table
        .cells()
        .iter()
        .filter(|c| c.is_header)
        .map(|c| c.text.as_str())
        .collect();
    let boundary = |c: Option<char>| c.is_none_or(|c| !(c.is_alphanumeric() || c == '.' || c == ','));
    let mut out = Vec::new();
    for cell in table.cells().iter().filter(|c| !c.is_header) {
        let needle = cell.text.as_str();
        if needle.is_empty() || headers.contains(needle) {
            continue;
        }
        let hit = text
            .match_indices(needle)
            .any(|(i, _)| boundary(text[..i].chars().next_back()) && boundary(text[i + needle.len()..].chars().next()));
        if hit {
            out.push(needle.to_string());
        }
    }
    out
}

// ---------------------------------------------------------------------------
// runs

pub fn mock_config(
    run_dir: &Path,
    script: BTreeMap<String, String>,
    mode: seeksolve::eval::Mode,
    parallelism: usize,
) -> seeksolve::eval::RunConfig {
    seeksolve::eval::RunConfig {
        dataset: seeksolve::eval::DatasetSpec::Custom {
            path: fixture_path("e2e_samples.jsonl"),
        },
        mode,
        variant: seeksolve::eval::DEFAULT_VARIANT,
        demo_cot_kind: DemoCotKind::SsCot,
        demo: None,
        stage1_backend: None,
        stage2_backend: seeksolve::gateway::BackendSpec::mock("mock", script),
        decode: Default::default(),
        parallelism,
        run_dir: run_dir.to_path_buf(),
        limit: None,
    }
}

pub fn full_script() -> BTreeMap<String, String> {
    build_script(
        &e2e_samples(),
        &e2e_responses(),
        &hitab_demo(),
        &SolveVariant::all_realizable(),
    )
}

pub fn read_run_files(run_dir: &Path) -> (String, String) {
    (
        std::fs::read_to_string(run_dir.join(seeksolve::eval::REPORT_FILE)).unwrap(),
        std::fs::read_to_string(run_dir.join(seeksolve::eval::TRACE_FILE)).unwrap(),
    )
}

// ---------------------------------------------------------------------------
// tree checks

fn check_containment(node: &HeaderNode) -> Result<(), String> {
    let mut next = node.span.start;
    for child in &node.children {
        if !node.span.contains(&child.span) {
            return Err(format!("{:?} not inside {:?}", child.value, node.value));
        }
        if child.span.start != next {
            return Err(format!("children of {:?} leave a gap or overlap at {next}", node.value));
        }
        next = child.span.end + 1;
        check_containment(child)?;
    }
    if !node.children.is_empty() && next != node.span.end + 1 {
        return Err(format!("children of {:?} stop short of its span", node.value));
    }
    Ok(())
}

/// Both header trees of a generated table against its layout: node-by-node
/// equality, parent containment, leaf spans partitioning the data range,
/// leaf counts, unique tuple ids and render/parse round-trips.
pub fn check_generated_trees(g: &GenTable) -> Result<(), String> {
    use seeksolve::tree::{linearize, parse_tuple_body, render_tuple};
    let built = [
        (build_row_tree(&g.table).map_err(|e| e.to_string())?, &g.rows),
        (build_column_tree(&g.table).map_err(|e| e.to_string())?, &g.cols),
    ];
    for (tree, axis) in &built {
        let expected = axis.expected_forest();
        if tree.root.children.len() != expected.len() {
            return Err(format!(
                "{}: {} top nodes, expected {}",
                axis.axis,
                tree.root.children.len(),
                expected.len()
            ));
        }
        for (b, e) in tree.root.children.iter().zip(&expected) {
            same_node(b, e)?;
        }
        check_containment(&tree.root)?;
        let mut covered: Vec<usize> = tree.leaf_paths().iter().flat_map(|p| p.leaf().span.indices()).collect();
        covered.sort_unstable();
        if covered != (axis.lo..axis.hi).collect::<Vec<_>>() {
            return Err(format!(
                "{}: leaf spans do not partition {}..{}",
                axis.axis, axis.lo, axis.hi
            ));
        }
        let tuples = linearize(tree);
        if tuples.len() != tree.leaf_count || tree.leaf_count != axis.leaves().len() {
            return Err(format!("{}: leaf count mismatch", axis.axis));
        }
        let ids: BTreeSet<&str> = tuples.iter().map(|t| t.tuple_id.as_str()).collect();
        if ids.len() != tuples.len() {
            return Err(format!("{}: duplicate tuple ids", axis.axis));
        }
        for t in &tuples {
            let (a, values) = parse_tuple_body(&render_tuple(t));
            if a != Some(t.axis) || values != t.values {
                return Err(format!("render/parse mismatch for {}", render_tuple(t)));
            }
        }
    }
    Ok(())
}
