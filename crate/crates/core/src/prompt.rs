//! Prompt assembly for the Seek stage, the Solve stage variants and the
//! single-stage TQA prompt. Every prompt is 1-shot: one demonstration
//! block followed by one task block, both in the user turn.
//!
//! Output markers (`Selected tuples:`, `Answer:`) are stated in the
//! instructions and shown in the demonstration.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parse::{parse_seek, parse_solve, ParseError, SeekOutcome, SolveOutcome, CONSECUTIVE_LEAD, SCRATCH_LEAD};
use crate::simplify::{extract_subtable, format_hint, SeekResult, SimplifyError};
use crate::table::{render_markdown, Table, TableError};
use crate::tree::{build_column_tree, build_row_tree, merged_tuple_list, render_tuple, TreeError, TreePathTuple};

pub const SYSTEM_TEXT: &str = "You are an expert at answering questions about tables.";

const TUPLE_NOTE: &str = "Each tuple is a path in the table's row header tree or column header tree, \
written as (row: ...) or (column: ...) and read from the top-level header down to a single row or column.";

const SEEK_INSTRUCTION: &str = "Your task is to seek the information needed to answer a question about a table. \
The table itself is not shown; you are given a numbered list of tuples instead.";

const SEEK_OUTPUT: &str = "Analyze the question and the header structure step by step and explain which tuples are relevant. \
Then write a final line starting with \"Selected tuples:\" that lists every relevant tuple exactly as written in the list, separated by \", \".";

const TABLE_NOTE: &str =
    "The table is given in Markdown; a merged header cell repeats its text in every row or column it covers.";

const ANSWER_OUTPUT: &str = "Finish with a final line starting with \"Answer:\" followed by the answer. \
Separate multiple answers with \"; \".";

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("tuple list is empty")]
    EmptyTuples,
    #[error("variant {0} is not realizable")]
    UnrealizableVariant(SolveVariant),
    #[error("variant {0} needs a Seek outcome")]
    MissingSeek(SolveVariant),
    #[error("variant {0} needs a nonempty Seek result")]
    EmptySeekResult(SolveVariant),
    #[error("demonstration: {0}")]
    Demo(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Simplify(#[from] SimplifyError),
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableSlot {
    FullTable,
    SubTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoSlot {
    None,
    FullList,
    Hint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CotSlot {
    FromScratch,
    Consecutive,
}

/// Slot configuration of the Solve prompt. Serialized as `table/info/cot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SolveVariant {
    pub table_slot: TableSlot,
    pub info_slot: InfoSlot,
    pub cot_slot: CotSlot,
}

impl SolveVariant {
    pub const fn new(table_slot: TableSlot, info_slot: InfoSlot, cot_slot: CotSlot) -> Self {
        SolveVariant {
            table_slot,
            info_slot,
            cot_slot,
        }
    }

    /// A full tuple list cannot accompany a sub-table (it names rows and
    /// columns that were dropped), and consecutive reasoning needs some
    /// Seek-derived material in context: a sub-table or an info slot.
    pub fn is_realizable(&self) -> bool {
        let sub_with_full_list = self.table_slot == TableSlot::SubTable && self.info_slot == InfoSlot::FullList;
        let bare_consecutive = self.cot_slot == CotSlot::Consecutive
            && self.table_slot == TableSlot::FullTable
            && self.info_slot == InfoSlot::None;
        !sub_with_full_list && !bare_consecutive
    }

    pub fn all_realizable() -> Vec<SolveVariant> {
        let mut out = Vec::new();
        for cot in [CotSlot::FromScratch, CotSlot::Consecutive] {
            for table in [TableSlot::FullTable, TableSlot::SubTable] {
                for info in [InfoSlot::None, InfoSlot::FullList, InfoSlot::Hint] {
                    let v = SolveVariant::new(table, info, cot);
                    if v.is_realizable() {
                        out.push(v);
                    }
                }
            }
        }
        out
    }

    pub fn needs_seek_result(&self) -> bool {
        self.table_slot == TableSlot::SubTable || self.info_slot == InfoSlot::Hint
    }

    pub fn tag(&self) -> String {
        format!("solve:{self}")
    }
}

impl fmt::Display for SolveVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let table = match self.table_slot {
            TableSlot::FullTable => "full_table",
            TableSlot::SubTable => "sub_table",
        };
        let info = match self.info_slot {
            InfoSlot::None => "none",
            InfoSlot::FullList => "full_list",
            InfoSlot::Hint => "hint",
        };
        let cot = match self.cot_slot {
            CotSlot::FromScratch => "from_scratch",
            CotSlot::Consecutive => "consecutive",
        };
        write!(f, "{table}/{info}/{cot}")
    }
}

impl From<SolveVariant> for String {
    fn from(v: SolveVariant) -> String {
        v.to_string()
    }
}

impl TryFrom<String> for SolveVariant {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl std::str::FromStr for SolveVariant {
    type Err = String;

    /// Parses `table/info/cot` (or comma separated), e.g.
    /// `sub_table/hint/consecutive`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(['/', ',']).map(str::trim).collect();
        let [table, info, cot] = parts.as_slice() else {
            return Err(format!("expected table/info/cot, got `{s}`"));
        };
        let table_slot = match *table {
            "full_table" | "full" => TableSlot::FullTable,
            "sub_table" | "sub" => TableSlot::SubTable,
            other => return Err(format!("unknown table slot `{other}`")),
        };
        let info_slot = match *info {
            "none" => InfoSlot::None,
            "full_list" | "list" => InfoSlot::FullList,
            "hint" => InfoSlot::Hint,
            other => return Err(format!("unknown info slot `{other}`")),
        };
        let cot_slot = match *cot {
            "from_scratch" | "scratch" => CotSlot::FromScratch,
            "consecutive" => CotSlot::Consecutive,
            other => return Err(format!("unknown cot slot `{other}`")),
        };
        Ok(SolveVariant::new(table_slot, info_slot, cot_slot))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoCotKind {
    Vanilla,
    SsCot,
}

impl DemoCotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DemoCotKind::Vanilla => "vanilla",
            DemoCotKind::SsCot => "ss_cot",
        }
    }
}

/// A worked example, stored as a JSON fixture.
///
/// `stage1_response` is a Seek response; `stage2_response` is the Solve
/// response that continues from its rationale; `vanilla_response` is
/// reasoning from scratch (without the lead-in sentence);
/// `ss_cot_response` is the combined Seek-and-Solve reasoning. Every
/// response except the Seek one ends with an `Answer:` line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub table: Table,
    pub question: String,
    pub stage1_response: String,
    pub stage2_response: String,
    #[serde(default)]
    pub vanilla_response: Option<String>,
    #[serde(default)]
    pub ss_cot_response: Option<String>,
    pub answer: String,
}

impl Demonstration {
    pub fn from_file(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path).map_err(|e| PromptError::Demo(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, PromptError> {
        serde_json::from_str(text).map_err(|e| PromptError::Demo(e.to_string()))
    }

    /// Parses every response against the demo table's tuples.
    pub fn prepare(&self) -> Result<PreparedDemo, PromptError> {
        let row_tree = build_row_tree(&self.table)?;
        let col_tree = build_column_tree(&self.table)?;
        let tuples = merged_tuple_list(&row_tree, &col_tree);
        let demo_err = |what: &str, e: ParseError| PromptError::Demo(format!("{what}: {e}"));
        let seek = parse_seek(&self.stage1_response, &tuples).map_err(|e| demo_err("stage1_response", e))?;
        if seek.result.is_empty() {
            return Err(PromptError::Demo("stage1_response selects no tuples".into()));
        }
        if !seek.result.unmatched_mentions.is_empty() {
            return Err(PromptError::Demo(format!(
                "stage1_response names unknown tuples: {:?}",
                seek.result.unmatched_mentions
            )));
        }
        let solve = parse_solve(&self.stage2_response).map_err(|e| demo_err("stage2_response", e))?;
        for (name, field) in [
            ("vanilla_response", &self.vanilla_response),
            ("ss_cot_response", &self.ss_cot_response),
        ] {
            if let Some(text) = field {
                parse_solve(text).map_err(|e| demo_err(name, e))?;
            }
        }
        let hint = format_hint(&seek.result)?;
        Ok(PreparedDemo {
            demo: self.clone(),
            tuples,
            seek,
            solve,
            hint,
        })
    }
}

/// A demonstration with its derived artifacts.
#[derive(Debug, Clone)]
pub struct PreparedDemo {
    pub demo: Demonstration,
    pub tuples: Vec<TreePathTuple>,
    pub seek: SeekOutcome,
    pub solve: SolveOutcome,
    pub hint: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub system_text: String,
    pub user_text: String,
    pub variant_tag: String,
}

/// Numbered tuple list, one per line: `1. (row: ..)`.
pub fn render_information(tuples: &[TreePathTuple]) -> String {
    tuples
        .iter()
        .enumerate()
        .map(|(i, t)| format!("{}. {}", i + 1, render_tuple(t)))
        .collect::<Vec<_>>()
        .join("\n")
}

fn table_block(table: &Table) -> String {
    let grid = render_markdown(table);
    if table.title().is_empty() {
        grid
    } else {
        format!("Table: {}\n{grid}", table.title())
    }
}

fn assemble(instruction: &str, example: &str, task: &str) -> String {
    format!("{instruction}\n\n### Example\n\n{example}\n\n### Task\n\n{task}")
}

fn seek_block(title: &str, tuples: &[TreePathTuple], question: &str) -> String {
    let mut out = String::new();
    if !title.is_empty() {
        out.push_str(&format!("Table title: {title}\n"));
    }
    out.push_str(&format!(
        "Information:\n{}\nQuestion: {question}\nResponse:",
        render_information(tuples)
    ));
    out
}

pub fn build_seek_prompt(
    question: &str,
    title: &str,
    tuples: &[TreePathTuple],
    demo: &PreparedDemo,
) -> Result<Prompt, PromptError> {
    if tuples.is_empty() {
        return Err(PromptError::EmptyTuples);
    }
    let instruction = format!("{SEEK_INSTRUCTION} {TUPLE_NOTE}\n{SEEK_OUTPUT}");
    let example = format!(
        "{}\n{}",
        seek_block(demo.demo.table.title(), &demo.tuples, &demo.demo.question),
        demo.demo.stage1_response.trim()
    );
    let task = seek_block(title, tuples, question);
    Ok(Prompt {
        system_text: SYSTEM_TEXT.to_string(),
        user_text: assemble(&instruction, &example, &task),
        variant_tag: "seek".to_string(),
    })
}

/// What fills the Solve slots for one sample.
#[derive(Debug, Clone)]
pub struct Materials {
    pub tuples: Vec<TreePathTuple>,
    pub sub_table: Option<Table>,
    pub hint: Option<String>,
}

impl Materials {
    /// Builds the tuple list and, for a nonempty Seek result, the sub-table
    /// and hint.
    pub fn derive(table: &Table, seek: Option<&SeekResult>) -> Result<Materials, PromptError> {
        let row_tree = build_row_tree(table)?;
        let col_tree = build_column_tree(table)?;
        let tuples = merged_tuple_list(&row_tree, &col_tree);
        let (sub_table, hint) = match seek {
            Some(result) if !result.is_empty() => (
                Some(extract_subtable(table, &row_tree, &col_tree, result)?),
                Some(format_hint(result)?),
            ),
            _ => (None, None),
        };
        Ok(Materials {
            tuples,
            sub_table,
            hint,
        })
    }
}

fn solve_instruction(variant: SolveVariant) -> String {
    let mut lines = vec![format!("Your task is to answer a question about a table. {TABLE_NOTE}")];
    if variant.table_slot == TableSlot::SubTable {
        lines.push(
            "The table in the task may be a sub-table that keeps only the rows and columns relevant to the question."
                .to_string(),
        );
    }
    match variant.info_slot {
        InfoSlot::None => {}
        InfoSlot::FullList => lines.push(format!("The information is a numbered list of tuples. {TUPLE_NOTE}")),
        InfoSlot::Hint => lines.push("A hint names the rows and columns relevant to the question.".to_string()),
    }
    lines.push(format!("Reason step by step. {ANSWER_OUTPUT}"));
    lines.join("\n")
}

fn cot_lead(variant: SolveVariant, seek_cot: &str) -> String {
    match variant.cot_slot {
        CotSlot::FromScratch => format!("{SCRATCH_LEAD}."),
        CotSlot::Consecutive => format!("{CONSECUTIVE_LEAD}\n{seek_cot}"),
    }
}

fn solve_block(table: &Table, info: Option<String>, question: &str) -> String {
    let mut out = table_block(table);
    if let Some(info) = info {
        out.push('\n');
        out.push_str(&info);
    }
    out.push_str(&format!("\nQuestion: {question}\nResponse:"));
    out
}

pub fn build_solve_prompt(
    question: &str,
    table: &Table,
    variant: SolveVariant,
    seek: Option<&SeekOutcome>,
    materials: &Materials,
    demo: &PreparedDemo,
) -> Result<Prompt, PromptError> {
    if !variant.is_realizable() {
        return Err(PromptError::UnrealizableVariant(variant));
    }
    let seek_cot = match (variant.cot_slot, seek) {
        (CotSlot::Consecutive, None) => return Err(PromptError::MissingSeek(variant)),
        (_, Some(s)) => s.seek_cot.as_str(),
        (CotSlot::FromScratch, None) => "",
    };
    let query_table = match variant.table_slot {
        TableSlot::FullTable => table,
        TableSlot::SubTable => materials
            .sub_table
            .as_ref()
            .ok_or(PromptError::EmptySeekResult(variant))?,
    };
    let query_info = match variant.info_slot {
        InfoSlot::None => None,
        InfoSlot::FullList => {
            if materials.tuples.is_empty() {
                return Err(PromptError::EmptyTuples);
            }
            Some(format!("Information:\n{}", render_information(&materials.tuples)))
        }
        InfoSlot::Hint => Some(materials.hint.clone().ok_or(PromptError::EmptySeekResult(variant))?),
    };
    let demo_info = match variant.info_slot {
        InfoSlot::None => None,
        InfoSlot::FullList => Some(format!("Information:\n{}", render_information(&demo.tuples))),
        InfoSlot::Hint => Some(demo.hint.clone()),
    };
    let demo_body = match variant.cot_slot {
        CotSlot::FromScratch => demo
            .demo
            .vanilla_response
            .as_deref()
            .ok_or_else(|| PromptError::Demo("vanilla_response is required for from-scratch reasoning".into()))?,
        CotSlot::Consecutive => demo.demo.stage2_response.as_str(),
    };
    let example = format!(
        "{}\n{}\n{}",
        solve_block(&demo.demo.table, demo_info, &demo.demo.question),
        cot_lead(variant, &demo.seek.seek_cot),
        demo_body.trim()
    );
    let task = format!(
        "{}\n{}",
        solve_block(query_table, query_info, question),
        cot_lead(variant, seek_cot)
    );
    Ok(Prompt {
        system_text: SYSTEM_TEXT.to_string(),
        user_text: assemble(&solve_instruction(variant), &example, &task),
        variant_tag: variant.tag(),
    })
}

/// Reasoning block of the demonstration in the single-stage prompt.
pub fn tqa_demo_reasoning(demo: &Demonstration, kind: DemoCotKind) -> Result<String, PromptError> {
    match kind {
        DemoCotKind::Vanilla => demo
            .vanilla_response
            .as_deref()
            .map(|r| format!("{SCRATCH_LEAD}.\n{}", r.trim()))
            .ok_or_else(|| PromptError::Demo("vanilla_response is required for a vanilla demonstration".into())),
        DemoCotKind::SsCot => demo
            .ss_cot_response
            .as_deref()
            .map(|r| r.trim().to_string())
            .ok_or_else(|| PromptError::Demo("ss_cot_response is required for an SS-CoT demonstration".into())),
    }
}

pub fn build_tqa_prompt(
    question: &str,
    table: &Table,
    tuples: &[TreePathTuple],
    demo: &PreparedDemo,
    kind: DemoCotKind,
) -> Result<Prompt, PromptError> {
    if tuples.is_empty() {
        return Err(PromptError::EmptyTuples);
    }
    let instruction = format!(
        "Your task is to answer a question about a table. {TABLE_NOTE}\n\
         The information is a numbered list of tuples. {TUPLE_NOTE}\n\
         First seek the tuples relevant to the question, then use them to locate the data and reason step by step. {ANSWER_OUTPUT}"
    );
    let info = |t: &[TreePathTuple]| Some(format!("Information:\n{}", render_information(t)));
    let example = format!(
        "{}\n{}",
        solve_block(&demo.demo.table, info(&demo.tuples), &demo.demo.question),
        tqa_demo_reasoning(&demo.demo, kind)?
    );
    let task = solve_block(table, info(tuples), question);
    Ok(Prompt {
        system_text: SYSTEM_TEXT.to_string(),
        user_text: assemble(&instruction, &example, &task),
        variant_tag: format!("tqa:{}", kind.as_str()),
    })
}
