//! Run orchestration and scoring.
//!
//! A run loads a dataset, executes either the two-stage pipeline or the
//! single-stage prompt through the gateway, scores every sample and writes
//! `report.json` plus a line-per-sample `trace.jsonl` into the run
//! directory. Responses are cached under `<run_dir>/cache`, so re-running
//! an interrupted run against the same directory only pays for the
//! samples that never completed.

mod report;
mod score;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{prompt_digest, BackendSpec, DecodeConfig, Gateway, GatewayError, ResponseCache};
use crate::parse::{parse_seek, parse_solve, SeekOutcome, SolveOutcome};
use crate::prompt::{
    build_seek_prompt, build_solve_prompt, build_tqa_prompt, CotSlot, DemoCotKind, Demonstration, InfoSlot, Materials,
    PreparedDemo, Prompt, PromptError, SolveVariant, TableSlot,
};
use crate::table::{hitab, interchange, wikitq, QaSample, TableError};
use crate::tree::{build_column_tree, build_row_tree, merged_tuple_list, TreePathTuple};

pub use report::{read_trace, report, rescore_trace, summarize, EvalReport, VariantStats, REPORT_FILE, TRACE_FILE};
pub use score::{normalize, score_answer, Normalized};

pub const DEMO_HITAB: &str = include_str!("../../fixtures/demo_hitab.json");
pub const DEMO_WIKITQ: &str = include_str!("../../fixtures/demo_wikitq.json");

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] TableError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl EvalError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        EvalError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// `root` is the HiTab release directory (holding `data/`).
    HitabDev {
        root: PathBuf,
    },
    HitabTest {
        root: PathBuf,
    },
    /// `root` is the WikiTableQuestions release directory.
    WikitqTest {
        root: PathBuf,
    },
    /// A line-delimited sample file in the interchange format.
    Custom {
        path: PathBuf,
    },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Vec<QaSample>, TableError> {
        match self {
            DatasetSpec::HitabDev { root } => hitab::load_hitab(&hitab::split_path(root, "dev")),
            DatasetSpec::HitabTest { root } => hitab::load_hitab(&hitab::split_path(root, "test")),
            DatasetSpec::WikitqTest { root } => {
                wikitq::load_wikitq_with_root(&root.join("data").join("pristine-unseen-tables.tsv"), root)
            }
            DatasetSpec::Custom { path } => interchange::read_samples(path),
        }
    }

    fn builtin_demo(&self) -> &'static str {
        match self {
            DatasetSpec::WikitqTest { .. } => DEMO_WIKITQ,
            _ => DEMO_HITAB,
        }
    }

    fn rebase(&mut self, base: &Path) {
        let p = match self {
            DatasetSpec::HitabDev { root } | DatasetSpec::HitabTest { root } | DatasetSpec::WikitqTest { root } => root,
            DatasetSpec::Custom { path } => path,
        };
        *p = base.join(&*p);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    TwoStage,
    SingleStage,
}

pub const DEFAULT_VARIANT: SolveVariant =
    SolveVariant::new(TableSlot::FullTable, InfoSlot::FullList, CotSlot::Consecutive);

fn default_parallelism() -> usize {
    1
}

/// Run configuration, read from a JSON file. Relative paths are resolved
/// against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub mode: Mode,
    /// Solve-prompt slots for two-stage runs.
    #[serde(default = "default_variant")]
    pub variant: SolveVariant,
    /// Demonstration reasoning for single-stage runs.
    #[serde(default = "default_demo_cot_kind")]
    pub demo_cot_kind: DemoCotKind,
    /// Demonstration fixture; a built-in one per dataset when absent.
    #[serde(default)]
    pub demo: Option<PathBuf>,
    /// Seek-stage backend; defaults to `stage2_backend`.
    #[serde(default)]
    pub stage1_backend: Option<BackendSpec>,
    pub stage2_backend: BackendSpec,
    #[serde(default)]
    pub decode: DecodeConfig,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    pub run_dir: PathBuf,
    /// Evaluate only the first `limit` samples.
    #[serde(default)]
    pub limit: Option<usize>,
}

fn default_variant() -> SolveVariant {
    DEFAULT_VARIANT
}

fn default_demo_cot_kind() -> DemoCotKind {
    DemoCotKind::SsCot
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| EvalError::Config(format!("{}: {e}", path.display())))?;
        cfg.rebase(path.parent().unwrap_or_else(|| Path::new(".")));
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        self.dataset.rebase(base);
        self.run_dir = base.join(&self.run_dir);
        if let Some(demo) = &mut self.demo {
            *demo = base.join(&*demo);
        }
        for spec in [self.stage1_backend.as_mut(), Some(&mut self.stage2_backend)]
            .into_iter()
            .flatten()
        {
            if let BackendSpec::ScriptedMock {
                script_file: Some(file),
                ..
            } = spec
            {
                *file = base.join(&*file);
            }
        }
    }

    pub fn load_demo(&self) -> Result<PreparedDemo, EvalError> {
        let demo = match &self.demo {
            Some(path) => Demonstration::from_file(path)?,
            None => Demonstration::from_json(self.dataset.builtin_demo())?,
        };
        Ok(demo.prepare()?)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    /// Seek response had no usable `Selected tuples:` section.
    pub seek_parse_failed: bool,
    /// Seek response parsed but selected nothing.
    pub seek_empty: bool,
    /// The Solve prompt ran with a fuller variant than configured.
    pub fallback: bool,
    /// Solve response had no usable `Answer:` line.
    pub solve_parse_failed: bool,
}

/// Per-sample record; one line of the trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_id: String,
    /// Variant the final prompt actually used.
    pub variant_tag: String,
    pub prompt_digests: Vec<String>,
    pub prompts: Vec<Prompt>,
    pub raw_responses: Vec<String>,
    pub seek: Option<SeekOutcome>,
    pub solve: Option<SolveOutcome>,
    pub answers: Vec<String>,
    pub gold_answers: Vec<String>,
    pub flags: Flags,
    pub error: Option<String>,
    pub correct: bool,
}

impl Prediction {
    fn start(sample: &QaSample, variant_tag: String) -> Self {
        Prediction {
            sample_id: sample.sample_id.clone(),
            variant_tag,
            prompt_digests: Vec::new(),
            prompts: Vec::new(),
            raw_responses: Vec::new(),
            seek: None,
            solve: None,
            answers: Vec::new(),
            gold_answers: sample.gold_answers.clone(),
            flags: Flags::default(),
            error: None,
            correct: false,
        }
    }

    fn record_prompt(&mut self, prompt: &Prompt) {
        self.prompt_digests.push(prompt_digest(prompt));
        self.prompts.push(prompt.clone());
    }

    fn finish_solve(&mut self, response: Result<String, GatewayError>) {
        match response {
            Err(e) => self.error = Some(format!("solve backend: {e}")),
            Ok(text) => {
                match parse_solve(&text) {
                    Ok(outcome) => {
                        self.answers = outcome.answers.clone();
                        self.solve = Some(outcome);
                    }
                    Err(e) => {
                        log::warn!("sample {}: {e}", self.sample_id);
                        self.flags.solve_parse_failed = true;
                    }
                }
                self.raw_responses.push(text);
            }
        }
        self.correct = score_answer(&self.answers, &self.gold_answers);
    }
}

fn tuple_list(sample: &QaSample) -> Result<Vec<TreePathTuple>, String> {
    let rows = build_row_tree(&sample.table).map_err(|e| e.to_string())?;
    let cols = build_column_tree(&sample.table).map_err(|e| e.to_string())?;
    Ok(merged_tuple_list(&rows, &cols))
}

/// The variant a sample can actually run with given its Seek outcome:
/// without a nonempty selection the sub-table becomes the full table and
/// the hint becomes the full list; without any outcome reasoning starts
/// from scratch.
pub fn effective_variant(requested: SolveVariant, seek: Option<&SeekOutcome>) -> SolveVariant {
    let mut v = requested;
    let has_selection = seek.is_some_and(|s| !s.result.is_empty());
    if !has_selection {
        if v.table_slot == TableSlot::SubTable {
            v.table_slot = TableSlot::FullTable;
        }
        if v.info_slot == InfoSlot::Hint {
            v.info_slot = InfoSlot::FullList;
        }
    }
    if seek.is_none() {
        v.cot_slot = CotSlot::FromScratch;
    }
    if !v.is_realizable() {
        v.info_slot = InfoSlot::FullList;
    }
    v
}

/// Executes runs against a pair of gateways.
pub struct Runner {
    pub stage1: Gateway,
    pub stage2: Gateway,
    pub decode: DecodeConfig,
    pub parallelism: usize,
    pub demo: PreparedDemo,
}

impl Runner {
    /// Opens both gateways with a shared cache under `<run_dir>/cache`.
    pub fn from_config(cfg: &RunConfig) -> Result<Self, EvalError> {
        let cache_dir = cfg.run_dir.join("cache");
        let stage2 = Gateway::new(&cfg.stage2_backend)?.with_cache(ResponseCache::open(&cache_dir)?);
        let stage1_spec = cfg.stage1_backend.as_ref().unwrap_or(&cfg.stage2_backend);
        let stage1 = Gateway::new(stage1_spec)?.with_cache(ResponseCache::open(&cache_dir)?);
        Ok(Runner {
            stage1,
            stage2,
            decode: cfg.decode,
            parallelism: cfg.parallelism.max(1),
            demo: cfg.load_demo()?,
        })
    }

    pub fn backend_calls(&self) -> usize {
        self.stage1.backend_calls() + self.stage2.backend_calls()
    }

    /// Seek, then Solve with `variant`, for every sample.
    pub fn run_two_stage(&self, variant: SolveVariant, samples: &[QaSample]) -> Vec<Prediction> {
        let mut preds: Vec<Prediction> = samples.iter().map(|s| Prediction::start(s, variant.tag())).collect();
        let mut tuples: Vec<Vec<TreePathTuple>> = vec![Vec::new(); samples.len()];
        let mut seek_jobs: Vec<(usize, Prompt)> = Vec::new();
        for (i, sample) in samples.iter().enumerate() {
            let prompt = tuple_list(sample).and_then(|t| {
                let p = build_seek_prompt(&sample.question, sample.table.title(), &t, &self.demo)
                    .map_err(|e| e.to_string());
                tuples[i] = t;
                p
            });
            match prompt {
                Ok(p) => seek_jobs.push((i, p)),
                Err(e) => preds[i].error = Some(e),
            }
        }

        let seek_prompts: Vec<Prompt> = seek_jobs.iter().map(|(_, p)| p.clone()).collect();
        let seek_responses = self
            .stage1
            .complete_batch(&seek_prompts, &self.decode, self.parallelism);
        let mut solve_jobs: Vec<(usize, Prompt)> = Vec::new();
        for ((i, prompt), response) in seek_jobs.into_iter().zip(seek_responses) {
            let pred = &mut preds[i];
            pred.record_prompt(&prompt);
            let text = match response {
                Ok(text) => text,
                Err(e) => {
                    pred.error = Some(format!("seek backend: {e}"));
                    continue;
                }
            };
            match parse_seek(&text, &tuples[i]) {
                Ok(outcome) => {
                    pred.flags.seek_empty = outcome.result.is_empty();
                    pred.seek = Some(outcome);
                }
                Err(e) => {
                    log::warn!("sample {}: {e}; falling back to the full table", pred.sample_id);
                    pred.flags.seek_parse_failed = true;
                }
            }
            pred.raw_responses.push(text);

            let sample = &samples[i];
            let effective = effective_variant(variant, pred.seek.as_ref());
            pred.flags.fallback = effective != variant;
            pred.variant_tag = effective.tag();
            let built = Materials::derive(&sample.table, pred.seek.as_ref().map(|s| &s.result)).and_then(|m| {
                build_solve_prompt(
                    &sample.question,
                    &sample.table,
                    effective,
                    pred.seek.as_ref(),
                    &m,
                    &self.demo,
                )
            });
            match built {
                Ok(p) => solve_jobs.push((i, p)),
                Err(e) => pred.error = Some(e.to_string()),
            }
        }

        let solve_prompts: Vec<Prompt> = solve_jobs.iter().map(|(_, p)| p.clone()).collect();
        let solve_responses = self
            .stage2
            .complete_batch(&solve_prompts, &self.decode, self.parallelism);
        for ((i, prompt), response) in solve_jobs.into_iter().zip(solve_responses) {
            preds[i].record_prompt(&prompt);
            preds[i].finish_solve(response);
        }
        preds
    }

    /// One combined prompt per sample.
    pub fn run_single_stage(&self, kind: DemoCotKind, samples: &[QaSample]) -> Vec<Prediction> {
        let tag = format!("tqa:{}", kind.as_str());
        let mut preds: Vec<Prediction> = samples.iter().map(|s| Prediction::start(s, tag.clone())).collect();
        let mut jobs: Vec<(usize, Prompt)> = Vec::new();
        for (i, sample) in samples.iter().enumerate() {
            let prompt = tuple_list(sample).and_then(|t| {
                build_tqa_prompt(&sample.question, &sample.table, &t, &self.demo, kind).map_err(|e| e.to_string())
            });
            match prompt {
                Ok(p) => jobs.push((i, p)),
                Err(e) => preds[i].error = Some(e),
            }
        }
        let prompts: Vec<Prompt> = jobs.iter().map(|(_, p)| p.clone()).collect();
        let responses = self.stage2.complete_batch(&prompts, &self.decode, self.parallelism);
        for ((i, prompt), response) in jobs.into_iter().zip(responses) {
            preds[i].record_prompt(&prompt);
            preds[i].finish_solve(response);
        }
        preds
    }

    pub fn run_config(&self, cfg: &RunConfig, samples: &[QaSample]) -> Vec<Prediction> {
        match cfg.mode {
            Mode::TwoStage => self.run_two_stage(cfg.variant, samples),
            Mode::SingleStage => self.run_single_stage(cfg.demo_cot_kind, samples),
        }
    }
}

/// Loads the dataset, runs it and writes the report and trace.
pub fn run(cfg: &RunConfig) -> Result<(Vec<Prediction>, EvalReport), EvalError> {
    if cfg.mode == Mode::TwoStage && !cfg.variant.is_realizable() {
        return Err(EvalError::Config(format!("variant {} is not realizable", cfg.variant)));
    }
    let mut samples = cfg.dataset.load()?;
    if let Some(limit) = cfg.limit {
        samples.truncate(limit);
    }
    let runner = Runner::from_config(cfg)?;
    log::info!("running {} samples ({:?})", samples.len(), cfg.mode);
    let predictions = runner.run_config(cfg, &samples);
    let summary = report(&predictions, &cfg.run_dir)?;
    Ok((predictions, summary))
}
