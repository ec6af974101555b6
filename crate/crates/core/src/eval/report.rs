use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalError, Prediction};

pub const REPORT_FILE: &str = "report.json";
pub const TRACE_FILE: &str = "trace.jsonl";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VariantStats {
    pub n_samples: usize,
    pub n_correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub n_samples: usize,
    pub n_correct: usize,
    pub n_parse_failures: usize,
    pub n_fallbacks: usize,
    pub n_errors: usize,
    /// Set when there were no samples; accuracy is then reported as 0.
    pub empty: bool,
    /// Keyed by the variant tag each sample actually ran with.
    pub per_variant: BTreeMap<String, VariantStats>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn summarize(predictions: &[Prediction]) -> EvalReport {
    let mut per_variant: BTreeMap<String, VariantStats> = BTreeMap::new();
    for p in predictions {
        let entry = per_variant.entry(p.variant_tag.clone()).or_default();
        entry.n_samples += 1;
        entry.n_correct += usize::from(p.correct);
    }
    for stats in per_variant.values_mut() {
        stats.accuracy = ratio(stats.n_correct, stats.n_samples);
    }
    let n_samples = predictions.len();
    let n_correct = predictions.iter().filter(|p| p.correct).count();
    EvalReport {
        accuracy: ratio(n_correct, n_samples),
        n_samples,
        n_correct,
        n_parse_failures: predictions
            .iter()
            .filter(|p| p.flags.seek_parse_failed || p.flags.solve_parse_failed)
            .count(),
        n_fallbacks: predictions.iter().filter(|p| p.flags.fallback).count(),
        n_errors: predictions.iter().filter(|p| p.error.is_some()).count(),
        empty: n_samples == 0,
        per_variant,
    }
}

/// Aggregates predictions and writes `report.json` and `trace.jsonl`
/// (one prediction per line, in input order) into `run_dir`.
pub fn report(predictions: &[Prediction], run_dir: &Path) -> Result<EvalReport, EvalError> {
    fs::create_dir_all(run_dir).map_err(|e| EvalError::io(run_dir, e))?;
    let trace_path = run_dir.join(TRACE_FILE);
    let mut trace = fs::File::create(&trace_path).map_err(|e| EvalError::io(&trace_path, e))?;
    for p in predictions {
        let line = serde_json::to_string(p).expect("prediction serializes");
        writeln!(trace, "{line}").map_err(|e| EvalError::io(&trace_path, e))?;
    }
    let summary = summarize(predictions);
    write_report(&summary, run_dir)?;
    Ok(summary)
}

pub fn write_report(summary: &EvalReport, run_dir: &Path) -> Result<(), EvalError> {
    let path = run_dir.join(REPORT_FILE);
    let text = serde_json::to_string_pretty(summary).expect("report serializes");
    fs::write(&path, text + "\n").map_err(|e| EvalError::io(&path, e))
}

pub fn read_trace(run_dir: &Path) -> Result<Vec<Prediction>, EvalError> {
    let path = run_dir.join(TRACE_FILE);
    let file = fs::File::open(&path).map_err(|e| EvalError::io(&path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| EvalError::io(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| EvalError::Config(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

/// Re-scores every traced prediction from its answers and gold list and
/// rebuilds the report.
pub fn rescore_trace(run_dir: &Path) -> Result<EvalReport, EvalError> {
    let mut predictions = read_trace(run_dir)?;
    for p in &mut predictions {
        p.correct = super::score_answer(&p.answers, &p.gold_answers);
    }
    let summary = summarize(&predictions);
    write_report(&summary, run_dir)?;
    Ok(summary)
}
