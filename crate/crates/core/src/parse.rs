//! Parsing of stage responses.
//!
//! Seek responses end with a `Selected tuples:` line, Solve responses with
//! an `Answer:` line. In both cases the last occurrence of the marker wins
//! and everything before it is the rationale.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simplify::SeekResult;
use crate::tree::{parse_tuple_body, render_tuple, TreePathTuple};

pub const SEEK_MARKER: &str = "Selected tuples:";
pub const ANSWER_MARKER: &str = "Answer:";
/// Lead-in for reasoning that continues from the Seek rationale; also the
/// connective inside an SS-CoT.
pub const CONSECUTIVE_LEAD: &str = "Let us look at the relevant tuples in the information given.";
pub const SCRATCH_LEAD: &str = "Let us think step by step";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("response has no `{0}` marker")]
    MissingMarker(&'static str),
    #[error("response has no rationale before `{SEEK_MARKER}`")]
    EmptyRationale,
    #[error("`{ANSWER_MARKER}` line is empty")]
    EmptyAnswer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeekOutcome {
    pub seek_cot: String,
    pub result: SeekResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub solve_cot: String,
    pub answers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SsCot {
    pub text: String,
}

/// Byte offset of the last ASCII-case-insensitive occurrence of `marker`.
fn rfind_marker(text: &str, marker: &str) -> Option<usize> {
    text.to_ascii_lowercase().rfind(&marker.to_ascii_lowercase())
}

pub fn parse_seek(text: &str, candidates: &[TreePathTuple]) -> Result<SeekOutcome, ParseError> {
    let pos = rfind_marker(text, SEEK_MARKER).ok_or(ParseError::MissingMarker(SEEK_MARKER))?;
    let seek_cot = text[..pos].trim();
    if seek_cot.is_empty() {
        return Err(ParseError::EmptyRationale);
    }
    let mentions = split_mentions(&text[pos + SEEK_MARKER.len()..]);
    let renderings: Vec<String> = candidates.iter().map(render_tuple).collect();
    let mut chosen = vec![false; candidates.len()];
    let mut unmatched = Vec::new();
    for mention in mentions {
        match match_mention(&mention, candidates, &renderings) {
            Some(i) => chosen[i] = true,
            None => unmatched.push(mention),
        }
    }
    let selected = candidates
        .iter()
        .zip(&chosen)
        .filter(|(_, &c)| c)
        .map(|(t, _)| t.clone())
        .collect();
    Ok(SeekOutcome {
        seek_cot: seek_cot.to_string(),
        result: SeekResult {
            selected,
            unmatched_mentions: unmatched,
        },
    })
}

/// Top-level parenthesised groups; when there are none, the text split on
/// commas, semicolons and newlines.
fn split_mentions(section: &str) -> Vec<String> {
    let mut groups = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    let mut escaped = false;
    for (i, c) in section.char_indices() {
        if escaped {
            escaped = false;
            continue;
        }
        match c {
            '\\' => escaped = true,
            '(' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            ')' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    groups.push(section[start..=i].to_string());
                }
            }
            _ => {}
        }
    }
    if !groups.is_empty() {
        return groups;
    }
    section
        .split([',', ';', '\n'])
        .map(|s| s.trim().trim_end_matches('.').trim())
        .filter(|s| !s.is_empty() && !s.eq_ignore_ascii_case("none"))
        .map(str::to_string)
        .collect()
}

fn unique<I: Iterator<Item = usize>>(mut hits: I) -> Option<Option<usize>> {
    let first = hits.next()?;
    Some(if hits.next().is_none() { Some(first) } else { None })
}

fn fold(value: &str) -> String {
    value
        .chars()
        .filter(|c| !c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

fn tokens(value: &str) -> impl Iterator<Item = String> + '_ {
    value
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Exact rendering, then case/whitespace-folded values, then the unique
/// best token overlap. Any tie at the deciding stage refuses the mention.
fn match_mention(mention: &str, candidates: &[TreePathTuple], renderings: &[String]) -> Option<usize> {
    let mention = mention.trim();
    let exact = renderings.iter().enumerate().filter(|(_, r)| r.as_str() == mention);
    if let Some(hit) = unique(exact.map(|(i, _)| i)) {
        return hit;
    }

    let (axis, values) = parse_tuple_body(mention);
    let axis_ok = |c: &TreePathTuple| axis.is_none_or(|a| a == c.axis);
    let folded: Vec<String> = values.iter().map(|v| fold(v)).collect();
    let folded_hits = candidates.iter().enumerate().filter(|(_, c)| {
        axis_ok(c) && c.values.len() == folded.len() && c.values.iter().zip(&folded).all(|(v, f)| fold(v) == *f)
    });
    if let Some(hit) = unique(folded_hits.map(|(i, _)| i)) {
        return hit;
    }

    let mut mention_tokens: Vec<String> = values.iter().flat_map(|v| tokens(v).collect::<Vec<_>>()).collect();
    if let Some(a) = axis {
        mention_tokens.push(a.as_str().to_string());
    }
    mention_tokens.sort();
    mention_tokens.dedup();
    if mention_tokens.is_empty() {
        return None;
    }
    let mut best: Option<(f64, usize)> = None;
    let mut tied = false;
    for (i, c) in candidates.iter().enumerate() {
        let mut cand: Vec<String> = c.values.iter().flat_map(|v| tokens(v).collect::<Vec<_>>()).collect();
        if axis.is_some() {
            cand.push(c.axis.as_str().to_string());
        }
        cand.sort();
        cand.dedup();
        let shared = cand.iter().filter(|t| mention_tokens.binary_search(t).is_ok()).count();
        if shared == 0 {
            continue;
        }
        let union = cand.len() + mention_tokens.len() - shared;
        let score = shared as f64 / union as f64;
        match best {
            Some((b, _)) if score < b => {}
            Some((b, _)) if score == b => tied = true,
            _ => {
                best = Some((score, i));
                tied = false;
            }
        }
    }
    match best {
        Some((_, i)) if !tied => Some(i),
        _ => None,
    }
}

pub fn parse_solve(text: &str) -> Result<SolveOutcome, ParseError> {
    let pos = rfind_marker(text, ANSWER_MARKER).ok_or(ParseError::MissingMarker(ANSWER_MARKER))?;
    let solve_cot = text[..pos].trim_end().trim_end_matches('*').trim().to_string();
    let tail = &text[pos + ANSWER_MARKER.len()..];
    let line = tail.lines().next().unwrap_or("").trim().trim_matches('*').trim();
    let answers = split_answers(line);
    if answers.is_empty() {
        return Err(ParseError::EmptyAnswer);
    }
    Ok(SolveOutcome { solve_cot, answers })
}

/// Splits on `;`; without one, on commas that are not digit-grouping
/// separators (so `1,234` stays whole).
fn split_answers(line: &str) -> Vec<String> {
    let parts: Vec<String> = if line.contains(';') {
        line.split(';').map(str::to_string).collect()
    } else {
        let chars: Vec<char> = line.chars().collect();
        let mut parts = Vec::new();
        let mut current = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let grouping = c == ','
                && i > 0
                && chars[i - 1].is_ascii_digit()
                && chars.get(i + 1).is_some_and(char::is_ascii_digit);
            if c == ',' && !grouping {
                parts.push(std::mem::take(&mut current));
            } else {
                current.push(c);
            }
        }
        parts.push(current);
        parts
    };
    parts
        .into_iter()
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty())
        .collect()
}

pub fn compose_ss_cot(seek: &SeekOutcome, solve: &SolveOutcome) -> SsCot {
    SsCot {
        text: format!("{}\n{CONSECUTIVE_LEAD}\n{}", seek.seek_cot, solve.solve_cot),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Axis;

    fn tuple(axis: Axis, values: &[&str], leaf_index: usize) -> TreePathTuple {
        TreePathTuple {
            axis,
            values: values.iter().map(|s| s.to_string()).collect(),
            leaf_index,
            tuple_id: format!("{axis}:{}", values.join("/")),
        }
    }

    fn candidates() -> Vec<TreePathTuple> {
        vec![
            tuple(Axis::Row, &["total", "men"], 0),
            tuple(Axis::Row, &["total", "women"], 1),
            tuple(Axis::Column, &["2020", "Q1"], 0),
            tuple(Axis::Column, &["2020", "Q2"], 1),
        ]
    }

    #[test]
    fn seek_round_trip() {
        let c = candidates();
        let out = parse_seek(
            "because ... Selected tuples: (row: total | men), (column: 2020 | Q1)",
            &c,
        )
        .unwrap();
        assert_eq!(out.seek_cot, "because ...");
        assert_eq!(out.result.selected, vec![c[0].clone(), c[2].clone()]);
        assert!(out.result.unmatched_mentions.is_empty());
    }

    #[test]
    fn seek_normalized_match() {
        let c = candidates();
        let out = parse_seek("r\nSelected tuples: (row: Total|Men)", &c).unwrap();
        assert_eq!(out.result.selected, vec![c[0].clone()]);
    }

    #[test]
    fn seek_tie_is_refused() {
        let c = candidates();
        // overlaps both "total | men" and "total | women" equally
        let out = parse_seek("r\nSelected tuples: (row: total)", &c).unwrap();
        assert!(out.result.selected.is_empty());
        assert_eq!(out.result.unmatched_mentions, vec!["(row: total)"]);
    }

    #[test]
    fn seek_overlap_picks_unique_best() {
        let c = candidates();
        let out = parse_seek("r\nSelected tuples: (row: total women)", &c).unwrap();
        assert_eq!(out.result.selected, vec![c[1].clone()]);
    }

    #[test]
    fn seek_uses_last_marker() {
        let c = candidates();
        let text =
            "I will write Selected tuples: (row: total | men) at the end.\nSo:\nSelected tuples: (column: 2020 | Q2)";
        let out = parse_seek(text, &c).unwrap();
        assert_eq!(out.result.selected, vec![c[3].clone()]);
        assert!(out.seek_cot.ends_with("So:"));
    }

    #[test]
    fn seek_without_marker_or_rationale() {
        let c = candidates();
        assert_eq!(
            parse_seek("nothing here", &c).unwrap_err(),
            ParseError::MissingMarker(SEEK_MARKER)
        );
        assert_eq!(
            parse_seek("Selected tuples: (row: total | men)", &c).unwrap_err(),
            ParseError::EmptyRationale
        );
    }

    #[test]
    fn seek_no_matches_gives_empty_selection() {
        let c = candidates();
        let out = parse_seek("x\nSelected tuples: (row: zebra)", &c).unwrap();
        assert!(out.result.selected.is_empty());
        assert_eq!(out.result.unmatched_mentions.len(), 1);
    }

    #[test]
    fn seek_values_with_parentheses() {
        let c = vec![tuple(Axis::Column, &["percent (%)"], 0), tuple(Axis::Row, &["a"], 0)];
        let out = parse_seek("x\nSelected tuples: (column: percent (%)), (row: a)", &c).unwrap();
        assert_eq!(out.result.selected.len(), 2);
    }

    #[test]
    fn solve_single_and_multi() {
        let s = parse_solve("steps... Answer: 42").unwrap();
        assert_eq!(s.answers, vec!["42"]);
        assert_eq!(s.solve_cot, "steps...");
        let m = parse_solve("…\nAnswer: france; germany").unwrap();
        assert_eq!(m.answers, vec!["france", "germany"]);
        let c = parse_solve("Answer: 1,234, 5").unwrap();
        assert_eq!(c.answers, vec!["1,234", "5"]);
    }

    #[test]
    fn solve_last_marker_and_errors() {
        let s = parse_solve("Answer: maybe 3\nno wait\nAnswer: 4\n").unwrap();
        assert_eq!(s.answers, vec!["4"]);
        assert!(s.solve_cot.contains("no wait"));
        assert_eq!(
            parse_solve("no marker").unwrap_err(),
            ParseError::MissingMarker(ANSWER_MARKER)
        );
        assert_eq!(parse_solve("x\nAnswer:   \n").unwrap_err(), ParseError::EmptyAnswer);
        assert_eq!(parse_solve("**Answer:** 7").unwrap().answers, vec!["7"]);
    }

    #[test]
    fn ss_cot_composition() {
        let seek = SeekOutcome {
            seek_cot: "A".into(),
            result: SeekResult::default(),
        };
        let solve = SolveOutcome {
            solve_cot: "B".into(),
            answers: vec!["x".into()],
        };
        assert_eq!(
            compose_ss_cot(&seek, &solve).text,
            "A\nLet us look at the relevant tuples in the information given.\nB"
        );
        let empty = SolveOutcome {
            solve_cot: String::new(),
            answers: vec!["x".into()],
        };
        let t = compose_ss_cot(&seek, &empty).text;
        assert!(t.starts_with("A\n") && t.contains(CONSECUTIVE_LEAD));
    }
}
