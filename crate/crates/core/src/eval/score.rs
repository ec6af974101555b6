//! Answer normalization and denotation matching.
//!
//! Each item is trimmed, lowercased, stripped of one pair of surrounding
//! quotes and has its internal whitespace collapsed. Items that then read
//! as a number (after dropping a trailing `%` and well-formed thousands
//! separators such as `1,234,567`) compare numerically with a relative
//! tolerance of 1e-6, or an absolute one of 1e-6 near zero. Predicted and
//! gold lists must match as multisets.

#[derive(Debug, Clone, PartialEq)]
pub enum Normalized {
    Number(f64),
    Text(String),
}

const TOLERANCE: f64 = 1e-6;

const QUOTE_PAIRS: [(char, char); 5] = [
    ('"', '"'),
    ('\'', '\''),
    ('`', '`'),
    ('\u{201c}', '\u{201d}'),
    ('\u{2018}', '\u{2019}'),
];

pub fn normalize(item: &str) -> Normalized {
    let lowered = item.trim().to_lowercase();
    let unquoted = strip_quotes(&lowered);
    let text = unquoted.split_whitespace().collect::<Vec<_>>().join(" ");
    match parse_number(&text) {
        Some(n) => Normalized::Number(n),
        None => Normalized::Text(text),
    }
}

fn strip_quotes(s: &str) -> &str {
    for (open, close) in QUOTE_PAIRS {
        if let Some(inner) = s.strip_prefix(open).and_then(|r| r.strip_suffix(close)) {
            return inner.trim();
        }
    }
    s
}

fn parse_number(text: &str) -> Option<f64> {
    let body = text.strip_suffix('%').map(str::trim_end).unwrap_or(text);
    let body = strip_grouping(body)?;
    let numeric_chars = body
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'));
    if body.is_empty() || !numeric_chars || !body.chars().any(|c| c.is_ascii_digit()) {
        return None;
    }
    body.parse::<f64>().ok().filter(|n| n.is_finite())
}

/// Removes commas that form valid thousands grouping. Returns `None` when
/// commas are present but not in grouping position.
fn strip_grouping(body: &str) -> Option<String> {
    if !body.contains(',') {
        return Some(body.to_string());
    }
    let unsigned = body.trim_start_matches(['-', '+']);
    let int_part = unsigned.split('.').next().unwrap_or("");
    let groups: Vec<&str> = int_part.split(',').collect();
    let first_ok = (1..=3).contains(&groups[0].len());
    let rest_ok = groups[1..].iter().all(|g| g.len() == 3);
    let digits_ok = groups.iter().all(|g| g.chars().all(|c| c.is_ascii_digit()));
    let frac_ok = !unsigned[int_part.len()..].contains(',');
    (first_ok && rest_ok && digits_ok && frac_ok).then(|| body.replace(',', ""))
}

pub fn items_match(a: &Normalized, b: &Normalized) -> bool {
    match (a, b) {
        (Normalized::Number(x), Normalized::Number(y)) => {
            let diff = (x - y).abs();
            diff <= TOLERANCE || diff <= TOLERANCE * x.abs().max(y.abs())
        }
        (Normalized::Text(x), Normalized::Text(y)) => x == y,
        _ => false,
    }
}

/// Unordered multiset equality of normalized predicted and gold answers.
pub fn score_answer(predicted: &[String], gold: &[String]) -> bool {
    if predicted.len() != gold.len() || gold.is_empty() {
        return false;
    }
    let p: Vec<Normalized> = predicted.iter().map(|s| normalize(s)).collect();
    let g: Vec<Normalized> = gold.iter().map(|s| normalize(s)).collect();
    perfect_matching(&p, &g)
}

/// Bipartite matching by augmenting paths; tolerance-based equality is not
/// transitive, so greedy pairing could miss a valid assignment.
fn perfect_matching(p: &[Normalized], g: &[Normalized]) -> bool {
    fn augment(i: usize, p: &[Normalized], g: &[Normalized], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for j in 0..g.len() {
            if seen[j] || !items_match(&p[i], &g[j]) {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none_or(|k| augment(k, p, g, seen, owner)) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; g.len()];
    (0..p.len()).all(|i| augment(i, p, g, &mut vec![false; g.len()], &mut owner))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn numeric_normalization() {
        assert!(score_answer(&s(&["42.0"]), &s(&["42"])));
        assert!(score_answer(&s(&["1,234"]), &s(&["1234"])));
        assert!(score_answer(&s(&["58.2%"]), &s(&["58.2"])));
        assert!(!score_answer(&s(&["41"]), &s(&["42"])));
        assert!(score_answer(&s(&["0.0000001"]), &s(&["0"])));
    }

    #[test]
    fn unordered_case_folded() {
        assert!(score_answer(&s(&["Germany", "France"]), &s(&["france", "germany"])));
        assert!(!score_answer(&s(&["Germany"]), &s(&["france", "germany"])));
        assert!(!score_answer(&s(&["germany", "germany"]), &s(&["france", "germany"])));
    }

    #[test]
    fn quotes_and_whitespace() {
        assert!(score_answer(&s(&["\"New   York\""]), &s(&["new york"])));
        assert!(score_answer(&s(&["  'x' "]), &s(&["X"])));
    }

    #[test]
    fn malformed_grouping_is_text() {
        assert_eq!(normalize("1,2,3"), Normalized::Text("1,2,3".into()));
        assert_eq!(normalize("12,345.5"), Normalized::Number(12345.5));
        assert_eq!(normalize("inf"), Normalized::Text("inf".into()));
        assert_eq!(normalize("-3%"), Normalized::Number(-3.0));
    }

    #[test]
    fn tolerance_matching_needs_augmenting() {
        // 1.0000015 lies within tolerance of both gold values; 1.000003 only of the second
        let p = s(&["1.0000015", "1.000003"]);
        let g = s(&["1.000002", "1.000001"]);
        assert!(score_answer(&p, &g));
    }
}
