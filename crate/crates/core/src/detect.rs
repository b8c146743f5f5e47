//! Pure detectors shared by capture and fuzzing: value normalization,
//! reflection search, and acceptance keywords.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::html::Leaf;

static NUMERIC: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[\d,]+(?:\.\d+)?$").unwrap());
static KEYWORD_POSITIVE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:success(?:ful)?|done|completed?|executed?|ok(?:ay)?|updated?)\b").unwrap()
});
static KEYWORD_NEGATIVE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:not|sorry|fail(?:ed)?|err(?:or)?)\b|(?:[a-z]n't\b)").unwrap());

/// Values shorter than this are too common to count as reflections.
pub const MIN_REFLECTION_LEN: usize = 2;

/// A value compared the way dependency detection compares it.
#[derive(Debug, Clone, PartialEq)]
pub enum Normalized {
    Number(f64),
    Text(String),
}

impl Normalized {
    /// Hashable identity; equal keys iff equal normalized values.
    pub fn key(&self) -> NormKey {
        match self {
            Normalized::Number(n) => NormKey::Number((if *n == 0.0 { 0.0f64 } else { *n }).to_bits()),
            Normalized::Text(t) => NormKey::Text(t.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NormKey {
    Number(u64),
    Text(String),
}

pub fn is_numeric(value: &str) -> bool {
    NUMERIC.is_match(value)
}

/// Numbers (digits with optional thousands commas and a decimal part) are
/// compared by value; everything else by its trimmed text.
pub fn normalize(value: &str) -> Normalized {
    if is_numeric(value) {
        if let Ok(n) = value.replace(',', "").parse::<f64>() {
            return Normalized::Number(n);
        }
    }
    Normalized::Text(value.trim().to_string())
}

pub fn normalized_eq(a: &str, b: &str) -> bool {
    normalize(a) == normalize(b)
}

/// Regex matching the digits of `value` in order, with at most one
/// non-digit between consecutive digits. `None` if `value` has no digits.
pub fn numeric_pattern(value: &str) -> Option<Regex> {
    let digits: Vec<char> = value.chars().filter(char::is_ascii_digit).collect();
    if digits.is_empty() {
        return None;
    }
    let body = digits.iter().map(char::to_string).collect::<Vec<_>>().join(r"[^\d]?");
    Some(Regex::new(&body).expect("digit pattern is valid"))
}

/// An acceptance keyword present and no negation in the same text.
pub fn is_accept_keyword(text: &str) -> bool {
    KEYWORD_POSITIVE.is_match(text) && !KEYWORD_NEGATIVE.is_match(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMode {
    Numeric,
    String,
}

impl MatchMode {
    pub fn for_value(value: &str) -> MatchMode {
        if is_numeric(value.trim()) {
            MatchMode::Numeric
        } else {
            MatchMode::String
        }
    }
}

/// Where a value was found among the leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionHits {
    pub occurrences: usize,
    pub leaves: Vec<crate::html::Locator>,
}

/// Counts occurrences of `value` across `leaves` under `mode`. Returns
/// `None` when the value is too short (or, in numeric mode, has too few
/// digits) to be meaningful.
pub fn find_reflection(value: &str, mode: MatchMode, leaves: &[Leaf]) -> Option<ReflectionHits> {
    let mut hits = ReflectionHits {
        occurrences: 0,
        leaves: Vec::new(),
    };
    match mode {
        MatchMode::Numeric => {
            if value.chars().filter(char::is_ascii_digit).count() < MIN_REFLECTION_LEN {
                return None;
            }
            let re = numeric_pattern(value)?;
            for leaf in leaves {
                let n = re.find_iter(&leaf.text).count();
                if n > 0 {
                    hits.occurrences += n;
                    hits.leaves.push(leaf.locator.clone());
                }
            }
        }
        MatchMode::String => {
            let needle = value.trim();
            if needle.chars().count() < MIN_REFLECTION_LEN {
                return None;
            }
            for leaf in leaves {
                let n = leaf.text.matches(needle).count();
                if n > 0 {
                    hits.occurrences += n;
                    hits.leaves.push(leaf.locator.clone());
                }
            }
        }
    }
    Some(hits)
}

/// First leaf carrying an acceptance keyword.
pub fn find_keyword(leaves: &[Leaf]) -> Option<&Leaf> {
    leaves.iter().find(|l| is_accept_keyword(&l.text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::html::Locator;

    fn leaf(t: &str) -> Leaf {
        Leaf {
            locator: Locator::Body,
            text: t.into(),
        }
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize("1,234.50"), normalize("1234.5"));
        assert_eq!(normalize(" abc "), Normalized::Text("abc".into()));
        assert_ne!(normalize("12"), normalize("12a"));
        assert_eq!(normalize("0").key(), normalize("0.0").key());
    }

    #[test]
    fn numeric_reflection_with_separators() {
        let hits = find_reflection("12345", MatchMode::Numeric, &[leaf("$12,345.00")]).unwrap();
        assert_eq!(hits.occurrences, 1);
        assert!(find_reflection("7", MatchMode::Numeric, &[leaf("7")]).is_none());
        let hits = find_reflection("100", MatchMode::Numeric, &[leaf("HKD 100.00"), leaf("none")]).unwrap();
        assert_eq!(hits.occurrences, 1);
    }

    #[test]
    fn string_reflection_is_trimmed_substring() {
        let hits = find_reflection(" JQ501 ", MatchMode::String, &[leaf("flight JQ501 / JQ501")]).unwrap();
        assert_eq!(hits.occurrences, 2);
        assert!(find_reflection("a", MatchMode::String, &[leaf("aaa")]).is_none());
    }

    #[test]
    fn keywords() {
        assert!(is_accept_keyword("Updated successfully"));
        assert!(!is_accept_keyword("Update did not complete"));
        assert!(!is_accept_keyword("successfully"));
        assert!(!is_accept_keyword("Transfer couldn't be completed"));
    }
}
