//! Deterministic generation of tampered values.

use std::sync::LazyLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::detect::normalized_eq;
use crate::error::{Error, Result};
use crate::html::{ControlKind, InputControl};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputType {
    Number,
    Boolean,
    Date,
    Time,
    Percentage,
    AlphaNumeric,
    FreeText,
}

/// Which evidence decided the inferred type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TypeProvenance {
    Value,
    TypeAttr,
    ClassAttr,
    NameAttr,
    Label,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputTypeHint {
    pub input_type: InputType,
    pub provenance: TypeProvenance,
}

static NUMBER_VALUE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[\d,\.]+$").unwrap());
static DATE_VALUE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:\d{4}-\d{1,2}-\d{1,2}|\d{1,2}/\d{1,2}/\d{2,4})$").unwrap());
static TIME_VALUE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d{1,2}:\d{2}(?::\d{2})?$").unwrap());
static PERCENT_VALUE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^-?[\d.]+\s?%$").unwrap());
static ALNUM_VALUE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[A-Za-z0-9]+$").unwrap());
static NUMBER_TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+(?:,\d{3})*(?:\.\d+)?").unwrap());

const BOOLEAN_PAIRS: &[(&str, &str)] = &[("1", "0"), ("y", "n"), ("t", "f"), ("true", "false")];

fn is_boolean(v: &str) -> bool {
    let l = v.to_ascii_lowercase();
    BOOLEAN_PAIRS.iter().any(|(a, b)| l == *a || l == *b)
}

fn type_from_words(text: &str) -> Option<InputType> {
    static WORDS: LazyLock<Vec<(Regex, InputType)>> = LazyLock::new(|| {
        [
            (r"date|dob|birth", InputType::Date),
            (r"time", InputType::Time),
            (r"percent|pct|rate", InputType::Percentage),
            (r"amount|amt|qty|quantity|price|total|count|number|num", InputType::Number),
        ]
        .into_iter()
        .map(|(p, t)| (Regex::new(&format!("(?i){p}")).unwrap(), t))
        .collect()
    });
    WORDS.iter().find(|(re, _)| re.is_match(text)).map(|(_, t)| *t)
}

/// Infers what kind of value a control holds: the value itself first, then
/// the `type`, `class` and `name` attributes, then the label.
pub fn infer_type(control: Option<&InputControl>, value: &str) -> InputTypeHint {
    let hint = |input_type, provenance| InputTypeHint { input_type, provenance };
    let v = value.trim();
    if !v.is_empty() {
        if is_boolean(v) {
            return hint(InputType::Boolean, TypeProvenance::Value);
        }
        if NUMBER_VALUE.is_match(v) {
            return hint(InputType::Number, TypeProvenance::Value);
        }
        if DATE_VALUE.is_match(v) {
            return hint(InputType::Date, TypeProvenance::Value);
        }
        if TIME_VALUE.is_match(v) {
            return hint(InputType::Time, TypeProvenance::Value);
        }
        if PERCENT_VALUE.is_match(v) {
            return hint(InputType::Percentage, TypeProvenance::Value);
        }
    }
    if let Some(c) = control {
        let by_type = match c.validation.type_hint.as_str() {
            "number" | "range" => Some(InputType::Number),
            "date" | "datetime-local" | "month" | "week" => Some(InputType::Date),
            "time" => Some(InputType::Time),
            _ if c.kind == ControlKind::Checkbox => Some(InputType::Boolean),
            _ => None,
        };
        if let Some(t) = by_type {
            return hint(t, TypeProvenance::TypeAttr);
        }
        if let Some(t) = type_from_words(&c.class) {
            return hint(t, TypeProvenance::ClassAttr);
        }
        if let Some(t) = type_from_words(&c.name) {
            return hint(t, TypeProvenance::NameAttr);
        }
        if let Some(t) = c.label.as_deref().and_then(type_from_words) {
            return hint(t, TypeProvenance::Label);
        }
    }
    if ALNUM_VALUE.is_match(v) {
        return hint(InputType::AlphaNumeric, TypeProvenance::Fallback);
    }
    hint(InputType::FreeText, TypeProvenance::Fallback)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationRule {
    AlternateOption,
    Truncate,
    DivideThousand,
    Negate,
    Increment,
    Decrement,
    AddConstant,
    MultiplyConstant,
    AddRandom,
    MultiplyRandom,
    NegateBool,
    HardcodedDate,
    HardcodedTime,
    HardcodedPercentage,
    StaticList,
    ViolateRequired,
    ViolateMaxlength,
    ViolateType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationCandidate {
    pub value: String,
    pub rule: MutationRule,
    pub derived_from: String,
}

/// Classic boundary and injection strings tried on every parameter.
pub const STATIC_TAMPER_LIST: [&str; 12] = [
    "",
    "0",
    "-1",
    "0.01",
    "2147483648",
    "99999999999999999999",
    "-99999999",
    "'",
    "\"",
    "<>",
    "%00",
    "null",
];

const HARDCODED_DATE: &str = "2013-9-22";
const HARDCODED_TIME: &str = "23:59";
const HARDCODED_PERCENTAGE: &str = "111%";
const FIXED_FACTORS: [i128; 2] = [7, 100];

#[derive(Debug, Clone, Default)]
pub struct MutateOptions<'a> {
    pub seed: u64,
    /// Also emit values that break `required`, `maxlength` and `type`.
    pub violate_restrictions: bool,
    pub control: Option<&'a InputControl>,
    /// Other allowed values of a select or radio group.
    pub options: &'a [String],
}

/// The longest number inside `value`: its byte range and text.
fn longest_number(value: &str) -> Option<(std::ops::Range<usize>, &str)> {
    let mut best: Option<regex::Match<'_>> = None;
    for m in NUMBER_TOKEN.find_iter(value) {
        if best.is_none_or(|b| m.as_str().len() > b.as_str().len()) {
            best = Some(m);
        }
    }
    best.map(|m| (m.range(), m.as_str()))
}

fn format_float(x: f64) -> Option<String> {
    if !x.is_finite() {
        return None;
    }
    if x.fract() == 0.0 && x.abs() < 1e21 {
        return Some(format!("{}", x as i128));
    }
    Some(format!("{x}"))
}

fn numeric_derivations(base: &str, seed: u64) -> Vec<(String, MutationRule)> {
    let Some((range, token)) = longest_number(base) else {
        return Vec::new();
    };
    let plain = token.replace(',', "");
    let integral = !plain.contains('.');
    let splice = |n: String| format!("{}{}{}", &base[..range.start], n, &base[range.end..]);
    let mut out = Vec::new();
    let mut push = |s: Option<String>, rule| {
        if let Some(s) = s {
            out.push((splice(s), rule));
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let randoms: Vec<i128> = (0..2).map(|_| rng.gen_range(2..=1000)).collect();
    let float = plain.parse::<f64>().ok();

    if integral {
        let Ok(n) = plain.parse::<i128>() else { return Vec::new() };
        push(Some(n.to_string()), MutationRule::Truncate);
        push(float.and_then(|f| format_float(f / 1000.0)), MutationRule::DivideThousand);
        push(n.checked_neg().map(|x| x.to_string()), MutationRule::Negate);
        push(n.checked_add(1).map(|x| x.to_string()), MutationRule::Increment);
        push(n.checked_sub(1).map(|x| x.to_string()), MutationRule::Decrement);
        for (factors, add_rule, mul_rule) in [
            (&FIXED_FACTORS[..], MutationRule::AddConstant, MutationRule::MultiplyConstant),
            (&randoms[..], MutationRule::AddRandom, MutationRule::MultiplyRandom),
        ] {
            for &k in factors {
                push(n.checked_add(k).map(|x| x.to_string()), add_rule);
                push(n.checked_mul(k).map(|x| x.to_string()), mul_rule);
            }
        }
    } else {
        let Some(f) = float else { return Vec::new() };
        push(format_float(f.trunc()), MutationRule::Truncate);
        push(format_float(f / 1000.0), MutationRule::DivideThousand);
        push(format_float(-f), MutationRule::Negate);
        push(format_float(f + 1.0), MutationRule::Increment);
        push(format_float(f - 1.0), MutationRule::Decrement);
        for (factors, add_rule, mul_rule) in [
            (&FIXED_FACTORS[..], MutationRule::AddConstant, MutationRule::MultiplyConstant),
            (&randoms[..], MutationRule::AddRandom, MutationRule::MultiplyRandom),
        ] {
            for &k in factors {
                push(format_float(f + k as f64), add_rule);
                push(format_float(f * k as f64), mul_rule);
            }
        }
    }
    out
}

/// The opposite boolean in the same spelling style (`Y`→`N`, `true`→`false`,
/// `TRUE`→`FALSE`, `1`→`0`).
pub fn negate_bool(v: &str) -> Option<String> {
    let lower = v.to_ascii_lowercase();
    let other = BOOLEAN_PAIRS.iter().find_map(|(a, b)| {
        if lower == *a {
            Some(*b)
        } else if lower == *b {
            Some(*a)
        } else {
            None
        }
    })?;
    let all_upper = v.chars().all(|c| !c.is_ascii_lowercase());
    let capitalized = v.chars().next().is_some_and(|c| c.is_ascii_uppercase());
    Some(if all_upper {
        other.to_ascii_uppercase()
    } else if capitalized {
        let mut cs = other.chars();
        cs.next()
            .map(|c| c.to_ascii_uppercase().to_string() + cs.as_str())
            .unwrap_or_default()
    } else {
        other.to_string()
    })
}

/// Ordered, duplicate-free tampered values for `base`; never `base` itself.
pub fn mutate(base: &str, hint: InputType, opts: &MutateOptions<'_>) -> Vec<MutationCandidate> {
    let mut raw: Vec<(String, MutationRule)> = Vec::new();
    for o in opts.options {
        raw.push((o.clone(), MutationRule::AlternateOption));
    }
    raw.extend(numeric_derivations(base, opts.seed));
    if hint == InputType::Boolean {
        if let Some(n) = negate_bool(base.trim()) {
            raw.push((n, MutationRule::NegateBool));
        }
    }
    match hint {
        InputType::Date => raw.push((HARDCODED_DATE.into(), MutationRule::HardcodedDate)),
        InputType::Time => raw.push((HARDCODED_TIME.into(), MutationRule::HardcodedTime)),
        InputType::Percentage => raw.push((HARDCODED_PERCENTAGE.into(), MutationRule::HardcodedPercentage)),
        _ => {}
    }
    for s in STATIC_TAMPER_LIST {
        raw.push((s.into(), MutationRule::StaticList));
    }
    if opts.violate_restrictions {
        if let Some(c) = opts.control {
            if c.validation.required {
                raw.push((String::new(), MutationRule::ViolateRequired));
            }
            if let Some(max) = c.validation.maxlength {
                let unit = if base.is_empty() { "A" } else { base };
                let mut s = unit.to_string();
                while s.chars().count() <= max {
                    s.push_str(&s.clone());
                }
                raw.push((s, MutationRule::ViolateMaxlength));
            }
            let wrong_type = match c.validation.type_hint.as_str() {
                "number" | "range" => Some("NaN"),
                "date" => Some("2013-02-30"),
                "time" => Some("25:61"),
                "email" => Some("not-an-address"),
                _ => None,
            };
            if let Some(w) = wrong_type {
                raw.push((w.into(), MutationRule::ViolateType));
            }
        }
    }

    let mut out: Vec<MutationCandidate> = Vec::new();
    for (value, rule) in raw {
        if value == base || out.iter().any(|c| c.value == value) {
            continue;
        }
        out.push(MutationCandidate {
            value,
            rule,
            derived_from: base.to_string(),
        });
    }
    out
}

/// A probe that breaks equality with `avoid`: the increment, then the
/// decrement, then the remaining candidates in order.
pub fn next_differing(candidates: &[MutationCandidate], avoid: &str) -> Result<MutationCandidate> {
    let rank = |c: &MutationCandidate| match c.rule {
        MutationRule::Increment => 0,
        MutationRule::Decrement => 1,
        _ => 2,
    };
    let mut ordered: Vec<&MutationCandidate> = candidates.iter().collect();
    ordered.sort_by_key(|c| rank(c));
    ordered
        .into_iter()
        .find(|c| !normalized_eq(&c.value, avoid))
        .cloned()
        .ok_or_else(|| Error::Config(format!("no mutation of `{avoid}` differs from it; dependency cannot be probed")))
}
