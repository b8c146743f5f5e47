//! Declarative client-side behaviour of a form.
//!
//! A form may carry a `data-clv` attribute holding a JSON descriptor:
//!
//! ```json
//! {
//!   "ajax": false,
//!   "validate": [{"field": "AMT", "min": 1, "max": 10000},
//!                {"field": "TO", "pattern": "^\\d{3}-\\d{6}$"}],
//!   "transform": [{"target": "MAC", "fn": "base64concat",
//!                  "inputs": ["FROM", "TO", "AMT"], "sep": "|"}],
//!   "reveal": [{"when": {"field": "PAYEE", "equals": "new"},
//!               "add": [{"name": "OTP", "required": true, "pattern": "\\d{6}"}]}]
//! }
//! ```
//!
//! [`prepare`] applies it the way the page's script would at submit time:
//! reveal rules, then transforms, then validation (HTML constraint
//! attributes plus the descriptor's rules).

use base64::Engine as _;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::form::{ControlKind, Form, FormValues, InputControl, ValidationAttrs};
use super::document::Locator;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClvDescriptor {
    #[serde(default)]
    pub validate: Vec<ValidationRule>,
    #[serde(default)]
    pub transform: Vec<Transform>,
    #[serde(default)]
    pub reveal: Vec<RevealRule>,
    /// Submission goes out as a JSON body and the page does not navigate.
    #[serde(default)]
    pub ajax: bool,
}

/// A numeric or date bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Number(f64),
    Text(String),
}

/// One validation rule; every present check applies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationRule {
    pub field: String,
    /// Unanchored, like a script's `re.test(value)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<Bound>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<Bound>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub required: bool,
    /// Name of another field whose value this one must repeat.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equals: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformFn {
    Concat,
    Base64concat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transform {
    pub target: String,
    #[serde(rename = "fn")]
    pub function: TransformFn,
    pub inputs: Vec<String>,
    #[serde(default)]
    pub sep: String,
}

impl Transform {
    pub fn apply(&self, values: &FormValues) -> Result<String> {
        let mut parts = Vec::with_capacity(self.inputs.len());
        for input in &self.inputs {
            let v = values.get(input).ok_or_else(|| {
                Error::Config(format!(
                    "transform for `{}` reads `{input}`, which the form does not submit",
                    self.target
                ))
            })?;
            parts.push(v);
        }
        let joined = parts.join(&self.sep);
        Ok(match self.function {
            TransformFn::Concat => joined,
            TransformFn::Base64concat => base64::engine::general_purpose::STANDARD.encode(joined),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevealCondition {
    pub field: String,
    pub equals: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevealRule {
    pub when: RevealCondition,
    pub add: Vec<ControlSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    pub name: String,
    #[serde(rename = "type", default = "default_type")]
    pub type_hint: String,
    #[serde(default)]
    pub value: String,
    #[serde(default)]
    pub required: bool,
    #[serde(default)]
    pub pattern: Option<String>,
    #[serde(default)]
    pub min: Option<String>,
    #[serde(default)]
    pub max: Option<String>,
    #[serde(default)]
    pub maxlength: Option<usize>,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub class: String,
    #[serde(default)]
    pub options: Vec<String>,
}

fn default_type() -> String {
    "text".into()
}

impl ControlSpec {
    fn to_control(&self, form: usize) -> InputControl {
        let kind = match self.type_hint.as_str() {
            "hidden" => ControlKind::Hidden,
            "select" => ControlKind::Select,
            "password" => ControlKind::Password,
            _ => ControlKind::Text,
        };
        let value = if kind == ControlKind::Select && self.value.is_empty() {
            self.options.first().cloned().unwrap_or_default()
        } else {
            self.value.clone()
        };
        InputControl {
            name: self.name.clone(),
            kind,
            value,
            checked: false,
            options: self.options.clone(),
            validation: ValidationAttrs {
                required: self.required,
                pattern: self.pattern.clone(),
                min: self.min.clone(),
                max: self.max.clone(),
                maxlength: self.maxlength,
                type_hint: self.type_hint.to_ascii_lowercase(),
            },
            class: self.class.clone(),
            label: self.label.clone(),
            id: None,
            locator: Locator::Control {
                form,
                name: self.name.clone(),
            },
            path: Vec::new(),
            ordinal: 0,
            revealed: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Required,
    Pattern,
    RangeUnderflow,
    RangeOverflow,
    TooLong,
    TypeMismatch,
    NotAnOption,
    FixedValue,
    Mismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "verdict", content = "violations")]
pub enum ClientVerdict {
    Accepted,
    Rejected(Vec<Violation>),
}

impl ClientVerdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, ClientVerdict::Accepted)
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            ClientVerdict::Accepted => &[],
            ClientVerdict::Rejected(v) => v,
        }
    }

    /// Whether `field` is among the rejected fields.
    pub fn rejects(&self, field: &str) -> bool {
        self.violations().iter().any(|v| v.field == field)
    }
}

/// What the page would actually send after its submit handler ran.
#[derive(Debug, Clone)]
pub struct PreparedSubmission {
    /// The form including any controls added by reveal rules.
    pub form: Form,
    pub values: FormValues,
    pub verdict: ClientVerdict,
    /// Names of revealed controls.
    pub revealed: Vec<String>,
}

/// The form as it looks once reveal rules have fired for `values`.
pub fn revealed_form(form: &Form, values: &FormValues) -> (Form, Vec<String>) {
    let mut out = form.clone();
    let mut revealed = Vec::new();
    if let Some(clv) = &form.clv {
        for rule in &clv.reveal {
            if values.get(&rule.when.field) != Some(rule.when.equals.as_str()) {
                continue;
            }
            for spec in &rule.add {
                if out.control(&spec.name).is_none() {
                    out.controls.push(spec.to_control(form.ordinal));
                    revealed.push(spec.name.clone());
                }
            }
        }
    }
    (out, revealed)
}

/// Runs the submit handler over `values`. `overrides` are written after the
/// transforms, the way a tampering proxy edits an outgoing request; an
/// override of a transform target that differs from what the transform
/// computed is a client rejection.
pub fn prepare(form: &Form, values: &FormValues, overrides: &FormValues) -> Result<PreparedSubmission> {
    let (form, revealed) = revealed_form(form, values);
    let mut values = values.clone();
    for name in &revealed {
        if !values.contains(name) {
            let c = form.control(name).expect("revealed control present");
            values.set(name.clone(), c.value.clone());
        }
    }
    let transforms: Vec<Transform> = form.clv.as_ref().map(|c| c.transform.clone()).unwrap_or_default();
    for t in &transforms {
        let v = t.apply(&values)?;
        values.set(t.target.clone(), v);
    }
    let mut violations = Vec::new();
    for (name, v) in overrides.iter() {
        if transforms.iter().any(|t| t.target == name) && values.get(name) != Some(v) {
            violations.push(Violation {
                field: name.to_string(),
                kind: ViolationKind::FixedValue,
            });
        }
        values.set(name, v);
    }
    violations.extend(validate(&form, &values));
    let verdict = if violations.is_empty() {
        ClientVerdict::Accepted
    } else {
        ClientVerdict::Rejected(violations)
    };
    Ok(PreparedSubmission {
        form,
        values,
        verdict,
        revealed,
    })
}

/// All client-side checks for `values` against `form` (reveal rules are
/// assumed to have been applied already).
pub fn validate(form: &Form, values: &FormValues) -> Vec<Violation> {
    let mut out = Vec::new();
    let targets: Vec<&str> = form
        .clv
        .iter()
        .flat_map(|c| c.transform.iter().map(|t| t.target.as_str()))
        .collect();
    let mut push = |field: &str, kind| {
        let v = Violation {
            field: field.to_string(),
            kind,
        };
        if !out.contains(&v) {
            out.push(v);
        }
    };

    for (name, original) in form.query_params() {
        if form.control(&name).is_some() {
            continue;
        }
        if values.get(&name).is_some_and(|v| v != original) {
            push(&name, ViolationKind::FixedValue);
        }
    }

    for name in form.param_names() {
        let Some(c) = form.control(&name) else { continue };
        let value = values.get(&name);
        let exempt = targets.contains(&name.as_str());
        for kind in check_control(form, c, value, exempt) {
            push(&name, kind);
        }
    }

    if let Some(clv) = &form.clv {
        for rule in &clv.validate {
            for kind in check_rule(rule, values) {
                push(&rule.field, kind);
            }
        }
    }
    out
}

/// Constraint checks a browser applies to one control. `value` is `None`
/// when nothing is submitted under that name.
pub fn check_control(form: &Form, c: &InputControl, value: Option<&str>, transform_target: bool) -> Vec<ViolationKind> {
    let mut out = Vec::new();
    let attrs = &c.validation;
    let required = form.controls_named(&c.name).any(|c| c.validation.required);
    match c.kind {
        ControlKind::Hidden => {
            if !transform_target && value.is_some_and(|v| v != c.value) {
                out.push(ViolationKind::FixedValue);
            }
        }
        ControlKind::Select | ControlKind::Radio | ControlKind::Checkbox => match value {
            None => {
                if required {
                    out.push(ViolationKind::Required);
                }
            }
            Some(v) => {
                let options = form.choice_options(&c.name).unwrap_or_default();
                if !options.iter().any(|o| o == v) {
                    out.push(ViolationKind::NotAnOption);
                } else if required && v.is_empty() {
                    out.push(ViolationKind::Required);
                }
            }
        },
        ControlKind::Text | ControlKind::Password => {
            let v = value.unwrap_or("");
            if v.is_empty() {
                if required {
                    out.push(ViolationKind::Required);
                }
                return out;
            }
            if let Some(max) = attrs.maxlength {
                if v.chars().count() > max {
                    out.push(ViolationKind::TooLong);
                }
            }
            if let Some(p) = &attrs.pattern {
                match Regex::new(&format!("^(?:{p})$")) {
                    Ok(re) => {
                        if !re.is_match(v) {
                            out.push(ViolationKind::Pattern);
                        }
                    }
                    Err(e) => tracing::warn!(field = %c.name, error = %e, "ignoring invalid pattern attribute"),
                }
            }
            out.extend(check_typed(&attrs.type_hint, v, attrs.min.as_deref(), attrs.max.as_deref()));
        }
    }
    out
}

fn check_typed(type_hint: &str, v: &str, min: Option<&str>, max: Option<&str>) -> Vec<ViolationKind> {
    let mut out = Vec::new();
    match type_hint {
        "number" | "range" => match v.trim().parse::<f64>() {
            Ok(n) if n.is_finite() => {
                if min.and_then(|m| m.parse::<f64>().ok()).is_some_and(|m| n < m) {
                    out.push(ViolationKind::RangeUnderflow);
                }
                if max.and_then(|m| m.parse::<f64>().ok()).is_some_and(|m| n > m) {
                    out.push(ViolationKind::RangeOverflow);
                }
            }
            _ => out.push(ViolationKind::TypeMismatch),
        },
        "date" => {
            if !is_iso_date(v) {
                out.push(ViolationKind::TypeMismatch);
            } else {
                if min.is_some_and(|m| is_iso_date(m) && v < m) {
                    out.push(ViolationKind::RangeUnderflow);
                }
                if max.is_some_and(|m| is_iso_date(m) && v > m) {
                    out.push(ViolationKind::RangeOverflow);
                }
            }
        }
        "time" if !is_time(v) => out.push(ViolationKind::TypeMismatch),
        "email" if !v.contains('@') || v.starts_with('@') || v.ends_with('@') => {
            out.push(ViolationKind::TypeMismatch)
        }
        _ => {}
    }
    out
}

fn check_rule(rule: &ValidationRule, values: &FormValues) -> Vec<ViolationKind> {
    let mut out = Vec::new();
    let v = values.get_or_empty(&rule.field);
    if rule.required && v.is_empty() {
        out.push(ViolationKind::Required);
    }
    if let Some(p) = &rule.pattern {
        match Regex::new(p) {
            Ok(re) => {
                if !re.is_match(v) {
                    out.push(ViolationKind::Pattern);
                }
            }
            Err(e) => tracing::warn!(field = %rule.field, error = %e, "ignoring invalid validation pattern"),
        }
    }
    if rule.min.is_some() || rule.max.is_some() {
        out.extend(check_bounds(v, rule.min.as_ref(), rule.max.as_ref()));
    }
    if let Some(other) = &rule.equals {
        if values.get_or_empty(other) != v {
            out.push(ViolationKind::Mismatch);
        }
    }
    out
}

fn check_bounds(v: &str, min: Option<&Bound>, max: Option<&Bound>) -> Vec<ViolationKind> {
    let mut out = Vec::new();
    let dated = matches!(min, Some(Bound::Text(_))) || matches!(max, Some(Bound::Text(_)));
    if dated {
        if !is_iso_date(v) {
            return vec![ViolationKind::TypeMismatch];
        }
        if let Some(Bound::Text(m)) = min {
            if v < m.as_str() {
                out.push(ViolationKind::RangeUnderflow);
            }
        }
        if let Some(Bound::Text(m)) = max {
            if v > m.as_str() {
                out.push(ViolationKind::RangeOverflow);
            }
        }
        return out;
    }
    let Some(n) = v.trim().parse::<f64>().ok().filter(|n| n.is_finite()) else {
        return vec![ViolationKind::TypeMismatch];
    };
    if let Some(Bound::Number(m)) = min {
        if n < *m {
            out.push(ViolationKind::RangeUnderflow);
        }
    }
    if let Some(Bound::Number(m)) = max {
        if n > *m {
            out.push(ViolationKind::RangeOverflow);
        }
    }
    out
}

/// Strict `YYYY-MM-DD` with a real calendar day.
pub fn is_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return false;
    }
    let digits = |r: std::ops::Range<usize>| -> Option<u32> {
        let part = &s[r];
        part.bytes().all(|c| c.is_ascii_digit()).then(|| part.parse().ok()).flatten()
    };
    let (Some(y), Some(m), Some(d)) = (digits(0..4), digits(5..7), digits(8..10)) else {
        return false;
    };
    let leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    let days = match m {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if leap => 29,
        2 => 28,
        _ => return false,
    };
    (1..=days).contains(&d)
}

/// `HH:MM` or `HH:MM:SS`, 24-hour clock.
pub fn is_time(s: &str) -> bool {
    let parts: Vec<&str> = s.split(':').collect();
    if !(2..=3).contains(&parts.len()) {
        return false;
    }
    let limits = [23, 59, 59];
    parts.iter().zip(limits).all(|(p, lim)| {
        p.len() == 2 && p.bytes().all(|c| c.is_ascii_digit()) && p.parse::<u32>().is_ok_and(|n| n <= lim)
    })
}
