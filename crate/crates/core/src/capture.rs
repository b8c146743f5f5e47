//! The capture phase: two valid replays, then token, dependency and
//! acceptance-feature analysis over the resulting traces.

use std::collections::HashMap;

use regex::Regex;
use serde::{Deserialize, Serialize};
use url::Url;

use crate::detect::{self, MatchMode, NormKey};
use crate::error::{Error, Result};
use crate::html::{extract_forms, Form, Locator, Param, ParamSource, ParsedBody, SubmissionMode};
use crate::script::{replay, replay_with, ActionScript, Directive, StepContext, StepEdit, StepPlan, SubmissionTrace, TraceStep};
use crate::session::{HttpResponse, Session};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    /// Accepted once; a resend of the spent value is refused.
    OneTime,
    /// Stable within a session, different across sessions.
    Session,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCandidate {
    pub step: usize,
    pub name: String,
    pub source: ParamSource,
    pub kind: TokenKind,
    pub run1: String,
    pub run2: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenEntry {
    pub step: usize,
    pub name: String,
    pub kind: TokenKind,
}

/// Confirmed tokens. Session tokens cover their name at every step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenRegistry {
    pub entries: Vec<TokenEntry>,
}

impl TokenRegistry {
    pub fn is_token(&self, step: usize, name: &str) -> bool {
        self.kind_of(step, name).is_some()
    }

    pub fn kind_of(&self, step: usize, name: &str) -> Option<TokenKind> {
        self.entries
            .iter()
            .find(|e| {
                e.name == name
                    && match e.kind {
                        TokenKind::OneTime => e.step == step,
                        TokenKind::Session => true,
                    }
            })
            .map(|e| e.kind)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Outcome of one token-confirmation probe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenProbe {
    pub step: usize,
    pub name: String,
    pub kind: TokenKind,
    pub confirmed: bool,
    pub detail: String,
}

/// A parameter whose value repeats one submitted in the previous step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepCandidate {
    pub step: usize,
    pub name: String,
    pub value: String,
    pub prior_step: usize,
    pub prior_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reflection {
    pub param: String,
    pub mode: MatchMode,
    pub occurrences: usize,
}

/// Evidence that the server accepted one step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFeatures {
    pub step: usize,
    /// The next step's submit control, expected in this step's response.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub button: Option<Locator>,
    #[serde(default)]
    pub reflections: Vec<Reflection>,
    #[serde(default)]
    pub keyword: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accept_regex: Option<String>,
    /// Empty bodies: a 2xx status is the only evidence.
    #[serde(default)]
    pub status_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    Button,
    Reflection,
    Keyword,
    AnalystRegex,
    Status,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedFeature {
    pub kind: FeatureKind,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub locators: Vec<Locator>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Classification {
    Accepted(Vec<MatchedFeature>),
    Rejected { missing: Vec<FeatureKind> },
}

impl Classification {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Classification::Accepted(_))
    }
}

impl StepFeatures {
    pub fn is_empty(&self) -> bool {
        self.button.is_none()
            && self.reflections.is_empty()
            && !self.keyword
            && self.accept_regex.is_none()
            && !self.status_only
    }

    /// Whether `response` shows acceptance of a submission carrying
    /// `submitted`. Reflections are looked for with the submitted values;
    /// a reflection that cannot be instantiated (value too short) is
    /// skipped, but at least one feature must match.
    pub fn classify(&self, response: &HttpResponse, body: &ParsedBody, submitted: &[Param]) -> Classification {
        let mut matched = Vec::new();
        let mut missing = Vec::new();
        let leaves = body.leaf_texts();

        if let Some(button) = &self.button {
            let found = body
                .as_html()
                .map(|d| extract_forms(d, Some(&response.url)))
                .is_some_and(|forms| forms.iter().any(|f| f.button(button).is_some()));
            if found {
                matched.push(MatchedFeature {
                    kind: FeatureKind::Button,
                    detail: button.to_string(),
                    locators: vec![button.clone()],
                });
            } else {
                missing.push(FeatureKind::Button);
            }
        }
        for r in &self.reflections {
            let Some(value) = submitted
                .iter()
                .find(|p| p.name == r.param && p.source != ParamSource::Cookie)
                .map(|p| p.value.as_str())
            else {
                continue;
            };
            match detect::find_reflection(value, r.mode, &leaves) {
                None => {}
                Some(hits) if hits.occurrences > 0 => matched.push(MatchedFeature {
                    kind: FeatureKind::Reflection,
                    detail: format!("{}={value}", r.param),
                    locators: hits.leaves,
                }),
                Some(_) => missing.push(FeatureKind::Reflection),
            }
        }
        if self.keyword {
            match detect::find_keyword(&leaves) {
                Some(l) => matched.push(MatchedFeature {
                    kind: FeatureKind::Keyword,
                    detail: l.text.trim().to_string(),
                    locators: vec![l.locator.clone()],
                }),
                None => missing.push(FeatureKind::Keyword),
            }
        }
        if let Some(p) = &self.accept_regex {
            let text = String::from_utf8_lossy(&response.body);
            if Regex::new(p).is_ok_and(|re| re.is_match(&text)) {
                matched.push(MatchedFeature {
                    kind: FeatureKind::AnalystRegex,
                    detail: p.clone(),
                    locators: Vec::new(),
                });
            } else {
                missing.push(FeatureKind::AnalystRegex);
            }
        }
        if self.status_only {
            if (200..300).contains(&response.status) {
                matched.push(MatchedFeature {
                    kind: FeatureKind::Status,
                    detail: response.status.to_string(),
                    locators: Vec::new(),
                });
            } else {
                missing.push(FeatureKind::Status);
            }
        }
        if missing.is_empty() && !matched.is_empty() {
            Classification::Accepted(matched)
        } else {
            if missing.is_empty() {
                missing.push(FeatureKind::Reflection);
            }
            Classification::Rejected { missing }
        }
    }

    pub fn classify_step(&self, step: &TraceStep) -> Classification {
        self.classify(&step.response, &step.body(), &step.params)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub steps: Vec<StepFeatures>,
}

impl FeatureSet {
    pub fn step(&self, index: usize) -> Option<&StepFeatures> {
        self.steps.iter().find(|s| s.step == index)
    }
}

/// What the fuzzer needs to know about one captured step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapturedStep {
    pub index: usize,
    pub form: Form,
    pub params: Vec<Param>,
    pub click: Locator,
}

impl CapturedStep {
    pub fn value(&self, name: &str) -> Option<&str> {
        self.params
            .iter()
            .find(|p| p.name == name && p.source != ParamSource::Cookie)
            .map(|p| p.value.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureAnalysis {
    pub target: Url,
    pub occurrence_limit: usize,
    pub steps: Vec<CapturedStep>,
    pub token_candidates: Vec<TokenCandidate>,
    pub token_probes: Vec<TokenProbe>,
    pub tokens: TokenRegistry,
    pub dependency_candidates: Vec<DepCandidate>,
    pub features: FeatureSet,
}

fn submitted(step: &TraceStep) -> impl Iterator<Item = &Param> {
    step.params.iter().filter(|p| p.source != ParamSource::Cookie)
}

fn aligned<'a>(t1: &'a SubmissionTrace, t2: &'a SubmissionTrace) -> Result<impl Iterator<Item = (&'a TraceStep, &'a TraceStep)>> {
    if t1.steps.len() != t2.steps.len() {
        return Err(Error::Capture(format!(
            "the two valid runs submitted {} and {} steps; they cannot be aligned",
            t1.steps.len(),
            t2.steps.len()
        )));
    }
    Ok(t1.steps.iter().zip(&t2.steps))
}

/// Server-generated values that differ between runs (one-time candidates),
/// and values repeated across steps within a run that differ between runs
/// (session candidates).
pub fn detect_token_candidates(t1: &SubmissionTrace, t2: &SubmissionTrace) -> Result<Vec<TokenCandidate>> {
    let mut out = Vec::new();
    for (a, b) in aligned(t1, t2)? {
        for p in submitted(a).filter(|p| p.source.is_server_generated()) {
            let Some(v2) = b.value(&p.name) else { continue };
            if p.value != v2 {
                out.push(TokenCandidate {
                    step: a.index,
                    name: p.name.clone(),
                    source: p.source,
                    kind: TokenKind::OneTime,
                    run1: p.value.clone(),
                    run2: v2.to_string(),
                });
            }
        }
    }
    let mut seen: HashMap<&str, Vec<(usize, &Param)>> = HashMap::new();
    for s in &t1.steps {
        for p in submitted(s).filter(|p| p.source.is_server_generated() && !p.value.is_empty()) {
            seen.entry(p.value.as_str()).or_default().push((s.index, p));
        }
    }
    let mut session: Vec<TokenCandidate> = Vec::new();
    for (_, uses) in seen {
        let steps: std::collections::BTreeSet<usize> = uses.iter().map(|(s, _)| *s).collect();
        if steps.len() < 2 {
            continue;
        }
        for (step, p) in uses {
            let Some(v2) = t2.step(step).and_then(|s| s.value(&p.name)) else { continue };
            if v2 != p.value && !session.iter().any(|c| c.step == step && c.name == p.name) {
                session.push(TokenCandidate {
                    step,
                    name: p.name.clone(),
                    source: p.source,
                    kind: TokenKind::Session,
                    run1: p.value.clone(),
                    run2: v2.to_string(),
                });
            }
        }
    }
    session.sort_by(|a, b| (a.step, &a.name).cmp(&(b.step, &b.name)));
    out.extend(session);
    Ok(out)
}

/// Dependency candidates over per-step parameter lists: a step-`k` value
/// that normalizes equal to any value submitted at step `k - 1`.
pub fn dependency_candidates(steps: &[Vec<Param>]) -> Vec<DepCandidate> {
    let mut out = Vec::new();
    for k in 1..steps.len() {
        let mut index: HashMap<NormKey, Vec<String>> = HashMap::new();
        for p in steps[k - 1].iter().filter(|p| p.source != ParamSource::Cookie && !p.value.trim().is_empty()) {
            let names = index.entry(detect::normalize(&p.value).key()).or_default();
            if !names.contains(&p.name) {
                names.push(p.name.clone());
            }
        }
        for p in steps[k].iter().filter(|p| p.source != ParamSource::Cookie && !p.value.trim().is_empty()) {
            if let Some(names) = index.get(&detect::normalize(&p.value).key()) {
                if out.iter().any(|c: &DepCandidate| c.step == k && c.name == p.name) {
                    continue;
                }
                out.push(DepCandidate {
                    step: k,
                    name: p.name.clone(),
                    value: p.value.clone(),
                    prior_step: k - 1,
                    prior_names: names.clone(),
                });
            }
        }
    }
    out
}

pub fn detect_dependency_candidates(trace: &SubmissionTrace) -> Vec<DepCandidate> {
    let steps: Vec<Vec<Param>> = trace.steps.iter().map(|s| s.params.clone()).collect();
    dependency_candidates(&steps)
}

/// Acceptance evidence reproducible in both runs.
pub fn detect_valid_features(
    t1: &SubmissionTrace,
    t2: &SubmissionTrace,
    occurrence_limit: usize,
    accept_regex: Option<&str>,
) -> Result<FeatureSet> {
    if occurrence_limit == 0 {
        return Err(Error::Config("occurrence limit must be at least 1".into()));
    }
    let accept_re = accept_regex
        .map(|p| Regex::new(p).map_err(|e| Error::Config(format!("invalid --accept-regex `{p}`: {e}"))))
        .transpose()?;
    let pairs: Vec<_> = aligned(t1, t2)?.collect();
    let mut steps = Vec::new();
    for (i, (a, b)) in pairs.iter().enumerate() {
        let mut f = StepFeatures {
            step: a.index,
            ..Default::default()
        };
        let (body_a, body_b) = (a.body(), b.body());

        if a.form.mode == SubmissionMode::PageLoad {
            if let Some((next_a, next_b)) = pairs.get(i + 1) {
                if next_a.clicked == next_b.clicked {
                    f.button = Some(next_a.clicked.clone());
                }
            }
        }

        let (leaves_a, leaves_b) = (body_a.leaf_texts(), body_b.leaf_texts());
        for p in submitted(a) {
            if b.value(&p.name) != Some(p.value.as_str()) {
                continue;
            }
            if f.reflections.iter().any(|r| r.param == p.name) {
                continue;
            }
            let mode = MatchMode::for_value(&p.value);
            let within = |hits: Option<detect::ReflectionHits>| {
                hits.map(|h| h.occurrences).filter(|n| (1..=occurrence_limit).contains(n))
            };
            let (Some(n), Some(_)) = (
                within(detect::find_reflection(&p.value, mode, &leaves_a)),
                within(detect::find_reflection(&p.value, mode, &leaves_b)),
            ) else {
                continue;
            };
            f.reflections.push(Reflection {
                param: p.name.clone(),
                mode,
                occurrences: n,
            });
        }

        if f.reflections.is_empty() && detect::find_keyword(&leaves_a).is_some() && detect::find_keyword(&leaves_b).is_some() {
            f.keyword = true;
        }
        if body_a.is_empty() && body_b.is_empty() && (200..300).contains(&a.response.status) && (200..300).contains(&b.response.status) {
            f.status_only = true;
        }
        if f.is_empty() {
            match &accept_re {
                Some(re) if re.is_match(&a.response.text()) && re.is_match(&b.response.text()) => {
                    f.accept_regex = Some(re.as_str().to_string());
                }
                Some(re) => {
                    return Err(Error::Capture(format!(
                        "step {}: no acceptance feature found and --accept-regex `{}` does not match both valid responses",
                        a.index,
                        re.as_str()
                    )))
                }
                None => {
                    return Err(Error::Capture(format!(
                        "step {}: no acceptance feature (button, reflected value or keyword) found in both valid responses; supply --accept-regex",
                        a.index
                    )))
                }
            }
        }
        steps.push(f);
    }
    Ok(FeatureSet { steps })
}

/// Runs the capture phase against a live target.
pub struct Capturer<'a> {
    script: &'a ActionScript,
    session: &'a Session,
    occurrence_limit: usize,
    accept_regex: Option<String>,
}

impl<'a> Capturer<'a> {
    pub fn new(script: &'a ActionScript, session: &'a Session) -> Self {
        Capturer {
            script,
            session,
            occurrence_limit: 3,
            accept_regex: None,
        }
    }

    pub fn occurrence_limit(mut self, limit: usize) -> Self {
        self.occurrence_limit = limit;
        self
    }

    pub fn accept_regex(mut self, pattern: Option<String>) -> Self {
        self.accept_regex = pattern;
        self
    }

    /// Two valid replays, each in a fresh session.
    pub fn run_capture(&self) -> Result<(SubmissionTrace, SubmissionTrace)> {
        let n = self.script.steps().len();
        let t1 = replay(self.script, &mut self.session.fork())?;
        if !t1.completed(n) {
            return Err(Error::Capture(format!(
                "the recorded values do not pass the page's own checks ({:?}); fix the script",
                t1.halted
            )));
        }
        let vary = "the second valid replay failed; if the application refuses duplicate submissions, vary the script inputs";
        let t2 = match replay(self.script, &mut self.session.fork()) {
            Ok(t) if t.completed(n) => t,
            Ok(t) => return Err(Error::Capture(format!("{vary} (halted: {:?})", t.halted))),
            Err(e) if e.is_transport() => return Err(e),
            Err(e) => return Err(Error::Capture(format!("{vary} ({e})"))),
        };
        Ok((t1, t2))
    }

    pub fn run(&self) -> Result<CaptureAnalysis> {
        let (t1, t2) = self.run_capture()?;
        let features = detect_valid_features(&t1, &t2, self.occurrence_limit, self.accept_regex.as_deref())?;
        let token_candidates = detect_token_candidates(&t1, &t2)?;
        let (tokens, token_probes) = self.confirm_tokens(&token_candidates, &features)?;
        let dependency_candidates = detect_dependency_candidates(&t1)
            .into_iter()
            .filter(|c| !tokens.is_token(c.step, &c.name))
            .collect();
        let steps = t1
            .steps
            .iter()
            .map(|s| CapturedStep {
                index: s.index,
                form: s.form.clone(),
                params: s.params.clone(),
                click: s.clicked.clone(),
            })
            .collect();
        Ok(CaptureAnalysis {
            target: self.script.start_url()?,
            occurrence_limit: self.occurrence_limit,
            steps,
            token_candidates,
            token_probes,
            tokens,
            dependency_candidates,
            features,
        })
    }

    fn confirm_tokens(&self, candidates: &[TokenCandidate], features: &FeatureSet) -> Result<(TokenRegistry, Vec<TokenProbe>)> {
        let mut registry = TokenRegistry::default();
        let mut probes = Vec::new();
        for c in candidates.iter().filter(|c| c.kind == TokenKind::Session) {
            if registry.is_token(c.step, &c.name) {
                continue;
            }
            let probe = self.confirm_session(c, features)?;
            if probe.confirmed {
                registry.entries.push(TokenEntry {
                    step: c.step,
                    name: c.name.clone(),
                    kind: TokenKind::Session,
                });
            }
            probes.push(probe);
        }
        for c in candidates.iter().filter(|c| c.kind == TokenKind::OneTime) {
            if registry.is_token(c.step, &c.name) {
                continue;
            }
            let probe = self.confirm_one_time(c, features)?;
            if probe.confirmed {
                registry.entries.push(TokenEntry {
                    step: c.step,
                    name: c.name.clone(),
                    kind: TokenKind::OneTime,
                });
            }
            probes.push(probe);
        }
        Ok((registry, probes))
    }

    /// Submits `value` for the candidate at its step in `session` and
    /// reports whether the server still accepted the step.
    fn spoof(&self, session: &mut Session, c: &TokenCandidate, value: &str, features: &FeatureSet) -> Result<(bool, String)> {
        let step = c.step;
        let name = c.name.clone();
        let value = value.to_string();
        let mut planner = |ctx: &StepContext<'_>, edit: &mut StepEdit| -> Result<StepPlan> {
            if ctx.step.index < step {
                return Ok(StepPlan::SUBMIT);
            }
            edit.values.set(name.clone(), value.clone());
            Ok(StepPlan::last(Directive::Force))
        };
        let trace = replay_with(self.script, session, &mut planner)?;
        let Some(sent) = trace.step(step) else {
            return Ok((false, format!("workflow did not reach step {step} ({:?})", trace.halted)));
        };
        let f = features.step(step).cloned().unwrap_or_default();
        Ok(match f.classify_step(sent) {
            Classification::Accepted(m) => (true, format!("accepted: {} feature(s) present", m.len())),
            Classification::Rejected { missing } => (false, format!("rejected: missing {missing:?}")),
        })
    }

    /// Spends the token in a normal run, then replays in the same session
    /// presenting the spent value again.
    fn confirm_one_time(&self, c: &TokenCandidate, features: &FeatureSet) -> Result<TokenProbe> {
        let mut session = self.session.fork();
        let step = c.step;
        let mut stop = |ctx: &StepContext<'_>, _: &mut StepEdit| -> Result<StepPlan> {
            Ok(if ctx.step.index == step {
                StepPlan::last(Directive::Submit)
            } else {
                StepPlan::SUBMIT
            })
        };
        let first = replay_with(self.script, &mut session, &mut stop)?;
        let spent = first
            .step(step)
            .and_then(|s| s.value(&c.name))
            .map(str::to_string)
            .ok_or_else(|| Error::Capture(format!("step {step}: `{}` vanished in the confirmation run", c.name)))?;
        let (accepted, detail) = self.spoof(&mut session, c, &spent, features)?;
        tracing::info!(step, name = %c.name, confirmed = !accepted, "one-time token probe");
        Ok(TokenProbe {
            step,
            name: c.name.clone(),
            kind: TokenKind::OneTime,
            confirmed: !accepted,
            detail: format!("resent spent value: {detail}"),
        })
    }

    /// Presents another session's value in a fresh session.
    fn confirm_session(&self, c: &TokenCandidate, features: &FeatureSet) -> Result<TokenProbe> {
        let mut session = self.session.fork();
        let (accepted, detail) = self.spoof(&mut session, c, &c.run1, features)?;
        tracing::info!(step = c.step, name = %c.name, confirmed = !accepted, "session token probe");
        Ok(TokenProbe {
            step: c.step,
            name: c.name.clone(),
            kind: TokenKind::Session,
            confirmed: !accepted,
            detail: format!("sent another session's value: {detail}"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(name: &str, value: &str, source: ParamSource) -> Param {
        Param {
            name: name.into(),
            value: value.into(),
            source,
            locator: Locator::Control {
                form: 0,
                name: name.into(),
            },
        }
    }

    #[test]
    fn dependency_names_are_ignored() {
        let steps = vec![
            vec![p("TO", "012-345", ParamSource::UserInput), p("AMT", "1,234.50", ParamSource::UserInput)],
            vec![
                p("ACCT", "012-345", ParamSource::HiddenField),
                p("AMT", "1234.5", ParamSource::HiddenField),
                p("X", "other", ParamSource::HiddenField),
                p("SESSID", "012-345", ParamSource::Cookie),
            ],
        ];
        let c = dependency_candidates(&steps);
        let names: Vec<_> = c.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, vec!["ACCT", "AMT"]);
        assert_eq!(c[0].prior_names, vec!["TO"]);
        assert!(dependency_candidates(&steps[..1]).is_empty());
    }

    #[test]
    fn registry_session_tokens_cover_all_steps() {
        let r = TokenRegistry {
            entries: vec![
                TokenEntry { step: 0, name: "sid".into(), kind: TokenKind::Session },
                TokenEntry { step: 1, name: "CSRF".into(), kind: TokenKind::OneTime },
            ],
        };
        assert!(r.is_token(3, "sid"));
        assert!(r.is_token(1, "CSRF"));
        assert!(!r.is_token(0, "CSRF"));
    }

    fn resp(body: &str, ct: &str) -> (HttpResponse, ParsedBody) {
        let r = HttpResponse {
            status: 200,
            content_type: Some(ct.into()),
            headers: vec![],
            body: body.as_bytes().to_vec(),
            url: Url::parse("http://t/").unwrap(),
        };
        let b = crate::html::parse_body(&r);
        (r, b)
    }

    #[test]
    fn classification_uses_submitted_values() {
        let f = StepFeatures {
            step: 0,
            button: Some(Locator::Id("confirm".into())),
            reflections: vec![Reflection { param: "TO".into(), mode: MatchMode::String, occurrences: 1 }],
            ..Default::default()
        };
        let (r, b) = resp("<p>To: ACC 124</p><form><input type=submit id=confirm></form>", "text/html");
        assert!(f.classify(&r, &b, &[p("TO", "ACC 124", ParamSource::UserInput)]).is_accepted());
        assert!(!f.classify(&r, &b, &[p("TO", "ACC 123", ParamSource::UserInput)]).is_accepted());
        let (r, b) = resp("<p>Sorry</p>", "text/html");
        assert_eq!(
            f.classify(&r, &b, &[p("TO", "ACC 124", ParamSource::UserInput)]),
            Classification::Rejected { missing: vec![FeatureKind::Button, FeatureKind::Reflection] }
        );
    }

    #[test]
    fn keyword_on_json() {
        let f = StepFeatures { step: 0, keyword: true, ..Default::default() };
        let (r, b) = resp(r#"{"success":1,"message":"Lookup completed"}"#, "application/json");
        assert!(f.classify(&r, &b, &[]).is_accepted());
        let (r, b) = resp(r#"{"success":0,"message":"Sorry, not completed"}"#, "application/json");
        assert!(!f.classify(&r, &b, &[]).is_accepted());
    }
}
