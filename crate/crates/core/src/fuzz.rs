//! The fuzzing phase: dependency confirmation, then per-parameter tampering
//! with a fresh workflow replay for every forced submission.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::capture::{TokenKind, CaptureAnalysis, CapturedStep, Classification, DepCandidate, FeatureKind, MatchedFeature};
use crate::error::{Error, Result};
use crate::html::clv::{self, Violation};
use crate::html::{Form, FormValues, ParamSource};
use crate::mutate::{self, MutateOptions, MutationCandidate, MutationRule};
use crate::script::{replay_with, ActionScript, Directive, Halt, StepContext, StepEdit, StepPlan, SubmissionTrace, TraceStep};
use crate::session::{Body, HttpRequest, HttpResponse, Session};

/// Longest request or response excerpt kept as evidence, in bytes.
pub const EXCERPT_LIMIT: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzConfig {
    pub seed: u64,
    /// Forced submissions per parameter.
    pub budget: usize,
    pub violate_restrictions: bool,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            seed: 0,
            budget: 8,
            violate_restrictions: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DependencyStatus {
    /// The probe was refused: the server ties this value to the previous step.
    Dependent,
    /// The probe was accepted.
    Independent,
    /// No usable probe or the transport failed; the parameter stays fuzzable.
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyRecord {
    pub step: usize,
    pub name: String,
    pub prior_step: usize,
    pub prior_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<String>,
    pub status: DependencyStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub features: Vec<MatchedFeature>,
    pub request: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub step: usize,
    pub param: String,
    pub source: ParamSource,
    pub base_value: String,
    pub mutated_value: String,
    pub rule: MutationRule,
    /// Why the page itself would have refused the value.
    pub violations: Vec<Violation>,
    /// Other values set to reach the parameter (reveal triggers).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub context: Vec<(String, String)>,
    pub evidence: Evidence,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inconclusive {
    pub step: usize,
    pub param: String,
    pub mutated_value: String,
    pub rule: MutationRule,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    OneTimeToken,
    SessionToken,
    Dependent,
    /// Every candidate passed the page's checks, so nothing was worth forcing.
    NoClientRejectedValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub step: usize,
    pub param: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub forced: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub inconclusive: u64,
    /// Candidates dropped because the page would have submitted them anyway.
    pub client_accepted_discards: u64,
    /// Server rejections keyed by the first missing acceptance feature.
    pub rejections_by_cause: BTreeMap<String, u64>,
    pub requests_sent: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanOutcome {
    pub dependencies: Vec<DependencyRecord>,
    pub findings: Vec<Finding>,
    pub inconclusive: Vec<Inconclusive>,
    pub skipped: Vec<Skipped>,
    pub counters: Counters,
}

fn truncate(s: &str) -> String {
    if s.len() <= EXCERPT_LIMIT {
        return s.to_string();
    }
    let mut end = EXCERPT_LIMIT;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    s[..end].to_string()
}

/// Origin-free request line and body, so excerpts do not depend on the
/// port the target happens to listen on.
pub fn request_excerpt(req: &HttpRequest) -> String {
    let full = req.full_url();
    let mut line = format!("{} {}", req.method.as_str(), full.path());
    if let Some(q) = full.query() {
        line.push('?');
        line.push_str(q);
    }
    match &req.body {
        Body::Empty => {}
        Body::Form(pairs) => {
            line.push('\n');
            line.push_str(&crate::session::encode_form(pairs));
        }
        Body::Json(v) => {
            line.push('\n');
            line.push_str(&v.to_string());
        }
    }
    truncate(&line)
}

pub fn response_excerpt(resp: &HttpResponse) -> String {
    truncate(&format!("{}\n{}", resp.status, resp.text()))
}

fn is_transform_target(form: &Form, name: &str) -> bool {
    form.clv
        .as_ref()
        .is_some_and(|c| c.transform.iter().any(|t| t.target == name))
}

/// Writes `value` the way a tampering user would: into the page for
/// ordinary fields, onto the outgoing request for computed ones.
fn place(form: &Form, edit: &mut StepEdit, name: &str, value: &str) {
    if is_transform_target(form, name) {
        edit.overrides.set(name, value);
    } else {
        edit.values.set(name, value);
    }
}

fn captured_values(step: &CapturedStep) -> FormValues {
    step.params
        .iter()
        .filter(|p| p.source != ParamSource::Cookie)
        .map(|p| (p.name.clone(), p.value.clone()))
        .collect()
}

struct QueueItem {
    name: String,
    base: String,
    source: ParamSource,
    context: Vec<(String, String)>,
}

enum AttemptResult {
    Sent(Box<TraceStep>),
    ClientAccepted,
    Failed(String),
}

/// Drives the fuzzing phase over a finished capture.
pub struct Fuzzer<'a> {
    script: &'a ActionScript,
    analysis: &'a CaptureAnalysis,
    session: &'a Session,
    config: FuzzConfig,
}

impl<'a> Fuzzer<'a> {
    pub fn new(script: &'a ActionScript, analysis: &'a CaptureAnalysis, session: &'a Session, config: FuzzConfig) -> Self {
        Fuzzer {
            script,
            analysis,
            session,
            config,
        }
    }

    /// Dependency confirmation followed by the scan.
    pub fn run(&self) -> Result<ScanOutcome> {
        self.run_with(&mut |_| {})
    }

    /// [`Fuzzer::run`], calling `between` once dependencies are settled and
    /// before the first mutated request goes out.
    pub fn run_with(&self, between: &mut dyn FnMut(&[DependencyRecord])) -> Result<ScanOutcome> {
        let before = self.session.requests_sent();
        let dependencies = self.confirm_dependencies()?;
        between(&dependencies);
        let mut outcome = self.scan(&dependencies)?;
        outcome.dependencies = dependencies;
        outcome.counters.requests_sent = self.session.requests_sent() - before;
        Ok(outcome)
    }

    fn check_prefix(&self, trace: &SubmissionTrace, upto: usize) -> Result<()> {
        if let Some(Halt::ClientRejected { step, violations }) = &trace.halted {
            if *step < upto {
                return Err(Error::Stale {
                    step: *step,
                    detail: format!("the recorded values no longer pass the page's checks: {violations:?}"),
                });
            }
        }
        for s in trace.steps.iter().filter(|s| s.index < upto) {
            let f = self.analysis.features.step(s.index).cloned().unwrap_or_default();
            if let Classification::Rejected { missing } = f.classify_step(s) {
                return Err(Error::Stale {
                    step: s.index,
                    detail: format!("missing {missing:?} in a valid replay"),
                });
            }
        }
        Ok(())
    }

    /// One fresh-session replay that submits the earlier steps as recorded
    /// and applies `edit` at `step`. Transport failures are retried once.
    fn attempt(&self, step: usize, directive: Directive, edit: &dyn Fn(&Form, &mut StepEdit)) -> Result<AttemptResult> {
        let mut last_err = String::new();
        for _ in 0..2 {
            let mut session = self.session.fork();
            let mut planner = |ctx: &StepContext<'_>, e: &mut StepEdit| -> Result<StepPlan> {
                if ctx.step.index < step {
                    return Ok(StepPlan::SUBMIT);
                }
                edit(ctx.form, e);
                Ok(StepPlan::last(directive))
            };
            match replay_with(self.script, &mut session, &mut planner) {
                Ok(trace) => {
                    self.check_prefix(&trace, step)?;
                    if let Some(Halt::ClientAccepted { step: s }) = trace.halted {
                        if s == step {
                            return Ok(AttemptResult::ClientAccepted);
                        }
                    }
                    return match trace.steps.into_iter().find(|s| s.index == step) {
                        Some(s) => Ok(AttemptResult::Sent(Box::new(s))),
                        None => Err(Error::Stale {
                            step,
                            detail: "the workflow no longer reaches this step".into(),
                        }),
                    };
                }
                Err(e) if e.is_transport() => {
                    tracing::warn!(step, error = %e, "transport failure; retrying once");
                    last_err = e.to_string();
                }
                Err(e) => return Err(e),
            }
        }
        Ok(AttemptResult::Failed(last_err))
    }

    fn candidates(&self, form: &Form, name: &str, base: &str) -> Vec<MutationCandidate> {
        let control = form.control(name);
        let hint = mutate::infer_type(control, base);
        let options: Vec<String> = form
            .choice_options(name)
            .unwrap_or_default()
            .into_iter()
            .filter(|o| o != base)
            .collect();
        mutate::mutate(
            base,
            hint.input_type,
            &MutateOptions {
                seed: self.config.seed,
                violate_restrictions: self.config.violate_restrictions,
                control,
                options: &options,
            },
        )
    }

    /// Probes each dependency candidate once with a value that breaks the
    /// equality; a refused probe confirms the dependency.
    pub fn confirm_dependencies(&self) -> Result<Vec<DependencyRecord>> {
        let mut out = Vec::new();
        for c in &self.analysis.dependency_candidates {
            out.push(self.confirm_dependency(c)?);
        }
        Ok(out)
    }

    fn confirm_dependency(&self, c: &DepCandidate) -> Result<DependencyRecord> {
        let mut record = DependencyRecord {
            step: c.step,
            name: c.name.clone(),
            prior_step: c.prior_step,
            prior_names: c.prior_names.clone(),
            probe: None,
            status: DependencyStatus::Unresolved,
            detail: String::new(),
        };
        let Some(captured) = self.analysis.steps.get(c.step) else {
            record.detail = "step missing from capture".into();
            return Ok(record);
        };
        let cands = self.candidates(&captured.form, &c.name, &c.value);
        let probe = match mutate::next_differing(&cands, &c.value) {
            Ok(p) => p,
            Err(e) => {
                record.detail = e.to_string();
                return Ok(record);
            }
        };
        record.probe = Some(probe.value.clone());
        let name = c.name.clone();
        let value = probe.value.clone();
        let result = self.attempt(c.step, Directive::Force, &|form, edit| place(form, edit, &name, &value))?;
        match result {
            AttemptResult::Sent(sent) => {
                let f = self.analysis.features.step(c.step).cloned().unwrap_or_default();
                match f.classify_step(&sent) {
                    Classification::Rejected { missing } => {
                        record.status = DependencyStatus::Dependent;
                        record.detail = format!("probe refused (missing {missing:?}): {}", truncate(&sent.response.text()).lines().next().unwrap_or(""));
                    }
                    Classification::Accepted(_) => {
                        record.status = DependencyStatus::Independent;
                        record.detail = "probe accepted".into();
                    }
                }
            }
            AttemptResult::ClientAccepted => unreachable!("forced attempts never halt on client acceptance"),
            AttemptResult::Failed(e) => {
                tracing::warn!(step = c.step, name = %c.name, error = %e, "dependency probe failed; leaving parameter fuzzable");
                record.detail = format!("transport failure: {e}");
            }
        }
        tracing::info!(step = c.step, name = %c.name, status = ?record.status, "dependency probe");
        Ok(record)
    }

    /// Fuzzes every remaining parameter of every step.
    pub fn scan(&self, dependencies: &[DependencyRecord]) -> Result<ScanOutcome> {
        let mut outcome = ScanOutcome {
            dependencies: Vec::new(),
            findings: Vec::new(),
            inconclusive: Vec::new(),
            skipped: Vec::new(),
            counters: Counters::default(),
        };
        for captured in &self.analysis.steps {
            let k = captured.index;
            let mut queue: Vec<QueueItem> = Vec::new();
            for p in captured.params.iter().filter(|p| p.source != ParamSource::Cookie) {
                if queue.iter().any(|q| q.name == p.name) || outcome.skipped.iter().any(|s| s.step == k && s.param == p.name) {
                    continue;
                }
                if let Some(kind) = self.analysis.tokens.kind_of(k, &p.name) {
                    outcome.skipped.push(Skipped {
                        step: k,
                        param: p.name.clone(),
                        reason: match kind {
                            TokenKind::OneTime => SkipReason::OneTimeToken,
                            TokenKind::Session => SkipReason::SessionToken,
                        },
                    });
                    continue;
                }
                if dependencies
                    .iter()
                    .any(|d| d.step == k && d.name == p.name && d.status == DependencyStatus::Dependent)
                {
                    outcome.skipped.push(Skipped {
                        step: k,
                        param: p.name.clone(),
                        reason: SkipReason::Dependent,
                    });
                    continue;
                }
                queue.push(QueueItem {
                    name: p.name.clone(),
                    base: p.value.clone(),
                    source: p.source,
                    context: Vec::new(),
                });
            }
            let mut i = 0;
            while i < queue.len() {
                let revealed = self.fuzz_param(captured, &queue[i], &mut outcome)?;
                for item in revealed {
                    if !queue.iter().any(|q| q.name == item.name) {
                        tracing::info!(step = k, name = %item.name, "fuzzing newly revealed field");
                        queue.push(item);
                    }
                }
                i += 1;
            }
        }
        Ok(outcome)
    }

    /// Tries candidates for one parameter until the budget of forced
    /// submissions is spent. Returns fields revealed along the way.
    fn fuzz_param(&self, captured: &CapturedStep, item: &QueueItem, outcome: &mut ScanOutcome) -> Result<Vec<QueueItem>> {
        let k = captured.index;
        let mut revealed_items = Vec::new();
        let mut base_values = captured_values(captured);
        for (n, v) in &item.context {
            base_values.set(n.clone(), v.clone());
        }
        let (reveal_form, _) = clv::revealed_form(&captured.form, &base_values);
        let cands = self.candidates(&reveal_form, &item.name, &item.base);
        let mut forced = 0usize;
        let mut any_rejected = false;
        for cand in cands {
            if forced >= self.config.budget {
                break;
            }
            let mut edit = StepEdit {
                values: base_values.clone(),
                overrides: FormValues::new(),
            };
            place(&captured.form, &mut edit, &item.name, &cand.value);
            let offline = clv::prepare(&captured.form, &edit.values, &edit.overrides)?;
            for name in &offline.revealed {
                if name == &item.name || captured.form.control(name).is_some() {
                    continue;
                }
                if revealed_items.iter().any(|r: &QueueItem| &r.name == name) {
                    continue;
                }
                let base = offline.form.control(name).map(|c| c.value.clone()).unwrap_or_default();
                let mut context = item.context.clone();
                context.push((item.name.clone(), cand.value.clone()));
                revealed_items.push(QueueItem {
                    name: name.clone(),
                    base,
                    source: ParamSource::UserInput,
                    context,
                });
            }
            if offline.verdict.is_accepted() {
                outcome.counters.client_accepted_discards += 1;
                continue;
            }
            any_rejected = true;
            let name = item.name.clone();
            let value = cand.value.clone();
            let context = item.context.clone();
            let result = self.attempt(k, Directive::Tamper, &|form, edit| {
                for (n, v) in &context {
                    edit.values.set(n.clone(), v.clone());
                }
                place(form, edit, &name, &value);
            })?;
            match result {
                AttemptResult::ClientAccepted => {
                    outcome.counters.client_accepted_discards += 1;
                }
                AttemptResult::Failed(reason) => {
                    forced += 1;
                    outcome.counters.forced += 1;
                    outcome.counters.inconclusive += 1;
                    outcome.inconclusive.push(Inconclusive {
                        step: k,
                        param: item.name.clone(),
                        mutated_value: cand.value.clone(),
                        rule: cand.rule,
                        reason,
                    });
                }
                AttemptResult::Sent(sent) => {
                    forced += 1;
                    outcome.counters.forced += 1;
                    let f = self.analysis.features.step(k).cloned().unwrap_or_default();
                    match f.classify_step(&sent) {
                        Classification::Accepted(features) => {
                            outcome.counters.accepted += 1;
                            tracing::info!(step = k, param = %item.name, value = %cand.value, "server accepted tampered value");
                            let dup = outcome
                                .findings
                                .iter()
                                .any(|f| f.step == k && f.param == item.name && f.rule == cand.rule);
                            if !dup {
                                outcome.findings.push(Finding {
                                    step: k,
                                    param: item.name.clone(),
                                    source: item.source,
                                    base_value: item.base.clone(),
                                    mutated_value: cand.value.clone(),
                                    rule: cand.rule,
                                    violations: sent.verdict.violations().to_vec(),
                                    context: item.context.clone(),
                                    evidence: Evidence {
                                        features,
                                        request: request_excerpt(&sent.request),
                                        response: response_excerpt(&sent.response),
                                    },
                                    timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
                                });
                            }
                        }
                        Classification::Rejected { missing } => {
                            outcome.counters.rejected += 1;
                            let cause = missing.first().copied().unwrap_or(FeatureKind::Reflection);
                            let key = serde_json::to_value(cause)
                                .ok()
                                .and_then(|v| v.as_str().map(str::to_string))
                                .unwrap_or_default();
                            *outcome.counters.rejections_by_cause.entry(key).or_default() += 1;
                        }
                    }
                }
            }
        }
        if !any_rejected {
            outcome.skipped.push(Skipped {
                step: k,
                param: item.name.clone(),
                reason: SkipReason::NoClientRejectedValue,
            });
        }
        Ok(revealed_items)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn excerpts_are_bounded_on_char_boundaries() {
        let s = "é".repeat(400);
        let t = truncate(&s);
        assert!(t.len() <= EXCERPT_LIMIT);
        assert!(s.starts_with(&t));
    }
}
