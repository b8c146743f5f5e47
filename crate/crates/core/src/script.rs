//! Action scripts: a recorded valid walk through a workflow, and its replay.
//!
//! ```json
//! {
//!   "base": "http://127.0.0.1:8080",
//!   "actions": [
//!     {"navigate": "/hsbc/transfer"},
//!     {"choose": {"at": "form[0]/name=TO", "value": "FUND RECEIPIENT~~290 123456882"}},
//!     {"fill": {"at": "#amt", "value": "100"}},
//!     {"click": "#next"},
//!     {"click": "#confirm"}
//!   ]
//! }
//! ```
//!
//! Every `click` submits a form and closes one workflow step; the fills
//! before it belong to that step.

use serde::{Deserialize, Serialize};
use url::Url;

use crate::error::{Error, Result};
use crate::html::clv::{self, ClientVerdict, Violation};
use crate::html::{Form, FormValues, Locator, Page, Param, ParamSource, ParsedBody, SubmissionMode};
use crate::session::{build_submission, HttpRequest, HttpResponse, Session};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Navigate(String),
    Fill { at: Locator, value: String },
    Choose { at: Locator, value: String },
    Click(Locator),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionScript {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Url>,
    pub actions: Vec<Action>,
}

/// The inputs and the click of one workflow step.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptStep {
    pub index: usize,
    pub inputs: Vec<(Locator, String)>,
    pub click: Locator,
}

impl ActionScript {
    /// Parses and validates a script. Errors name the offending action.
    pub fn from_json(text: &str) -> Result<ActionScript> {
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::script("script", format!("not valid JSON: {e}")))?;
        let obj = raw
            .as_object()
            .ok_or_else(|| Error::script("script", "expected an object with an `actions` array"))?;
        if let Some(k) = obj.keys().find(|k| *k != "base" && *k != "actions") {
            return Err(Error::script("script", format!("unknown key `{k}`")));
        }
        let base = match obj.get("base") {
            None | Some(serde_json::Value::Null) => None,
            Some(serde_json::Value::String(s)) => {
                Some(Url::parse(s).map_err(|e| Error::script("base", format!("`{s}` is not an absolute URL: {e}")))?)
            }
            Some(_) => return Err(Error::script("base", "expected a string")),
        };
        let list = obj
            .get("actions")
            .and_then(|a| a.as_array())
            .ok_or_else(|| Error::script("actions", "expected an array"))?;
        let mut actions = Vec::with_capacity(list.len());
        for (i, a) in list.iter().enumerate() {
            let action: Action = serde_json::from_value(a.clone())
                .map_err(|e| Error::script(format!("actions[{i}]"), e.to_string()))?;
            actions.push(action);
        }
        let script = ActionScript { base, actions };
        script.validate()?;
        Ok(script)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("script serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.actions.first() else {
            return Err(Error::script("actions", "script is empty"));
        };
        if !matches!(first, Action::Navigate(_)) {
            return Err(Error::script("actions[0]", "the first action must be `navigate`"));
        }
        for (i, a) in self.actions.iter().enumerate().skip(1) {
            if matches!(a, Action::Navigate(_)) {
                return Err(Error::script(format!("actions[{i}]"), "`navigate` is only allowed as the first action"));
            }
        }
        let last_click = self
            .actions
            .iter()
            .rposition(|a| matches!(a, Action::Click(_)))
            .ok_or_else(|| Error::script("actions", "script has no `click`, so nothing is ever submitted"))?;
        if last_click + 1 != self.actions.len() {
            return Err(Error::script(
                format!("actions[{}]", last_click + 1),
                "inputs after the final click are never submitted",
            ));
        }
        Ok(())
    }

    /// Replaces the script's base URL.
    pub fn with_base(mut self, base: Url) -> ActionScript {
        self.base = Some(base);
        self
    }

    pub fn start_url(&self) -> Result<Url> {
        let Some(Action::Navigate(target)) = self.actions.first() else {
            return Err(Error::script("actions[0]", "the first action must be `navigate`"));
        };
        match &self.base {
            Some(b) => b.join(target).map_err(|e| Error::script("actions[0]", format!("bad URL `{target}`: {e}"))),
            None => Url::parse(target).map_err(|_| {
                Error::Config(format!("`{target}` is relative and no base URL was given (use --target or `base`)"))
            }),
        }
    }

    pub fn steps(&self) -> Vec<ScriptStep> {
        let mut steps = Vec::new();
        let mut inputs = Vec::new();
        for a in &self.actions {
            match a {
                Action::Navigate(_) => {}
                Action::Fill { at, value } | Action::Choose { at, value } => inputs.push((at.clone(), value.clone())),
                Action::Click(at) => {
                    steps.push(ScriptStep {
                        index: steps.len(),
                        inputs: std::mem::take(&mut inputs),
                        click: at.clone(),
                    });
                }
            }
        }
        steps
    }
}

/// What a replay does at one step once the values are settled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Directive {
    /// Submit only if the client-side checks pass; otherwise halt.
    Submit,
    /// Submit whatever the client-side checks say.
    Force,
    /// Submit only if the client-side checks fail; otherwise halt. This is
    /// how a tampering proxy is used: only values the page refuses are
    /// interesting.
    Tamper,
    /// Stop before sending anything for this step.
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepPlan {
    pub directive: Directive,
    /// End the replay after this step's response.
    pub stop_after: bool,
}

impl StepPlan {
    pub const SUBMIT: StepPlan = StepPlan {
        directive: Directive::Submit,
        stop_after: false,
    };

    pub fn last(directive: Directive) -> StepPlan {
        StepPlan {
            directive,
            stop_after: true,
        }
    }
}

/// Values a step is about to submit. `values` are what the page holds
/// before its submit handler runs; `overrides` are written onto the outgoing
/// request afterwards.
#[derive(Debug, Default)]
pub struct StepEdit {
    pub values: FormValues,
    pub overrides: FormValues,
}

pub struct StepContext<'a> {
    pub step: &'a ScriptStep,
    pub page: &'a Page,
    pub form: &'a Form,
    pub session: &'a Session,
}

/// Decides per step how a replay proceeds.
pub trait StepPlanner {
    fn plan(&mut self, ctx: &StepContext<'_>, edit: &mut StepEdit) -> Result<StepPlan>;
}

/// Replays the script exactly as recorded.
pub struct Faithful;

impl StepPlanner for Faithful {
    fn plan(&mut self, _ctx: &StepContext<'_>, _edit: &mut StepEdit) -> Result<StepPlan> {
        Ok(StepPlan::SUBMIT)
    }
}

impl<F> StepPlanner for F
where
    F: FnMut(&StepContext<'_>, &mut StepEdit) -> Result<StepPlan>,
{
    fn plan(&mut self, ctx: &StepContext<'_>, edit: &mut StepEdit) -> Result<StepPlan> {
        self(ctx, edit)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceStep {
    pub index: usize,
    pub page_url: Url,
    /// The form as the page served it, before reveal rules ran.
    pub form: Form,
    /// Controls added by reveal rules for this submission.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub revealed: Vec<String>,
    /// Everything sent with the request, cookies included.
    pub params: Vec<Param>,
    pub clicked: Locator,
    pub verdict: ClientVerdict,
    /// Sent although the client-side checks failed.
    pub forced: bool,
    pub request: HttpRequest,
    pub response: HttpResponse,
    #[serde(skip)]
    pub body: Option<ParsedBody>,
}

impl TraceStep {
    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name && p.source != ParamSource::Cookie)
    }

    pub fn value(&self, name: &str) -> Option<&str> {
        self.param(name).map(|p| p.value.as_str())
    }

    /// Parsed response body; reparsed when the trace was deserialized.
    pub fn body(&self) -> ParsedBody {
        match &self.body {
            Some(b) => b.clone(),
            None => crate::html::parse_body(&self.response),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "reason")]
pub enum Halt {
    /// The page's own checks refused the values and the step was not forced.
    ClientRejected { step: usize, violations: Vec<Violation> },
    /// A tamper step whose values the client accepted; nothing was sent.
    ClientAccepted { step: usize },
    Aborted { step: usize },
    Stopped { step: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct SubmissionTrace {
    pub steps: Vec<TraceStep>,
    pub halted: Option<Halt>,
}

impl SubmissionTrace {
    pub fn step(&self, index: usize) -> Option<&TraceStep> {
        self.steps.iter().find(|s| s.index == index)
    }

    /// Whether every step of the script was submitted.
    pub fn completed(&self, script_steps: usize) -> bool {
        self.steps.len() == script_steps && !matches!(self.halted, Some(Halt::ClientRejected { .. }) | Some(Halt::ClientAccepted { .. }) | Some(Halt::Aborted { .. }))
    }
}

/// Values the page would submit at this step: live hidden and query values,
/// script inputs for everything else.
fn fresh_values(step: &ScriptStep, form: &Form, page: &Page) -> Result<FormValues> {
    let mut values = form.default_values();
    for (loc, value) in &step.inputs {
        let name = match page.resolve_control(loc) {
            Some((ord, name)) if ord == form.ordinal => name,
            Some((ord, _)) => {
                return Err(Error::script(
                    format!("step {}", step.index),
                    format!("`{loc}` is in form {ord}, but the click submits form {}", form.ordinal),
                ))
            }
            None => match loc {
                // Controls added by reveal rules exist only once the trigger is set.
                Locator::Control { form: f, name } if *f == form.ordinal => name.clone(),
                _ => {
                    return Err(Error::LocatorNotFound {
                        step: step.index,
                        locator: loc.to_string(),
                    })
                }
            },
        };
        if form.control(&name).is_some_and(|c| c.kind == crate::html::ControlKind::Hidden) {
            tracing::warn!(step = step.index, field = %name, "script fills a hidden field; keeping the page's value");
            continue;
        }
        values.set(name, value.clone());
    }
    Ok(values)
}

/// Replays `script` in `session`, letting `planner` edit and direct each step.
pub fn replay_with(script: &ActionScript, session: &mut Session, planner: &mut dyn StepPlanner) -> Result<SubmissionTrace> {
    let start = script.start_url()?;
    session.set_step(None);
    let first = session.get(&start)?;
    let mut page = Page::from_response(&first);
    let mut trace = SubmissionTrace {
        steps: Vec::new(),
        halted: None,
    };
    for step in script.steps() {
        session.set_step(Some(step.index));
        let (ordinal, button) = page
            .resolve_button(&step.click)
            .map(|(o, b)| (o, b.clone()))
            .ok_or_else(|| Error::LocatorNotFound {
                step: step.index,
                locator: step.click.to_string(),
            })?;
        let form = page.forms[ordinal].clone();
        let mut edit = StepEdit {
            values: fresh_values(&step, &form, &page)?,
            overrides: FormValues::new(),
        };
        let plan = planner.plan(
            &StepContext {
                step: &step,
                page: &page,
                form: &form,
                session,
            },
            &mut edit,
        )?;
        let prepared = clv::prepare(&form, &edit.values, &edit.overrides)?;
        let accepted = prepared.verdict.is_accepted();
        let halt = match plan.directive {
            Directive::Abort => Some(Halt::Aborted { step: step.index }),
            Directive::Submit if !accepted => Some(Halt::ClientRejected {
                step: step.index,
                violations: prepared.verdict.violations().to_vec(),
            }),
            Directive::Tamper if accepted => Some(Halt::ClientAccepted { step: step.index }),
            _ => None,
        };
        if let Some(h) = halt {
            trace.halted = Some(h);
            break;
        }
        let request = build_submission(&prepared.form, &prepared.values, Some(&button))?;
        let mut params = prepared.form.params(&prepared.values);
        for (name, value) in session.cookies_for(&request.full_url()) {
            params.push(Param {
                locator: Locator::Control {
                    form: ordinal,
                    name: name.clone(),
                },
                name,
                value,
                source: ParamSource::Cookie,
            });
        }
        let response = session.send(&request)?;
        let body = crate::html::parse_body(&response);
        if form.mode == SubmissionMode::PageLoad {
            page = Page::from_response(&response);
        }
        trace.steps.push(TraceStep {
            index: step.index,
            page_url: page.url.clone(),
            form,
            revealed: prepared.revealed,
            params,
            clicked: step.click.clone(),
            forced: !accepted,
            verdict: prepared.verdict,
            request,
            response,
            body: Some(body),
        });
        if plan.stop_after {
            trace.halted = Some(Halt::Stopped { step: step.index });
            break;
        }
    }
    session.set_step(None);
    Ok(trace)
}

/// Replays `script` as recorded.
pub fn replay(script: &ActionScript, session: &mut Session) -> Result<SubmissionTrace> {
    replay_with(script, session, &mut Faithful)
}
