use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use url::Url;

use super::clv::ClvDescriptor;
use super::document::{Document, Locator, NodeData, NodeId};
use crate::session::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamSource {
    UserInput,
    HiddenField,
    QueryString,
    Cookie,
}

impl ParamSource {
    /// Values the server put into the page rather than the user typing them.
    pub fn is_server_generated(self) -> bool {
        matches!(self, ParamSource::HiddenField | ParamSource::QueryString)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: String,
    pub source: ParamSource,
    pub locator: Locator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubmissionMode {
    PageLoad,
    Ajax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlKind {
    Text,
    Hidden,
    Radio,
    Checkbox,
    Select,
    Password,
}

/// Validation-relevant attributes of a control, as written in the markup.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationAttrs {
    pub required: bool,
    pub pattern: Option<String>,
    pub min: Option<String>,
    pub max: Option<String>,
    pub maxlength: Option<usize>,
    /// Lower-cased `type` attribute (`text`, `number`, `date`, ...).
    pub type_hint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputControl {
    pub name: String,
    pub kind: ControlKind,
    /// `value` attribute, selected option, or textarea content.
    pub value: String,
    /// Radio/checkbox `checked`.
    pub checked: bool,
    /// Option values of a select.
    pub options: Vec<String>,
    pub validation: ValidationAttrs,
    pub class: String,
    pub label: Option<String>,
    pub id: Option<String>,
    pub locator: Locator,
    /// Structural path; empty for revealed controls.
    pub path: Vec<usize>,
    /// Position among same-named controls of the form.
    pub ordinal: usize,
    /// Added by a reveal rule rather than present in the markup.
    pub revealed: bool,
}

impl InputControl {
    pub fn source(&self) -> ParamSource {
        match self.kind {
            ControlKind::Hidden => ParamSource::HiddenField,
            _ => ParamSource::UserInput,
        }
    }

    pub fn is_choice(&self) -> bool {
        matches!(self.kind, ControlKind::Radio | ControlKind::Select | ControlKind::Checkbox)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Button {
    pub locator: Locator,
    pub path: Vec<usize>,
    pub id: Option<String>,
    pub name: Option<String>,
    pub value: Option<String>,
}

/// Ordered name → value map of what a form would submit. A name that is
/// absent is not submitted at all (e.g. an unchecked radio group).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormValues(IndexMap<String, String>);

impl FormValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.0.get(name).map(String::as_str)
    }

    pub fn get_or_empty(&self, name: &str) -> &str {
        self.get(name).unwrap_or("")
    }

    pub fn set(&mut self, name: impl Into<String>, value: impl Into<String>) {
        self.0.insert(name.into(), value.into());
    }

    pub fn remove(&mut self, name: &str) -> Option<String> {
        self.0.shift_remove(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for FormValues {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        FormValues(iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Form {
    pub ordinal: usize,
    pub locator: Locator,
    /// The `action` attribute as written.
    pub action_raw: String,
    /// Resolved action URL; `None` when it was relative and no base was known.
    pub action: Option<Url>,
    pub method: Method,
    pub mode: SubmissionMode,
    pub controls: Vec<InputControl>,
    pub buttons: Vec<Button>,
    pub clv: Option<ClvDescriptor>,
    /// Set when `data-clv` was present but did not parse.
    pub clv_error: Option<String>,
}

impl Form {
    /// Unique parameter names in document order: hardcoded action query
    /// parameters first, then controls.
    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for (k, _) in self.query_params() {
            if !names.contains(&k) {
                names.push(k);
            }
        }
        for c in &self.controls {
            if !names.contains(&c.name) {
                names.push(c.name.clone());
            }
        }
        names
    }

    pub fn control(&self, name: &str) -> Option<&InputControl> {
        self.controls.iter().find(|c| c.name == name)
    }

    pub fn controls_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a InputControl> + 'a {
        self.controls.iter().filter(move |c| c.name == name)
    }

    /// Allowed values for a select or radio group.
    pub fn choice_options(&self, name: &str) -> Option<Vec<String>> {
        let first = self.control(name)?;
        match first.kind {
            ControlKind::Select => Some(first.options.clone()),
            ControlKind::Radio => Some(self.controls_named(name).map(|c| c.value.clone()).collect()),
            ControlKind::Checkbox => Some(vec![checkbox_value(first)]),
            _ => None,
        }
    }

    /// Query parameters hardcoded in the action URL, percent-decoded.
    pub fn query_params(&self) -> Vec<(String, String)> {
        self.action
            .as_ref()
            .map(|u| u.query_pairs().map(|(k, v)| (k.into_owned(), v.into_owned())).collect())
            .unwrap_or_default()
    }

    pub fn is_query_param(&self, name: &str) -> bool {
        self.control(name).is_none() && self.query_params().iter().any(|(k, _)| k == name)
    }

    pub fn source_of(&self, name: &str) -> Option<ParamSource> {
        if let Some(c) = self.control(name) {
            return Some(c.source());
        }
        self.is_query_param(name).then_some(ParamSource::QueryString)
    }

    /// Values a browser would submit without user interaction.
    pub fn default_values(&self) -> FormValues {
        let mut values = FormValues::new();
        for (k, v) in self.query_params() {
            if self.control(&k).is_none() {
                values.set(k, v);
            }
        }
        for c in &self.controls {
            match c.kind {
                ControlKind::Radio => {
                    if c.checked {
                        values.set(&c.name, &c.value);
                    }
                }
                ControlKind::Checkbox => {
                    if c.checked {
                        values.set(&c.name, checkbox_value(c));
                    }
                }
                _ => {
                    if !values.contains(&c.name) {
                        values.set(&c.name, &c.value);
                    }
                }
            }
        }
        values
    }

    /// Parameters the form would send for `values`, with their source
    /// classification, in document order.
    pub fn params(&self, values: &FormValues) -> Vec<Param> {
        self.param_names()
            .into_iter()
            .filter_map(|name| {
                let value = values.get(&name)?.to_string();
                let (source, locator) = match self.control(&name) {
                    Some(c) => (c.source(), c.locator.clone()),
                    None => (
                        ParamSource::QueryString,
                        Locator::Control {
                            form: self.ordinal,
                            name: name.clone(),
                        },
                    ),
                };
                Some(Param {
                    name,
                    value,
                    source,
                    locator,
                })
            })
            .collect()
    }

    pub fn button(&self, locator: &Locator) -> Option<&Button> {
        self.buttons.iter().find(|b| match locator {
            Locator::Id(id) => b.id.as_deref() == Some(id.as_str()),
            Locator::Path(p) => &b.path == p,
            Locator::Control { form, name } => *form == self.ordinal && b.name.as_deref() == Some(name.as_str()),
            _ => false,
        })
    }

    /// The control `locator` designates, if it lies in this form.
    pub fn control_at(&self, locator: &Locator) -> Option<&InputControl> {
        self.controls.iter().find(|c| match locator {
            Locator::Id(id) => c.id.as_deref() == Some(id.as_str()),
            Locator::Path(p) => &c.path == p,
            Locator::Control { form, name } => *form == self.ordinal && &c.name == name,
            _ => false,
        })
    }
}

fn checkbox_value(c: &InputControl) -> String {
    if c.value.is_empty() {
        "on".to_string()
    } else {
        c.value.clone()
    }
}

/// Extracts every form of `doc`. `base` resolves relative actions; without
/// it a relative action stays unresolved and submission fails later.
pub fn extract_forms(doc: &Document, base: Option<&Url>) -> Vec<Form> {
    doc.elements_named("form")
        .collect::<Vec<_>>()
        .into_iter()
        .enumerate()
        .map(|(ordinal, node)| extract_form(doc, node, ordinal, base))
        .collect()
}

fn resolve_action(raw: &str, base: Option<&Url>) -> Option<Url> {
    match base {
        Some(b) => b.join(raw).ok(),
        None => Url::parse(raw).ok(),
    }
}

fn extract_form(doc: &Document, node: NodeId, ordinal: usize, base: Option<&Url>) -> Form {
    let action_raw = doc.attr(node, "action").unwrap_or("").to_string();
    let action = if action_raw.trim().is_empty() {
        base.cloned()
    } else {
        resolve_action(action_raw.trim(), base)
    };
    let method = match doc.attr(node, "method").map(str::to_ascii_lowercase).as_deref() {
        Some("post") => Method::Post,
        _ => Method::Get,
    };
    let (clv, clv_error) = match doc.attr(node, "data-clv") {
        Some(raw) => match serde_json::from_str::<ClvDescriptor>(raw) {
            Ok(d) => (Some(d), None),
            Err(e) => {
                tracing::warn!(form = ordinal, error = %e, "unparseable data-clv descriptor");
                (None, Some(e.to_string()))
            }
        },
        None => (None, None),
    };
    let mode = if clv.as_ref().is_some_and(|c| c.ajax) {
        SubmissionMode::Ajax
    } else {
        SubmissionMode::PageLoad
    };

    let label_for: Vec<(String, String)> = doc
        .elements_named("label")
        .filter_map(|l| {
            let target = doc.attr(l, "for")?;
            Some((target.to_string(), collapse_ws(&doc.text_content(l))))
        })
        .collect();

    let mut controls: Vec<InputControl> = Vec::new();
    let mut buttons = Vec::new();
    let mut last_text: Option<String> = None;
    let mut skip_until_exit: Vec<NodeId> = Vec::new();

    for n in doc.descendants(node) {
        if skip_until_exit.iter().any(|&s| doc.is_ancestor(s, n)) {
            continue;
        }
        match &doc.node(n).data {
            NodeData::Text(t) => {
                let t = collapse_ws(t);
                if !t.is_empty() {
                    last_text = Some(t);
                }
            }
            NodeData::Element { name, .. } => {
                if doc.has_attr(n, "disabled") && matches!(name.as_str(), "input" | "select" | "textarea" | "button") {
                    continue;
                }
                match name.as_str() {
                    "input" => {
                        let ty = doc.attr(n, "type").unwrap_or("text").to_ascii_lowercase();
                        match ty.as_str() {
                            "submit" | "image" => buttons.push(button(doc, n)),
                            "reset" | "button" | "file" => {}
                            _ => {
                                let kind = match ty.as_str() {
                                    "hidden" => ControlKind::Hidden,
                                    "radio" => ControlKind::Radio,
                                    "checkbox" => ControlKind::Checkbox,
                                    "password" => ControlKind::Password,
                                    _ => ControlKind::Text,
                                };
                                let value = doc.attr(n, "value").unwrap_or("").to_string();
                                if let Some(c) = control(doc, n, kind, ty, value, Vec::new(), &label_for, &last_text, ordinal, &controls) {
                                    controls.push(c);
                                }
                            }
                        }
                    }
                    "button" => {
                        let ty = doc.attr(n, "type").unwrap_or("submit").to_ascii_lowercase();
                        if ty == "submit" {
                            buttons.push(button(doc, n));
                        }
                        skip_until_exit.push(n);
                    }
                    "select" => {
                        let opts: Vec<NodeId> = doc.descendants(n).into_iter().filter(|&o| doc.element_name(o) == Some("option")).collect();
                        let options: Vec<String> = opts.iter().map(|&o| option_value(doc, o)).collect();
                        let selected = opts
                            .iter()
                            .find(|&&o| doc.has_attr(o, "selected"))
                            .map(|&o| option_value(doc, o))
                            .or_else(|| options.first().cloned())
                            .unwrap_or_default();
                        if let Some(c) = control(doc, n, ControlKind::Select, "select".into(), selected, options, &label_for, &last_text, ordinal, &controls) {
                            controls.push(c);
                        }
                        skip_until_exit.push(n);
                    }
                    "textarea" => {
                        let value = doc.text_content(n);
                        if let Some(c) = control(doc, n, ControlKind::Text, "textarea".into(), value, Vec::new(), &label_for, &last_text, ordinal, &controls) {
                            controls.push(c);
                        }
                        skip_until_exit.push(n);
                    }
                    "script" | "style" => skip_until_exit.push(n),
                    _ => {}
                }
            }
            NodeData::Document => {}
        }
    }

    Form {
        ordinal,
        locator: doc.locator_of(node),
        action_raw,
        action,
        method,
        mode,
        controls,
        buttons,
        clv,
        clv_error,
    }
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn option_value(doc: &Document, o: NodeId) -> String {
    doc.attr(o, "value")
        .map(str::to_string)
        .unwrap_or_else(|| collapse_ws(&doc.text_content(o)))
}

fn button(doc: &Document, n: NodeId) -> Button {
    Button {
        locator: doc.locator_of(n),
        path: doc.path_of(n),
        id: doc.attr(n, "id").map(str::to_string),
        name: doc.attr(n, "name").filter(|s| !s.is_empty()).map(str::to_string),
        value: doc.attr(n, "value").map(str::to_string),
    }
}

#[allow(clippy::too_many_arguments)]
fn control(
    doc: &Document,
    n: NodeId,
    kind: ControlKind,
    type_hint: String,
    value: String,
    options: Vec<String>,
    label_for: &[(String, String)],
    last_text: &Option<String>,
    form: usize,
    existing: &[InputControl],
) -> Option<InputControl> {
    let name = doc.attr(n, "name").filter(|s| !s.is_empty())?.to_string();
    let id = doc.attr(n, "id").filter(|s| !s.is_empty()).map(str::to_string);
    let label = id
        .as_ref()
        .and_then(|id| label_for.iter().find(|(f, _)| f == id).map(|(_, t)| t.clone()))
        .or_else(|| last_text.clone());
    let locator = match doc.locator_of(n) {
        l @ Locator::Id(_) => l,
        _ if kind != ControlKind::Radio => Locator::Control { form, name: name.clone() },
        path => path,
    };
    let ordinal = existing.iter().filter(|c| c.name == name).count();
    Some(InputControl {
        validation: ValidationAttrs {
            required: doc.has_attr(n, "required"),
            pattern: doc.attr(n, "pattern").map(str::to_string),
            min: doc.attr(n, "min").map(str::to_string),
            max: doc.attr(n, "max").map(str::to_string),
            maxlength: doc.attr(n, "maxlength").and_then(|m| m.trim().parse().ok()),
            type_hint,
        },
        checked: doc.has_attr(n, "checked"),
        class: doc.attr(n, "class").unwrap_or("").to_string(),
        name,
        kind,
        value,
        options,
        label,
        id,
        locator,
        path: doc.path_of(n),
        ordinal,
        revealed: false,
    })
}

/// Every parameter a form submits with its default values.
pub fn extract_params(form: &Form) -> Vec<Param> {
    form.params(&form.default_values())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forms(html: &str, base: &str) -> Vec<Form> {
        let doc = Document::parse(html);
        extract_forms(&doc, Some(&Url::parse(base).unwrap()))
    }

    #[test]
    fn minimal_form() {
        let f = forms("<form><input name=a value=1></form>", "http://t/x");
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].controls.len(), 1);
        assert_eq!(f[0].controls[0].value, "1");
        assert_eq!(f[0].action.as_ref().unwrap().as_str(), "http://t/x");
    }

    #[test]
    fn sources_are_classified() {
        let f = &forms(
            r#"<form action="do?tok=a%2Fb" method=post>
                 <input type=hidden name=CSRF value=t1>
                 <input name=AMT id=amt>
               </form>"#,
            "http://t/page",
        )[0];
        let params = extract_params(f);
        let by_name = |n: &str| params.iter().find(|p| p.name == n).unwrap().clone();
        assert_eq!(by_name("tok").source, ParamSource::QueryString);
        assert_eq!(by_name("tok").value, "a/b");
        assert_eq!(by_name("CSRF").source, ParamSource::HiddenField);
        assert_eq!(by_name("AMT").source, ParamSource::UserInput);
        assert_eq!(by_name("AMT").locator, Locator::Id("amt".into()));
        assert_eq!(f.method, Method::Post);
    }

    #[test]
    fn radios_selects_and_buttons() {
        let f = &forms(
            r#"<form id=f>
                <input type=radio name=P value=a checked><input type=radio name=P value=b>
                <select name=S><option value=x>X</option><option selected>Y</option></select>
                <input type=checkbox name=C>
                <input type=submit id=go value=Go>
                <button name=alt>Other</button>
                <input name=off disabled>
              </form>"#,
            "http://t/",
        )[0];
        let v = f.default_values();
        assert_eq!(v.get("P"), Some("a"));
        assert_eq!(v.get("S"), Some("Y"));
        assert_eq!(v.get("C"), None);
        assert_eq!(v.get("off"), None);
        assert_eq!(f.choice_options("P").unwrap(), vec!["a", "b"]);
        assert_eq!(f.choice_options("S").unwrap(), vec!["x", "Y"]);
        assert_eq!(f.buttons.len(), 2);
        assert!(f.button(&Locator::Id("go".into())).is_some());
        assert!(f.button(&Locator::Control { form: 0, name: "alt".into() }).is_some());
    }

    #[test]
    fn labels_by_for_then_preceding_text() {
        let f = &forms(
            r#"<form><label for=t>To account</label><input id=t name=TO>
                Amount <input name=AMT></form>"#,
            "http://t/",
        )[0];
        assert_eq!(f.control("TO").unwrap().label.as_deref(), Some("To account"));
        assert_eq!(f.control("AMT").unwrap().label.as_deref(), Some("Amount"));
    }

    #[test]
    fn relative_action_without_base_is_unresolved() {
        let doc = Document::parse("<form action=do></form>");
        let f = extract_forms(&doc, None);
        assert!(f[0].action.is_none());
    }

    #[test]
    fn zero_controls_keeps_query_params() {
        let f = &forms(r#"<form action="/do?x=1&y=two"></form>"#, "http://t/")[0];
        let params = extract_params(f);
        assert_eq!(params.len(), 2);
        assert!(params.iter().all(|p| p.source == ParamSource::QueryString));
    }

    #[test]
    fn broken_clv_is_recorded() {
        let f = &forms(r#"<form data-clv='{"validate": 3}'></form>"#, "http://t/")[0];
        assert!(f.clv.is_none());
        assert!(f.clv_error.is_some());
    }
}
