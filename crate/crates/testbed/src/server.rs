use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{RawQuery, State as Shared};
use axum::http::header::{CONTENT_TYPE, COOKIE, LOCATION, SET_COOKIE};
use axum::http::{HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};

use crate::state::{Cause, State};
use crate::{scenarios, Accounts, Flaws, Scenario};

pub const SESSION_COOKIE: &str = "SESSID";

pub struct App {
    pub scenario: Scenario,
    pub accounts: Accounts,
    pub flaws: Flaws,
    pub state: Mutex<State>,
}

impl App {
    pub fn lock(&self) -> MutexGuard<'_, State> {
        // A panicking handler must not take the log down with it.
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }
}

pub fn router(app: Arc<App>) -> Router {
    let routes = match app.scenario {
        Scenario::HsbcLike => scenarios::hsbc::routes(),
        Scenario::BeaLike => scenarios::bea::routes(),
        Scenario::BocLike => scenarios::boc::routes(),
        Scenario::AjaxDate => scenarios::ajax::routes(),
    };
    routes
        .route("/_log", get(debug_log))
        .route("/_reset", post(debug_reset))
        .with_state(app)
}

async fn debug_log(Shared(app): Shared<Arc<App>>) -> Response {
    let st = app.lock();
    Json(serde_json::json!({
        "log": st.log(),
        "transfers": st.transfers(),
    }))
    .into_response()
}

async fn debug_reset(Shared(app): Shared<Arc<App>>) -> Response {
    app.lock().reset();
    StatusCode::NO_CONTENT.into_response()
}

/// A decoded submission: session cookie, query, and urlencoded body.
pub struct Submission {
    pub session: Option<String>,
    pub query: BTreeMap<String, String>,
    pub form: BTreeMap<String, String>,
}

impl Submission {
    pub fn new(headers: &HeaderMap, query: RawQuery, body: &[u8]) -> Self {
        Submission {
            session: session_cookie(headers),
            query: decode(query.0.as_deref().unwrap_or("").as_bytes()),
            form: decode(body),
        }
    }

    /// Session id for the log; `-` when the request carried none.
    pub fn log_id(&self) -> String {
        self.session.clone().unwrap_or_else(|| "-".into())
    }

    pub fn field(&self, name: &str) -> Option<&str> {
        self.form.get(name).map(String::as_str)
    }

    pub fn field_or_empty(&self, name: &str) -> &str {
        self.field(name).unwrap_or("")
    }
}

fn decode(raw: &[u8]) -> BTreeMap<String, String> {
    // Repeated names keep the first value, as most form frameworks do.
    let mut out = BTreeMap::new();
    for (k, v) in form_urlencoded::parse(raw) {
        out.entry(k.into_owned()).or_insert_with(|| v.into_owned());
    }
    out
}

pub fn session_cookie(headers: &HeaderMap) -> Option<String> {
    headers
        .get_all(COOKIE)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(';'))
        .filter_map(|kv| kv.trim().split_once('='))
        .find(|(k, _)| *k == SESSION_COOKIE)
        .map(|(_, v)| v.to_string())
}

/// The session a page view belongs to; sets the cookie when it is new.
pub fn page_session(st: &mut State, headers: &HeaderMap) -> (String, Option<HeaderValue>) {
    let (id, fresh) = st.session_or_new(session_cookie(headers).as_deref());
    let cookie = fresh.then(|| {
        HeaderValue::from_str(&format!("{SESSION_COOKIE}={id}; Path=/; HttpOnly")).expect("token is ascii")
    });
    (id, cookie)
}

pub fn html(body: String, cookie: Option<HeaderValue>) -> Response {
    let mut resp = (StatusCode::OK, [(CONTENT_TYPE, "text/html; charset=utf-8")], body).into_response();
    if let Some(c) = cookie {
        resp.headers_mut().insert(SET_COOKIE, c);
    }
    resp
}

pub fn redirect(to: &str) -> Response {
    (StatusCode::SEE_OTHER, [(LOCATION, to.to_string())]).into_response()
}

const REJECTED: &str = include_str!("../templates/rejected.html");

/// Logs the rejection and answers with a page carrying no acceptance
/// evidence: no buttons, no reflected values, no positive keyword.
pub fn reject(st: &mut State, session: &str, handler: &str, cause: Cause) -> Response {
    st.record(session, handler, Err(cause));
    html(REJECTED.to_string(), None)
}

pub fn reject_json(st: &mut State, session: &str, handler: &str, cause: Cause) -> Response {
    st.record(session, handler, Err(cause));
    Json(serde_json::json!({"success": 0, "message": "Sorry, the request could not be processed"})).into_response()
}

/// Substitutes `{{key}}` (HTML-escaped) and `{{!key}}` (raw markup).
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{{!{k}}}}}"), v);
        out = out.replace(&format!("{{{{{k}}}}}"), &escape(v));
    }
    debug_assert!(!out.contains("{{"), "unfilled placeholder in template");
    out
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// `<option>` list; the first option is preselected by the browser.
pub fn options<'a>(items: impl IntoIterator<Item = (&'a str, &'a str)>) -> String {
    items
        .into_iter()
        .map(|(value, label)| format!("<option value=\"{}\">{}</option>", escape(value), escape(label)))
        .collect::<Vec<_>>()
        .join("\n      ")
}

/// Positive decimal with at most two fraction digits, within `1..=cap`.
pub fn valid_amount(raw: &str, cap: f64) -> Option<f64> {
    static RE: std::sync::LazyLock<regex::Regex> =
        std::sync::LazyLock::new(|| regex::Regex::new(r"^\d+(\.\d{1,2})?$").unwrap());
    if !RE.is_match(raw) {
        return None;
    }
    let v: f64 = raw.parse().ok()?;
    (1.0..=cap).contains(&v).then_some(v)
}
