//! HTTP plumbing: requests, responses, a cookie jar, and form submission
//! encoding. Redirects are followed here rather than by the client so that
//! every hop's `Set-Cookie` lands in the jar.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use cookie::time::OffsetDateTime;
use cookie::Cookie;
use serde::{Deserialize, Serialize};
use url::Url;

use crate::error::{Error, Result};
use crate::html::{Button, Form, FormValues, ParamSource, SubmissionMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Post => "POST",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "data")]
pub enum Body {
    Empty,
    Form(Vec<(String, String)>),
    Json(serde_json::Value),
}

impl Body {
    fn encode(&self) -> Option<(&'static str, Vec<u8>)> {
        match self {
            Body::Empty => None,
            Body::Form(pairs) => Some((
                "application/x-www-form-urlencoded",
                encode_form(pairs).into_bytes(),
            )),
            Body::Json(v) => Some(("application/json", serde_json::to_vec(v).expect("json value serializes"))),
        }
    }
}

/// `application/x-www-form-urlencoded`, spaces as `+`.
pub fn encode_form(pairs: &[(String, String)]) -> String {
    url::form_urlencoded::Serializer::new(String::new())
        .extend_pairs(pairs)
        .finish()
}

pub fn decode_form(s: &str) -> Vec<(String, String)> {
    url::form_urlencoded::parse(s.as_bytes())
        .map(|(k, v)| (k.into_owned(), v.into_owned()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpRequest {
    pub method: Method,
    /// Target without its query string.
    pub url: Url,
    pub query: Vec<(String, String)>,
    pub body: Body,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub headers: Vec<(String, String)>,
}

impl HttpRequest {
    pub fn get(url: &Url) -> HttpRequest {
        let mut bare = url.clone();
        let query = url.query_pairs().map(|(k, v)| (k.into_owned(), v.into_owned())).collect();
        bare.set_query(None);
        bare.set_fragment(None);
        HttpRequest {
            method: Method::Get,
            url: bare,
            query,
            body: Body::Empty,
            headers: Vec::new(),
        }
    }

    pub fn full_url(&self) -> Url {
        let mut u = self.url.clone();
        if !self.query.is_empty() {
            u.set_query(Some(&encode_form(&self.query)));
        }
        u
    }

    /// Every name/value pair the request carries, query first.
    pub fn pairs(&self) -> Vec<(String, String)> {
        let mut out = self.query.clone();
        match &self.body {
            Body::Form(p) => out.extend(p.iter().cloned()),
            Body::Json(serde_json::Value::Object(m)) => {
                for (k, v) in m {
                    let v = match v {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    out.push((k.clone(), v));
                }
            }
            _ => {}
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpResponse {
    pub status: u16,
    pub content_type: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub headers: Vec<(String, String)>,
    #[serde(with = "lossy_body")]
    pub body: Vec<u8>,
    /// Final URL after redirects.
    pub url: Url,
}

impl HttpResponse {
    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

mod lossy_body {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(body: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&String::from_utf8_lossy(body))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        Ok(String::deserialize(d)?.into_bytes())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct StoredCookie {
    value: String,
    path: String,
    expires: Option<OffsetDateTime>,
}

/// Host-only cookie jar keyed by origin.
#[derive(Debug, Clone, Default)]
pub struct CookieJar {
    by_origin: BTreeMap<String, BTreeMap<String, StoredCookie>>,
}

fn origin_key(url: &Url) -> String {
    format!("{}://{}:{}", url.scheme(), url.host_str().unwrap_or(""), url.port_or_known_default().unwrap_or(0))
}

fn default_path(url: &Url) -> String {
    let p = url.path();
    match p.rfind('/') {
        Some(0) | None => "/".into(),
        Some(i) => p[..i].to_string(),
    }
}

fn path_matches(cookie_path: &str, request_path: &str) -> bool {
    request_path == cookie_path
        || (request_path.starts_with(cookie_path)
            && (cookie_path.ends_with('/') || request_path[cookie_path.len()..].starts_with('/')))
}

impl CookieJar {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies one `Set-Cookie` header received from `url`. Unparseable
    /// headers are ignored, as browsers do.
    pub fn store(&mut self, url: &Url, header: &str) {
        let Ok(c) = Cookie::parse(header.to_string()) else {
            tracing::debug!(header, "ignoring malformed Set-Cookie");
            return;
        };
        let now = OffsetDateTime::now_utc();
        let expires = match c.max_age() {
            Some(age) => Some(now + age),
            None => c.expires_datetime(),
        };
        let jar = self.by_origin.entry(origin_key(url)).or_default();
        if expires.is_some_and(|e| e <= now) {
            jar.remove(c.name());
            return;
        }
        let path = c
            .path()
            .filter(|p| p.starts_with('/'))
            .map(str::to_string)
            .unwrap_or_else(|| default_path(url));
        jar.insert(
            c.name().to_string(),
            StoredCookie {
                value: c.value().to_string(),
                path,
                expires,
            },
        );
    }

    /// Cookies a browser would send to `url`, sorted by name.
    pub fn cookies_for(&self, url: &Url) -> Vec<(String, String)> {
        let now = OffsetDateTime::now_utc();
        self.by_origin
            .get(&origin_key(url))
            .map(|jar| {
                jar.iter()
                    .filter(|(_, c)| path_matches(&c.path, url.path()))
                    .filter(|(_, c)| c.expires.is_none_or(|e| e > now))
                    .map(|(k, c)| (k.clone(), c.value.clone()))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn clear(&mut self) {
        self.by_origin.clear();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// Pause before every outgoing request, redirects included.
    pub delay: Duration,
    pub max_redirects: usize,
    pub timeout: Duration,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            delay: Duration::ZERO,
            max_redirects: 5,
            timeout: Duration::from_secs(30),
        }
    }
}

/// A browser-like client: one cookie jar, manual redirects, request counting.
#[derive(Debug, Clone)]
pub struct Session {
    client: reqwest::blocking::Client,
    jar: CookieJar,
    config: SessionConfig,
    step: Option<usize>,
    sent: Arc<AtomicU64>,
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Session> {
        let client = reqwest::blocking::Client::builder()
            .redirect(reqwest::redirect::Policy::none())
            .timeout(config.timeout)
            .build()
            .map_err(|e| Error::Config(format!("cannot build HTTP client: {e}")))?;
        Ok(Session {
            client,
            jar: CookieJar::new(),
            config,
            step: None,
            sent: Arc::new(AtomicU64::new(0)),
        })
    }

    /// A new browser session sharing the connection pool and request counter
    /// but starting with an empty cookie jar.
    pub fn fork(&self) -> Session {
        Session {
            client: self.client.clone(),
            jar: CookieJar::new(),
            config: self.config.clone(),
            step: None,
            sent: Arc::clone(&self.sent),
        }
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    /// Step index attached to transport errors.
    pub fn set_step(&mut self, step: Option<usize>) {
        self.step = step;
    }

    pub fn requests_sent(&self) -> u64 {
        self.sent.load(Ordering::Relaxed)
    }

    pub fn jar(&self) -> &CookieJar {
        &self.jar
    }

    pub fn cookies_for(&self, url: &Url) -> Vec<(String, String)> {
        self.jar.cookies_for(url)
    }

    fn transport(&self, message: impl Into<String>) -> Error {
        Error::Transport {
            step: self.step,
            message: message.into(),
        }
    }

    /// Sends `req`, following up to `max_redirects` redirects.
    pub fn send(&mut self, req: &HttpRequest) -> Result<HttpResponse> {
        let mut method = req.method;
        let mut url = req.full_url();
        let mut body = req.body.clone();
        for _hop in 0..=self.config.max_redirects {
            if !self.config.delay.is_zero() {
                std::thread::sleep(self.config.delay);
            }
            let mut rb = self.client.request(
                match method {
                    Method::Get => reqwest::Method::GET,
                    Method::Post => reqwest::Method::POST,
                },
                url.as_str(),
            );
            for (k, v) in &req.headers {
                rb = rb.header(k, v);
            }
            let cookies = self.jar.cookies_for(&url);
            if !cookies.is_empty() {
                let header = cookies.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join("; ");
                rb = rb.header("cookie", header);
            }
            if let Some((ct, bytes)) = body.encode() {
                rb = rb.header("content-type", ct).body(bytes);
            }
            self.sent.fetch_add(1, Ordering::Relaxed);
            tracing::trace!(method = method.as_str(), %url, "sending");
            let resp = rb.send().map_err(|e| self.transport(e.to_string()))?;
            for sc in resp.headers().get_all("set-cookie") {
                if let Ok(s) = sc.to_str() {
                    self.jar.store(&url, s);
                }
            }
            let status = resp.status().as_u16();
            let location = resp
                .headers()
                .get("location")
                .and_then(|l| l.to_str().ok())
                .and_then(|l| url.join(l).ok());
            if let (true, Some(next)) = (matches!(status, 301 | 302 | 303 | 307 | 308), location) {
                if matches!(status, 301..=303) {
                    method = Method::Get;
                    body = Body::Empty;
                }
                url = next;
                continue;
            }
            let headers: Vec<(String, String)> = resp
                .headers()
                .iter()
                .filter_map(|(k, v)| Some((k.as_str().to_string(), v.to_str().ok()?.to_string())))
                .collect();
            let content_type = resp
                .headers()
                .get("content-type")
                .and_then(|v| v.to_str().ok())
                .map(str::to_string);
            let bytes = resp.bytes().map_err(|e| self.transport(e.to_string()))?;
            return Ok(HttpResponse {
                status,
                content_type,
                headers,
                body: bytes.to_vec(),
                url,
            });
        }
        Err(self.transport(format!("more than {} redirects", self.config.max_redirects)))
    }

    pub fn get(&mut self, url: &Url) -> Result<HttpResponse> {
        self.send(&HttpRequest::get(url))
    }
}

/// The request a browser sends when `form` is submitted with `values`
/// (and `button` clicked, if it has a name).
pub fn build_submission(form: &Form, values: &FormValues, button: Option<&Button>) -> Result<HttpRequest> {
    let action = form.action.as_ref().ok_or_else(|| {
        Error::Config(format!(
            "form {} has action `{}` which cannot be resolved to an absolute URL",
            form.ordinal, form.action_raw
        ))
    })?;
    let mut url = action.clone();
    url.set_query(None);
    url.set_fragment(None);
    let mut query = Vec::new();
    let mut fields = Vec::new();
    for p in form.params(values) {
        if p.source == ParamSource::QueryString {
            query.push((p.name, p.value));
        } else {
            fields.push((p.name, p.value));
        }
    }
    if let Some(b) = button {
        if let Some(name) = &b.name {
            fields.push((name.clone(), b.value.clone().unwrap_or_default()));
        }
    }
    let (method, body) = match (form.mode, form.method) {
        (SubmissionMode::Ajax, _) => {
            let obj = fields
                .into_iter()
                .map(|(k, v)| (k, serde_json::Value::String(v)))
                .collect::<serde_json::Map<_, _>>();
            (Method::Post, Body::Json(serde_json::Value::Object(obj)))
        }
        (SubmissionMode::PageLoad, Method::Post) => (Method::Post, Body::Form(fields)),
        (SubmissionMode::PageLoad, Method::Get) => {
            query.extend(fields);
            (Method::Get, Body::Empty)
        }
    };
    let headers = match form.mode {
        SubmissionMode::Ajax => vec![("x-requested-with".to_string(), "XMLHttpRequest".to_string())],
        SubmissionMode::PageLoad => Vec::new(),
    };
    Ok(HttpRequest {
        method,
        url,
        query,
        body,
        headers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::html::{extract_forms, Document};

    fn u(s: &str) -> Url {
        Url::parse(s).unwrap()
    }

    #[test]
    fn form_encoding_round_trip() {
        let pairs = vec![("TO".to_string(), "FUND RECEIPIENT~~290 1234".to_string()), ("a&b".into(), "=%".into())];
        let enc = encode_form(&pairs);
        assert!(enc.contains("FUND+RECEIPIENT"));
        assert_eq!(decode_form(&enc), pairs);
    }

    #[test]
    fn jar_paths_and_expiry() {
        let mut jar = CookieJar::new();
        let base = u("http://h:1/app/page");
        jar.store(&base, "A=1");
        jar.store(&base, "B=2; Path=/other");
        jar.store(&base, "C=3; Path=/");
        assert_eq!(jar.cookies_for(&u("http://h:1/app/x")), vec![("A".into(), "1".into()), ("C".into(), "3".into())]);
        assert_eq!(jar.cookies_for(&u("http://h:1/other/y")), vec![("B".into(), "2".into()), ("C".into(), "3".into())]);
        assert!(jar.cookies_for(&u("http://h:2/app/x")).is_empty());
        jar.store(&base, "C=gone; Path=/; Max-Age=0");
        assert_eq!(jar.cookies_for(&u("http://h:1/")), vec![]);
        jar.store(&base, "D=1; Path=/; Expires=Thu, 01 Jan 1970 00:00:00 GMT");
        assert!(jar.cookies_for(&u("http://h:1/")).is_empty());
        assert!(!path_matches("/app", "/application"));
    }

    #[test]
    fn submissions_by_method() {
        let doc = Document::parse(
            r#"<form method=post action="/do?sid=s1"><input name=A value="x y"><input type=hidden name=H value=h></form>
               <form action="/find?fixed=1"><input name=q value=w></form>
               <form action="/api" method=post data-clv='{"ajax":true}'><input name=k value=v></form>"#,
        );
        let forms = extract_forms(&doc, Some(&u("http://t/p")));
        let post = build_submission(&forms[0], &forms[0].default_values(), None).unwrap();
        assert_eq!(post.method, Method::Post);
        assert_eq!(post.full_url().as_str(), "http://t/do?sid=s1");
        assert_eq!(post.body, Body::Form(vec![("A".into(), "x y".into()), ("H".into(), "h".into())]));

        let get = build_submission(&forms[1], &forms[1].default_values(), None).unwrap();
        assert_eq!(get.full_url().as_str(), "http://t/find?fixed=1&q=w");

        let ajax = build_submission(&forms[2], &forms[2].default_values(), None).unwrap();
        assert_eq!(ajax.body, Body::Json(serde_json::json!({"k": "v"})));
        assert_eq!(ajax.pairs(), vec![("k".to_string(), "v".to_string())]);
    }

    #[test]
    fn unresolvable_action_is_config_error() {
        let doc = Document::parse("<form action=rel><input name=a></form>");
        let forms = extract_forms(&doc, None);
        assert!(matches!(build_submission(&forms[0], &FormValues::new(), None), Err(Error::Config(_))));
    }
}
