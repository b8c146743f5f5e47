//! Response parsing: HTML trees, forms and their controls, JSON bodies.

pub mod clv;
mod document;
mod form;
mod json;

pub use document::{Document, Leaf, Locator, LocatorParseError, Node, NodeData, NodeId};
pub use form::{
    extract_forms, extract_params, Button, ControlKind, Form, FormValues, InputControl, Param, ParamSource,
    SubmissionMode, ValidationAttrs,
};
pub use json::JsonDocument;

use url::Url;

use crate::session::HttpResponse;

#[derive(Debug, Clone)]
pub enum ParsedBody {
    Html(Document),
    Json(JsonDocument),
    Text(String),
    Empty,
}

impl ParsedBody {
    /// Chooses the parser from the content type, sniffing the first byte
    /// when the type is missing or generic.
    pub fn parse(content_type: Option<&str>, body: &[u8]) -> ParsedBody {
        let text = String::from_utf8_lossy(body);
        if text.trim().is_empty() {
            return ParsedBody::Empty;
        }
        let ct = content_type.unwrap_or("").to_ascii_lowercase();
        let json = || match JsonDocument::parse(body) {
            Ok(j) => ParsedBody::Json(j),
            Err(_) => ParsedBody::Text(text.to_string()),
        };
        if ct.contains("json") {
            return json();
        }
        if ct.contains("html") || ct.contains("xml") {
            return ParsedBody::Html(Document::parse(&text));
        }
        match text.trim_start().chars().next() {
            Some('{') | Some('[') => json(),
            Some('<') => ParsedBody::Html(Document::parse(&text)),
            _ => ParsedBody::Text(text.to_string()),
        }
    }

    pub fn leaf_texts(&self) -> Vec<Leaf> {
        match self {
            ParsedBody::Html(d) => d.leaf_texts(),
            ParsedBody::Json(j) => j.leaf_texts(),
            ParsedBody::Text(t) => vec![Leaf {
                locator: Locator::Body,
                text: t.clone(),
            }],
            ParsedBody::Empty => Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, ParsedBody::Empty)
    }

    pub fn as_html(&self) -> Option<&Document> {
        match self {
            ParsedBody::Html(d) => Some(d),
            _ => None,
        }
    }
}

pub fn parse_body(resp: &HttpResponse) -> ParsedBody {
    ParsedBody::parse(resp.content_type.as_deref(), &resp.body)
}

/// A loaded page: the final URL after redirects, its parsed body, and its forms.
#[derive(Debug, Clone)]
pub struct Page {
    pub url: Url,
    pub body: ParsedBody,
    pub forms: Vec<Form>,
}

impl Page {
    pub fn from_response(resp: &HttpResponse) -> Page {
        let body = parse_body(resp);
        let forms = body
            .as_html()
            .map(|d| extract_forms(d, Some(&resp.url)))
            .unwrap_or_default();
        Page {
            url: resp.url.clone(),
            body,
            forms,
        }
    }

    /// Form ordinal and control name designated by `locator`.
    pub fn resolve_control(&self, locator: &Locator) -> Option<(usize, String)> {
        self.forms
            .iter()
            .find_map(|f| f.control_at(locator).map(|c| (f.ordinal, c.name.clone())))
    }

    /// Form ordinal and button designated by `locator`.
    pub fn resolve_button(&self, locator: &Locator) -> Option<(usize, &Button)> {
        self.forms
            .iter()
            .find_map(|f| f.button(locator).map(|b| (f.ordinal, b)))
    }

    /// Whether `locator` designates a clickable button on this page.
    pub fn has_button(&self, locator: &Locator) -> bool {
        self.resolve_button(locator).is_some()
    }
}
