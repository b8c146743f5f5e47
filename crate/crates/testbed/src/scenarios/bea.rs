//! Two-step transfer guarded by a client-computed `MACcode`. The server
//! only checks that the MAC matches the submitted fields, which any client
//! can recompute, and the confirmation step trusts its own resubmitted
//! values instead of the ones stored at step A.

use std::collections::BTreeMap;
use std::sync::{Arc, LazyLock};

use axum::body::Bytes;
use axum::extract::{RawQuery, State as Shared};
use axum::http::HeaderMap;
use axum::response::Response;
use axum::routing::{get, post};
use axum::Router;
use base64::Engine as _;
use regex::Regex;

use crate::server::{self, html, options, page_session, reject, render, App, Submission};
use crate::state::{Cause, Purpose};

const TRANSFER: &str = include_str!("../../templates/bea_transfer.html");
const REVIEW: &str = include_str!("../../templates/bea_review.html");
const ACK: &str = include_str!("../../templates/bea_ack.html");

const AMOUNT_CAP: f64 = 10000.0;

static ACCOUNT_FORMAT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d{3}-\d{3}-\d{6}$").unwrap());

pub fn routes() -> Router<Arc<App>> {
    Router::new()
        .route("/bea/transfer", get(transfer_page))
        .route("/bea/review", post(review))
        .route("/bea/confirm", post(confirm))
}

/// The same MAC the page computes: base64 of `FROM|TO|AMT`.
pub fn mac(from: &str, to: &str, amt: &str) -> String {
    base64::engine::general_purpose::STANDARD.encode(format!("{from}|{to}|{amt}"))
}

async fn transfer_page(Shared(app): Shared<Arc<App>>, headers: HeaderMap) -> Response {
    let mut st = app.lock();
    let (sid, cookie) = page_session(&mut st, &headers);
    if let Some(s) = st.session(&sid) {
        s.pending = None;
    }
    let csrf = st.issue(&sid, Purpose::StepA);
    let from = options(app.accounts.own.iter().map(|a| (a.as_str(), a.as_str())));
    let to = options(app.accounts.payees.iter().map(|p| (p.as_str(), p.as_str())));
    html(render(TRANSFER, &[("csrf", &csrf), ("from_options", &from), ("to_options", &to)]), cookie)
}

/// Checks shared by both handlers, in the order the server applies them.
fn check_fields(app: &App, req: &Submission) -> Result<(), Cause> {
    let (from, to, amt) = (req.field_or_empty("FROM"), req.field_or_empty("TO"), req.field_or_empty("AMT"));
    if req.field("MACcode") != Some(mac(from, to, amt).as_str()) {
        return Err(Cause::DependencyMismatch);
    }
    let registered = app.accounts.payees.iter().any(|p| p == to);
    let ok = app.accounts.own.iter().any(|a| a == from)
        && ACCOUNT_FORMAT.is_match(to)
        && (app.flaws.payee_unchecked || registered)
        && server::valid_amount(amt, AMOUNT_CAP).is_some();
    if ok {
        Ok(())
    } else {
        Err(Cause::ValidationFail)
    }
}

fn amount(amt: &str) -> String {
    format!("{:.2}", amt.parse::<f64>().unwrap_or_default())
}

async fn review(Shared(app): Shared<Arc<App>>, headers: HeaderMap, query: RawQuery, body: Bytes) -> Response {
    const HANDLER: &str = "bea/review";
    let req = Submission::new(&headers, query, &body);
    let mut st = app.lock();
    let sid = req.log_id();
    if let Err(cause) = st.redeem(&sid, Purpose::StepA, req.field("CSRF1")) {
        return reject(&mut st, &sid, HANDLER, cause);
    }
    if let Err(cause) = check_fields(&app, &req) {
        return reject(&mut st, &sid, HANDLER, cause);
    }
    let (from, to, amt) = (req.field_or_empty("FROM"), req.field_or_empty("TO"), req.field_or_empty("AMT"));
    if let Some(s) = st.session(&sid) {
        s.pending = Some(BTreeMap::from([("FROM", from.into()), ("TO", to.into()), ("AMT", amt.into())]));
    }
    let csrf = st.issue(&sid, Purpose::StepB);
    st.record(&sid, HANDLER, Ok(()));
    let mac = mac(from, to, amt);
    html(
        render(
            REVIEW,
            &[("csrf", &csrf), ("from", from), ("to", to), ("amt", amt), ("amount", &amount(amt)), ("mac", &mac)],
        ),
        None,
    )
}

async fn confirm(Shared(app): Shared<Arc<App>>, headers: HeaderMap, query: RawQuery, body: Bytes) -> Response {
    const HANDLER: &str = "bea/confirm";
    let req = Submission::new(&headers, query, &body);
    let mut st = app.lock();
    let sid = req.log_id();
    if st.session(&sid).and_then(|s| s.pending.as_ref()).is_none() {
        return reject(&mut st, &sid, HANDLER, Cause::WorkflowOrder);
    }
    if let Err(cause) = st.redeem(&sid, Purpose::StepB, req.field("CSRF2")) {
        return reject(&mut st, &sid, HANDLER, cause);
    }
    // The stored step-A values are never consulted here.
    if let Err(cause) = check_fields(&app, &req) {
        return reject(&mut st, &sid, HANDLER, cause);
    }
    let (from, to, amt) = (req.field_or_empty("FROM"), req.field_or_empty("TO"), req.field_or_empty("AMT"));
    let reference = st.transfer(&sid, from, to, amt);
    if let Some(s) = st.session(&sid) {
        s.pending = None;
    }
    st.record(&sid, HANDLER, Ok(()));
    html(
        render(ACK, &[("reference", &reference), ("from", from), ("to", to), ("amount", &amount(amt))]),
        None,
    )
}
