//! Two-step transfer whose first handler checks the payee's format but not
//! that it is registered. The confirmation step enforces `TO` against the
//! stored value and moves money using the stored `FROM` and `AMT`.

use std::collections::BTreeMap;
use std::sync::{Arc, LazyLock};

use axum::body::Bytes;
use axum::extract::{RawQuery, State as Shared};
use axum::http::HeaderMap;
use axum::response::Response;
use axum::routing::{get, post};
use axum::Router;
use regex::Regex;

use crate::server::{self, html, options, page_session, reject, render, App, Submission};
use crate::state::{Cause, Purpose};

const TRANSFER: &str = include_str!("../../templates/hsbc_transfer.html");
const REVIEW: &str = include_str!("../../templates/hsbc_review.html");
const ACK: &str = include_str!("../../templates/hsbc_ack.html");

/// Security code expected on the new-payee branch.
pub const OTP: &str = "246810";
const AMOUNT_CAP: f64 = 10000.0;

static PAYEE_FORMAT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[a-zA-Z ]{1,20}~~\d{1,3} ?\d{1,12}$").unwrap());

pub fn routes() -> Router<Arc<App>> {
    Router::new()
        .route("/hsbc/transfer", get(transfer_page))
        .route("/hsbc/review", post(review))
        .route("/hsbc/confirm", post(confirm))
}

async fn transfer_page(Shared(app): Shared<Arc<App>>, headers: HeaderMap) -> Response {
    let mut st = app.lock();
    let (sid, cookie) = page_session(&mut st, &headers);
    if let Some(s) = st.session(&sid) {
        s.pending = None;
    }
    let csrf = st.issue(&sid, Purpose::StepA);
    // Varies on every view and is never read back.
    let r = st.digits(10);
    let from = options(app.accounts.own.iter().map(|a| (a.as_str(), a.as_str())));
    let to = options(app.accounts.payees.iter().map(|p| (p.as_str(), p.as_str())));
    html(
        render(TRANSFER, &[("r", &r), ("csrf", &csrf), ("from_options", &from), ("to_options", &to)]),
        cookie,
    )
}

fn step_a_valid(app: &App, req: &Submission) -> bool {
    let from = req.field_or_empty("FROM");
    let to = req.field_or_empty("TO");
    if !app.accounts.own.iter().any(|a| a == from) {
        return false;
    }
    match req.field_or_empty("PAYEE") {
        "registered" => {}
        "new" if req.field("OTP") == Some(OTP) => {}
        _ => return false,
    }
    if !PAYEE_FORMAT.is_match(to) {
        return false;
    }
    if !app.flaws.payee_unchecked && !app.accounts.payees.iter().any(|p| p == to) {
        return false;
    }
    server::valid_amount(req.field_or_empty("AMT"), AMOUNT_CAP).is_some()
}

async fn review(Shared(app): Shared<Arc<App>>, headers: HeaderMap, query: RawQuery, body: Bytes) -> Response {
    const HANDLER: &str = "hsbc/review";
    let req = Submission::new(&headers, query, &body);
    let mut st = app.lock();
    let sid = req.log_id();
    if let Err(cause) = st.redeem(&sid, Purpose::StepA, req.field("CSRF1")) {
        return reject(&mut st, &sid, HANDLER, cause);
    }
    if !step_a_valid(&app, &req) {
        return reject(&mut st, &sid, HANDLER, Cause::ValidationFail);
    }
    let from = req.field_or_empty("FROM").to_string();
    let to = req.field_or_empty("TO").to_string();
    let amt = req.field_or_empty("AMT").to_string();
    let amount = format!("{:.2}", server::valid_amount(&amt, AMOUNT_CAP).unwrap_or_default());
    if let Some(s) = st.session(&sid) {
        s.pending = Some(BTreeMap::from([("FROM", from.clone()), ("TO", to.clone()), ("AMT", amt.clone())]));
    }
    let csrf = st.issue(&sid, Purpose::StepB);
    st.record(&sid, HANDLER, Ok(()));
    html(
        render(REVIEW, &[("csrf", &csrf), ("from", &from), ("to", &to), ("amt", &amt), ("amount", &amount)]),
        None,
    )
}

async fn confirm(Shared(app): Shared<Arc<App>>, headers: HeaderMap, query: RawQuery, body: Bytes) -> Response {
    const HANDLER: &str = "hsbc/confirm";
    let req = Submission::new(&headers, query, &body);
    let mut st = app.lock();
    let sid = req.log_id();
    let Some(pending) = st.session(&sid).and_then(|s| s.pending.clone()) else {
        return reject(&mut st, &sid, HANDLER, Cause::WorkflowOrder);
    };
    if let Err(cause) = st.redeem(&sid, Purpose::StepB, req.field("CSRF2")) {
        return reject(&mut st, &sid, HANDLER, cause);
    }
    let to = req.field_or_empty("TO");
    if pending["TO"] != to {
        return reject(&mut st, &sid, HANDLER, Cause::DependencyMismatch);
    }
    // FROM and AMT come from the session; the resubmitted copies are ignored.
    let (from, amt) = (pending["FROM"].clone(), pending["AMT"].clone());
    let reference = st.transfer(&sid, &from, to, &amt);
    if let Some(s) = st.session(&sid) {
        s.pending = None;
    }
    st.record(&sid, HANDLER, Ok(()));
    let amount = format!("{:.2}", amt.parse::<f64>().unwrap_or_default());
    html(
        render(ACK, &[("reference", &reference), ("from", &from), ("to", to), ("amount", &amount)]),
        None,
    )
}
