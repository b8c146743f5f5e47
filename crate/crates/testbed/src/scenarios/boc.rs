//! Two-step transfer that never exposes account numbers: the page offers
//! indices into the session owner's own accounts and registered payees, and
//! every handler re-checks them. Confirmation redirects to a result page.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{RawQuery, State as Shared};
use axum::http::HeaderMap;
use axum::response::Response;
use axum::routing::{get, post};
use axum::Router;

use crate::server::{self, html, options, page_session, redirect, reject, render, App, Submission};
use crate::state::{Cause, Purpose, State};

const TRANSFER: &str = include_str!("../../templates/boc_transfer.html");
const REVIEW: &str = include_str!("../../templates/boc_review.html");
const DONE: &str = include_str!("../../templates/boc_done.html");

const AMOUNT_CAP: f64 = 50000.0;

const OWN_LABELS: [&str; 2] = ["Current account", "Savings account"];
const PAYEE_LABELS: [&str; 3] = ["Mother", "Landlord", "Tuition office"];

pub fn routes() -> Router<Arc<App>> {
    Router::new()
        .route("/boc/transfer", get(transfer_page))
        .route("/boc/review", post(review))
        .route("/boc/confirm", post(confirm))
        .route("/boc/done", get(done))
}

/// Display name for an index; pages never print account numbers.
fn label(labels: &[&'static str], i: usize) -> String {
    labels.get(i).map(|s| s.to_string()).unwrap_or_else(|| "Account".into())
}

/// Exact match against the offered indices, so "01" or " 1" do not pass.
fn index(raw: &str, len: usize) -> Option<usize> {
    (0..len).find(|i| i.to_string() == raw)
}

fn check_sid(st: &mut State, sid: &str, req: &Submission) -> Result<(), Cause> {
    let expected = st.session(sid).and_then(|s| s.sid.clone());
    match (expected, req.query.get("sid")) {
        (Some(e), Some(got)) if &e == got => Ok(()),
        _ => Err(Cause::TokenMissing),
    }
}

async fn transfer_page(Shared(app): Shared<Arc<App>>, headers: HeaderMap) -> Response {
    let mut st = app.lock();
    let (id, cookie) = page_session(&mut st, &headers);
    let url_sid = match st.session(&id).and_then(|s| s.sid.clone()) {
        Some(s) => s,
        None => {
            let s = st.letters(16);
            if let Some(sess) = st.session(&id) {
                sess.sid = Some(s.clone());
            }
            s
        }
    };
    if let Some(s) = st.session(&id) {
        s.pending = None;
    }
    let csrf = st.issue(&id, Purpose::StepA);
    let own: Vec<(String, String)> =
        (0..app.accounts.own.len()).map(|i| (i.to_string(), label(&OWN_LABELS, i))).collect();
    let payees: Vec<(String, String)> =
        (0..app.accounts.payees.len()).map(|i| (i.to_string(), label(&PAYEE_LABELS, i))).collect();
    let from = options(own.iter().map(|(v, l)| (v.as_str(), l.as_str())));
    let to = options(payees.iter().map(|(v, l)| (v.as_str(), l.as_str())));
    html(
        render(TRANSFER, &[("sid", &url_sid), ("csrf", &csrf), ("from_options", &from), ("to_options", &to)]),
        cookie,
    )
}

async fn review(Shared(app): Shared<Arc<App>>, headers: HeaderMap, query: RawQuery, body: Bytes) -> Response {
    const HANDLER: &str = "boc/review";
    let req = Submission::new(&headers, query, &body);
    let mut st = app.lock();
    let id = req.log_id();
    if let Err(cause) = check_sid(&mut st, &id, &req) {
        return reject(&mut st, &id, HANDLER, cause);
    }
    if let Err(cause) = st.redeem(&id, Purpose::StepA, req.field("CSRF1")) {
        return reject(&mut st, &id, HANDLER, cause);
    }
    let from = index(req.field_or_empty("FROM_IDX"), app.accounts.own.len());
    let to = index(req.field_or_empty("TO_IDX"), app.accounts.payees.len());
    let amt = req.field_or_empty("AMT");
    let (Some(from), Some(to), Some(value)) = (from, to, server::valid_amount(amt, AMOUNT_CAP)) else {
        return reject(&mut st, &id, HANDLER, Cause::ValidationFail);
    };
    let url_sid = st.session(&id).and_then(|s| s.sid.clone()).unwrap_or_default();
    if let Some(s) = st.session(&id) {
        s.pending = Some(BTreeMap::from([
            ("FROM_IDX", from.to_string()),
            ("TO_IDX", to.to_string()),
            ("AMT", amt.to_string()),
        ]));
    }
    let csrf = st.issue(&id, Purpose::StepB);
    st.record(&id, HANDLER, Ok(()));
    html(
        render(
            REVIEW,
            &[
                ("from", &label(&OWN_LABELS, from)),
                ("to", &label(&PAYEE_LABELS, to)),
                ("amount", &format!("{value:.2}")),
                ("sid", &url_sid),
                ("csrf", &csrf),
                ("to_idx", &to.to_string()),
                ("amt", amt),
            ],
        ),
        None,
    )
}

async fn confirm(Shared(app): Shared<Arc<App>>, headers: HeaderMap, query: RawQuery, body: Bytes) -> Response {
    const HANDLER: &str = "boc/confirm";
    let req = Submission::new(&headers, query, &body);
    let mut st = app.lock();
    let id = req.log_id();
    let Some(pending) = st.session(&id).and_then(|s| s.pending.clone()) else {
        return reject(&mut st, &id, HANDLER, Cause::WorkflowOrder);
    };
    if let Err(cause) = check_sid(&mut st, &id, &req) {
        return reject(&mut st, &id, HANDLER, cause);
    }
    if let Err(cause) = st.redeem(&id, Purpose::StepB, req.field("CSRF2")) {
        return reject(&mut st, &id, HANDLER, cause);
    }
    if pending["TO_IDX"] != req.field_or_empty("TO_IDX") {
        return reject(&mut st, &id, HANDLER, Cause::DependencyMismatch);
    }
    // Indices were validated at step A; the resubmitted AMT is ignored.
    let from = &app.accounts.own[pending["FROM_IDX"].parse::<usize>().expect("stored index")];
    let to = &app.accounts.payees[pending["TO_IDX"].parse::<usize>().expect("stored index")];
    let reference = st.transfer(&id, from, to, &pending["AMT"]);
    if let Some(s) = st.session(&id) {
        s.pending = None;
    }
    st.record(&id, HANDLER, Ok(()));
    redirect(&format!("/boc/done?ref={reference}"))
}

async fn done(Shared(app): Shared<Arc<App>>, headers: HeaderMap, query: RawQuery) -> Response {
    const HANDLER: &str = "boc/done";
    let req = Submission::new(&headers, query, &[]);
    let mut st = app.lock();
    let id = req.log_id();
    let found = req
        .query
        .get("ref")
        .and_then(|r| st.find_transfer(r))
        .filter(|t| t.session == id)
        .cloned();
    let Some(t) = found else {
        return reject(&mut st, &id, HANDLER, Cause::ValidationFail);
    };
    st.record(&id, HANDLER, Ok(()));
    let pos = |list: &[String], v: &str| list.iter().position(|x| x == v).unwrap_or(usize::MAX);
    let from = label(&OWN_LABELS, pos(&app.accounts.own, &t.from));
    let to = label(&PAYEE_LABELS, pos(&app.accounts.payees, &t.to));
    let amount = format!("{:.2}", t.amount.parse::<f64>().unwrap_or_default());
    html(
        render(DONE, &[("reference", &t.reference), ("from", &from), ("to", &to), ("amount", &amount)]),
        None,
    )
}
