//! Single-step JSON lookup. The page restricts the date to a ten-day
//! window; the endpoint only checks that it is a real calendar date.

use std::sync::{Arc, LazyLock};

use axum::extract::State as Shared;
use axum::http::HeaderMap;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{body::Bytes, Json, Router};
use regex::Regex;
use serde_json::{json, Value};

use crate::server::{html, page_session, reject_json, render, session_cookie, App};
use crate::state::{Cause, Purpose};

const PAGE: &str = include_str!("../../templates/flight.html");

pub const FIRST_DAY: &str = "2013-09-20";
pub const LAST_DAY: &str = "2013-09-30";

static FLIGHT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[A-Z]{2}\d{1,4}$").unwrap());
static DATE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\d{4})-(\d{2})-(\d{2})$").unwrap());

pub fn routes() -> Router<Arc<App>> {
    Router::new().route("/flight", get(page)).route("/flight/status", post(status))
}

async fn page(Shared(app): Shared<Arc<App>>, headers: HeaderMap) -> Response {
    let mut st = app.lock();
    let (sid, cookie) = page_session(&mut st, &headers);
    let nonce = st.issue(&sid, Purpose::StepA);
    html(render(PAGE, &[("nonce", &nonce)]), cookie)
}

/// `YYYY-MM-DD` naming a day that exists in the proleptic Gregorian calendar.
pub fn is_calendar_date(s: &str) -> bool {
    let Some(c) = DATE.captures(s) else { return false };
    let (y, m, d): (u32, u32, u32) = (c[1].parse().unwrap(), c[2].parse().unwrap(), c[3].parse().unwrap());
    let leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    let days = match m {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if leap => 29,
        2 => 28,
        _ => return false,
    };
    (1..=days).contains(&d)
}

async fn status(Shared(app): Shared<Arc<App>>, headers: HeaderMap, body: Bytes) -> Response {
    const HANDLER: &str = "flight/status";
    let sid = session_cookie(&headers).unwrap_or_else(|| "-".into());
    let mut st = app.lock();
    let payload: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
    let field = |k: &str| payload.get(k).and_then(Value::as_str);
    if let Err(cause) = st.redeem(&sid, Purpose::StepA, field("nonce")) {
        return reject_json(&mut st, &sid, HANDLER, cause);
    }
    let (Some(flight), Some(date)) = (field("flight"), field("date")) else {
        return reject_json(&mut st, &sid, HANDLER, Cause::ValidationFail);
    };
    // ISO dates compare correctly as strings.
    let in_window = (FIRST_DAY..=LAST_DAY).contains(&date);
    if !FLIGHT.is_match(flight) || !is_calendar_date(date) || (!app.flaws.date_range_unchecked && !in_window) {
        return reject_json(&mut st, &sid, HANDLER, Cause::ValidationFail);
    }
    st.record(&sid, HANDLER, Ok(()));
    Json(json!({
        "success": 1,
        "message": "Lookup completed",
        "result": {"flight": flight, "date": date, "status": "Scheduled"},
    }))
    .into_response()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calendar_dates() {
        assert!(is_calendar_date("2013-09-28"));
        assert!(is_calendar_date("2012-02-29"));
        assert!(!is_calendar_date("2013-02-29"));
        assert!(!is_calendar_date("2013-9-22"));
        assert!(!is_calendar_date("2013-13-01"));
        assert!(!is_calendar_date("2013-09-31"));
    }
}
