mod common;

use common::{form_action, input_value, is_rejection, Client};
use flowtamper_testbed::{serve, Cause, Flaws, Outcome, Scenario, ScenarioConfig, TestbedError};

fn hsbc_step_a(c: &mut Client, to: &str, amt: &str) -> common::Reply {
    let page = c.get("/hsbc/transfer").body;
    let csrf = input_value(&page, "CSRF1").unwrap();
    let action = form_action(&page);
    c.post(
        &action,
        &[("CSRF1", &csrf), ("FROM", "001-234567-838"), ("PAYEE", "registered"), ("TO", to), ("AMT", amt)],
    )
}

#[test]
fn hsbc_start_page_carries_token_and_fields() {
    let bed = serve(ScenarioConfig::new(Scenario::HsbcLike)).unwrap();
    let mut c = Client::new(&bed.base_url());
    let page = c.get("/hsbc/transfer").body;
    assert!(c.cookie.is_some(), "session cookie set");
    assert!(input_value(&page, "CSRF1").is_some_and(|t| t.len() == 24));
    for f in ["name=\"FROM\"", "name=\"TO\"", "name=\"AMT\""] {
        assert!(page.contains(f), "{f} missing");
    }
}

#[test]
fn bea_form_declares_mac_transform() {
    let bed = serve(ScenarioConfig::new(Scenario::BeaLike)).unwrap();
    let page = Client::new(&bed.base_url()).get("/bea/transfer").body;
    assert!(page.contains(r#""target": "MACcode""#));
    assert!(page.contains(r#"name="MACcode""#));
}

#[test]
fn unknown_scenario_and_taken_port_fail_at_startup() {
    assert!(matches!(ScenarioConfig::named("citibank"), Err(TestbedError::UnknownScenario(_))));
    let bed = serve(ScenarioConfig::new(Scenario::BocLike)).unwrap();
    let taken = bed.addr().port();
    assert!(matches!(
        serve(ScenarioConfig::new(Scenario::BocLike).port(taken)),
        Err(TestbedError::Bind { .. })
    ));
}

#[test]
fn hsbc_review_reflects_and_spent_token_is_refused() {
    let bed = serve(ScenarioConfig::new(Scenario::HsbcLike)).unwrap();
    let mut c = Client::new(&bed.base_url());
    let page = c.get("/hsbc/transfer").body;
    let csrf = input_value(&page, "CSRF1").unwrap();
    let action = form_action(&page);
    let fields = [
        ("CSRF1", csrf.as_str()),
        ("FROM", "001-234567-838"),
        ("PAYEE", "registered"),
        ("TO", "FUND RECEIPIENT~~290 123456882"),
        ("AMT", "250"),
    ];
    let review = c.post(&action, &fields).body;
    assert!(review.contains("HKD 250.00") && review.contains("001-234567-838"));
    assert!(review.contains("FUND RECEIPIENT~~290 123456882"));
    assert!(review.contains(r#"id="confirm""#));
    let again = c.post(&action, &fields).body;
    assert!(is_rejection(&again));
    assert_eq!(bed.log().last().unwrap().cause, Some(Cause::TokenSpent));
}

#[test]
fn hsbc_accepts_unregistered_payee_only_when_flawed() {
    let weird = "MALLORY~~999 000000000001";
    let bed = serve(ScenarioConfig::new(Scenario::HsbcLike)).unwrap();
    let mut c = Client::new(&bed.base_url());
    assert!(hsbc_step_a(&mut c, weird, "250").body.contains(weird));

    let fixed = serve(ScenarioConfig::new(Scenario::HsbcLike).flaws(Flaws::none())).unwrap();
    let mut c = Client::new(&fixed.base_url());
    assert!(is_rejection(&hsbc_step_a(&mut c, weird, "250").body));
    assert_eq!(fixed.log().last().unwrap().cause, Some(Cause::ValidationFail));
}

#[test]
fn hsbc_confirm_transfers_and_enforces_payee() {
    let bed = serve(ScenarioConfig::new(Scenario::HsbcLike)).unwrap();
    let mut c = Client::new(&bed.base_url());
    let review = hsbc_step_a(&mut c, "FUND RECEIPIENT~~290 123456882", "250").body;
    let csrf2 = input_value(&review, "CSRF2").unwrap();
    let ack = c
        .post(
            "/hsbc/confirm",
            &[("CSRF2", &csrf2), ("FROM", "001-234567-838"), ("TO", "FUND RECEIPIENT~~290 123456882"), ("AMT", "250")],
        )
        .body;
    assert!(ack.contains("Transfer completed") && ack.contains("HKD 250.00") && ack.contains("REF-"));
    assert_eq!(bed.transfers().len(), 1);

    // Altering TO only at the confirmation step is refused.
    let review = hsbc_step_a(&mut c, "FUND RECEIPIENT~~290 123456882", "250").body;
    let csrf2 = input_value(&review, "CSRF2").unwrap();
    let r = c.post(
        "/hsbc/confirm",
        &[("CSRF2", &csrf2), ("FROM", "001-234567-838"), ("TO", "JOHN SMITH~~004 500012345"), ("AMT", "250")],
    );
    assert!(is_rejection(&r.body));
    assert_eq!(bed.log().last().unwrap().cause, Some(Cause::DependencyMismatch));
    assert_eq!(bed.transfers().len(), 1);
}

#[test]
fn confirmation_without_review_is_out_of_order() {
    let bed = serve(ScenarioConfig::new(Scenario::HsbcLike)).unwrap();
    let mut c = Client::new(&bed.base_url());
    c.get("/hsbc/transfer");
    let r = c.post("/hsbc/confirm", &[("CSRF2", "x"), ("TO", "y")]);
    assert!(is_rejection(&r.body));
    assert_eq!(bed.log().last().unwrap().cause, Some(Cause::WorkflowOrder));
}

#[test]
fn bea_recomputed_mac_lets_tampered_payee_through() {
    let bed = serve(ScenarioConfig::new(Scenario::BeaLike)).unwrap();
    let mut c = Client::new(&bed.base_url());
    let page = c.get("/bea/transfer").body;
    let csrf = input_value(&page, "CSRF1").unwrap();
    let (from, to, amt) = ("012-345-678901", "999-999-999999", "800");
    let mac = base64_mac(from, to, amt);
    let review = c
        .post("/bea/review", &[("CSRF1", &csrf), ("MACcode", &mac), ("FROM", from), ("TO", to), ("AMT", amt)])
        .body;
    assert!(review.contains(to), "review should echo the unregistered payee");
    let csrf2 = input_value(&review, "CSRF2").unwrap();
    let ack = c
        .post("/bea/confirm", &[("CSRF2", &csrf2), ("MACcode", &mac), ("FROM", from), ("TO", to), ("AMT", amt)])
        .body;
    assert!(ack.contains("executed"));
    assert_eq!(bed.transfers()[0].to, to);

    // A stale MAC is caught.
    let page = c.get("/bea/transfer").body;
    let csrf = input_value(&page, "CSRF1").unwrap();
    let r = c.post("/bea/review", &[("CSRF1", &csrf), ("MACcode", &mac), ("FROM", from), ("TO", to), ("AMT", "801")]);
    assert!(is_rejection(&r.body));
    assert_eq!(bed.log().last().unwrap().cause, Some(Cause::DependencyMismatch));
}

fn base64_mac(from: &str, to: &str, amt: &str) -> String {
    use base64::Engine as _;
    base64::engine::general_purpose::STANDARD.encode(format!("{from}|{to}|{amt}"))
}

#[test]
fn boc_flow_redirects_to_result_page() {
    let bed = serve(ScenarioConfig::new(Scenario::BocLike)).unwrap();
    let mut c = Client::new(&bed.base_url());
    let page = c.get("/boc/transfer").body;
    let action = form_action(&page);
    assert!(action.starts_with("/boc/review?sid="));
    let csrf = input_value(&page, "CSRF1").unwrap();
    let review = c.post(&action, &[("CSRF1", &csrf), ("FROM_IDX", "0"), ("TO_IDX", "2"), ("AMT", "300")]).body;
    assert!(review.contains("CNY 300.00") && review.contains("Tuition office"));
    let csrf2 = input_value(&review, "CSRF2").unwrap();
    let r = c.post(&form_action(&review), &[("CSRF2", &csrf2), ("TO_IDX", "2"), ("AMT", "9999")]);
    assert_eq!(r.status, 303);
    let done = c.get(&r.location.unwrap()).body;
    assert!(done.contains("CNY 300.00"), "amount from step A, not the resubmitted one");
    assert_eq!(bed.transfers()[0].to, "300-400-5003");
    assert_eq!(bed.transfers()[0].amount, "300");
}

#[test]
fn boc_foreign_session_id_is_refused() {
    let bed = serve(ScenarioConfig::new(Scenario::BocLike)).unwrap();
    let mut a = Client::new(&bed.base_url());
    let foreign = form_action(&a.get("/boc/transfer").body);
    let mut b = Client::new(&bed.base_url());
    let page = b.get("/boc/transfer").body;
    let csrf = input_value(&page, "CSRF1").unwrap();
    let r = b.post(&foreign, &[("CSRF1", &csrf), ("FROM_IDX", "0"), ("TO_IDX", "0"), ("AMT", "300")]);
    assert!(is_rejection(&r.body));
    assert_eq!(bed.log().last().unwrap().cause, Some(Cause::TokenMissing));
}

#[test]
fn ajax_lookup_skips_range_check_only_when_flawed() {
    let lookup = |flaws: Flaws, date: &str| {
        let bed = serve(ScenarioConfig::new(Scenario::AjaxDate).flaws(flaws)).unwrap();
        let mut c = Client::new(&bed.base_url());
        let nonce = input_value(&c.get("/flight").body, "nonce").unwrap();
        let r = c.post_json("/flight/status", &serde_json::json!({"nonce": nonce, "flight": "JQ501", "date": date}));
        serde_json::from_str::<serde_json::Value>(&r.body).unwrap()
    };
    let ok = lookup(Flaws::default(), "2013-09-28");
    assert_eq!(ok["success"], 1);
    assert_eq!(ok["result"]["date"], "2013-09-28");
    assert_eq!(lookup(Flaws::default(), "2014-09-28")["success"], 1);
    assert_eq!(lookup(Flaws::none(), "2014-09-28")["success"], 0);
    assert_eq!(lookup(Flaws::default(), "2013-9-22")["success"], 0);
}

#[test]
fn debug_endpoints_expose_and_reset_the_log() {
    let bed = serve(ScenarioConfig::new(Scenario::HsbcLike)).unwrap();
    let mut c = Client::new(&bed.base_url());
    hsbc_step_a(&mut c, "FUND RECEIPIENT~~290 123456882", "250");
    let log: serde_json::Value = serde_json::from_str(&c.get("/_log").body).unwrap();
    assert_eq!(log["log"][0]["handler"], "hsbc/review");
    assert_eq!(log["log"][0]["outcome"], "accepted");
    c.post("/_reset", &[]);
    assert_eq!(bed.log_len(), 0);
}

#[test]
fn every_submission_is_logged_once_with_one_cause_iff_rejected() {
    let bed = serve(ScenarioConfig::new(Scenario::HsbcLike)).unwrap();
    let mut c = Client::new(&bed.base_url());
    let mut posts = 0;
    for (to, amt) in [("FUND RECEIPIENT~~290 123456882", "250"), ("bad", "250"), ("A~~1 2", "0"), ("A~~1 2", "10")] {
        hsbc_step_a(&mut c, to, amt);
        posts += 1;
    }
    c.post("/hsbc/confirm", &[]);
    c.post("/hsbc/review", &[]);
    posts += 2;
    let log = bed.log();
    assert_eq!(log.len(), posts);
    for e in &log {
        assert_eq!(e.outcome == Outcome::Rejected, e.cause.is_some(), "{e:?}");
    }
    let seqs: Vec<u64> = log.iter().map(|e| e.seq).collect();
    assert_eq!(seqs, (1..=posts as u64).collect::<Vec<_>>());
}
