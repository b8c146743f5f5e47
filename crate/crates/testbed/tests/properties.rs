mod common;

use common::{form_action, input_value, Client};
use flowtamper_testbed::{serve, Cause, Outcome, Scenario, ScenarioConfig};
use proptest::prelude::*;

fn field() -> impl Strategy<Value = String> {
    prop_oneof![
        Just(String::new()),
        "[0-9]{1,3}",
        "-?[0-9]{1,6}(\\.[0-9]{1,3})?",
        "[ -~]{0,12}",
        Just("300-400-5099".to_string()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, .. ProptestConfig::default() })]

    /// Whatever is typed or tampered, money only moves between mapped accounts.
    #[test]
    fn boc_never_pays_outside_the_mapping(
        from in field(), to in field(), amt in field(), b_to in field(), b_amt in field(), honest_b in any::<bool>(),
    ) {
        let bed = serve(ScenarioConfig::new(Scenario::BocLike)).unwrap();
        let accounts = Scenario::BocLike.default_accounts();
        let mut c = Client::new(&bed.base_url());
        let page = c.get("/boc/transfer").body;
        let csrf = input_value(&page, "CSRF1").unwrap();
        let review = c.post(&form_action(&page), &[("CSRF1", &csrf), ("FROM_IDX", &from), ("TO_IDX", &to), ("AMT", &amt)]).body;
        if let Some(csrf2) = input_value(&review, "CSRF2") {
            let echoed = input_value(&review, "TO_IDX").unwrap();
            let b_to = if honest_b { echoed } else { b_to };
            c.post(&form_action(&review), &[("CSRF2", &csrf2), ("TO_IDX", &b_to), ("AMT", &b_amt)]);
        }
        for t in bed.transfers() {
            prop_assert!(accounts.own.contains(&t.from), "{t:?}");
            prop_assert!(accounts.payees.contains(&t.to), "{t:?}");
        }
    }

    /// A step-A request without this page view's unspent token is refused
    /// on the token alone, before any field is looked at.
    #[test]
    fn token_gate_is_total(token in prop_oneof![Just(None), "[a-z]{24}".prop_map(Some), Just(Some(String::new()))], reuse in any::<bool>()) {
        let bed = serve(ScenarioConfig::new(Scenario::HsbcLike)).unwrap();
        let mut c = Client::new(&bed.base_url());
        let page = c.get("/hsbc/transfer").body;
        let real = input_value(&page, "CSRF1").unwrap();
        let valid = [("FROM", "001-234567-838"), ("PAYEE", "registered"), ("TO", "FUND RECEIPIENT~~290 123456882"), ("AMT", "250")];
        if reuse {
            let mut f = vec![("CSRF1", real.as_str())];
            f.extend(valid);
            c.post("/hsbc/review", &f);
        }
        let presented = if reuse { Some(real.clone()) } else { token.filter(|t| *t != real) };
        let mut f: Vec<(&str, &str)> = presented.iter().map(|t| ("CSRF1", t.as_str())).collect();
        f.extend(valid);
        c.post("/hsbc/review", &f);
        let last = bed.log().last().cloned().unwrap();
        prop_assert_eq!(last.outcome, Outcome::Rejected);
        prop_assert!(matches!(last.cause, Some(Cause::TokenMissing | Cause::TokenSpent)));
    }
}
