//! Extracts the forms of a page and runs its declared client-side logic
//! against a tampered value.
//!
//! cargo run -p flowtamper --example forms

use flowtamper::html::clv::prepare;
use flowtamper::html::{extract_forms, Document, FormValues};

const PAGE: &str = r#"
<form method="post" action="/pay"
      data-clv='{"validate": [{"field": "AMT", "min": 1, "max": 500}],
                 "transform": [{"target": "MAC", "fn": "base64concat", "inputs": ["TO", "AMT"], "sep": "|"}]}'>
  <input type="hidden" name="csrf" value="k2j3h4">
  <input type="hidden" name="MAC" value="">
  <label for="to">Payee</label>
  <select id="to" name="TO"><option>alice</option><option>bob</option></select>
  <label for="amt">Amount</label>
  <input id="amt" name="AMT" pattern="\d+" required>
  <button type="submit" id="pay">Pay</button>
</form>
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = url::Url::parse("http://bank.test/transfer")?;
    let doc = Document::parse(PAGE);
    let form = extract_forms(&doc, Some(&base)).remove(0);
    println!("{} {:?}", form.method.as_str(), form.action.as_ref().map(|u| u.as_str()));
    for p in form.params(&form.default_values()) {
        println!("  {:<5} {:<12} {:?} at {}", p.name, format!("{:?}", p.source), p.value, p.locator);
    }

    for (to, amt) in [("alice", "120"), ("mallory", "120"), ("bob", "900")] {
        let mut values = form.default_values();
        values.set("TO", to);
        values.set("AMT", amt);
        let prepared = prepare(&form, &values, &FormValues::new())?;
        println!(
            "TO={to} AMT={amt}: MAC={} verdict={:?}",
            prepared.values.get_or_empty("MAC"),
            prepared.verdict
        );
    }
    Ok(())
}
