//! Starts a reference application, submits one bad request by hand, and
//! reads the server's rejection log.
//!
//! cargo run -p flowtamper --example testbed -- bea-like

use flowtamper::session::{Body, HttpRequest, Method};
use flowtamper::{Session, SessionConfig};
use flowtamper_testbed::{serve, Scenario, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "bea-like".into());
    let bed = serve(ScenarioConfig::named(&name)?)?;
    println!("{} at {}", bed.scenario(), bed.start_url());

    let mut session = Session::new(SessionConfig::default())?;
    let page = session.get(&url::Url::parse(&bed.start_url())?)?;
    println!("start page: {} bytes", page.body.len());

    // A first-step submission with no token, then a confirmation with no
    // reviewed transfer behind it.
    let paths: &[&str] = match bed.scenario() {
        Scenario::HsbcLike => &["/hsbc/review", "/hsbc/confirm"],
        Scenario::BeaLike => &["/bea/review", "/bea/confirm"],
        Scenario::BocLike => &["/boc/review", "/boc/confirm"],
        Scenario::AjaxDate => &["/flight/status"],
    };
    for path in paths {
        let req = HttpRequest {
            method: Method::Post,
            body: Body::Form(vec![("TO".into(), "x".into())]),
            ..HttpRequest::get(&url::Url::parse(&format!("{}{path}", bed.base_url()))?)
        };
        let resp = session.send(&req)?;
        println!("POST {path} -> {}", resp.status);
    }
    for e in bed.log() {
        println!("{} {} {:?} {:?}", e.seq, e.handler, e.outcome, e.cause);
    }
    Ok(())
}
