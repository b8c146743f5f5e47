//! Replays a recorded script in a fresh cookie session, step by step.
//!
//! cargo run -p flowtamper --example replay -- boc-like

use flowtamper::script::replay;
use flowtamper::{ActionScript, Session, SessionConfig};
use flowtamper_testbed::{serve, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "boc-like".into());
    let bed = serve(ScenarioConfig::named(&name)?)?;
    let script = ActionScript::from_json(&bed.script_json())?;
    let mut session = Session::new(SessionConfig::default())?;

    let trace = replay(&script, &mut session)?;
    for step in &trace.steps {
        println!("step {} -> {} {}", step.index, step.request.method.as_str(), step.request.full_url());
        for p in &step.params {
            println!("    {:<9} {:<12} {}", p.name, format!("{:?}", p.source), p.value);
        }
        println!("    <- {} at {}", step.response.status, step.response.url);
    }
    println!("requests sent: {}", session.requests_sent());
    Ok(())
}
