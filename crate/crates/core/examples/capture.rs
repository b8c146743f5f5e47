//! Runs only the capturing phase and prints what it learned.
//!
//! cargo run -p flowtamper --example capture -- hsbc-like

use flowtamper::{ActionScript, Capturer, Session, SessionConfig};
use flowtamper_testbed::{serve, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "hsbc-like".into());
    let bed = serve(ScenarioConfig::named(&name)?)?;
    let script = ActionScript::from_json(&bed.script_json())?;
    let session = Session::new(SessionConfig::default())?;
    let analysis = Capturer::new(&script, &session).run()?;

    for c in &analysis.token_candidates {
        println!("token candidate {}@{} ({:?}): {} / {}", c.name, c.step, c.kind, c.run1, c.run2);
    }
    for p in &analysis.token_probes {
        println!("probe {}@{}: confirmed={} ({})", p.name, p.step, p.confirmed, p.detail);
    }
    for d in &analysis.dependency_candidates {
        println!("dependency candidate {}@{} = {:?} <- {:?}", d.name, d.step, d.value, d.prior_names);
    }
    for f in &analysis.features.steps {
        let refl: Vec<String> = f.reflections.iter().map(|r| format!("{}x{}", r.param, r.occurrences)).collect();
        println!(
            "step {} accepted when: button={:?} reflections=[{}] keyword={:?}",
            f.step,
            f.button.as_ref().map(|b| b.to_string()),
            refl.join(", "),
            f.keyword
        );
    }
    println!("server log entries during capture: {}", bed.log_len());
    Ok(())
}
