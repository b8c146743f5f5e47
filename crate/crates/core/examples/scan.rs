//! Serves a test-bed scenario and scans it end to end.
//!
//! cargo run -p flowtamper --example scan -- hsbc-like

use flowtamper::report::{ConfigEcho, GroundTruth};
use flowtamper::{ActionScript, Capturer, FuzzConfig, Fuzzer, ScanReport, Session, SessionConfig};
use flowtamper_testbed::{serve, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "hsbc-like".into());
    let bed = serve(ScenarioConfig::named(&name)?)?;
    let script = ActionScript::from_json(&bed.script_json())?;
    let session = Session::new(SessionConfig::default())?;

    let analysis = Capturer::new(&script, &session).run()?;
    let mark = bed.log_len();
    let config = FuzzConfig::default();
    let outcome = Fuzzer::new(&script, &analysis, &session, config.clone()).run()?;

    let report = ScanReport::new(&analysis, outcome, Some(name), ConfigEcho::new(&config, 3, 0, None));
    let truth = GroundTruth {
        vulnerable_params: bed.scenario().ground_truth().iter().map(|s| s.to_string()).collect(),
    };
    print!("{}", report.emit_text(Some(&truth)));
    for e in bed.log_since(mark).iter().filter(|e| e.cause.is_some()) {
        println!("server rejected {} in {}: {:?}", e.seq, e.handler, e.cause.unwrap());
    }
    Ok(())
}
