//! Replays the two-step transfer with original (o) or mutated (m) values
//! at each step and shows how the server treats each combination.
//!
//! cargo run -p flowtamper --example pair_experiments

use flowtamper::script::{replay_with, Directive, StepContext, StepEdit, StepPlan};
use flowtamper::{ActionScript, Session, SessionConfig};
use flowtamper_testbed::{serve, Scenario, ScenarioConfig};

/// Field replaced at one step, if any.
type Edit = Option<(&'static str, &'static str)>;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bed = serve(ScenarioConfig::new(Scenario::HsbcLike))?;
    let script = ActionScript::from_json(&bed.script_json())?;
    let (o, m) = ("FUND RECEIPIENT~~290 123456882", "FUND RECEIPIENT~~290 123456883");

    let cases: [(&str, Edit, Edit); 5] = [
        ("o/o", None, None),
        ("o/m TO", None, Some(("TO", m))),
        ("o/m AMT", None, Some(("AMT", "9999"))),
        ("m/o TO", Some(("TO", m)), Some(("TO", o))),
        ("m/m TO", Some(("TO", m)), None),
    ];
    for (label, a, b) in cases {
        let mut session = Session::new(SessionConfig::default())?;
        let mut planner = |ctx: &StepContext<'_>, edit: &mut StepEdit| {
            if let Some((name, value)) = if ctx.step.index == 0 { a } else { b } {
                edit.values.set(name, value);
            }
            Ok(StepPlan {
                directive: Directive::Force,
                stop_after: false,
            })
        };
        let before = bed.transfers().len();
        replay_with(&script, &mut session, &mut planner)?;
        let last = bed.log().pop().expect("logged");
        let moved = bed.transfers().get(before).map(|t| format!("{} {}", t.to, t.amount));
        println!("{label:<8} {:?} {:?} transfer={moved:?}", last.outcome, last.cause);
    }
    Ok(())
}
