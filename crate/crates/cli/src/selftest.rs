//! Scans every bundled scenario against a private server and compares the
//! outcome with the scenario's ground truth.

use std::fmt::Write as _;

use flowtamper::report::{Assessment, GroundTruth};
use flowtamper::{ActionScript, FuzzConfig, ScanReport};
use flowtamper_testbed::{serve, Cause, LogEntry, Scenario, ScenarioConfig, Transfer};
use url::Url;

use crate::{scan_with, CaptureOpts, Phase};

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub fuzz: FuzzConfig,
    pub capture: CaptureOpts,
}

pub fn ground_truth(s: Scenario) -> GroundTruth {
    GroundTruth {
        vulnerable_params: s.ground_truth().iter().map(|p| p.to_string()).collect(),
    }
}

/// One scenario's scan plus the server's view of it, split by phase.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub report: ScanReport,
    pub capture_log: Vec<LogEntry>,
    pub dependency_log: Vec<LogEntry>,
    pub fuzz_log: Vec<LogEntry>,
    pub transfers: Vec<Transfer>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl ScenarioRun {
    pub fn assessment(&self) -> Assessment {
        ground_truth(self.scenario).assess(&self.report)
    }

    /// Everything the server saw after capture ended.
    pub fn post_capture_log(&self) -> impl Iterator<Item = &LogEntry> {
        self.dependency_log.iter().chain(&self.fuzz_log)
    }

    pub fn post_capture_causes(&self, causes: &[Cause]) -> usize {
        self.post_capture_log()
            .filter(|e| e.cause.is_some_and(|c| causes.contains(&c)))
            .count()
    }

    pub fn checks(&self) -> Vec<Check> {
        let truth = self.scenario.ground_truth();
        let findings = &self.report.findings;
        let ground = if truth.is_empty() {
            Check {
                name: "ground-truth",
                passed: findings.is_empty(),
                detail: format!("{} finding(s), expected none", findings.len()),
            }
        } else {
            let missing: Vec<&str> =
                truth.iter().copied().filter(|p| !findings.iter().any(|f| f.param == *p)).collect();
            Check {
                name: "ground-truth",
                passed: missing.is_empty(),
                detail: if missing.is_empty() {
                    format!("{} finding(s) covering {}", findings.len(), truth.join(", "))
                } else {
                    format!("no finding on {}", missing.join(", "))
                },
            }
        };
        let tokens = self.post_capture_causes(&[Cause::TokenSpent, Cause::TokenMissing]);
        let workflow = self.post_capture_causes(&[Cause::WorkflowOrder]);
        vec![
            ground,
            Check {
                name: "tokens-preserved",
                passed: tokens == 0,
                detail: format!("{tokens} token rejection(s) after capture"),
            },
            Check {
                name: "workflow-preserved",
                passed: workflow == 0,
                detail: format!("{workflow} out-of-order rejection(s) after capture"),
            },
        ]
    }

    pub fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }
}

pub fn run_scenario(scenario: Scenario, opts: &Options) -> anyhow::Result<ScenarioRun> {
    let bed = serve(ScenarioConfig::new(scenario))?;
    let script = ActionScript::from_json(scenario.bundled_script())?.with_base(Url::parse(&bed.base_url())?);
    let mut marks = Vec::new();
    let report = scan_with(&script, &opts.capture, opts.fuzz.clone(), Some(scenario.to_string()), &mut |phase| {
        marks.push((phase, bed.log_len()))
    })?;
    let mark = |p: Phase| marks.iter().find(|(q, _)| *q == p).map(|(_, n)| *n).unwrap_or(0);
    let (captured, confirmed) = (mark(Phase::Captured), mark(Phase::DependenciesConfirmed));
    let log = bed.log();
    Ok(ScenarioRun {
        scenario,
        report,
        capture_log: log[..captured].to_vec(),
        dependency_log: log[captured..confirmed].to_vec(),
        fuzz_log: log[confirmed..].to_vec(),
        transfers: bed.transfers(),
    })
}

/// All scenarios in parallel, each with its own server; results in
/// [`Scenario::ALL`] order.
pub fn run_all(opts: &Options) -> anyhow::Result<Vec<ScenarioRun>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = Scenario::ALL.into_iter().map(|sc| s.spawn(move || run_scenario(sc, opts))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(anyhow::anyhow!("scenario thread panicked"))))
            .collect()
    })
}

pub fn summary(runs: &[ScenarioRun]) -> String {
    let mut s = String::new();
    let mut tally = [0usize; 4];
    for r in runs {
        for c in r.checks() {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{verdict} {} {}: {}", r.scenario, c.name, c.detail);
        }
        let i = match r.assessment() {
            Assessment::TruePositive => 0,
            Assessment::FalsePositive => 1,
            Assessment::TrueNegative => 2,
            Assessment::FalseNegative => 3,
        };
        tally[i] += 1;
    }
    let _ = writeln!(s, "confusion: TP={} FP={} TN={} FN={}", tally[0], tally[1], tally[2], tally[3]);
    s
}
