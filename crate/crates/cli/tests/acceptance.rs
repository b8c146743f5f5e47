//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Runs without the libtest harness so a failing
//! criterion does not hide the lines of the others.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use flowtamper::capture::{dependency_candidates, Classification, TokenKind};
use flowtamper::detect::{find_reflection, is_accept_keyword, normalized_eq, MatchMode};
use flowtamper::fuzz::DependencyStatus;
use flowtamper::html::{parse_body, Leaf, Page};
use flowtamper::script::{replay_with, Directive, StepContext, StepEdit, StepPlan};
use flowtamper::{ActionScript, Locator, Param, ParamSource, Session, SessionConfig};
use flowtamper_cli::selftest::{self, Options, ScenarioRun};
use flowtamper_testbed::{serve, Cause, LogEntry, Outcome, Scenario, ScenarioConfig, Testbed};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn run_of(runs: &[ScenarioRun], s: Scenario) -> &ScenarioRun {
    runs.iter().find(|r| r.scenario == s).expect("every scenario ran")
}

fn findings_on(run: &ScenarioRun, param: &str) -> usize {
    run.report.findings.iter().filter(|f| f.param == param).count()
}

// 1. Confusion matrix over the four reference applications.
fn confusion(runs: &[ScenarioRun], elapsed: Duration) -> Verdict {
    let hsbc = findings_on(run_of(runs, Scenario::HsbcLike), "TO");
    let bea = findings_on(run_of(runs, Scenario::BeaLike), "TO");
    let ajax = findings_on(run_of(runs, Scenario::AjaxDate), "date");
    let boc = run_of(runs, Scenario::BocLike).report.findings.len();
    let detail = format!("hsbc-like TO={hsbc}, bea-like TO={bea}, ajax-date date={ajax}, boc-like total={boc}, {elapsed:.1?}");
    ensure(hsbc >= 1 && bea >= 1 && ajax >= 1 && boc == 0, detail.clone())?;
    ensure(elapsed < Duration::from_secs(60), format!("too slow: {detail}"))?;
    Ok(detail)
}

fn cause_counts(runs: &[ScenarioRun], causes: &[Cause]) -> Vec<(Scenario, usize, usize)> {
    runs.iter()
        .map(|r| (r.scenario, r.post_capture_causes(causes), r.post_capture_log().count()))
        .collect()
}

// 2. No token rejections once capture is over.
fn tokens_preserved(runs: &[ScenarioRun]) -> Verdict {
    let counts = cause_counts(runs, &[Cause::TokenSpent, Cause::TokenMissing]);
    let detail = counts
        .iter()
        .map(|(s, n, total)| format!("{s}: {n}/{total}"))
        .collect::<Vec<_>>()
        .join(", ");
    ensure(counts.iter().all(|(_, n, total)| *n == 0 && *total > 0), detail.clone())?;
    Ok(format!("token rejections / post-capture requests: {detail}"))
}

// 3. No out-of-order rejections once capture is over.
fn workflow_preserved(runs: &[ScenarioRun]) -> Verdict {
    let counts = cause_counts(runs, &[Cause::WorkflowOrder]);
    let detail = counts
        .iter()
        .map(|(s, n, _)| format!("{s}: {n}"))
        .collect::<Vec<_>>()
        .join(", ");
    ensure(counts.iter().all(|(_, n, _)| *n == 0), detail.clone())?;
    Ok(format!("workflow-order rejections: {detail}"))
}

const TO_ORIG: &str = "FUND RECEIPIENT~~290 123456882";
const TO_M1: &str = "FUND RECEIPIENT~~290 123456883";
const TO_M2: &str = "FUND RECEIPIENT~~290 123456884";

/// Fresh session, fresh tokens; `a`/`b` replace one field at step A/B.
fn pair(bed: &Testbed, a: Option<(&str, &str)>, b: Option<(&str, &str)>) -> Result<(LogEntry, Option<String>), String> {
    let script = ActionScript::from_json(&bed.script_json()).map_err(|e| e.to_string())?;
    let mut session = Session::new(SessionConfig::default()).map_err(|e| e.to_string())?;
    let transfers_before = bed.transfers().len();
    let mut planner = |ctx: &StepContext<'_>, edit: &mut StepEdit| -> flowtamper::Result<StepPlan> {
        let change = if ctx.step.index == 0 { a } else { b };
        if let Some((name, value)) = change {
            edit.values.set(name, value);
        }
        Ok(StepPlan {
            directive: Directive::Force,
            stop_after: false,
        })
    };
    let trace = replay_with(&script, &mut session, &mut planner).map_err(|e| e.to_string())?;
    let last = bed.log().last().cloned().ok_or("no log entry")?;
    if trace.steps.len() == 2 && last.handler != "hsbc/confirm" {
        return Err(format!("confirmation step not logged: {last:?}"));
    }
    let transfer = bed.transfers().get(transfers_before).map(|t| format!("{}|{}", t.to, t.amount));
    Ok((last, transfer))
}

// 4. Cross-request dependencies: the confirmation probe, and the o/m pairs.
fn dependencies(runs: &[ScenarioRun]) -> Verdict {
    let hsbc = run_of(runs, Scenario::HsbcLike);
    let to = hsbc
        .report
        .capture
        .dependencies
        .iter()
        .find(|d| d.step == 1 && d.name == "TO")
        .ok_or("no dependency record for TO at step 1")?;
    ensure(to.status == DependencyStatus::Dependent, format!("TO@1 classified {:?}", to.status))?;
    let mismatches: Vec<&LogEntry> = hsbc
        .dependency_log
        .iter()
        .filter(|e| e.cause == Some(Cause::DependencyMismatch))
        .collect();
    ensure(
        mismatches.len() == 1 && mismatches[0].handler == "hsbc/confirm",
        format!("{} dependency-mismatch entries during confirmation", mismatches.len()),
    )?;

    let bed = serve(ScenarioConfig::new(Scenario::HsbcLike)).map_err(|e| e.to_string())?;
    let accepted = |r: &(LogEntry, Option<String>)| r.0.outcome == Outcome::Accepted;
    let mismatch = |r: &(LogEntry, Option<String>)| r.0.cause == Some(Cause::DependencyMismatch);

    let oo1 = pair(&bed, None, None)?;
    let oo2 = pair(&bed, None, None)?;
    ensure(accepted(&oo1) && accepted(&oo2), format!("o/o rejected: {oo1:?} {oo2:?}"))?;
    let om_to = pair(&bed, None, Some(("TO", TO_M1)))?;
    ensure(mismatch(&om_to), format!("o/m on TO: {om_to:?}"))?;
    let om_amt = pair(&bed, None, Some(("AMT", "251")))?;
    ensure(
        accepted(&om_amt) && om_amt.1.as_deref() == Some(&format!("{TO_ORIG}|250")),
        format!("o/m on AMT not disregarded: {om_amt:?}"),
    )?;
    let mo = pair(&bed, Some(("TO", TO_M1)), Some(("TO", TO_ORIG)))?;
    ensure(mismatch(&mo), format!("m/o on TO: {mo:?}"))?;
    let mm = pair(&bed, Some(("TO", TO_M1)), Some(("TO", TO_M1)))?;
    ensure(
        accepted(&mm) && mm.1.as_deref() == Some(&format!("{TO_M1}|250")),
        format!("consistent m/m: {mm:?}"),
    )?;
    let mm_broken = pair(&bed, Some(("TO", TO_M1)), Some(("TO", TO_M2)))?;
    ensure(mismatch(&mm_broken), format!("dependency-breaking m/m: {mm_broken:?}"))?;
    Ok(format!(
        "TO@1 dependent via 1 dependency-mismatch probe; o/o accepted x2, o/m(TO) m/o m/m(broken) rejected, \
         o/m(AMT) disregarded, m/m(consistent) accepted; {} transfers",
        bed.transfers().len()
    ))
}

/// Word-level reading of the acceptance-keyword rule.
fn keyword_oracle(text: &str) -> bool {
    const POSITIVE: [&str; 11] = [
        "success", "successful", "done", "complete", "completed", "execute", "executed", "ok", "okay", "update",
        "updated",
    ];
    const NEGATIVE: [&str; 6] = ["not", "sorry", "fail", "failed", "err", "error"];
    let lower = text.to_lowercase();
    let words: Vec<&str> = lower
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '\'' || c == '_'))
        .filter(|w| !w.is_empty())
        .collect();
    let contraction = |w: &str| {
        w.match_indices("n't").any(|(i, _)| i > 0 && w.as_bytes()[i - 1].is_ascii_alphabetic() && i + 3 == w.len())
    };
    let positive = words.iter().any(|w| POSITIVE.contains(&w.trim_matches('\'')));
    let negative = words.iter().any(|w| NEGATIVE.contains(&w.trim_matches('\'')) || contraction(w));
    positive && !negative
}

// 5. Detector unit vectors.
fn detectors() -> Verdict {
    let suite = [
        "Updated successfully",
        "Update did not complete",
        "successfully",
        "Transfer completed",
        "Your transfer has been executed",
        "Sorry, the transfer failed",
        "OK",
        "Done!",
        "Payment could not be completed",
        "Request rejected",
        "Error: update failed",
        "Success",
        "The update wasn't done",
        "okay, all set",
        "Lookup completed",
        "completion pending",
        "Unsuccessful attempt",
        "EXECUTE",
    ];
    let mut wrong = Vec::new();
    for s in suite {
        if is_accept_keyword(s) != keyword_oracle(s) {
            wrong.push(s);
        }
    }
    ensure(wrong.is_empty(), format!("keyword detector disagrees with oracle on {wrong:?}"))?;
    ensure(is_accept_keyword("Updated successfully"), "\"Updated successfully\" should accept")?;
    ensure(!is_accept_keyword("Update did not complete"), "\"Update did not complete\" should reject")?;
    ensure(!is_accept_keyword("successfully"), "\"successfully\" should reject")?;

    let leaf = Leaf {
        locator: Locator::Body,
        text: "$12,345.00".into(),
    };
    let hit = find_reflection("12345", MatchMode::Numeric, std::slice::from_ref(&leaf));
    ensure(hit.is_some_and(|h| h.occurrences == 1), "\"12345\" not found in \"$12,345.00\"")?;
    ensure(normalized_eq("1,234.50", "1234.5"), "\"1,234.50\" != \"1234.5\"")?;
    Ok(format!("{} keyword vectors agree with oracle; numeric reflection and normalization hold", suite.len()))
}

/// Numbers (digits and thousands commas, optional fraction) by value,
/// anything else by trimmed text.
fn oracle_eq(a: &str, b: &str) -> bool {
    fn number(v: &str) -> Option<f64> {
        let (int, frac) = match v.split_once('.') {
            Some((i, f)) => (i, Some(f)),
            None => (v, None),
        };
        let int_ok = !int.is_empty() && int.chars().all(|c| c.is_ascii_digit() || c == ',');
        let frac_ok = frac.is_none_or(|f| !f.is_empty() && f.chars().all(|c| c.is_ascii_digit()));
        if !(int_ok && frac_ok) {
            return None;
        }
        let digits: String = int.chars().filter(|c| *c != ',').collect();
        if digits.is_empty() {
            return None;
        }
        format!("{digits}.{}", frac.unwrap_or("0")).parse().ok()
    }
    match (number(a), number(b)) {
        (Some(x), Some(y)) => x == y,
        (None, None) => a.trim() == b.trim(),
        _ => false,
    }
}

fn random_step(rng: &mut ChaCha8Rng) -> Vec<Param> {
    const NAMES: [&str; 10] = ["FROM", "TO", "AMT", "CSRF", "ref", "date", "note", "qty", "acct", "id"];
    const VALUES: [&str; 22] = [
        "", "  ", "0", "0.0", "00", "-0", "1234.5", "1,234.50", "1234.50", "12345", "12,345", " 42", "42", "42 ",
        "abc", "ABC", " abc ", "001-234", "1.5", "1.50", ",,", "x y",
    ];
    let sources = [ParamSource::UserInput, ParamSource::HiddenField, ParamSource::QueryString, ParamSource::Cookie];
    let mut names = NAMES.to_vec();
    names.shuffle(rng);
    let n = rng.gen_range(1..=8);
    names[..n]
        .iter()
        .map(|name| Param {
            name: name.to_string(),
            value: VALUES[rng.gen_range(0..VALUES.len())].to_string(),
            source: sources[rng.gen_range(0..sources.len())],
            locator: Locator::Control {
                form: 0,
                name: name.to_string(),
            },
        })
        .collect()
}

type DepMap = BTreeMap<String, BTreeSet<String>>;

// 6. Hash-indexed dependency detection equals a brute-force pairwise oracle.
fn dependency_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let usable = |p: &Param| p.source != ParamSource::Cookie && !p.value.trim().is_empty();
    let mut nonempty = 0;
    for i in 0..200 {
        let steps = vec![random_step(&mut rng), random_step(&mut rng)];
        let mut expected = DepMap::new();
        for q in steps[1].iter().filter(|p| usable(p)) {
            for p in steps[0].iter().filter(|p| usable(p)) {
                if oracle_eq(&p.value, &q.value) {
                    expected.entry(q.name.clone()).or_default().insert(p.name.clone());
                }
            }
        }
        let got: DepMap = dependency_candidates(&steps)
            .into_iter()
            .map(|c| (c.name, c.prior_names.into_iter().collect()))
            .collect();
        if got != expected {
            return Err(format!("trace {i}: detector {got:?} vs oracle {expected:?}\n{steps:#?}"));
        }
        nonempty += usize::from(!expected.is_empty());
    }
    ensure(nonempty >= 50, format!("only {nonempty} traces had any dependency"))?;
    Ok(format!("200 random traces agree ({nonempty} with dependencies)"))
}

// 7. Two seed-0 selftests give identical findings.
fn determinism(first: &[ScenarioRun], second: &[ScenarioRun]) -> Verdict {
    let mut total = 0;
    for (a, b) in first.iter().zip(second) {
        let fa = serde_json::to_string(&a.report.findings_without_timestamps()).unwrap();
        let fb = serde_json::to_string(&b.report.findings_without_timestamps()).unwrap();
        ensure(fa == fb, format!("{}: findings differ between runs", a.scenario))?;
        total += a.report.findings.len();
    }
    Ok(format!("{total} findings byte-identical across two runs"))
}

// 8. Spent tokens are confirmed; the varying-but-ignored decoy is not.
fn one_time_tokens(runs: &[ScenarioRun]) -> Verdict {
    let hsbc = run_of(runs, Scenario::HsbcLike);
    let probes = &hsbc.report.capture.token_probes;
    let probe = |name: &str| probes.iter().find(|p| p.step == 0 && p.name == name);
    let csrf = probe("CSRF1").ok_or("CSRF1 was never probed")?;
    ensure(csrf.confirmed && csrf.kind == TokenKind::OneTime, format!("CSRF1 probe: {csrf:?}"))?;
    let decoy = probe("_r").ok_or("decoy _r was never probed")?;
    ensure(!decoy.confirmed, format!("decoy confirmed as token: {decoy:?}"))?;
    let tokens = &hsbc.report.capture.tokens;
    ensure(
        tokens.kind_of(1, "CSRF2") == Some(TokenKind::OneTime),
        "CSRF2 at step 1 not registered as one-time",
    )?;
    ensure(!tokens.is_token(0, "_r"), "decoy in token registry")?;
    ensure(
        hsbc.report.skipped.iter().all(|s| s.param != "_r"),
        "decoy skipped during fuzzing",
    )?;
    let decoy_findings = findings_on(hsbc, "_r");
    ensure(decoy_findings > 0, "decoy was not fuzzed")?;

    // Resend a submitted step-A request verbatim in its own session.
    let bed = serve(ScenarioConfig::new(Scenario::HsbcLike)).map_err(|e| e.to_string())?;
    let script = ActionScript::from_json(&bed.script_json()).map_err(|e| e.to_string())?;
    let mut session = Session::new(SessionConfig::default()).map_err(|e| e.to_string())?;
    let mut first = |_: &StepContext<'_>, _: &mut StepEdit| Ok(StepPlan::last(Directive::Submit));
    let trace = replay_with(&script, &mut session, &mut first).map_err(|e| e.to_string())?;
    let sent = trace.step(0).ok_or("step A not sent")?;
    let resp = session.send(&sent.request).map_err(|e| e.to_string())?;
    let features = hsbc.report.capture.features.step(0).ok_or("no step-A features")?;
    let class = features.classify(&resp, &parse_body(&resp), &sent.params);
    ensure(matches!(class, Classification::Rejected { .. }), format!("resend classified {class:?}"))?;
    ensure(Page::from_response(&resp).forms.is_empty(), "rejection page carries a form")?;
    let last = bed.log().last().cloned().ok_or("no log")?;
    ensure(last.cause == Some(Cause::TokenSpent), format!("resend logged {last:?}"))?;
    Ok(format!(
        "CSRF1@0 and CSRF2@1 confirmed one-time, resend rejected feature-free (token-spent); decoy _r unconfirmed with {decoy_findings} finding(s)"
    ))
}

fn report(n: usize, title: &str, f: impl FnOnce() -> Verdict) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    match outcome {
        Ok(detail) => {
            println!("PASS criterion {n} ({title}): {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL criterion {n} ({title}): {detail}");
            false
        }
    }
}

fn main() {
    // `cargo test -- --list` and filters pass arguments; nothing to list here.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let opts = Options::default();
    let started = Instant::now();
    let first = selftest::run_all(&opts).expect("selftest runs");
    let elapsed = started.elapsed();
    let second = selftest::run_all(&opts).expect("second selftest runs");

    let results = [
        report(1, "confusion matrix", || confusion(&first, elapsed)),
        report(2, "token preservation", || tokens_preserved(&first)),
        report(3, "workflow preservation", || workflow_preserved(&first)),
        report(4, "dependency handling", || dependencies(&first)),
        report(5, "detector vectors", detectors),
        report(6, "dependency oracle", dependency_oracle),
        report(7, "determinism", || determinism(&first, &second)),
        report(8, "one-time token confirmation", || one_time_tokens(&first)),
    ];
    let passed = results.iter().filter(|r| **r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
