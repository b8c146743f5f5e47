//! Argument model and subcommand execution for the `flowtamper` binary.
//!
//! Exit codes: 0 clean, 2 findings present, 1 operational error, 64 bad
//! invocation. `selftest` exits 0 only when every scenario matches its
//! ground truth and the fuzzing phase left the server's tokens and
//! workflow intact.

pub mod selftest;

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use url::Url;

use flowtamper::report::ConfigEcho;
use flowtamper::{ActionScript, CaptureAnalysis, Capturer, FuzzConfig, Fuzzer, ScanReport, Session, SessionConfig};
use flowtamper_testbed::{Scenario, ScenarioConfig};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FINDINGS: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "flowtamper", version, about = "Workflow-aware parameter tampering scanner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay a script twice and dump the learned tokens, dependencies and acceptance features.
    Capture(CaptureArgs),
    /// Capture, then fuzz every non-token parameter and report accepted tampering.
    Scan(ScanArgs),
    /// Serve one of the bundled reference applications until interrupted.
    Testbed(TestbedArgs),
    /// Scan every bundled scenario against its own server and check the ground truth.
    Selftest(SelftestArgs),
}

/// Knobs of the capturing phase, shared by `capture` and `scan`.
#[derive(Debug, Clone, Args)]
pub struct CaptureOpts {
    /// Reflections seen more often than this are too common to count as evidence.
    #[arg(long, default_value_t = 3)]
    pub occurrence_limit: usize,
    /// Response regex marking acceptance, for steps with no automatic feature.
    #[arg(long)]
    pub accept_regex: Option<String>,
    /// Pause before every request, in milliseconds.
    #[arg(long, default_value_t = 0)]
    pub delay_ms: u64,
}

impl Default for CaptureOpts {
    fn default() -> Self {
        CaptureOpts {
            occurrence_limit: 3,
            accept_regex: None,
            delay_ms: 0,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CaptureArgs {
    /// Action script (JSON).
    #[arg(long)]
    pub script: PathBuf,
    /// Where to write the capture analysis (JSON).
    #[arg(long)]
    pub dump: PathBuf,
    /// Base URL for relative navigation; overrides the script's own.
    #[arg(long)]
    pub target: Option<Url>,
    #[command(flatten)]
    pub capture: CaptureOpts,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    /// Action script (JSON). Defaults to the bundled script of `--scenario`.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Where to write the JSON report; a text summary always goes to stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Base URL for relative navigation; overrides the script's own.
    #[arg(long)]
    pub target: Option<Url>,
    /// Test-bed scenario name. Without a target the scenario is served in-process.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Forced submissions per parameter.
    #[arg(long, default_value_t = 8)]
    pub budget: usize,
    /// Also try values breaking required/maxlength/type restrictions.
    #[arg(long)]
    pub violate_restrictions: bool,
    #[command(flatten)]
    pub capture: CaptureOpts,
}

#[derive(Debug, Clone, Args)]
pub struct TestbedArgs {
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
}

#[derive(Debug, Clone, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub delay_ms: u64,
    /// Write each scenario's JSON report into this directory.
    #[arg(long)]
    pub report_dir: Option<PathBuf>,
}

/// Executes `cli` and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Capture(a) => run_capture(&a).map(|_| EXIT_CLEAN),
        Command::Scan(a) => run_scan(&a).map(|r| r.exit_code()),
        Command::Testbed(a) => run_testbed(&a),
        Command::Selftest(a) => run_selftest(&a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        EXIT_ERROR
    })
}

pub fn load_script(path: &Path, target: Option<&Url>) -> anyhow::Result<ActionScript> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let script = ActionScript::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(match target {
        Some(t) => script.with_base(t.clone()),
        None => script,
    })
}

fn session(delay_ms: u64) -> anyhow::Result<Session> {
    Ok(Session::new(SessionConfig {
        delay: Duration::from_millis(delay_ms),
        ..SessionConfig::default()
    })?)
}

/// Points in a scan where callers may observe the target between phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Captured,
    DependenciesConfirmed,
}

pub fn capture(script: &ActionScript, opts: &CaptureOpts) -> anyhow::Result<CaptureAnalysis> {
    let session = session(opts.delay_ms)?;
    Ok(Capturer::new(script, &session)
        .occurrence_limit(opts.occurrence_limit)
        .accept_regex(opts.accept_regex.clone())
        .run()?)
}

/// Both phases; `observe` runs after each completes.
pub fn scan_with(
    script: &ActionScript,
    opts: &CaptureOpts,
    fuzz: FuzzConfig,
    scenario: Option<String>,
    observe: &mut dyn FnMut(Phase),
) -> anyhow::Result<ScanReport> {
    let analysis = capture(script, opts)?;
    observe(Phase::Captured);
    let session = session(opts.delay_ms)?;
    let outcome =
        Fuzzer::new(script, &analysis, &session, fuzz.clone()).run_with(&mut |_| observe(Phase::DependenciesConfirmed))?;
    let echo = ConfigEcho::new(&fuzz, opts.occurrence_limit, opts.delay_ms, opts.accept_regex.clone());
    Ok(ScanReport::new(&analysis, outcome, scenario, echo))
}

fn run_capture(a: &CaptureArgs) -> anyhow::Result<()> {
    let script = load_script(&a.script, a.target.as_ref())?;
    let analysis = capture(&script, &a.capture)?;
    let json = serde_json::to_vec_pretty(&analysis)?;
    std::fs::write(&a.dump, json).with_context(|| format!("writing {}", a.dump.display()))?;
    println!(
        "captured {} step(s): {} token(s), {} dependency candidate(s); analysis written to {}",
        analysis.steps.len(),
        analysis.tokens.len(),
        analysis.dependency_candidates.len(),
        a.dump.display()
    );
    Ok(())
}

pub fn run_scan(a: &ScanArgs) -> anyhow::Result<ScanReport> {
    let scenario = a.scenario.as_deref().map(str::parse::<Scenario>).transpose()?;
    let mut script = match (&a.script, scenario) {
        (Some(p), _) => load_script(p, a.target.as_ref())?,
        (None, Some(s)) => ActionScript::from_json(s.bundled_script())?,
        (None, None) => bail!("either --script or --scenario is required"),
    };
    if let Some(t) = &a.target {
        script = script.with_base(t.clone());
    }
    // A scenario with nowhere else to go is served in-process.
    let _bed = match scenario {
        Some(s) if script.base.is_none() => {
            let bed = flowtamper_testbed::serve(ScenarioConfig::new(s))?;
            script = script.with_base(Url::parse(&bed.base_url())?);
            Some(bed)
        }
        _ => None,
    };
    let fuzz = FuzzConfig {
        seed: a.seed,
        budget: a.budget,
        violate_restrictions: a.violate_restrictions,
    };
    let report = scan_with(&script, &a.capture, fuzz, a.scenario.clone(), &mut |_| {})?;
    let truth = scenario.map(selftest::ground_truth);
    print!("{}", report.emit_text(truth.as_ref()));
    if let Some(path) = &a.report {
        std::fs::write(path, report.emit_json()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(report)
}

fn run_testbed(a: &TestbedArgs) -> anyhow::Result<i32> {
    let config = ScenarioConfig::named(&a.scenario)?.port(a.port);
    let bed = flowtamper_testbed::serve(config)?;
    println!("{} serving at {}", bed.scenario(), bed.start_url());
    println!("rejection log: {}/_log", bed.base_url());
    loop {
        std::thread::park();
    }
}

fn run_selftest(a: &SelftestArgs) -> anyhow::Result<i32> {
    let opts = selftest::Options {
        fuzz: FuzzConfig {
            seed: a.seed,
            budget: a.budget,
            violate_restrictions: false,
        },
        capture: CaptureOpts {
            delay_ms: a.delay_ms,
            ..CaptureOpts::default()
        },
    };
    let runs = selftest::run_all(&opts)?;
    if let Some(dir) = &a.report_dir {
        std::fs::create_dir_all(dir)?;
        for r in &runs {
            std::fs::write(dir.join(format!("{}.json", r.scenario)), r.report.emit_json())?;
        }
    }
    print!("{}", selftest::summary(&runs));
    Ok(if runs.iter().all(|r| r.passed()) { EXIT_CLEAN } else { EXIT_ERROR })
}
