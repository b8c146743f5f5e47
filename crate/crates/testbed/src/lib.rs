//! Reference multi-step banking applications with planted flaws.
//!
//! Each scenario is a small two-step (or single AJAX step) workflow served
//! over real HTTP on loopback. The server keeps per-session one-time
//! tokens, stores step-A values for step-B checks, and appends one
//! [`LogEntry`] per handled submission so tests can see exactly why a
//! request was turned away.
//!
//! ```no_run
//! use flowtamper_testbed::{serve, Scenario, ScenarioConfig};
//!
//! let bed = serve(ScenarioConfig::new(Scenario::HsbcLike)).unwrap();
//! println!("{}", bed.base_url());
//! ```

mod scenarios;
mod server;
mod state;

use std::fmt;
use std::net::{SocketAddr, TcpListener};
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

pub use state::{Cause, LogEntry, Outcome, Transfer};

use server::App;
use state::State;

#[derive(Debug, thiserror::Error)]
pub enum TestbedError {
    #[error("cannot bind 127.0.0.1:{port}: {source}")]
    Bind { port: u16, source: std::io::Error },
    #[error("unknown scenario `{0}` (expected one of hsbc-like, bea-like, boc-like, ajax-date)")]
    UnknownScenario(String),
    #[error("server runtime: {0}")]
    Runtime(std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    HsbcLike,
    BeaLike,
    BocLike,
    AjaxDate,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::HsbcLike, Scenario::BeaLike, Scenario::BocLike, Scenario::AjaxDate];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::HsbcLike => "hsbc-like",
            Scenario::BeaLike => "bea-like",
            Scenario::BocLike => "boc-like",
            Scenario::AjaxDate => "ajax-date",
        }
    }

    /// Path of the page a scan starts from.
    pub fn start_path(self) -> &'static str {
        match self {
            Scenario::HsbcLike => "/hsbc/transfer",
            Scenario::BeaLike => "/bea/transfer",
            Scenario::BocLike => "/boc/transfer",
            Scenario::AjaxDate => "/flight",
        }
    }

    /// The recorded valid walk for this scenario, without a base URL.
    pub fn bundled_script(self) -> &'static str {
        match self {
            Scenario::HsbcLike => include_str!("../fixtures/hsbc-like.json"),
            Scenario::BeaLike => include_str!("../fixtures/bea-like.json"),
            Scenario::BocLike => include_str!("../fixtures/boc-like.json"),
            Scenario::AjaxDate => include_str!("../fixtures/ajax-date.json"),
        }
    }

    /// Parameters through which the default (flawed) build is exploitable;
    /// empty for a scenario that should yield no findings.
    pub fn ground_truth(self) -> &'static [&'static str] {
        match self {
            Scenario::HsbcLike | Scenario::BeaLike => &["TO"],
            Scenario::BocLike => &[],
            Scenario::AjaxDate => &["date"],
        }
    }

    pub fn default_accounts(self) -> Accounts {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        match self {
            Scenario::HsbcLike => Accounts {
                own: v(&["001-234567-838", "001-234567-001"]),
                payees: v(&["FUND RECEIPIENT~~290 123456882", "JOHN SMITH~~004 500012345"]),
            },
            Scenario::BeaLike => Accounts {
                own: v(&["012-345-678901", "012-345-678902"]),
                payees: v(&["024-681-357913", "024-681-357914"]),
            },
            Scenario::BocLike => Accounts {
                own: v(&["100-200-3001", "100-200-3002"]),
                payees: v(&["300-400-5001", "300-400-5002", "300-400-5003"]),
            },
            Scenario::AjaxDate => Accounts::default(),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = TestbedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| TestbedError::UnknownScenario(s.to_string()))
    }
}

/// Accounts the session owner may debit, and payees registered for them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Accounts {
    pub own: Vec<String>,
    pub payees: Vec<String>,
}

/// Planted flaws; all on by default. Switching one off makes the server
/// re-enforce the check its client performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flaws {
    /// Step A accepts any well-formed payee instead of registered ones.
    pub payee_unchecked: bool,
    /// The flight lookup skips the date range check.
    pub date_range_unchecked: bool,
}

impl Default for Flaws {
    fn default() -> Self {
        Flaws {
            payee_unchecked: true,
            date_range_unchecked: true,
        }
    }
}

impl Flaws {
    pub fn none() -> Self {
        Flaws {
            payee_unchecked: false,
            date_range_unchecked: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub accounts: Accounts,
    pub flaws: Flaws,
    /// 0 picks an ephemeral port.
    pub port: u16,
    /// Seeds token and reference generation.
    pub rng_seed: u64,
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario) -> Self {
        ScenarioConfig {
            scenario,
            accounts: scenario.default_accounts(),
            flaws: Flaws::default(),
            port: 0,
            rng_seed: 0,
        }
    }

    pub fn named(name: &str) -> Result<Self, TestbedError> {
        Ok(ScenarioConfig::new(name.parse()?))
    }

    pub fn port(mut self, port: u16) -> Self {
        self.port = port;
        self
    }

    pub fn flaws(mut self, flaws: Flaws) -> Self {
        self.flaws = flaws;
        self
    }

    pub fn rng_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }
}

/// A running server. Dropping it shuts the server down.
pub struct Testbed {
    addr: SocketAddr,
    scenario: Scenario,
    app: Arc<App>,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

/// Binds 127.0.0.1 and serves `config.scenario` on a background thread.
pub fn serve(config: ScenarioConfig) -> Result<Testbed, TestbedError> {
    let listener = TcpListener::bind(("127.0.0.1", config.port)).map_err(|source| TestbedError::Bind {
        port: config.port,
        source,
    })?;
    let addr = listener.local_addr().map_err(TestbedError::Runtime)?;
    listener.set_nonblocking(true).map_err(TestbedError::Runtime)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_io()
        .build()
        .map_err(TestbedError::Runtime)?;
    let listener = {
        let _guard = runtime.enter();
        tokio::net::TcpListener::from_std(listener).map_err(TestbedError::Runtime)?
    };
    let app = Arc::new(App {
        scenario: config.scenario,
        accounts: config.accounts,
        flaws: config.flaws,
        state: Mutex::new(State::new(config.rng_seed)),
    });
    let router = server::router(app.clone());
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let thread = std::thread::Builder::new()
        .name(format!("testbed-{}", config.scenario))
        .spawn(move || {
            runtime.block_on(async move {
                let served = axum::serve(listener, router)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await;
                if let Err(e) = served {
                    tracing::error!("testbed server stopped: {e}");
                }
            });
        })
        .map_err(TestbedError::Runtime)?;
    tracing::info!(%addr, scenario = %config.scenario, "testbed listening");
    Ok(Testbed {
        addr,
        scenario: config.scenario,
        app,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

impl Testbed {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// `http://127.0.0.1:PORT`, no trailing slash.
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Absolute URL of the scenario's start page.
    pub fn start_url(&self) -> String {
        format!("{}{}", self.base_url(), self.scenario.start_path())
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    /// Bundled script with `base` pointing at this server.
    pub fn script_json(&self) -> String {
        let mut v: serde_json::Value =
            serde_json::from_str(self.scenario.bundled_script()).expect("bundled scripts are valid JSON");
        v["base"] = serde_json::Value::String(self.base_url());
        v.to_string()
    }

    pub fn log(&self) -> Vec<LogEntry> {
        self.app.lock().log().to_vec()
    }

    pub fn log_len(&self) -> usize {
        self.app.lock().log().len()
    }

    /// Log entries appended since the log had `mark` entries.
    pub fn log_since(&self, mark: usize) -> Vec<LogEntry> {
        self.app.lock().log().get(mark..).map(<[_]>::to_vec).unwrap_or_default()
    }

    pub fn transfers(&self) -> Vec<Transfer> {
        self.app.lock().transfers().to_vec()
    }

    pub fn reset(&self) {
        self.app.lock().reset();
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for Testbed {
    fn drop(&mut self) {
        self.stop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
        }
        assert!(matches!("citibank".parse::<Scenario>(), Err(TestbedError::UnknownScenario(_))));
        assert!(ScenarioConfig::named("nope").is_err());
    }

    #[test]
    fn bundled_scripts_parse() {
        for s in Scenario::ALL {
            let v: serde_json::Value = serde_json::from_str(s.bundled_script()).unwrap();
            assert_eq!(v["actions"][0]["navigate"], s.start_path());
        }
    }
}
