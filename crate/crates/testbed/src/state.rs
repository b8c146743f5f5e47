use std::collections::{BTreeMap, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cause {
    TokenMissing,
    TokenSpent,
    DependencyMismatch,
    WorkflowOrder,
    ValidationFail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Accepted,
    Rejected,
}

/// One handled submission. Rejected entries carry exactly one cause.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub session: String,
    pub handler: String,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<Cause>,
}

/// A pretend money movement executed by a confirmation handler.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transfer {
    pub reference: String,
    pub session: String,
    pub from: String,
    pub to: String,
    pub amount: String,
}

/// Purpose a token was issued for; a token only verifies for its purpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    StepA,
    StepB,
}

#[derive(Debug, Default)]
pub struct ServerSession {
    /// Issued one-time tokens and whether each was spent.
    tokens: HashMap<String, (Purpose, bool)>,
    /// Values stored by an accepted first step, awaiting confirmation.
    pub pending: Option<BTreeMap<&'static str, String>>,
    /// Session-scoped token carried in URLs.
    pub sid: Option<String>,
}

pub struct State {
    rng: ChaCha8Rng,
    sessions: HashMap<String, ServerSession>,
    log: Vec<LogEntry>,
    transfers: Vec<Transfer>,
    seq: u64,
    references: HashSet<String>,
}

const ALPHA: &[u8] = b"abcdefghijklmnopqrstuvwxyz";

impl State {
    pub fn new(seed: u64) -> State {
        State {
            rng: ChaCha8Rng::seed_from_u64(seed),
            sessions: HashMap::new(),
            log: Vec::new(),
            transfers: Vec::new(),
            seq: 0,
            references: HashSet::new(),
        }
    }

    pub fn letters(&mut self, n: usize) -> String {
        (0..n).map(|_| ALPHA[self.rng.gen_range(0..ALPHA.len())] as char).collect()
    }

    pub fn digits(&mut self, n: usize) -> String {
        (0..n).map(|_| char::from(b'0' + self.rng.gen_range(0..10u8))).collect()
    }

    /// The session named by the cookie, or a new one.
    pub fn session_or_new(&mut self, cookie: Option<&str>) -> (String, bool) {
        if let Some(id) = cookie {
            if self.sessions.contains_key(id) {
                return (id.to_string(), false);
            }
        }
        let id = self.letters(24);
        self.sessions.insert(id.clone(), ServerSession::default());
        (id, true)
    }

    pub fn session(&mut self, id: &str) -> Option<&mut ServerSession> {
        self.sessions.get_mut(id)
    }

    pub fn issue(&mut self, session: &str, purpose: Purpose) -> String {
        let token = self.letters(24);
        if let Some(s) = self.sessions.get_mut(session) {
            s.tokens.insert(token.clone(), (purpose, false));
        }
        token
    }

    /// Spends `value` if it is an unspent token of `session` for `purpose`.
    pub fn redeem(&mut self, session: &str, purpose: Purpose, value: Option<&str>) -> Result<(), Cause> {
        let s = self.sessions.get_mut(session).ok_or(Cause::TokenMissing)?;
        let value = value.ok_or(Cause::TokenMissing)?;
        match s.tokens.get_mut(value) {
            Some((p, spent)) if *p == purpose => {
                if *spent {
                    Err(Cause::TokenSpent)
                } else {
                    *spent = true;
                    Ok(())
                }
            }
            _ => Err(Cause::TokenMissing),
        }
    }

    pub fn record(&mut self, session: &str, handler: &str, result: Result<(), Cause>) {
        self.seq += 1;
        let (outcome, cause) = match result {
            Ok(()) => (Outcome::Accepted, None),
            Err(c) => (Outcome::Rejected, Some(c)),
        };
        tracing::debug!(session, handler, ?outcome, ?cause, "handled");
        self.log.push(LogEntry {
            seq: self.seq,
            session: session.to_string(),
            handler: handler.to_string(),
            outcome,
            cause,
        });
    }

    pub fn transfer(&mut self, session: &str, from: &str, to: &str, amount: &str) -> String {
        // Letters only, so reference numbers never collide with reflected amounts.
        let reference = loop {
            let r = format!("REF-{}", self.letters(10).to_ascii_uppercase());
            if self.references.insert(r.clone()) {
                break r;
            }
        };
        self.transfers.push(Transfer {
            reference: reference.clone(),
            session: session.to_string(),
            from: from.to_string(),
            to: to.to_string(),
            amount: amount.to_string(),
        });
        reference
    }

    pub fn find_transfer(&self, reference: &str) -> Option<&Transfer> {
        self.transfers.iter().find(|t| t.reference == reference)
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn transfers(&self) -> &[Transfer] {
        &self.transfers
    }

    /// Forgets the log and transfers; sessions and the RNG carry on.
    pub fn reset(&mut self) {
        self.log.clear();
        self.transfers.clear();
    }
}
