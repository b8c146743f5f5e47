//! Scan reports as JSON for tools and as text for people.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::capture::{CaptureAnalysis, DepCandidate, FeatureSet, TokenProbe, TokenRegistry};
use crate::fuzz::{Counters, DependencyRecord, Finding, FuzzConfig, Inconclusive, ScanOutcome, Skipped};

/// Bumped on any change to the report's fields.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureSummary {
    pub steps: usize,
    pub tokens: TokenRegistry,
    pub token_probes: Vec<TokenProbe>,
    pub dependency_candidates: Vec<DepCandidate>,
    pub dependencies: Vec<DependencyRecord>,
    pub features: FeatureSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub seed: u64,
    pub budget: usize,
    pub occurrence_limit: usize,
    pub delay_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accept_regex: Option<String>,
    pub violate_restrictions: bool,
}

impl ConfigEcho {
    pub fn new(fuzz: &FuzzConfig, occurrence_limit: usize, delay_ms: u64, accept_regex: Option<String>) -> Self {
        ConfigEcho {
            seed: fuzz.seed,
            budget: fuzz.budget,
            occurrence_limit,
            delay_ms,
            accept_regex,
            violate_restrictions: fuzz.violate_restrictions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanReport {
    pub schema_version: u32,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub capture: CaptureSummary,
    pub findings: Vec<Finding>,
    pub inconclusive: Vec<Inconclusive>,
    pub skipped: Vec<Skipped>,
    pub counters: Counters,
    pub config: ConfigEcho,
}

/// Parameters a scenario is known to be vulnerable through; empty means
/// the scenario is a true negative.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub vulnerable_params: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Assessment {
    TruePositive,
    FalsePositive,
    TrueNegative,
    FalseNegative,
}

impl GroundTruth {
    /// A vulnerable scenario counts as detected only if every listed
    /// parameter has a finding; a clean one only if there are none at all.
    pub fn assess(&self, report: &ScanReport) -> Assessment {
        let found = |p: &String| report.findings.iter().any(|f| &f.param == p);
        match (self.vulnerable_params.is_empty(), report.findings.is_empty()) {
            (true, true) => Assessment::TrueNegative,
            (true, false) => Assessment::FalsePositive,
            (false, _) if self.vulnerable_params.iter().all(found) => Assessment::TruePositive,
            (false, _) => Assessment::FalseNegative,
        }
    }
}

impl ScanReport {
    pub fn new(analysis: &CaptureAnalysis, outcome: ScanOutcome, scenario: Option<String>, config: ConfigEcho) -> Self {
        ScanReport {
            schema_version: SCHEMA_VERSION,
            target: analysis.target.to_string(),
            scenario,
            capture: CaptureSummary {
                steps: analysis.steps.len(),
                tokens: analysis.tokens.clone(),
                token_probes: analysis.token_probes.clone(),
                dependency_candidates: analysis.dependency_candidates.clone(),
                dependencies: outcome.dependencies,
                features: analysis.features.clone(),
            },
            findings: outcome.findings,
            inconclusive: outcome.inconclusive,
            skipped: outcome.skipped,
            counters: outcome.counters,
            config,
        }
    }

    /// 0 when clean, 2 when findings are present.
    pub fn exit_code(&self) -> i32 {
        if self.findings.is_empty() {
            0
        } else {
            2
        }
    }

    pub fn emit_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report serializes");
        out.push(b'\n');
        out
    }

    pub fn from_json(bytes: &[u8]) -> crate::Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    /// Findings with timestamps cleared, for comparing runs.
    pub fn findings_without_timestamps(&self) -> Vec<Finding> {
        self.findings
            .iter()
            .cloned()
            .map(|mut f| {
                f.timestamp = 0;
                f
            })
            .collect()
    }

    pub fn emit_text(&self, truth: Option<&GroundTruth>) -> String {
        let mut s = String::new();
        let label = self.scenario.as_deref().map(|l| format!(" ({l})")).unwrap_or_default();
        let _ = writeln!(s, "target {}{label}: {} step(s)", self.target, self.capture.steps);
        let tokens: Vec<String> = self
            .capture
            .tokens
            .entries
            .iter()
            .map(|t| format!("{}@{}", t.name, t.step))
            .collect();
        let _ = writeln!(s, "tokens: {}", if tokens.is_empty() { "none".into() } else { tokens.join(", ") });
        let deps: Vec<String> = self
            .capture
            .dependencies
            .iter()
            .filter(|d| d.status == crate::fuzz::DependencyStatus::Dependent)
            .map(|d| format!("{}@{} <- {}", d.name, d.step, d.prior_names.join("|")))
            .collect();
        let _ = writeln!(s, "dependencies: {}", if deps.is_empty() { "none".into() } else { deps.join(", ") });
        let c = &self.counters;
        let _ = writeln!(
            s,
            "forced {} (accepted {}, rejected {}, inconclusive {}), discarded {} client-accepted, {} requests",
            c.forced, c.accepted, c.rejected, c.inconclusive, c.client_accepted_discards, c.requests_sent
        );
        if self.findings.is_empty() {
            let _ = writeln!(s, "no findings");
        }
        for f in &self.findings {
            let _ = writeln!(
                s,
                "FINDING step {} {} ({:?}): {:?} -> {:?} [{}]",
                f.step,
                f.param,
                f.source,
                f.base_value,
                f.mutated_value,
                serde_json::to_value(f.rule).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
            );
        }
        for i in &self.inconclusive {
            let _ = writeln!(s, "inconclusive step {} {} {:?}: {}", i.step, i.param, i.mutated_value, i.reason);
        }
        if let Some(t) = truth {
            let _ = writeln!(
                s,
                "confusion: expected {}, observed {} finding(s) => {:?}",
                if t.vulnerable_params.is_empty() {
                    "clean".to_string()
                } else {
                    format!("vulnerable via {}", t.vulnerable_params.join(", "))
                },
                self.findings.len(),
                t.assess(self)
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::FeatureSet;

    fn empty() -> ScanReport {
        ScanReport {
            schema_version: SCHEMA_VERSION,
            target: "http://t/".into(),
            scenario: None,
            capture: CaptureSummary {
                steps: 1,
                tokens: TokenRegistry::default(),
                token_probes: vec![],
                dependency_candidates: vec![],
                dependencies: vec![],
                features: FeatureSet::default(),
            },
            findings: vec![],
            inconclusive: vec![],
            skipped: vec![],
            counters: Counters::default(),
            config: ConfigEcho::new(&FuzzConfig::default(), 3, 0, None),
        }
    }

    #[test]
    fn empty_report_round_trips() {
        let r = empty();
        let json = r.emit_json();
        assert!(String::from_utf8_lossy(&json).contains("\"findings\": []"));
        assert_eq!(ScanReport::from_json(&json).unwrap(), r);
        assert_eq!(r.exit_code(), 0);
        assert!(r.emit_text(Some(&GroundTruth::default())).contains("TrueNegative"));
    }
}
