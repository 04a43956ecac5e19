use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::metrics::OpCounters;

use super::config::ScenarioConfig;

/// Per-adversary tally. `succeeded` must stay zero for every shipped
/// scenario; `blocked` is `attempts - succeeded`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryOutcome {
    pub attempts: u64,
    pub blocked: u64,
    pub succeeded: u64,
}

/// Operation counts for one phase, split by role.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCounters {
    pub roles: BTreeMap<String, OpCounters>,
    pub total: OpCounters,
}

/// One handshake, as a row for the CSV form of the report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub index: u64,
    pub vehicle: u32,
    pub rsu: u32,
    pub kind: String,
    pub completed: bool,
    pub sk_match: Option<bool>,
    pub error: Option<String>,
    pub tampered: bool,
}

/// End-of-scenario pool occupancy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSummary {
    pub rsu: u32,
    pub live_leases: u64,
    pub total_allocations: u64,
}

/// Everything a scenario run produces. Serialization is byte-stable:
/// identical configs (same seed) must yield identical reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub config: ScenarioConfig,
    pub sessions_attempted: u64,
    pub sessions_completed: u64,
    pub key_agreement_successes: u64,
    pub identity_check_failures: u64,
    /// Honest sessions that failed without adversary interference.
    pub honest_failures: u64,
    /// Terminal handshake rejections by error kind.
    pub rejections: BTreeMap<String, u64>,
    /// Non-handshake rejections (address exchange, application layer).
    pub other_rejections: BTreeMap<String, u64>,
    /// Rejections hit by injected adversary traffic, by error kind.
    pub adversary_rejections: BTreeMap<String, u64>,
    pub adversary_outcomes: BTreeMap<String, AdversaryOutcome>,
    pub op_counters: BTreeMap<String, PhaseCounters>,
    pub addresses_allocated: u64,
    pub addresses_adopted: u64,
    pub duplicate_addresses: u64,
    pub leak_canary_hits: u64,
    pub control_beacons_accepted: u64,
    pub pools: Vec<PoolSummary>,
    pub sessions: Vec<SessionRecord>,
}

impl ScenarioReport {
    /// Pretty JSON with a trailing newline; the canonical report form.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// CSV form: one row per session.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,vehicle,rsu,kind,completed,sk_match,error,tampered\n");
        for s in &self.sessions {
            let sk = match s.sk_match {
                Some(true) => "true",
                Some(false) => "false",
                None => "",
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                s.index,
                s.vehicle,
                s.rsu,
                s.kind,
                s.completed,
                sk,
                s.error.as_deref().unwrap_or(""),
                s.tampered,
            ));
        }
        out
    }

    /// True when every untampered handshake completed.
    pub fn honest_ok(&self) -> bool {
        self.honest_failures == 0
            && self.identity_check_failures == 0
            && self.leak_canary_hits == 0
            && self.duplicate_addresses == 0
    }

    /// True when no adversary scored a success.
    pub fn adversaries_blocked(&self) -> bool {
        self.adversary_outcomes.values().all(|o| o.succeeded == 0)
    }

    /// Process exit status for the CLI: zero iff honest traffic all
    /// completed and every adversary was contained.
    pub fn exit_ok(&self) -> bool {
        self.honest_ok() && self.adversaries_blocked()
    }

    /// Conservation check: attempted = completed + terminal
    /// rejections.
    pub fn conserved(&self) -> bool {
        let rejected: u64 = self.rejections.values().sum();
        self.sessions_attempted == self.sessions_completed + rejected
    }
}
