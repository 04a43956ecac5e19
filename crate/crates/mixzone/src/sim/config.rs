use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{default_prime, test_prime};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("invalid scenario config: {0}")]
    Config(String),
    #[error("scenario file: {0}")]
    Parse(String),
}

/// Which modulus the scenario runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PrimeChoice {
    /// p = 251; fast, for self-checks and fuzzing.
    Test,
    /// The 256-bit default modulus.
    #[default]
    Default,
}

impl PrimeChoice {
    pub fn value(self) -> BigUint {
        match self {
            PrimeChoice::Test => test_prime(),
            PrimeChoice::Default => default_prime(),
        }
    }
}

/// One adversary to interleave with honest traffic. All adversaries
/// act through the message channel only: observe, replay, inject and
/// modify, with no access to card or server secrets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversarySpec {
    /// Re-injects observed M1/C1/AddrReq/AddrResp messages: stale
    /// copies after `delay_secs`, a fresh C1 copy right away, and
    /// address responses cross-delivered to another vehicle.
    Replay {
        #[serde(default = "default_replay_delay")]
        delay_secs: u64,
        /// Recorded sessions to replay from, at most.
        #[serde(default = "default_replay_budget")]
        budget: u32,
    },
    /// Claims a victim's address in application beacons without
    /// holding its session key.
    ForgeAddress {
        #[serde(default = "default_forge_count")]
        beacons: u32,
    },
    /// Fires unauthenticated address requests at the RSUs.
    Exhaustion { requests: u32 },
    /// Broadcasts fabricated address-conflict claims.
    FakeConflict {
        #[serde(default = "default_conflict_count")]
        claims: u32,
    },
    /// Flips one random bit in up to `trials` in-flight messages.
    BitFlip { trials: u32 },
}

impl AdversarySpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            AdversarySpec::Replay { .. } => "replay",
            AdversarySpec::ForgeAddress { .. } => "forge_address",
            AdversarySpec::Exhaustion { .. } => "exhaustion",
            AdversarySpec::FakeConflict { .. } => "fake_conflict",
            AdversarySpec::BitFlip { .. } => "bitflip",
        }
    }
}

fn default_replay_delay() -> u64 {
    120
}

fn default_replay_budget() -> u32 {
    100
}

fn default_forge_count() -> u32 {
    50
}

fn default_conflict_count() -> u32 {
    50
}

fn default_split() -> u8 {
    64
}

fn default_delta() -> u64 {
    60
}

fn default_lease() -> u64 {
    300
}

fn default_sessions() -> u32 {
    1
}

/// Everything a run needs; the seed fully determines the transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub num_vehicles: u32,
    pub num_rsus: u32,
    #[serde(default = "default_split")]
    pub split_i: u8,
    #[serde(default)]
    pub prime: PrimeChoice,
    #[serde(default = "default_delta")]
    pub delta_window_secs: u64,
    #[serde(default = "default_lease")]
    pub lease_secs: u64,
    pub seed: u64,
    #[serde(default)]
    pub adversaries: Vec<AdversarySpec>,
    /// Consequent handshakes per vehicle after the first-time login.
    #[serde(default = "default_sessions")]
    pub sessions_per_vehicle: u32,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.num_rsus == 0 {
            return Err(SimError::Config("num_rsus must be at least 1".into()));
        }
        if !(8..=64).contains(&self.split_i) {
            return Err(SimError::Config("split_i must lie in [8, 64]".into()));
        }
        if self.delta_window_secs == 0 {
            return Err(SimError::Config("delta_window_secs must be positive".into()));
        }
        if self.lease_secs == 0 {
            return Err(SimError::Config("lease_secs must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self, SimError> {
        let cfg: ScenarioConfig =
            serde_json::from_str(json).map_err(|e| SimError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_rsus() {
        let cfg = ScenarioConfig {
            num_vehicles: 1,
            num_rsus: 0,
            split_i: 64,
            prime: PrimeChoice::Test,
            delta_window_secs: 60,
            lease_secs: 300,
            seed: 1,
            adversaries: vec![],
            sessions_per_vehicle: 1,
        };
        assert!(matches!(cfg.validate(), Err(SimError::Config(_))));
    }

    #[test]
    fn parses_with_defaults() {
        let cfg = ScenarioConfig::from_json(
            r#"{"num_vehicles": 3, "num_rsus": 1, "seed": 7}"#,
        )
        .unwrap();
        assert_eq!(cfg.split_i, 64);
        assert_eq!(cfg.prime, PrimeChoice::Default);
        assert_eq!(cfg.delta_window_secs, 60);
        assert_eq!(cfg.sessions_per_vehicle, 1);
        assert!(cfg.adversaries.is_empty());
    }

    #[test]
    fn parses_adversaries() {
        let cfg = ScenarioConfig::from_json(
            r#"{
                "num_vehicles": 2, "num_rsus": 1, "seed": 7,
                "adversaries": [
                    {"kind": "replay"},
                    {"kind": "exhaustion", "requests": 100},
                    {"kind": "bitflip", "trials": 5}
                ]
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.adversaries.len(), 3);
        assert_eq!(cfg.adversaries[0].kind_name(), "replay");
        assert!(matches!(
            cfg.adversaries[1],
            AdversarySpec::Exhaustion { requests: 100 }
        ));
    }

    #[test]
    fn bad_split_rejected() {
        let err = ScenarioConfig::from_json(
            r#"{"num_vehicles": 1, "num_rsus": 1, "seed": 1, "split_i": 4}"#,
        );
        assert!(err.is_err());
    }
}
