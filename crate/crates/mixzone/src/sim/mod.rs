//! Deterministic scenario harness: seeded end-to-end runs of the full
//! protocol stack with executable adversaries, plus the fuzz, replay,
//! self-check and cost tooling behind the CLI.

mod config;
mod cost;
mod drivers;
mod fuzz;
mod report;
mod selftest;
mod world;

pub use config::{AdversarySpec, PrimeChoice, ScenarioConfig, SimError};
pub use cost::{measure_costs, CostReport, PhaseCost, ReferenceRow, REFERENCE_NOTE};
pub use drivers::{run_address, run_consequent, run_first_login, DriveError, FirstLoginOutcome,
    RoleMeters, Tamper, Testbed, TESTBED_DELTA_SECS};
pub use fuzz::{run_bitflip_fuzz, run_replay_suite, FuzzReport, ReplayReport};
pub use report::{AdversaryOutcome, PhaseCounters, PoolSummary, ScenarioReport, SessionRecord};
pub use selftest::{ladder_equivalence_default_prime, run_selftest, SelftestReport};
pub use world::{run_scenario, Beacon, ConflictClaim, Endpoint, SessionId};
