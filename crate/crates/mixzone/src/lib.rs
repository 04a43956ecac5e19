//! Chaotic-map authenticated key establishment for simulated road
//! networks.
//!
//! A vehicle's smart card, a roadside unit (RSU) and a trusted
//! mix-zone server run a three-party handshake built on extended
//! Chebyshev polynomials over Z_p. A first-time login authenticates
//! both the card and the RSU through the server and enrolls a random
//! pseudo-identity; consequent logins between the same card and RSU
//! then agree on fresh session keys without touching the server.
//! Session keys protect an encrypted IPv6 address-configuration
//! exchange in which each RSU leases vehicle ids under its own
//! address prefix, making duplicate address detection unnecessary.
//!
//! Everything runs inside a deterministic in-memory simulation with
//! Dolev-Yao adversaries (replay, tamper, address forgery, pool
//! exhaustion, fake conflicts) and per-phase operation counters.
//!
//! # Layout
//!
//! - [`crypto`] — Chebyshev evaluation, field framing and hashing,
//!   XOR masking, authenticated encryption.
//! - [`protocol`] — entity state machines and the five protocol
//!   phases, plus the wire codec.
//! - [`addr`] — address split, per-RSU lease pools and the encrypted
//!   address exchange.
//! - [`sim`] — scenario runner, adversaries, self-check suites and
//!   reports.
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --example registration
//! cargo run --example first_login
//! cargo run --example consequent_login
//! cargo run --example password_change
//! cargo run --example address_allocation
//! cargo run --example replay_attack
//! cargo run --example tamper_fuzz
//! cargo run --example unauthenticated_attacks
//! cargo run --example scenario_run
//! cargo run --example cost_report
//! ```
//!
//! The `mixzone` binary exposes the same machinery as a CLI
//! (`run`, `fuzz`, `bench`, `selftest`).

pub mod addr;
pub mod clock;
pub mod crypto;
pub mod metrics;
pub mod protocol;
pub mod sim;
