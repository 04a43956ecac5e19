//! Standalone adversary drivers: single-bit tamper fuzzing across
//! every open-channel message type, and the replay suite covering
//! stale re-injection, cross-key replay and fresh C1 copies.

use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::crypto::Digest;
use crate::protocol::{ProtocolError, SessionKey, C3};

use super::config::PrimeChoice;
use super::drivers::{run_address, run_consequent, run_first_login, RoleMeters, Tamper, Testbed};

/// Result of a bit-flip fuzz campaign. A sound protocol yields zero
/// completions: every trial must end in a typed error.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct FuzzReport {
    pub trials: u64,
    pub completions: u64,
    /// Error-kind histogram over all failed trials.
    pub outcomes: BTreeMap<String, u64>,
    /// Trials per driven exchange kind.
    pub by_phase: BTreeMap<String, u64>,
}

impl FuzzReport {
    pub fn all_blocked(&self) -> bool {
        self.completions == 0
    }
}

/// Runs `trials` independent exchanges, flipping one uniformly chosen
/// bit of one uniformly chosen in-flight frame per trial. Trials
/// rotate across first-time login (M1..M5), consequent login
/// (C1..C3) and the address exchange (AddrReq/AddrResp).
pub fn run_bitflip_fuzz(trials: u64, seed: u64, prime: PrimeChoice) -> FuzzReport {
    let mut tb = Testbed::new(prime, seed);
    let mut meters = RoleMeters::default();
    // an honest enrollment so consequent and address trials have
    // something to attack
    let honest = run_first_login(&mut tb, None, &mut meters).expect("honest setup run");
    let sk = honest.sk_user;
    let cid = honest.cid;

    let mut chooser = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed_f11b_0000_0001);
    let mut outcomes: BTreeMap<String, u64> = BTreeMap::new();
    let mut by_phase: BTreeMap<String, u64> = BTreeMap::new();
    let mut completions = 0u64;

    for trial in 0..trials {
        let bit = chooser.next_u64();
        let result = match trial % 3 {
            0 => {
                *by_phase.entry("first_login".into()).or_insert(0) += 1;
                let msg_index = chooser.gen_range(0..5);
                run_first_login(&mut tb, Some(Tamper { msg_index, bit }), &mut meters)
                    .map(|out| debug_assert_eq!(out.sk_user, out.sk_rsu))
                    .map_err(|e| e.kind())
            }
            1 => {
                *by_phase.entry("consequent".into()).or_insert(0) += 1;
                let msg_index = chooser.gen_range(0..3);
                run_consequent(&mut tb, Some(Tamper { msg_index, bit }), &mut meters)
                    .map(|_| ())
                    .map_err(|e| e.kind())
            }
            _ => {
                *by_phase.entry("address".into()).or_insert(0) += 1;
                let msg_index = chooser.gen_range(0..2);
                run_address(&mut tb, &sk, cid, Some(Tamper { msg_index, bit }), &mut meters)
                    .map(|_| ())
                    .map_err(|e| e.kind())
            }
        };
        match result {
            Ok(()) => completions += 1,
            Err(kind) => *outcomes.entry(kind.to_string()).or_insert(0) += 1,
        }
    }

    FuzzReport { trials, completions, outcomes, by_phase }
}

/// Replay-containment results; every `*_rejected` count must equal
/// `trials` and both completion counters must stay zero.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct ReplayReport {
    pub trials: u64,
    pub m1_stale_rejected: u64,
    pub c1_stale_rejected: u64,
    pub addr_req_stale_rejected: u64,
    pub addr_resp_cross_key_rejected: u64,
    pub fresh_c1_answers: u64,
    pub fresh_c1_completions: u64,
    pub replay_allocations: u64,
}

impl ReplayReport {
    pub fn all_contained(&self) -> bool {
        self.m1_stale_rejected == self.trials
            && self.c1_stale_rejected == self.trials
            && self.addr_req_stale_rejected == self.trials
            && self.addr_resp_cross_key_rejected == self.trials
            && self.fresh_c1_completions == 0
            && self.replay_allocations == 0
    }
}

/// Exercises the replay attacks end to end, `trials` times each.
pub fn run_replay_suite(trials: u64, seed: u64, prime: PrimeChoice) -> ReplayReport {
    use crate::addr::{rsu_handle_addr_request, vehicle_handle_addr_response,
        vehicle_request_address, AddrError};

    let mut report = ReplayReport {
        trials,
        m1_stale_rejected: 0,
        c1_stale_rejected: 0,
        addr_req_stale_rejected: 0,
        addr_resp_cross_key_rejected: 0,
        fresh_c1_answers: 0,
        fresh_c1_completions: 0,
        replay_allocations: 0,
    };

    let mut tb = Testbed::new(prime, seed);
    let mut meters = RoleMeters::default();
    let delta = tb.rsu.delta_secs();
    let honest = run_first_login(&mut tb, None, &mut meters).expect("honest enrollment");
    let mut sk = honest.sk_user;
    let mut cid = honest.cid;

    for _ in 0..trials {
        let rsuid = tb.rsu.rsuid();

        // stale M1: capture, wait past the window, re-deliver
        let (m1, _session) = tb
            .card
            .first_login(&tb.pw, rsuid, &tb.clock, &mut tb.rng, &mut meters.user)
            .expect("honest M1");
        tb.clock.advance_by(delta + 1);
        if let Err(ProtocolError::StaleTimestamp) =
            tb.rsu.process_m1(&m1, &tb.clock, &mut tb.rng, &mut meters.rsu)
        {
            report.m1_stale_rejected += 1;
        }

        // stale C1
        let (c1, _session) = tb
            .card
            .consequent_login(&tb.pw, rsuid, &tb.clock, &mut tb.rng, &mut meters.user)
            .expect("honest C1");
        tb.clock.advance_by(delta + 1);
        if let Err(ProtocolError::StaleTimestamp) =
            tb.rsu.process_c1(&c1, &tb.clock, &mut tb.rng, &mut meters.rsu)
        {
            report.c1_stale_rejected += 1;
        }

        // stale address request: no allocation may happen
        let req = vehicle_request_address(&sk, cid, &tb.clock, &mut tb.rng, &mut meters.user);
        tb.clock.advance_by(delta + 1);
        let occupancy_before = tb.pool.occupancy(tb.clock.now());
        match rsu_handle_addr_request(
            &tb.rsu, &mut tb.pool, &sk, &req, &tb.clock, &mut tb.rng, &mut meters.rsu,
        ) {
            Err(AddrError::StaleTimestamp) => report.addr_req_stale_rejected += 1,
            Ok(_) => report.replay_allocations += 1,
            Err(_) => {}
        }
        if tb.pool.occupancy(tb.clock.now()) != occupancy_before {
            report.replay_allocations += 1;
        }

        // address response replayed to a holder of a different key
        let req = vehicle_request_address(&sk, cid, &tb.clock, &mut tb.rng, &mut meters.user);
        let (resp, _addr, _exp) = rsu_handle_addr_request(
            &tb.rsu, &mut tb.pool, &sk, &req, &tb.clock, &mut tb.rng, &mut meters.rsu,
        )
        .expect("fresh request allocates");
        let other_sk = SessionKey(Digest(
            crate::crypto::hash_fields(&[b"some other session", sk.as_bytes()]).0,
        ));
        if let Err(AddrError::AuthFailure) =
            vehicle_handle_addr_response(&other_sk, &resp, delta, &tb.clock, &mut meters.user)
        {
            report.addr_resp_cross_key_rejected += 1;
        }

        // fresh C1 replay: the RSU answers, but without the user's
        // ephemeral the attacker cannot close the handshake
        let (c1, session) = tb
            .card
            .consequent_login(&tb.pw, rsuid, &tb.clock, &mut tb.rng, &mut meters.user)
            .expect("honest C1");
        let (c2, pending) = tb
            .rsu
            .process_c1(&c1, &tb.clock, &mut tb.rng, &mut meters.rsu)
            .expect("fresh C1 accepted");
        let (c3, _sk_user) = session.process_c2(&c2, &mut meters.user).expect("honest C2");
        tb.rsu
            .process_c3(pending, &c3, &mut meters.rsu)
            .expect("honest C3");
        tb.clock.advance_by(1);
        if let Ok((_c2, replay_pending)) =
            tb.rsu.process_c1(&c1, &tb.clock, &mut tb.rng, &mut meters.rsu)
        {
            report.fresh_c1_answers += 1;
            // best the attacker can do: a guessed confirmation
            let mut forged = [0u8; 32];
            tb.rng.fill_bytes(&mut forged);
            let fake = C3 { r_i: Digest(forged) };
            if tb.rsu.process_c3(replay_pending, &fake, &mut meters.rsu).is_ok() {
                report.fresh_c1_completions += 1;
            }
        }

        // the forged confirmation revoked the CID; re-enroll so the
        // next iteration starts from a live pseudo-identity
        let renewed = run_first_login(&mut tb, None, &mut meters).expect("re-enrollment");
        sk = renewed.sk_user;
        cid = renewed.cid;
    }

    report
}
