//! Deterministic discrete-event simulation: vehicles, RSUs and the
//! mix-zone server exchange wire bytes over a channel that adversaries
//! can observe, replay, modify and inject into. A single seeded RNG
//! and a priority queue ordered by (time, sequence) make every run a
//! pure function of its config.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::addr::{rsu_handle_addr_request, vehicle_handle_addr_response,
    vehicle_request_address, AddressPool, AddressSplit, Ipv6Address};
use crate::clock::{SimClock, Timestamp};
use crate::crypto::{encode_fields, sym_encrypt};
use crate::metrics::OpCounters;
use crate::protocol::{user_begin_registration, user_finalize_registration, AddrReqMsg, Cid,
    MixZoneServerState, RsuConsequentPending, RsuFirstSession, RsuId, RsuPendingKey, RsuState,
    SessionKey, SmartCard, UserConsequentSession, UserFirstSession, WireMessage};

use super::config::{AdversarySpec, ScenarioConfig, SimError};
use super::report::{AdversaryOutcome, PhaseCounters, PoolSummary, ScenarioReport, SessionRecord};

const LATENCY_SECS: u64 = 1;
const ADVERSARY_VEHICLE: u32 = u32::MAX;
const MAX_EVENTS: u64 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SessionId {
    pub vehicle: u32,
    pub serial: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Vehicle(u32),
    Rsu(u32),
    Server,
    Adversary,
}

/// Application-layer beacon: a claimed source address plus an
/// authenticator that must verify under the session key owning that
/// address.
#[derive(Debug, Clone)]
pub struct Beacon {
    pub claimed_addr: Ipv6Address,
    pub body: Vec<u8>,
    pub auth: Vec<u8>,
}

/// Fabricated duplicate-address claim; the protocol never emits
/// these, so receivers reject them unconditionally.
#[derive(Debug, Clone)]
pub struct ConflictClaim {
    pub addr: Ipv6Address,
}

#[derive(Debug, Clone)]
enum Payload {
    Wire(Vec<u8>),
    Beacon(Beacon),
    Conflict(ConflictClaim),
}

/// Envelope metadata that survives into the handlers.
#[derive(Debug, Clone, Copy)]
struct Ctx {
    src: Endpoint,
    dst: Endpoint,
    sid: SessionId,
    injected: Option<&'static str>,
}

#[derive(Debug, Clone)]
struct Envelope {
    ctx: Ctx,
    payload: Payload,
}

#[derive(Debug)]
enum Event {
    StartFirstLogin { vehicle: u32 },
    StartConsequent { vehicle: u32 },
    StartAddrRequest { vehicle: u32 },
    Deliver(Envelope),
    ReplayInject(Envelope),
    ExhaustShot { shot: u32 },
    ForgeBeacon { shot: u32 },
    ControlBeacon { vehicle: u32 },
    FakeConflict { shot: u32 },
}

struct Scheduled {
    at: u64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Phase {
    Setup,
    Registration,
    FirstLogin,
    Consequent,
    Address,
}

impl Phase {
    fn name(self) -> &'static str {
        match self {
            Phase::Setup => "setup",
            Phase::Registration => "registration",
            Phase::FirstLogin => "first_login",
            Phase::Consequent => "consequent",
            Phase::Address => "address",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Role {
    User,
    Rsu,
    Server,
}

impl Role {
    fn name(self) -> &'static str {
        match self {
            Role::User => "user",
            Role::Rsu => "rsu",
            Role::Server => "server",
        }
    }
}

struct VehicleNode {
    card: SmartCard,
    pw: Vec<u8>,
    rsu: u32,
    serial: u32,
    first_session: Option<(SessionId, UserFirstSession)>,
    cons_session: Option<(SessionId, UserConsequentSession)>,
    sk: Option<SessionKey>,
    cid: Option<Cid>,
    current_sid: Option<SessionId>,
    address: Option<(Ipv6Address, Timestamp)>,
    consequent_left: u32,
    control_beacon_sent: bool,
}

struct RsuNode {
    state: RsuState,
    pool: AddressPool,
    first_sessions: BTreeMap<SessionId, RsuFirstSession>,
    pending_keys: BTreeMap<SessionId, RsuPendingKey>,
    cons_pendings: BTreeMap<SessionId, RsuConsequentPending>,
    session_keys: BTreeMap<SessionId, SessionKey>,
    addr_owner: BTreeMap<u128, SessionId>,
    allocations: u64,
}

struct Draft {
    index: u64,
    vehicle: u32,
    rsu: u32,
    kind: &'static str,
    completed: bool,
    sk_user: Option<SessionKey>,
    sk_match: Option<bool>,
    error: Option<String>,
    tampered: bool,
    closed: bool,
}

struct ReplayState {
    delay_secs: u64,
    budget_left: u32,
}

struct World {
    cfg: ScenarioConfig,
    rng: ChaCha20Rng,
    clock: SimClock,
    server: MixZoneServerState,
    rsus: Vec<RsuNode>,
    vehicles: Vec<VehicleNode>,
    heap: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
    attacker_serial: u32,
    meters: BTreeMap<(Phase, Role), OpCounters>,
    drafts: BTreeMap<SessionId, Draft>,
    rejections: BTreeMap<String, u64>,
    other_rejections: BTreeMap<String, u64>,
    adversary_rejections: BTreeMap<String, u64>,
    outcomes: BTreeMap<&'static str, AdversaryOutcome>,
    sessions_attempted: u64,
    sessions_completed: u64,
    key_agreement_successes: u64,
    identity_check_failures: u64,
    honest_failures: u64,
    addresses_allocated: u64,
    addresses_adopted: u64,
    leak_canary_hits: u64,
    control_beacons_accepted: u64,
    longterm_secrets: Vec<[u8; 32]>,
    session_secrets: BTreeMap<SessionId, Vec<[u8; 32]>>,
    flipped_sessions: BTreeSet<SessionId>,
    replay: Option<ReplayState>,
    bitflip_left: u32,
    attacker_key: [u8; 32],
}

/// Runs one scenario to completion and returns its report.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport, SimError> {
    cfg.validate()?;
    let mut world = World::build(cfg.clone())?;
    world.run_loop();
    Ok(world.assemble())
}

impl World {
    fn build(cfg: ScenarioConfig) -> Result<Self, SimError> {
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        let clock = SimClock::starting_at(0);
        let mut meters: BTreeMap<(Phase, Role), OpCounters> = BTreeMap::new();

        let mut setup_meter = OpCounters::new();
        let mut server = MixZoneServerState::setup(cfg.prime.value(), &mut rng, &mut setup_meter)
            .map_err(|e| SimError::Config(format!("server setup: {e}")))?;
        meters.insert((Phase::Setup, Role::Server), setup_meter);

        let split = AddressSplit::new(cfg.split_i)
            .map_err(|e| SimError::Config(format!("split: {e}")))?;

        let mut rsus = Vec::with_capacity(cfg.num_rsus as usize);
        for j in 0..cfg.num_rsus {
            let rsuid = RsuId::new(format!("RSU-{j:04}").as_bytes())
                .expect("generated rsu ids are short and non-empty");
            let meter = meters.entry((Phase::Setup, Role::Server)).or_default();
            let state = server.provision_rsu(rsuid, cfg.delta_window_secs, meter);
            let prefix = (0x2001_0db8u128 << (split.rsu_bits() as u32 - 32)) | j as u128;
            let pool = AddressPool::new(prefix, split, cfg.lease_secs)
                .map_err(|e| SimError::Config(format!("pool: {e}")))?;
            rsus.push(RsuNode {
                state,
                pool,
                first_sessions: BTreeMap::new(),
                pending_keys: BTreeMap::new(),
                cons_pendings: BTreeMap::new(),
                session_keys: BTreeMap::new(),
                addr_owner: BTreeMap::new(),
                allocations: 0,
            });
        }

        let mut vehicles = Vec::with_capacity(cfg.num_vehicles as usize);
        for v in 0..cfg.num_vehicles {
            let id = format!("VEH-{v:05}");
            let mut pw = vec![0u8; 12];
            rng.fill_bytes(&mut pw);
            let mut st = vec![0u8; 32];
            rng.fill_bytes(&mut st);

            let user_meter = meters.entry((Phase::Registration, Role::User)).or_default();
            let (req, pending) =
                user_begin_registration(id.as_bytes(), &pw, &st, &mut rng, user_meter)
                    .map_err(|e| SimError::Config(format!("registration: {e}")))?;
            let server_meter = meters.entry((Phase::Registration, Role::Server)).or_default();
            let resp = server
                .complete_registration(&req, &mut rng, server_meter)
                .map_err(|e| SimError::Config(format!("registration: {e}")))?;
            let user_meter = meters.entry((Phase::Registration, Role::User)).or_default();
            let card = user_finalize_registration(&resp, &pending, &pw, user_meter)
                .map_err(|e| SimError::Config(format!("registration: {e}")))?;

            vehicles.push(VehicleNode {
                card,
                pw,
                rsu: v % cfg.num_rsus,
                serial: 0,
                first_session: None,
                cons_session: None,
                sk: None,
                cid: None,
                current_sid: None,
                address: None,
                consequent_left: cfg.sessions_per_vehicle,
                control_beacon_sent: false,
            });
        }

        let longterm_secrets = server.secret_patterns();
        let mut attacker_key = [0u8; 32];
        rng.fill_bytes(&mut attacker_key);

        let mut world = World {
            cfg,
            rng,
            clock,
            server,
            rsus,
            vehicles,
            heap: BinaryHeap::new(),
            seq: 0,
            attacker_serial: 0,
            meters,
            drafts: BTreeMap::new(),
            rejections: BTreeMap::new(),
            other_rejections: BTreeMap::new(),
            adversary_rejections: BTreeMap::new(),
            outcomes: BTreeMap::new(),
            sessions_attempted: 0,
            sessions_completed: 0,
            key_agreement_successes: 0,
            identity_check_failures: 0,
            honest_failures: 0,
            addresses_allocated: 0,
            addresses_adopted: 0,
            leak_canary_hits: 0,
            control_beacons_accepted: 0,
            longterm_secrets,
            session_secrets: BTreeMap::new(),
            flipped_sessions: BTreeSet::new(),
            replay: None,
            bitflip_left: 0,
            attacker_key,
        };

        for spec in world.cfg.adversaries.clone() {
            world.outcomes.entry(spec.kind_name()).or_default();
            match spec {
                AdversarySpec::Replay { delay_secs, budget } => {
                    world.replay = Some(ReplayState { delay_secs, budget_left: budget });
                }
                AdversarySpec::Exhaustion { requests } => {
                    for k in 0..requests {
                        let at = 15 + (k as u64) / 50;
                        world.schedule(at, Event::ExhaustShot { shot: k });
                    }
                }
                AdversarySpec::ForgeAddress { beacons } => {
                    for k in 0..beacons {
                        world.schedule(40 + 2 * k as u64, Event::ForgeBeacon { shot: k });
                    }
                }
                AdversarySpec::FakeConflict { claims } => {
                    for k in 0..claims {
                        world.schedule(45 + 2 * k as u64, Event::FakeConflict { shot: k });
                    }
                }
                AdversarySpec::BitFlip { trials } => {
                    world.bitflip_left = trials;
                }
            }
        }

        for v in 0..world.vehicles.len() as u32 {
            world.schedule(10 + v as u64, Event::StartFirstLogin { vehicle: v });
        }

        Ok(world)
    }

    fn schedule(&mut self, at: u64, event: Event) {
        let seq = self.seq;
        self.seq += 1;
        self.heap.push(Reverse(Scheduled { at, seq, event }));
    }

    fn run_loop(&mut self) {
        let mut processed: u64 = 0;
        while let Some(Reverse(item)) = self.heap.pop() {
            processed += 1;
            assert!(processed < MAX_EVENTS, "event budget exceeded");
            self.clock.advance_to(Timestamp(item.at));
            self.handle(item.event);
        }
    }

    fn attacker_sid(&mut self) -> SessionId {
        let serial = self.attacker_serial;
        self.attacker_serial += 1;
        SessionId { vehicle: ADVERSARY_VEHICLE, serial }
    }

    fn user_endpoint(&self, sid: SessionId) -> Endpoint {
        if (sid.vehicle as usize) < self.vehicles.len() {
            Endpoint::Vehicle(sid.vehicle)
        } else {
            Endpoint::Adversary
        }
    }

    /// Serializes and ships a protocol message: leak-canary scan,
    /// replay observation, optional adversarial bit flip, then a
    /// delivery event after the channel latency.
    fn send_wire(&mut self, src: Endpoint, dst: Endpoint, sid: SessionId, msg: &WireMessage,
        injected: Option<&'static str>)
    {
        let mut bytes = msg.encode();
        self.leak_scan(sid, &bytes);

        if injected.is_none() {
            self.observe_for_replay(dst, sid, msg, &bytes);
            if self.bitflip_left > 0 {
                self.bitflip_left -= 1;
                let bit = (self.rng.next_u64() as usize) % (bytes.len() * 8);
                bytes[bit / 8] ^= 1 << (bit % 8);
                self.flipped_sessions.insert(sid);
                if let Some(draft) = self.drafts.get_mut(&sid) {
                    draft.tampered = true;
                }
                if let Some(o) = self.outcomes.get_mut("bitflip") {
                    o.attempts += 1;
                }
            }
        }

        let env = Envelope {
            ctx: Ctx { src, dst, sid, injected },
            payload: Payload::Wire(bytes),
        };
        self.schedule(self.clock.now().secs() + LATENCY_SECS, Event::Deliver(env));
    }

    /// Checks an outgoing frame for any big-endian encoding of a live
    /// secret: long-term keys and this session's ephemerals.
    fn leak_scan(&mut self, sid: SessionId, bytes: &[u8]) {
        let mut hits = 0u64;
        for pat in &self.longterm_secrets {
            if bytes.windows(32).any(|w| w == pat) {
                hits += 1;
            }
        }
        if let Some(secrets) = self.session_secrets.get(&sid) {
            for pat in secrets {
                if bytes.windows(32).any(|w| w == pat) {
                    hits += 1;
                }
            }
        }
        self.leak_canary_hits += hits;
    }

    fn push_session_secret(&mut self, sid: SessionId, pat: [u8; 32]) {
        self.session_secrets.entry(sid).or_default().push(pat);
    }

    /// Replay adversary tap: record M1/C1/AddrReq/AddrResp and
    /// schedule the scripted re-injections.
    fn observe_for_replay(&mut self, dst: Endpoint, sid: SessionId, msg: &WireMessage,
        bytes: &[u8])
    {
        let (delay, budget_ok) = match &self.replay {
            Some(r) if r.budget_left > 0 => (r.delay_secs, true),
            _ => (0, false),
        };
        if !budget_ok {
            return;
        }
        let now = self.clock.now().secs();
        let spend = |w: &mut World| {
            if let Some(r) = &mut w.replay {
                r.budget_left = r.budget_left.saturating_sub(1);
            }
        };
        match msg {
            WireMessage::M1(_) => {
                spend(self);
                let sid_new = self.attacker_sid();
                self.inject_at(now + delay, dst, sid_new, bytes.to_vec());
            }
            WireMessage::C1(_) => {
                spend(self);
                // a fresh copy almost immediately, and a stale one
                let sid_fresh = self.attacker_sid();
                self.inject_at(now + 3, dst, sid_fresh, bytes.to_vec());
                let sid_stale = self.attacker_sid();
                self.inject_at(now + delay, dst, sid_stale, bytes.to_vec());
            }
            WireMessage::AddrReq(_) => {
                spend(self);
                // keep the victim's flow id so the RSU tries the real
                // session key and fails on the stale timestamp
                self.inject_at(now + delay, dst, sid, bytes.to_vec());
            }
            WireMessage::AddrResp(_) => {
                if self.vehicles.len() >= 2 && sid.vehicle != ADVERSARY_VEHICLE {
                    spend(self);
                    let other = (sid.vehicle + 1) % self.vehicles.len() as u32;
                    self.inject_at(now + 2, Endpoint::Vehicle(other), sid, bytes.to_vec());
                }
            }
            _ => {}
        }
    }

    fn inject_at(&mut self, at: u64, dst: Endpoint, sid: SessionId, bytes: Vec<u8>) {
        let env = Envelope {
            ctx: Ctx { src: Endpoint::Adversary, dst, sid, injected: Some("replay") },
            payload: Payload::Wire(bytes),
        };
        self.schedule(at, Event::ReplayInject(env));
    }

    fn adversary_attempt(&mut self, kind: &'static str) {
        self.outcomes.entry(kind).or_default().attempts += 1;
    }

    fn adversary_success(&mut self, kind: &'static str) {
        self.outcomes.entry(kind).or_default().succeeded += 1;
    }

    fn count(map: &mut BTreeMap<String, u64>, kind: &str) {
        *map.entry(kind.to_string()).or_insert(0) += 1;
    }

    /// Routes a failed step to the right ledger: adversary traffic is
    /// merely blocked, tampered honest traffic is a recorded
    /// rejection, and untouched honest traffic failing is a red flag.
    fn on_step_error(&mut self, ctx: Ctx, handshake: bool, kind: &str) {
        if ctx.injected.is_some() {
            Self::count(&mut self.adversary_rejections, kind);
            return;
        }
        let tampered = self.flipped_sessions.contains(&ctx.sid);
        if handshake {
            Self::count(&mut self.rejections, kind);
            if let Some(draft) = self.drafts.get_mut(&ctx.sid) {
                if !draft.closed {
                    draft.error = Some(kind.to_string());
                    draft.closed = true;
                }
            }
            self.abort_session(ctx.sid);
        } else {
            Self::count(&mut self.other_rejections, kind);
        }
        if !tampered {
            self.honest_failures += 1;
        }
    }

    /// Drops any per-session state still held for `sid`.
    fn abort_session(&mut self, sid: SessionId) {
        if (sid.vehicle as usize) < self.vehicles.len() {
            let vehicle = &mut self.vehicles[sid.vehicle as usize];
            if matches!(&vehicle.first_session, Some((s, _)) if *s == sid) {
                vehicle.first_session = None;
            }
            if matches!(&vehicle.cons_session, Some((s, _)) if *s == sid) {
                vehicle.cons_session = None;
            }
        }
        for rsu in &mut self.rsus {
            rsu.first_sessions.remove(&sid);
            rsu.pending_keys.remove(&sid);
            rsu.cons_pendings.remove(&sid);
        }
    }

    fn complete_session(&mut self, sid: SessionId, sk_rsu: SessionKey,
        injected: Option<&'static str>)
    {
        if let Some(kind) = injected {
            // an adversary-driven envelope closed a handshake
            self.adversary_success(kind);
            return;
        }
        self.sessions_completed += 1;
        let mut sk_match = None;
        if let Some(draft) = self.drafts.get_mut(&sid) {
            draft.completed = true;
            draft.closed = true;
            sk_match = draft.sk_user.map(|sk| sk == sk_rsu);
            draft.sk_match = sk_match;
        }
        if sk_match == Some(true) {
            self.key_agreement_successes += 1;
        }
        if self.flipped_sessions.contains(&sid) {
            // completion despite tampering would mean the flip slipped
            // through every check
            self.adversary_success("bitflip");
        }
        if (sid.vehicle as usize) < self.vehicles.len() {
            self.vehicles[sid.vehicle as usize].current_sid = Some(sid);
            self.schedule(
                self.clock.now().secs() + LATENCY_SECS,
                Event::StartAddrRequest { vehicle: sid.vehicle },
            );
        }
    }

    fn handle(&mut self, event: Event) {
        match event {
            Event::StartFirstLogin { vehicle } => self.start_first_login(vehicle),
            Event::StartConsequent { vehicle } => self.start_consequent(vehicle),
            Event::StartAddrRequest { vehicle } => self.start_addr_request(vehicle),
            Event::Deliver(env) => self.deliver(env),
            Event::ReplayInject(env) => {
                self.adversary_attempt("replay");
                self.deliver(env);
            }
            Event::ExhaustShot { shot } => self.exhaust_shot(shot),
            Event::ForgeBeacon { shot } => self.forge_beacon(shot),
            Event::ControlBeacon { vehicle } => self.control_beacon(vehicle),
            Event::FakeConflict { shot } => self.fake_conflict(shot),
        }
    }

    fn next_sid(&mut self, vehicle: u32) -> SessionId {
        let node = &mut self.vehicles[vehicle as usize];
        let sid = SessionId { vehicle, serial: node.serial };
        node.serial += 1;
        sid
    }

    fn open_draft(&mut self, sid: SessionId, kind: &'static str) {
        let index = self.sessions_attempted;
        self.sessions_attempted += 1;
        let rsu = self.vehicles[sid.vehicle as usize].rsu;
        self.drafts.insert(sid, Draft {
            index,
            vehicle: sid.vehicle,
            rsu,
            kind,
            completed: false,
            sk_user: None,
            sk_match: None,
            error: None,
            tampered: false,
            closed: false,
        });
    }

    fn start_first_login(&mut self, vehicle: u32) {
        let sid = self.next_sid(vehicle);
        self.open_draft(sid, "first");
        let rsu_index = self.vehicles[vehicle as usize].rsu;
        let rsuid = self.rsus[rsu_index as usize].state.rsuid();
        let meter = self.meters.entry((Phase::FirstLogin, Role::User)).or_default();
        let node = &self.vehicles[vehicle as usize];
        let result = node.card.first_login(&node.pw, rsuid, &self.clock, &mut self.rng, meter);
        match result {
            Ok((m1, session)) => {
                self.push_session_secret(sid, session.secret_pattern());
                self.vehicles[vehicle as usize].first_session = Some((sid, session));
                self.send_wire(
                    Endpoint::Vehicle(vehicle),
                    Endpoint::Rsu(rsu_index),
                    sid,
                    &WireMessage::M1(m1),
                    None,
                );
            }
            Err(e) => {
                let ctx = Ctx {
                    src: Endpoint::Vehicle(vehicle),
                    dst: Endpoint::Vehicle(vehicle),
                    sid,
                    injected: None,
                };
                self.on_step_error(ctx, true, e.kind());
            }
        }
    }

    fn start_consequent(&mut self, vehicle: u32) {
        let sid = self.next_sid(vehicle);
        self.open_draft(sid, "consequent");
        let rsu_index = self.vehicles[vehicle as usize].rsu;
        let rsuid = self.rsus[rsu_index as usize].state.rsuid();
        let meter = self.meters.entry((Phase::Consequent, Role::User)).or_default();
        let node = &self.vehicles[vehicle as usize];
        let result =
            node.card.consequent_login(&node.pw, rsuid, &self.clock, &mut self.rng, meter);
        match result {
            Ok((c1, session)) => {
                self.push_session_secret(sid, session.secret_pattern());
                self.vehicles[vehicle as usize].cons_session = Some((sid, session));
                self.send_wire(
                    Endpoint::Vehicle(vehicle),
                    Endpoint::Rsu(rsu_index),
                    sid,
                    &WireMessage::C1(c1),
                    None,
                );
            }
            Err(e) => {
                let ctx = Ctx {
                    src: Endpoint::Vehicle(vehicle),
                    dst: Endpoint::Vehicle(vehicle),
                    sid,
                    injected: None,
                };
                self.on_step_error(ctx, true, e.kind());
            }
        }
    }

    fn start_addr_request(&mut self, vehicle: u32) {
        let node = &self.vehicles[vehicle as usize];
        let (Some(sk), Some(cid), Some(sid)) = (node.sk, node.cid, node.current_sid) else {
            return;
        };
        let rsu_index = node.rsu;
        let meter = self.meters.entry((Phase::Address, Role::User)).or_default();
        let req = vehicle_request_address(&sk, cid, &self.clock, &mut self.rng, meter);
        self.send_wire(
            Endpoint::Vehicle(vehicle),
            Endpoint::Rsu(rsu_index),
            sid,
            &WireMessage::AddrReq(req),
            None,
        );
    }

    fn deliver(&mut self, env: Envelope) {
        let Envelope { ctx, payload } = env;
        match payload {
            Payload::Wire(bytes) => match WireMessage::decode(&bytes) {
                Ok(msg) => self.dispatch(ctx, msg),
                Err(_) => {
                    let handshake = !matches!(ctx.dst, Endpoint::Adversary);
                    self.on_step_error(ctx, handshake, "decode_error");
                }
            },
            Payload::Beacon(b) => self.on_beacon(ctx, b),
            Payload::Conflict(c) => self.on_conflict(ctx, c),
        }
    }

    fn dispatch(&mut self, ctx: Ctx, msg: WireMessage) {
        let sid = ctx.sid;
        match (ctx.dst, msg) {
            (Endpoint::Rsu(j), WireMessage::M1(m1)) => {
                let meter = self.meters.entry((Phase::FirstLogin, Role::Rsu)).or_default();
                let rsu = &mut self.rsus[j as usize];
                match rsu.state.process_m1(&m1, &self.clock, &mut self.rng, meter) {
                    Ok((m2, session)) => {
                        let pat = session.secret_pattern();
                        rsu.first_sessions.insert(sid, session);
                        self.push_session_secret(sid, pat);
                        self.send_wire(ctx.dst, Endpoint::Server, sid,
                            &WireMessage::M2(m2), ctx.injected);
                    }
                    Err(e) => self.on_step_error(ctx, true, e.kind()),
                }
            }
            (Endpoint::Server, WireMessage::M2(m2)) => {
                let Endpoint::Rsu(j) = ctx.src else {
                    self.on_step_error(ctx, true, "unexpected_message");
                    return;
                };
                let meter = self.meters.entry((Phase::FirstLogin, Role::Server)).or_default();
                match self.server.process_m2(&m2, meter) {
                    Ok((m3, audit)) => {
                        let rsu_ok = audit.rsu == self.rsus[j as usize].state.rsuid();
                        let user_ok = (sid.vehicle as usize) < self.vehicles.len()
                            && audit.user == self.vehicles[sid.vehicle as usize].card.id();
                        if ctx.injected.is_none() && (!rsu_ok || !user_ok) {
                            self.identity_check_failures += 1;
                        }
                        self.send_wire(Endpoint::Server, ctx.src, sid,
                            &WireMessage::M3(m3), ctx.injected);
                    }
                    Err(e) => self.on_step_error(ctx, true, e.kind()),
                }
            }
            (Endpoint::Rsu(j), WireMessage::M3(m3)) => {
                let rsu = &mut self.rsus[j as usize];
                let Some(session) = rsu.first_sessions.remove(&sid) else {
                    self.on_step_error(ctx, true, "unexpected_message");
                    return;
                };
                let meter = self.meters.entry((Phase::FirstLogin, Role::Rsu)).or_default();
                let rsu = &mut self.rsus[j as usize];
                match rsu.state.process_m3(session, &m3, &self.clock, &mut self.rng, meter) {
                    Ok((m4, pending)) => {
                        rsu.pending_keys.insert(sid, pending);
                        let target = self.user_endpoint(sid);
                        self.send_wire(ctx.dst, target, sid, &WireMessage::M4(m4), ctx.injected);
                    }
                    Err(e) => self.on_step_error(ctx, true, e.kind()),
                }
            }
            (Endpoint::Vehicle(v), WireMessage::M4(m4)) => {
                let node = &mut self.vehicles[v as usize];
                let session = match node.first_session.take() {
                    Some((s, session)) if s == sid => session,
                    other => {
                        node.first_session = other;
                        self.on_step_error(ctx, true, "unexpected_message");
                        return;
                    }
                };
                let meter = self.meters.entry((Phase::FirstLogin, Role::User)).or_default();
                let node = &mut self.vehicles[v as usize];
                let pw = node.pw.clone();
                match node.card.process_m4(&pw, session, &m4, meter) {
                    Ok((m5, sk)) => {
                        node.sk = Some(sk);
                        node.cid = Some(m4.cid);
                        let rsu_index = node.rsu;
                        if let Some(draft) = self.drafts.get_mut(&sid) {
                            draft.sk_user = Some(sk);
                        }
                        self.send_wire(Endpoint::Vehicle(v), Endpoint::Rsu(rsu_index), sid,
                            &WireMessage::M5(m5), ctx.injected);
                    }
                    Err(e) => self.on_step_error(ctx, true, e.kind()),
                }
            }
            (Endpoint::Rsu(j), WireMessage::M5(m5)) => {
                let rsu = &mut self.rsus[j as usize];
                let Some(pending) = rsu.pending_keys.remove(&sid) else {
                    self.on_step_error(ctx, true, "unexpected_message");
                    return;
                };
                let meter = self.meters.entry((Phase::FirstLogin, Role::Rsu)).or_default();
                let rsu = &mut self.rsus[j as usize];
                match rsu.state.process_m5(pending, &m5, meter) {
                    Ok(sk) => {
                        rsu.session_keys.insert(sid, sk);
                        self.complete_session(sid, sk, ctx.injected);
                    }
                    Err(e) => self.on_step_error(ctx, true, e.kind()),
                }
            }
            (Endpoint::Rsu(j), WireMessage::C1(c1)) => {
                let meter = self.meters.entry((Phase::Consequent, Role::Rsu)).or_default();
                let rsu = &mut self.rsus[j as usize];
                match rsu.state.process_c1(&c1, &self.clock, &mut self.rng, meter) {
                    Ok((c2, pending)) => {
                        let pat = pending.secret_pattern();
                        rsu.cons_pendings.insert(sid, pending);
                        self.push_session_secret(sid, pat);
                        let target = self.user_endpoint(sid);
                        self.send_wire(ctx.dst, target, sid, &WireMessage::C2(c2), ctx.injected);
                    }
                    Err(e) => self.on_step_error(ctx, true, e.kind()),
                }
            }
            (Endpoint::Vehicle(v), WireMessage::C2(c2)) => {
                let node = &mut self.vehicles[v as usize];
                let session = match node.cons_session.take() {
                    Some((s, session)) if s == sid => session,
                    other => {
                        node.cons_session = other;
                        self.on_step_error(ctx, true, "unexpected_message");
                        return;
                    }
                };
                let meter = self.meters.entry((Phase::Consequent, Role::User)).or_default();
                match session.process_c2(&c2, meter) {
                    Ok((c3, sk)) => {
                        let node = &mut self.vehicles[v as usize];
                        node.sk = Some(sk);
                        let rsu_index = node.rsu;
                        if let Some(draft) = self.drafts.get_mut(&sid) {
                            draft.sk_user = Some(sk);
                        }
                        self.send_wire(Endpoint::Vehicle(v), Endpoint::Rsu(rsu_index), sid,
                            &WireMessage::C3(c3), ctx.injected);
                    }
                    Err(e) => self.on_step_error(ctx, true, e.kind()),
                }
            }
            (Endpoint::Rsu(j), WireMessage::C3(c3)) => {
                let rsu = &mut self.rsus[j as usize];
                let Some(pending) = rsu.cons_pendings.remove(&sid) else {
                    self.on_step_error(ctx, true, "unexpected_message");
                    return;
                };
                let meter = self.meters.entry((Phase::Consequent, Role::Rsu)).or_default();
                let rsu = &mut self.rsus[j as usize];
                match rsu.state.process_c3(pending, &c3, meter) {
                    Ok(sk) => {
                        rsu.session_keys.insert(sid, sk);
                        if ctx.injected.is_none() && (sid.vehicle as usize) < self.vehicles.len()
                        {
                            let node = &mut self.vehicles[sid.vehicle as usize];
                            if node.consequent_left > 0 {
                                node.consequent_left -= 1;
                            }
                        }
                        self.complete_session(sid, sk, ctx.injected);
                    }
                    Err(e) => self.on_step_error(ctx, true, e.kind()),
                }
            }
            (Endpoint::Rsu(j), WireMessage::AddrReq(req)) => {
                let rsu = &mut self.rsus[j as usize];
                let Some(sk) = rsu.session_keys.get(&sid).copied() else {
                    self.on_step_error(ctx, false, "no_session_key");
                    return;
                };
                let meter = self.meters.entry((Phase::Address, Role::Rsu)).or_default();
                let rsu = &mut self.rsus[j as usize];
                match rsu_handle_addr_request(
                    &rsu.state, &mut rsu.pool, &sk, &req, &self.clock, &mut self.rng, meter,
                ) {
                    Ok((resp, addr, _expiry)) => {
                        rsu.addr_owner.insert(addr.0, sid);
                        rsu.allocations += 1;
                        self.addresses_allocated += 1;
                        if let Some(kind) = ctx.injected {
                            // an injected request obtained a lease
                            self.adversary_success(kind);
                        }
                        let target = self.user_endpoint(sid);
                        self.send_wire(ctx.dst, target, sid,
                            &WireMessage::AddrResp(resp), ctx.injected);
                    }
                    Err(e) => self.on_step_error(ctx, false, e.kind()),
                }
            }
            (Endpoint::Vehicle(v), WireMessage::AddrResp(resp)) => {
                let Some(sk) = self.vehicles[v as usize].sk else {
                    self.on_step_error(ctx, false, "no_session_key");
                    return;
                };
                let meter = self.meters.entry((Phase::Address, Role::User)).or_default();
                let delta = self.cfg.delta_window_secs;
                match vehicle_handle_addr_response(&sk, &resp, delta, &self.clock, meter) {
                    Ok((addr, expiry)) => {
                        if let Some(kind) = ctx.injected {
                            // a replayed or foreign response slipped
                            // through the session key check
                            self.adversary_success(kind);
                            return;
                        }
                        let node = &mut self.vehicles[v as usize];
                        node.address = Some((addr, expiry));
                        self.addresses_adopted += 1;
                        let wants_control = self.outcomes.contains_key("forge_address")
                            && !node.control_beacon_sent;
                        let has_consequent = node.consequent_left > 0;
                        if wants_control {
                            node.control_beacon_sent = true;
                            self.schedule(
                                self.clock.now().secs() + 2,
                                Event::ControlBeacon { vehicle: v },
                            );
                        }
                        if has_consequent {
                            self.schedule(
                                self.clock.now().secs() + LATENCY_SECS,
                                Event::StartConsequent { vehicle: v },
                            );
                        }
                    }
                    Err(e) => self.on_step_error(ctx, false, e.kind()),
                }
            }
            (Endpoint::Adversary, _) => {
                // responses routed back to an injected flow die here
                Self::count(&mut self.adversary_rejections, "response_to_adversary_dropped");
            }
            _ => {
                let handshake = !matches!(ctx.dst, Endpoint::Adversary);
                self.on_step_error(ctx, handshake, "unexpected_message");
            }
        }
    }

    /// RSU-side beacon verification: the claimed address must map to a
    /// session whose key authenticates the beacon contents freshly.
    fn on_beacon(&mut self, ctx: Ctx, beacon: Beacon) {
        let Endpoint::Rsu(j) = ctx.dst else {
            Self::count(&mut self.adversary_rejections, "beacon_wrong_target");
            return;
        };
        match self.verify_beacon(j, &beacon) {
            Ok(()) => {
                if let Some(kind) = ctx.injected {
                    self.adversary_success(kind);
                } else {
                    self.control_beacons_accepted += 1;
                }
            }
            Err(kind) => {
                if ctx.injected.is_some() {
                    Self::count(&mut self.adversary_rejections, kind);
                } else {
                    Self::count(&mut self.other_rejections, kind);
                }
            }
        }
    }

    fn verify_beacon(&mut self, j: u32, beacon: &Beacon) -> Result<(), &'static str> {
        let rsu = &self.rsus[j as usize];
        let Some(owner_sid) = rsu.addr_owner.get(&beacon.claimed_addr.0).copied() else {
            return Err("beacon_unknown_address");
        };
        let Some(sk) = rsu.session_keys.get(&owner_sid).copied() else {
            return Err("beacon_no_session");
        };
        let meter = self.meters.entry((Phase::Address, Role::Rsu)).or_default();
        let Ok(inner) = meter.sym_decrypt(sk.as_bytes(), &beacon.auth) else {
            return Err("beacon_auth_failure");
        };
        let Ok(fields) = crate::crypto::decode_fields(&inner) else {
            return Err("beacon_malformed");
        };
        if fields.len() != 3 || fields[0].len() != 16 || fields[2].len() != 8 {
            return Err("beacon_malformed");
        }
        let addr = Ipv6Address::from_bytes(fields[0].as_slice().try_into().expect("16 bytes"));
        let ts = Timestamp::from_bytes(fields[2].as_slice().try_into().expect("8 bytes"));
        if addr != beacon.claimed_addr || fields[1] != beacon.body {
            return Err("beacon_binding_mismatch");
        }
        if self.clock.now().abs_diff(ts) > self.cfg.delta_window_secs {
            return Err("beacon_stale");
        }
        Ok(())
    }

    fn on_conflict(&mut self, ctx: Ctx, _claim: ConflictClaim) {
        // the protocol never emits conflict messages, so every one
        // received is bogus by definition
        if ctx.injected.is_some() {
            Self::count(&mut self.adversary_rejections, "conflict_always_rejected");
        } else {
            Self::count(&mut self.other_rejections, "conflict_always_rejected");
        }
    }

    /// One unauthenticated address request: garbage bytes or a blob
    /// under the attacker's own key, aimed at a real flow when one
    /// exists.
    fn exhaust_shot(&mut self, shot: u32) {
        self.adversary_attempt("exhaustion");
        let j = shot % self.cfg.num_rsus;
        let blob = if shot % 2 == 0 {
            let mut b = vec![0u8; 44];
            self.rng.fill_bytes(&mut b);
            b
        } else {
            let inner = encode_fields(&[&[0u8; 16], &self.clock.now().to_bytes()])
                .expect("short fields");
            sym_encrypt(&self.attacker_key, &inner, &mut self.rng)
        };
        let sid = match self.rsus[j as usize].session_keys.keys().next().copied() {
            Some(sid) if shot % 2 == 1 => sid,
            _ => self.attacker_sid(),
        };
        let env = Envelope {
            ctx: Ctx {
                src: Endpoint::Adversary,
                dst: Endpoint::Rsu(j),
                sid,
                injected: Some("exhaustion"),
            },
            payload: Payload::Wire(WireMessage::AddrReq(AddrReqMsg { blob }).encode()),
        };
        self.schedule(self.clock.now().secs() + LATENCY_SECS, Event::Deliver(env));
    }

    /// Emits a beacon claiming some vehicle's address without its key.
    fn forge_beacon(&mut self, shot: u32) {
        self.adversary_attempt("forge_address");
        let n = self.vehicles.len() as u32;
        let mut target = None;
        for k in 0..n {
            let v = (shot + k) % n;
            if let Some((addr, _)) = self.vehicles[v as usize].address {
                target = Some((v, addr));
                break;
            }
        }
        let (rsu, addr) = match target {
            Some((v, addr)) => (self.vehicles[v as usize].rsu, addr),
            None => (0, Ipv6Address(0x2001_0db8_dead_beef_0000_0000_0000_0001)),
        };
        let mut auth = vec![0u8; 60];
        self.rng.fill_bytes(&mut auth);
        let beacon = Beacon { claimed_addr: addr, body: b"road event".to_vec(), auth };
        let sid = self.attacker_sid();
        let env = Envelope {
            ctx: Ctx {
                src: Endpoint::Adversary,
                dst: Endpoint::Rsu(rsu),
                sid,
                injected: Some("forge_address"),
            },
            payload: Payload::Beacon(beacon),
        };
        self.schedule(self.clock.now().secs() + LATENCY_SECS, Event::Deliver(env));
    }

    /// Sanity control: a legitimately authenticated vehicle beacons
    /// its own address, which must be accepted.
    fn control_beacon(&mut self, vehicle: u32) {
        let node = &self.vehicles[vehicle as usize];
        let (Some(sk), Some((addr, _)), Some(sid)) = (node.sk, node.address, node.current_sid)
        else {
            return;
        };
        let rsu = node.rsu;
        let body = b"road event".to_vec();
        let inner = encode_fields(&[&addr.to_bytes(), &body, &self.clock.now().to_bytes()])
            .expect("short fields");
        let meter = self.meters.entry((Phase::Address, Role::User)).or_default();
        let auth = meter.sym_encrypt(sk.as_bytes(), &inner, &mut self.rng);
        let env = Envelope {
            ctx: Ctx {
                src: Endpoint::Vehicle(vehicle),
                dst: Endpoint::Rsu(rsu),
                sid,
                injected: None,
            },
            payload: Payload::Beacon(Beacon { claimed_addr: addr, body, auth }),
        };
        self.schedule(self.clock.now().secs() + LATENCY_SECS, Event::Deliver(env));
    }

    fn fake_conflict(&mut self, shot: u32) {
        self.adversary_attempt("fake_conflict");
        let n = self.vehicles.len() as u32;
        let fallback = Ipv6Address(0x2001_0db8_0000_0000_0000_0000_0000_ffff);
        let (addr, dst) = if n > 0 {
            let v = shot % n;
            (
                self.vehicles[v as usize].address.map(|(a, _)| a).unwrap_or(fallback),
                Endpoint::Vehicle(v),
            )
        } else {
            (fallback, Endpoint::Rsu(shot % self.cfg.num_rsus))
        };
        let sid = self.attacker_sid();
        let env = Envelope {
            ctx: Ctx {
                src: Endpoint::Adversary,
                dst,
                sid,
                injected: Some("fake_conflict"),
            },
            payload: Payload::Conflict(ConflictClaim { addr }),
        };
        self.schedule(self.clock.now().secs() + LATENCY_SECS, Event::Deliver(env));
    }

    fn assemble(mut self) -> ScenarioReport {
        let mut outcomes = BTreeMap::new();
        for (kind, mut o) in std::mem::take(&mut self.outcomes) {
            o.blocked = o.attempts.saturating_sub(o.succeeded);
            outcomes.insert(kind.to_string(), o);
        }

        let mut op_counters: BTreeMap<String, PhaseCounters> = BTreeMap::new();
        for ((phase, role), counters) in &self.meters {
            let entry = op_counters.entry(phase.name().to_string()).or_default();
            entry.roles.insert(role.name().to_string(), *counters);
            entry.total.merge(counters);
        }

        // global duplicate scan over unexpired leases
        let now = self.clock.now();
        let mut live: Vec<Ipv6Address> = Vec::new();
        let mut pools = Vec::new();
        for (j, rsu) in self.rsus.iter().enumerate() {
            let addrs = rsu.pool.live_addresses(now);
            pools.push(PoolSummary {
                rsu: j as u32,
                live_leases: addrs.len() as u64,
                total_allocations: rsu.allocations,
            });
            live.extend(addrs);
        }
        live.sort_unstable();
        let duplicate_addresses = live.windows(2).filter(|w| w[0] == w[1]).count() as u64;

        let mut sessions: Vec<SessionRecord> = self
            .drafts
            .values()
            .map(|d| SessionRecord {
                index: d.index,
                vehicle: d.vehicle,
                rsu: d.rsu,
                kind: d.kind.to_string(),
                completed: d.completed,
                sk_match: d.sk_match,
                error: d.error.clone(),
                tampered: d.tampered,
            })
            .collect();
        sessions.sort_by_key(|s| s.index);

        ScenarioReport {
            config: self.cfg.clone(),
            sessions_attempted: self.sessions_attempted,
            sessions_completed: self.sessions_completed,
            key_agreement_successes: self.key_agreement_successes,
            identity_check_failures: self.identity_check_failures,
            honest_failures: self.honest_failures,
            rejections: self.rejections,
            other_rejections: self.other_rejections,
            adversary_rejections: self.adversary_rejections,
            adversary_outcomes: outcomes,
            op_counters,
            addresses_allocated: self.addresses_allocated,
            addresses_adopted: self.addresses_adopted,
            duplicate_addresses,
            leak_canary_hits: self.leak_canary_hits,
            control_beacons_accepted: self.control_beacons_accepted,
            pools,
            sessions,
        }
    }
}
