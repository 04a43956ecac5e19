//! Synchronous single-session drivers. Each handshake hop round-trips
//! through the wire codec so tampering can target real frames; the
//! fuzz, replay, cost and bench tooling all build on these.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::addr::{rsu_handle_addr_request, vehicle_handle_addr_response,
    vehicle_request_address, AddressPool, AddressSplit, Ipv6Address};
use crate::clock::SimClock;
use crate::metrics::OpCounters;
use crate::protocol::{user_begin_registration, user_finalize_registration, Cid,
    MixZoneServerState, ProtocolError, RsuId, RsuState, ServerAudit, SessionKey, SmartCard,
    WireMessage};

use super::config::PrimeChoice;

/// Per-role operation counters for one driven phase.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct RoleMeters {
    pub user: OpCounters,
    pub rsu: OpCounters,
    pub server: OpCounters,
}

impl RoleMeters {
    pub fn total(&self) -> OpCounters {
        let mut t = OpCounters::new();
        t.merge(&self.user);
        t.merge(&self.rsu);
        t.merge(&self.server);
        t
    }
}

/// Flip one bit of the `msg_index`-th frame of the driven exchange.
#[derive(Debug, Clone, Copy)]
pub struct Tamper {
    pub msg_index: usize,
    pub bit: u64,
}

/// Typed failure from a driven exchange, with the stable kind tag
/// used across reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DriveError {
    Protocol(ProtocolError),
    Addr(crate::addr::AddrError),
    UnexpectedMessage,
}

impl DriveError {
    pub fn kind(&self) -> &'static str {
        match self {
            DriveError::Protocol(e) => e.kind(),
            DriveError::Addr(e) => e.kind(),
            DriveError::UnexpectedMessage => "unexpected_message",
        }
    }
}

impl From<ProtocolError> for DriveError {
    fn from(e: ProtocolError) -> Self {
        DriveError::Protocol(e)
    }
}

impl From<crate::addr::AddrError> for DriveError {
    fn from(e: crate::addr::AddrError) -> Self {
        DriveError::Addr(e)
    }
}

/// One server, one RSU, one registered card; enough to drive any
/// phase in isolation.
pub struct Testbed {
    pub server: MixZoneServerState,
    pub rsu: RsuState,
    pub pool: AddressPool,
    pub card: SmartCard,
    pub pw: Vec<u8>,
    pub clock: SimClock,
    pub rng: ChaCha20Rng,
    /// Registration costs captured during construction.
    pub registration_meters: RoleMeters,
    pub setup_meter: OpCounters,
}

pub const TESTBED_DELTA_SECS: u64 = 60;

impl Testbed {
    pub fn new(prime: PrimeChoice, seed: u64) -> Self {
        Self::with_lease(prime, seed, 300)
    }

    pub fn with_lease(prime: PrimeChoice, seed: u64, lease_secs: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let clock = SimClock::starting_at(1_000);
        let mut setup_meter = OpCounters::new();
        let mut server = MixZoneServerState::setup(prime.value(), &mut rng, &mut setup_meter)
            .expect("primes ship with the crate");
        let rsuid = RsuId::new(b"RSU-0000").expect("static id");
        let rsu = server.provision_rsu(rsuid, TESTBED_DELTA_SECS, &mut setup_meter);
        let split = AddressSplit::default();
        let pool = AddressPool::new(0x2001_0db8_0000_0000, split, lease_secs)
            .expect("prefix fits the default split");

        let mut registration_meters = RoleMeters::default();
        let mut pw = vec![0u8; 12];
        rng.fill_bytes(&mut pw);
        let mut st = vec![0u8; 32];
        rng.fill_bytes(&mut st);
        let (req, pending) = user_begin_registration(
            b"VEH-00000", &pw, &st, &mut rng, &mut registration_meters.user,
        )
        .expect("static registration inputs");
        let resp = server
            .complete_registration(&req, &mut rng, &mut registration_meters.server)
            .expect("first registration");
        let card = user_finalize_registration(&resp, &pending, &pw, &mut registration_meters.user)
            .expect("server response is well-formed");

        Testbed {
            server,
            rsu,
            pool,
            card,
            pw,
            clock,
            rng,
            registration_meters,
            setup_meter,
        }
    }

    fn hop(&mut self) {
        self.clock.advance_by(1);
    }
}

fn tampered(bytes: &mut Vec<u8>, step: usize, tamper: Option<Tamper>) {
    if let Some(t) = tamper {
        if t.msg_index == step {
            let bit = (t.bit % (bytes.len() as u64 * 8)) as usize;
            bytes[bit / 8] ^= 1 << (bit % 8);
        }
    }
}

macro_rules! expect_msg {
    ($bytes:expr, $variant:ident) => {
        match WireMessage::decode(&$bytes).map_err(ProtocolError::from)? {
            WireMessage::$variant(m) => m,
            _ => return Err(DriveError::UnexpectedMessage),
        }
    };
}

/// Outcome of a completed first-time handshake.
#[derive(Debug)]
pub struct FirstLoginOutcome {
    pub sk_user: SessionKey,
    pub sk_rsu: SessionKey,
    pub cid: Cid,
    pub audit: ServerAudit,
}

/// Drives M1..M5, optionally flipping one bit of one frame
/// (`msg_index` 0..=4). Both sides must finish for an `Ok`.
pub fn run_first_login(
    tb: &mut Testbed,
    tamper: Option<Tamper>,
    meters: &mut RoleMeters,
) -> Result<FirstLoginOutcome, DriveError> {
    let rsuid = tb.rsu.rsuid();
    let (m1, user_session) =
        tb.card
            .first_login(&tb.pw, rsuid, &tb.clock, &mut tb.rng, &mut meters.user)?;
    let mut bytes = WireMessage::M1(m1).encode();
    tampered(&mut bytes, 0, tamper);
    tb.hop();

    let m1 = expect_msg!(bytes, M1);
    let (m2, rsu_session) = tb.rsu.process_m1(&m1, &tb.clock, &mut tb.rng, &mut meters.rsu)?;
    let mut bytes = WireMessage::M2(m2).encode();
    tampered(&mut bytes, 1, tamper);
    tb.hop();

    let m2 = expect_msg!(bytes, M2);
    let (m3, audit) = tb.server.process_m2(&m2, &mut meters.server)?;
    let mut bytes = WireMessage::M3(m3).encode();
    tampered(&mut bytes, 2, tamper);
    tb.hop();

    let m3 = expect_msg!(bytes, M3);
    let (m4, pending) =
        tb.rsu
            .process_m3(rsu_session, &m3, &tb.clock, &mut tb.rng, &mut meters.rsu)?;
    let mut bytes = WireMessage::M4(m4).encode();
    tampered(&mut bytes, 3, tamper);
    tb.hop();

    let m4 = expect_msg!(bytes, M4);
    let (m5, sk_user) = tb.card.process_m4(&tb.pw, user_session, &m4, &mut meters.user)?;
    let cid = m4.cid;
    let mut bytes = WireMessage::M5(m5).encode();
    tampered(&mut bytes, 4, tamper);
    tb.hop();

    let m5 = expect_msg!(bytes, M5);
    let sk_rsu = tb.rsu.process_m5(pending, &m5, &mut meters.rsu)?;

    Ok(FirstLoginOutcome { sk_user, sk_rsu, cid, audit })
}

/// Drives C1..C3 against the card's stored enrollment (`msg_index`
/// 0..=2 for tampering).
pub fn run_consequent(
    tb: &mut Testbed,
    tamper: Option<Tamper>,
    meters: &mut RoleMeters,
) -> Result<(SessionKey, SessionKey), DriveError> {
    let rsuid = tb.rsu.rsuid();
    let (c1, session) =
        tb.card
            .consequent_login(&tb.pw, rsuid, &tb.clock, &mut tb.rng, &mut meters.user)?;
    let mut bytes = WireMessage::C1(c1).encode();
    tampered(&mut bytes, 0, tamper);
    tb.hop();

    let c1 = expect_msg!(bytes, C1);
    let (c2, pending) = tb.rsu.process_c1(&c1, &tb.clock, &mut tb.rng, &mut meters.rsu)?;
    let mut bytes = WireMessage::C2(c2).encode();
    tampered(&mut bytes, 1, tamper);
    tb.hop();

    let c2 = expect_msg!(bytes, C2);
    let (c3, sk_user) = session.process_c2(&c2, &mut meters.user)?;
    let mut bytes = WireMessage::C3(c3).encode();
    tampered(&mut bytes, 2, tamper);
    tb.hop();

    let c3 = expect_msg!(bytes, C3);
    let sk_rsu = tb.rsu.process_c3(pending, &c3, &mut meters.rsu)?;
    Ok((sk_user, sk_rsu))
}

/// Drives one encrypted address exchange under an established key
/// (`msg_index` 0..=1 for tampering). `Ok` means the vehicle adopted
/// the address.
pub fn run_address(
    tb: &mut Testbed,
    sk: &SessionKey,
    cid: Cid,
    tamper: Option<Tamper>,
    meters: &mut RoleMeters,
) -> Result<Ipv6Address, DriveError> {
    let req = vehicle_request_address(sk, cid, &tb.clock, &mut tb.rng, &mut meters.user);
    let mut bytes = WireMessage::AddrReq(req).encode();
    tampered(&mut bytes, 0, tamper);
    tb.hop();

    let req = expect_msg!(bytes, AddrReq);
    let (resp, _addr, _expiry) = rsu_handle_addr_request(
        &tb.rsu, &mut tb.pool, sk, &req, &tb.clock, &mut tb.rng, &mut meters.rsu,
    )?;
    let mut bytes = WireMessage::AddrResp(resp).encode();
    tampered(&mut bytes, 1, tamper);
    tb.hop();

    let resp = expect_msg!(bytes, AddrResp);
    let (addr, _expiry) = vehicle_handle_addr_response(
        sk, &resp, TESTBED_DELTA_SECS, &tb.clock, &mut meters.user,
    )?;
    Ok(addr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn honest_first_login_agrees() {
        let mut tb = Testbed::new(PrimeChoice::Test, 7);
        let mut meters = RoleMeters::default();
        let out = run_first_login(&mut tb, None, &mut meters).unwrap();
        assert_eq!(out.sk_user, out.sk_rsu);
        assert_eq!(out.audit.user, tb.card.id());
        assert_eq!(out.audit.rsu, tb.rsu.rsuid());
    }

    #[test]
    fn honest_consequent_agrees() {
        let mut tb = Testbed::new(PrimeChoice::Test, 8);
        let mut meters = RoleMeters::default();
        run_first_login(&mut tb, None, &mut meters).unwrap();
        let (sk_u, sk_r) = run_consequent(&mut tb, None, &mut meters).unwrap();
        assert_eq!(sk_u, sk_r);
    }

    #[test]
    fn honest_address_exchange() {
        let mut tb = Testbed::new(PrimeChoice::Test, 9);
        let mut meters = RoleMeters::default();
        let out = run_first_login(&mut tb, None, &mut meters).unwrap();
        let addr = run_address(&mut tb, &out.sk_user, out.cid, None, &mut meters).unwrap();
        assert_eq!(addr.to_string(), "2001:db8::");
    }
}
