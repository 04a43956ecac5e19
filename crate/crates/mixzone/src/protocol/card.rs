use std::collections::BTreeMap;

use num_bigint::BigUint;
use rand::RngCore;

use crate::clock::{SimClock, Timestamp};
use crate::crypto::{elem_bytes, elem_from_bytes, mask, ChebyParams, ChebySecret, CryptoError,
    Digest};
use crate::metrics::OpCounters;

use super::messages::{RegReq, RegResp, C1, C2, C3, M1, M4, M5};
use super::{Cid, Identity, ProtocolError, RsuId, SessionKey};

/// Per-RSU enrollment material held on the card after a first-time
/// login: the password-bound verifier `d`, the pseudo-identity, the
/// enrollment time and the masked user-RSU secret `e`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CardEntry {
    d: Digest,
    cid: Cid,
    t: Timestamp,
    e: [u8; 32],
}

impl CardEntry {
    pub fn cid(&self) -> Cid {
        self.cid
    }

    pub fn enrolled_at(&self) -> Timestamp {
        self.t
    }
}

/// Tamper-resistant credential store issued at registration.
///
/// `d1` blinds the long-term authenticator A_i under the password
/// hash, `d2` is the local password verifier, `escrow` is the
/// server-readable identity record E_s(ID || ST). Nothing on the card
/// yields A_i or the enrollment secrets without the password.
#[derive(Debug, Clone)]
pub struct SmartCard {
    id: Identity,
    d1: [u8; 32],
    d2: Digest,
    escrow: Vec<u8>,
    params: ChebyParams,
    p_s: BigUint,
    entries: BTreeMap<RsuId, CardEntry>,
}

/// User-side state between the registration request and the server
/// response: the identity and the blinding nonce N.
#[derive(Debug, Clone)]
pub struct RegPending {
    id: Identity,
    nonce: [u8; 32],
}

impl RegPending {
    pub fn id(&self) -> Identity {
        self.id
    }

    pub fn nonce(&self) -> &[u8; 32] {
        &self.nonce
    }
}

/// Ephemeral user state across a first-time handshake; consumed by
/// `process_m4`.
#[derive(Debug)]
pub struct UserFirstSession {
    a: ChebySecret,
    q_i1: BigUint,
    x2: Digest,
    rsuid: RsuId,
}

impl UserFirstSession {
    pub(crate) fn secret_pattern(&self) -> [u8; 32] {
        elem_bytes(self.a.exponent())
    }
}

/// Ephemeral user state across a consequent handshake; consumed by
/// `process_c2`.
#[derive(Debug)]
pub struct UserConsequentSession {
    a: ChebySecret,
    q_i: BigUint,
    hb: Digest,
    rsuid: RsuId,
    params: ChebyParams,
}

impl UserConsequentSession {
    pub(crate) fn secret_pattern(&self) -> [u8; 32] {
        elem_bytes(self.a.exponent())
    }

    /// Recovers the RSU half, verifies the binding and closes the
    /// handshake with the session key and the confirmation C3.
    pub fn process_c2(
        self,
        c2: &C2,
        meter: &mut OpCounters,
    ) -> Result<(C3, SessionKey), ProtocolError> {
        let pad = meter.hash(&[&elem_bytes(&self.q_i), self.hb.as_bytes()]);
        let q_j1 = elem_from_bytes(&mask(&c2.y1, pad.as_bytes())?);
        let dh = meter.cheby(self.a.exponent(), &q_j1, &self.params)?;
        let y2_expect = meter.hash(&[
            &elem_bytes(&q_j1),
            &elem_bytes(&self.q_i),
            self.hb.as_bytes(),
            &c2.y1,
            &elem_bytes(&dh),
        ]);
        if y2_expect != c2.y2 {
            return Err(ProtocolError::AuthFailure);
        }
        let r_i = meter.hash(&[
            self.rsuid.as_bytes(),
            &elem_bytes(&q_j1),
            &elem_bytes(&self.q_i),
            self.hb.as_bytes(),
            &c2.y1,
            &elem_bytes(&dh),
        ]);
        let sk = SessionKey(meter.hash(&[&elem_bytes(&dh), self.rsuid.as_bytes()]));
        Ok((C3 { r_i }, sk))
    }
}

/// First registration step on the user side: draw the blinding nonce
/// N and send `{ID, d0 = N xor h(pw || ID), ST}` over the secure
/// registration channel.
pub fn user_begin_registration<R: RngCore>(
    id: &[u8],
    pw: &[u8],
    st: &[u8],
    rng: &mut R,
    meter: &mut OpCounters,
) -> Result<(RegReq, RegPending), ProtocolError> {
    let id = Identity::new(id)?;
    if pw.is_empty() {
        return Err(ProtocolError::EmptyPassword);
    }
    if st.is_empty() {
        return Err(ProtocolError::EmptyTemplate);
    }
    let nonce: [u8; 32] = meter.random_array(rng);
    let pad = meter.hash(&[pw, id.as_bytes()]);
    let d0 = mask(&nonce, pad.as_bytes())?;
    Ok((
        RegReq { id, d0, st: st.to_vec() },
        RegPending { id, nonce },
    ))
}

/// Final registration step: unblind the server's `c` into `d1`,
/// derive the password verifier `d2` and assemble the card.
pub fn user_finalize_registration(
    resp: &RegResp,
    pending: &RegPending,
    pw: &[u8],
    meter: &mut OpCounters,
) -> Result<SmartCard, ProtocolError> {
    let params = ChebyParams::new(resp.p.clone(), resp.x.clone())?;
    if &resp.p_s >= params.prime() {
        return Err(ProtocolError::Crypto(CryptoError::InvalidParams(
            "server public key not reduced mod p",
        )));
    }
    let d1 = mask(&resp.c, &pending.nonce)?;
    let d2 = meter.hash(&[pending.id.as_bytes(), pw]);
    Ok(SmartCard {
        id: pending.id,
        d1,
        d2,
        escrow: resp.escrow.clone(),
        params,
        p_s: resp.p_s.clone(),
        entries: BTreeMap::new(),
    })
}

impl SmartCard {
    pub fn id(&self) -> Identity {
        self.id
    }

    pub fn params(&self) -> &ChebyParams {
        &self.params
    }

    pub fn escrow(&self) -> &[u8] {
        &self.escrow
    }

    pub fn entry(&self, rsuid: &RsuId) -> Option<&CardEntry> {
        self.entries.get(rsuid)
    }

    /// Verifies the password against `d2` and, on success, unblinds
    /// `d1` into the long-term authenticator A_i = h(ID || r).
    pub fn unlock(&self, pw: &[u8], meter: &mut OpCounters) -> Result<Digest, ProtocolError> {
        if meter.hash(&[self.id.as_bytes(), pw]) != self.d2 {
            return Err(ProtocolError::PasswordMismatch);
        }
        let pad = meter.hash(&[pw, self.id.as_bytes()]);
        Ok(Digest(mask(&self.d1, pad.as_bytes())?))
    }

    /// Opens a first-time handshake toward `rsuid`: fresh ephemeral
    /// `a`, chaotic values Q_i1 = T_a(x) and Q_i2 = T_a(P_s), the
    /// masked identity X_1 and the binding hash X_2.
    pub fn first_login<R: RngCore>(
        &self,
        pw: &[u8],
        rsuid: RsuId,
        clock: &SimClock,
        rng: &mut R,
        meter: &mut OpCounters,
    ) -> Result<(M1, UserFirstSession), ProtocolError> {
        let a_i = self.unlock(pw, meter)?;
        let a = meter.random_secret(&self.params, rng);
        let q_i1 = meter.cheby(a.exponent(), self.params.seed(), &self.params)?;
        let q_i2 = meter.cheby(a.exponent(), &self.p_s, &self.params)?;
        let x1 = mask(
            self.id.as_bytes(),
            meter.hash(&[&elem_bytes(&q_i2)]).as_bytes(),
        )?;
        let ts = clock.now();
        let x2 = meter.hash(&[
            a_i.as_bytes(),
            rsuid.as_bytes(),
            &elem_bytes(&q_i1),
            &elem_bytes(&q_i2),
            &x1,
            &ts.to_bytes(),
        ]);
        Ok((
            M1 { q_i1: q_i1.clone(), x1, x2, ts },
            UserFirstSession { a, q_i1, x2, rsuid },
        ))
    }

    /// Closes the first-time handshake: verify the RSU grant, recover
    /// the user-RSU secret HB, store the enrollment entry and derive
    /// the session key.
    pub fn process_m4(
        &mut self,
        pw: &[u8],
        session: UserFirstSession,
        m4: &M4,
        meter: &mut OpCounters,
    ) -> Result<(M5, SessionKey), ProtocolError> {
        let a_i = self.unlock(pw, meter)?;
        let dh = meter.cheby(session.a.exponent(), &m4.q_j1, &self.params)?;
        let z_i = meter.hash(&[
            &elem_bytes(&m4.q_j1),
            &elem_bytes(&session.q_i1),
            session.rsuid.as_bytes(),
            a_i.as_bytes(),
            session.x2.as_bytes(),
        ]);
        let r_j_expect = meter.hash(&[
            z_i.as_bytes(),
            &elem_bytes(&dh),
            m4.cid.as_bytes(),
            &m4.t.to_bytes(),
            &m4.r_mask,
        ]);
        if r_j_expect != m4.r_j {
            return Err(ProtocolError::AuthFailure);
        }
        // HB = h(CID || B_j || t), recoverable only with DH
        let hb = Digest(mask(&m4.r_mask, meter.hash(&[&elem_bytes(&dh)]).as_bytes())?);
        let d = meter.hash(&[session.rsuid.as_bytes(), pw, hb.as_bytes()]);
        let e = mask(
            hb.as_bytes(),
            meter
                .hash(&[pw, self.id.as_bytes(), session.rsuid.as_bytes()])
                .as_bytes(),
        )?;
        self.entries.insert(
            session.rsuid,
            CardEntry { d, cid: m4.cid, t: m4.t, e },
        );
        let r_i = meter.hash(&[
            session.rsuid.as_bytes(),
            &elem_bytes(&m4.q_j1),
            &elem_bytes(&session.q_i1),
            hb.as_bytes(),
            &elem_bytes(&dh),
        ]);
        let sk = SessionKey(meter.hash(&[&elem_bytes(&dh), session.rsuid.as_bytes()]));
        Ok((M5 { r_i }, sk))
    }

    /// Opens a consequent (server-free) handshake using the stored
    /// enrollment for `rsuid`.
    pub fn consequent_login<R: RngCore>(
        &self,
        pw: &[u8],
        rsuid: RsuId,
        clock: &SimClock,
        rng: &mut R,
        meter: &mut OpCounters,
    ) -> Result<(C1, UserConsequentSession), ProtocolError> {
        let entry = self.entries.get(&rsuid).ok_or(ProtocolError::NoEntry)?;
        if meter.hash(&[self.id.as_bytes(), pw]) != self.d2 {
            return Err(ProtocolError::PasswordMismatch);
        }
        let hb = Digest(mask(
            &entry.e,
            meter.hash(&[pw, self.id.as_bytes(), rsuid.as_bytes()]).as_bytes(),
        )?);
        if meter.hash(&[rsuid.as_bytes(), pw, hb.as_bytes()]) != entry.d {
            return Err(ProtocolError::PasswordMismatch);
        }
        let a = meter.random_secret(&self.params, rng);
        let q_i = meter.cheby(a.exponent(), self.params.seed(), &self.params)?;
        let x1 = mask(&elem_bytes(&q_i), hb.as_bytes())?;
        let ts = clock.now();
        let x2 = meter.hash(&[
            entry.cid.as_bytes(),
            rsuid.as_bytes(),
            &elem_bytes(&q_i),
            &x1,
            &ts.to_bytes(),
        ]);
        Ok((
            C1 { cid: entry.cid, t: entry.t, x1, x2, ts },
            UserConsequentSession {
                a,
                q_i,
                hb,
                rsuid,
                params: self.params.clone(),
            },
        ))
    }

    /// Re-keys every password-bound value on the card. The old
    /// password must verify; the long-term authenticator and all
    /// enrollments survive unchanged underneath the new blinding.
    pub fn change_password(
        &mut self,
        pw_old: &[u8],
        pw_new: &[u8],
        meter: &mut OpCounters,
    ) -> Result<(), ProtocolError> {
        if meter.hash(&[self.id.as_bytes(), pw_old]) != self.d2 {
            return Err(ProtocolError::PasswordMismatch);
        }
        if pw_new.is_empty() {
            return Err(ProtocolError::EmptyPassword);
        }
        let old_pad = meter.hash(&[pw_old, self.id.as_bytes()]);
        let new_pad = meter.hash(&[pw_new, self.id.as_bytes()]);
        self.d1 = mask(&mask(&self.d1, old_pad.as_bytes())?, new_pad.as_bytes())?;
        self.d2 = meter.hash(&[self.id.as_bytes(), pw_new]);
        let id = self.id;
        for (rsuid, entry) in self.entries.iter_mut() {
            let hb = Digest(mask(
                &entry.e,
                meter.hash(&[pw_old, id.as_bytes(), rsuid.as_bytes()]).as_bytes(),
            )?);
            entry.e = mask(
                hb.as_bytes(),
                meter.hash(&[pw_new, id.as_bytes(), rsuid.as_bytes()]).as_bytes(),
            )?;
            entry.d = meter.hash(&[rsuid.as_bytes(), pw_new, hb.as_bytes()]);
        }
        Ok(())
    }
}
