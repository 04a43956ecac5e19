use std::collections::BTreeMap;

use num_bigint::BigUint;
use rand::RngCore;

use crate::clock::{SimClock, Timestamp};
use crate::crypto::{elem_bytes, elem_from_bytes, mask, ChebyParams, ChebySecret, Digest};
use crate::metrics::OpCounters;

use super::messages::{C1, C2, C3, M1, M2, M3, M4, M5};
use super::{Cid, ProtocolError, RsuId, SessionKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CidStatus {
    Active,
    Revoked,
}

#[derive(Debug, Clone, Copy)]
struct CidEntry {
    t: Timestamp,
    status: CidStatus,
}

/// A roadside unit provisioned by the mix-zone server. Tracks every
/// pseudo-identity it has enrolled; a CID is revoked when its closing
/// confirmation fails.
#[derive(Debug, Clone)]
pub struct RsuState {
    rsuid: RsuId,
    b_j: Digest,
    params: ChebyParams,
    p_s: BigUint,
    delta_secs: u64,
    cid_table: BTreeMap<Cid, CidEntry>,
}

/// RSU state between forwarding M2 and receiving the server verdict.
#[derive(Debug)]
pub struct RsuFirstSession {
    b: ChebySecret,
    q_i1: BigUint,
    q_j1: BigUint,
}

impl RsuFirstSession {
    pub(crate) fn secret_pattern(&self) -> [u8; 32] {
        elem_bytes(self.b.exponent())
    }
}

/// RSU state between emitting M4 and receiving the user's M5.
#[derive(Debug)]
pub struct RsuPendingKey {
    dh: BigUint,
    hb: Digest,
    q_i1: BigUint,
    q_j1: BigUint,
    cid: Cid,
}

impl RsuPendingKey {
    pub fn cid(&self) -> Cid {
        self.cid
    }
}

/// RSU state between emitting C2 and receiving the user's C3.
#[derive(Debug)]
pub struct RsuConsequentPending {
    b: ChebySecret,
    dh: BigUint,
    hb: Digest,
    q_i: BigUint,
    q_j1: BigUint,
    y1: [u8; 32],
    cid: Cid,
}

impl RsuConsequentPending {
    pub fn cid(&self) -> Cid {
        self.cid
    }

    pub(crate) fn secret_pattern(&self) -> [u8; 32] {
        elem_bytes(self.b.exponent())
    }
}

impl RsuState {
    pub(crate) fn new(
        rsuid: RsuId,
        b_j: Digest,
        params: ChebyParams,
        p_s: BigUint,
        delta_secs: u64,
    ) -> Self {
        Self { rsuid, b_j, params, p_s, delta_secs, cid_table: BTreeMap::new() }
    }

    pub fn rsuid(&self) -> RsuId {
        self.rsuid
    }

    pub fn delta_secs(&self) -> u64 {
        self.delta_secs
    }

    pub fn cid_status(&self, cid: &Cid) -> Option<CidStatus> {
        self.cid_table.get(cid).map(|e| e.status)
    }

    pub fn cid_active(&self, cid: &Cid) -> bool {
        matches!(self.cid_status(cid), Some(CidStatus::Active))
    }

    pub fn revoke(&mut self, cid: &Cid) {
        if let Some(entry) = self.cid_table.get_mut(cid) {
            entry.status = CidStatus::Revoked;
        }
    }

    fn fresh(&self, now: Timestamp, ts: Timestamp) -> Result<(), ProtocolError> {
        if now.abs_diff(ts) > self.delta_secs {
            return Err(ProtocolError::StaleTimestamp);
        }
        Ok(())
    }

    /// Checks M1 freshness, draws the RSU ephemeral and forwards the
    /// user's values with the RSU half toward the server.
    pub fn process_m1<R: RngCore>(
        &self,
        m1: &M1,
        clock: &SimClock,
        rng: &mut R,
        meter: &mut OpCounters,
    ) -> Result<(M2, RsuFirstSession), ProtocolError> {
        self.fresh(clock.now(), m1.ts)?;
        let b = meter.random_secret(&self.params, rng);
        let q_j1 = meter.cheby(b.exponent(), self.params.seed(), &self.params)?;
        let q_j2 = meter.cheby(b.exponent(), &self.p_s, &self.params)?;
        let y1 = mask(
            self.rsuid.as_bytes(),
            meter.hash(&[&elem_bytes(&q_j2)]).as_bytes(),
        )?;
        let y2 = meter.hash(&[
            &elem_bytes(&m1.q_i1),
            &elem_bytes(&q_j2),
            &elem_bytes(&q_j1),
            &y1,
            m1.x2.as_bytes(),
            self.b_j.as_bytes(),
        ]);
        Ok((
            M2 {
                q_i1: m1.q_i1.clone(),
                x1: m1.x1,
                x2: m1.x2,
                ts: m1.ts,
                q_j1: q_j1.clone(),
                y1,
                y2,
            },
            RsuFirstSession { b, q_i1: m1.q_i1.clone(), q_j1 },
        ))
    }

    /// Verifies the server verdict, enrolls a fresh pseudo-identity
    /// and grants it to the user under the Chebyshev shared value.
    pub fn process_m3<R: RngCore>(
        &mut self,
        session: RsuFirstSession,
        m3: &M3,
        clock: &SimClock,
        rng: &mut R,
        meter: &mut OpCounters,
    ) -> Result<(M4, RsuPendingKey), ProtocolError> {
        let z_j_expect = meter.hash(&[
            self.b_j.as_bytes(),
            &elem_bytes(&session.q_i1),
            &elem_bytes(&session.q_j1),
            m3.z_i.as_bytes(),
        ]);
        if z_j_expect != m3.z_j {
            return Err(ProtocolError::AuthFailure);
        }
        let dh = meter.cheby(session.b.exponent(), &session.q_i1, &self.params)?;
        let cid = loop {
            let candidate = Cid(meter.random_array(rng));
            if !self.cid_table.contains_key(&candidate) {
                break candidate;
            }
        };
        let t = clock.now();
        let hb = meter.hash(&[cid.as_bytes(), self.b_j.as_bytes(), &t.to_bytes()]);
        let r_mask = mask(hb.as_bytes(), meter.hash(&[&elem_bytes(&dh)]).as_bytes())?;
        let r_j = meter.hash(&[
            m3.z_i.as_bytes(),
            &elem_bytes(&dh),
            cid.as_bytes(),
            &t.to_bytes(),
            &r_mask,
        ]);
        self.cid_table.insert(cid, CidEntry { t, status: CidStatus::Active });
        Ok((
            M4 { q_j1: session.q_j1.clone(), r_j, cid, t, r_mask },
            RsuPendingKey { dh, hb, q_i1: session.q_i1, q_j1: session.q_j1, cid },
        ))
    }

    /// Verifies the user's closing confirmation. On failure the
    /// freshly enrolled CID is revoked and no key is emitted.
    pub fn process_m5(
        &mut self,
        pending: RsuPendingKey,
        m5: &M5,
        meter: &mut OpCounters,
    ) -> Result<SessionKey, ProtocolError> {
        let r_i_expect = meter.hash(&[
            self.rsuid.as_bytes(),
            &elem_bytes(&pending.q_j1),
            &elem_bytes(&pending.q_i1),
            pending.hb.as_bytes(),
            &elem_bytes(&pending.dh),
        ]);
        if r_i_expect != m5.r_i {
            self.revoke(&pending.cid);
            return Err(ProtocolError::AuthFailure);
        }
        Ok(SessionKey(meter.hash(&[
            &elem_bytes(&pending.dh),
            self.rsuid.as_bytes(),
        ])))
    }

    /// Serves a consequent login from the CID table alone: looks up
    /// the enrollment, rebuilds HB = h(CID || B_j || t), recovers the
    /// user's chaotic value and answers with the RSU half.
    pub fn process_c1<R: RngCore>(
        &self,
        c1: &C1,
        clock: &SimClock,
        rng: &mut R,
        meter: &mut OpCounters,
    ) -> Result<(C2, RsuConsequentPending), ProtocolError> {
        let entry = self.cid_table.get(&c1.cid).ok_or(ProtocolError::UnknownCid)?;
        if entry.status == CidStatus::Revoked {
            return Err(ProtocolError::RevokedCid);
        }
        if entry.t != c1.t {
            return Err(ProtocolError::AuthFailure);
        }
        self.fresh(clock.now(), c1.ts)?;
        let hb = meter.hash(&[c1.cid.as_bytes(), self.b_j.as_bytes(), &c1.t.to_bytes()]);
        let q_i = elem_from_bytes(&mask(&c1.x1, hb.as_bytes())?);
        let x2_expect = meter.hash(&[
            c1.cid.as_bytes(),
            self.rsuid.as_bytes(),
            &elem_bytes(&q_i),
            &c1.x1,
            &c1.ts.to_bytes(),
        ]);
        if x2_expect != c1.x2 {
            return Err(ProtocolError::AuthFailure);
        }
        let b = meter.random_secret(&self.params, rng);
        let q_j1 = meter.cheby(b.exponent(), self.params.seed(), &self.params)?;
        let dh = meter.cheby(b.exponent(), &q_i, &self.params)?;
        let y1 = mask(
            &elem_bytes(&q_j1),
            meter.hash(&[&elem_bytes(&q_i), hb.as_bytes()]).as_bytes(),
        )?;
        let y2 = meter.hash(&[
            &elem_bytes(&q_j1),
            &elem_bytes(&q_i),
            hb.as_bytes(),
            &y1,
            &elem_bytes(&dh),
        ]);
        Ok((
            C2 { y1, y2 },
            RsuConsequentPending { b, dh, hb, q_i, q_j1, y1, cid: c1.cid },
        ))
    }

    /// Verifies the user's consequent confirmation; failure revokes
    /// the CID, success yields the session key.
    pub fn process_c3(
        &mut self,
        pending: RsuConsequentPending,
        c3: &C3,
        meter: &mut OpCounters,
    ) -> Result<SessionKey, ProtocolError> {
        let r_i_expect = meter.hash(&[
            self.rsuid.as_bytes(),
            &elem_bytes(&pending.q_j1),
            &elem_bytes(&pending.q_i),
            pending.hb.as_bytes(),
            &pending.y1,
            &elem_bytes(&pending.dh),
        ]);
        if r_i_expect != c3.r_i {
            self.revoke(&pending.cid);
            return Err(ProtocolError::AuthFailure);
        }
        Ok(SessionKey(meter.hash(&[
            &elem_bytes(&pending.dh),
            self.rsuid.as_bytes(),
        ])))
    }
}
