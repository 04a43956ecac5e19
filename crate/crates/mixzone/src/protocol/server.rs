use std::collections::BTreeSet;

use num_bigint::BigUint;
use rand::RngCore;

use crate::crypto::{elem_bytes, mask, ChebyParams, ChebySecret, CryptoError, Digest};
use crate::metrics::OpCounters;

use super::messages::{RegReq, RegResp, M2, M3};
use super::rsu::RsuState;
use super::{Identity, Party, ProtocolError, RsuId};

/// The mix-zone server: holds the master secret `r`, the symmetric
/// escrow key `s` and the chaotic keypair whose public half `P_s` is
/// handed to every registered card and provisioned RSU.
#[derive(Debug, Clone)]
pub struct MixZoneServerState {
    r: [u8; 32],
    s: [u8; 32],
    cheby_secret: ChebySecret,
    p_s: BigUint,
    params: ChebyParams,
    registered: BTreeSet<Identity>,
}

/// Identities the server recovered while verifying an M2; exposed so
/// harnesses can audit that recovery matches the true parties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerAudit {
    pub user: Identity,
    pub rsu: RsuId,
}

impl MixZoneServerState {
    /// Draws the public seed, master secret, escrow key and chaotic
    /// keypair over the given prime.
    pub fn setup<R: RngCore>(
        prime: BigUint,
        rng: &mut R,
        meter: &mut OpCounters,
    ) -> Result<Self, CryptoError> {
        meter.rng_draws += 1; // public seed x
        let params = ChebyParams::generate(prime, rng)?;
        let r = meter.random_array(rng);
        let s = meter.random_array(rng);
        let cheby_secret = meter.random_secret(&params, rng);
        let p_s = meter.cheby(cheby_secret.exponent(), params.seed(), &params)?;
        Ok(Self { r, s, cheby_secret, p_s, params, registered: BTreeSet::new() })
    }

    pub fn params(&self) -> &ChebyParams {
        &self.params
    }

    pub fn public_key(&self) -> &BigUint {
        &self.p_s
    }

    /// Installs a roadside unit: its long-term authenticator is
    /// `B_j = h(RSUID_j || r)`, computable only with the master secret.
    pub fn provision_rsu(&self, rsuid: RsuId, delta_secs: u64, meter: &mut OpCounters) -> RsuState {
        let b_j = meter.hash(&[rsuid.as_bytes(), &self.r]);
        RsuState::new(rsuid, b_j, self.params.clone(), self.p_s.clone(), delta_secs)
    }

    /// Registration step on the server: blinds the long-term user
    /// authenticator `A_i = h(ID || r)` under the request's `d0` and
    /// escrows the identity and iris template under the server key.
    pub fn complete_registration<R: RngCore>(
        &mut self,
        req: &RegReq,
        rng: &mut R,
        meter: &mut OpCounters,
    ) -> Result<RegResp, ProtocolError> {
        if self.registered.contains(&req.id) {
            return Err(ProtocolError::DuplicateRegistration);
        }
        let a_i = meter.hash(&[req.id.as_bytes(), &self.r]);
        let c = mask(a_i.as_bytes(), &req.d0)?;
        let inner = crate::crypto::encode_fields(&[req.id.as_bytes(), &req.st])?;
        let escrow = meter.sym_encrypt(&self.s, &inner, rng);
        self.registered.insert(req.id);
        Ok(RegResp {
            c,
            escrow,
            p: self.params.prime().clone(),
            x: self.params.seed().clone(),
            p_s: self.p_s.clone(),
        })
    }

    /// Opens the identity escrow `T = E_s(ID || ST)`; the dispute
    /// channel that motivates carrying the escrow at all.
    pub fn open_escrow(
        &self,
        escrow: &[u8],
        meter: &mut OpCounters,
    ) -> Result<(Identity, Vec<u8>), ProtocolError> {
        let inner = meter.sym_decrypt(&self.s, escrow)?;
        let fields = crate::crypto::decode_fields(&inner)?;
        if fields.len() != 2 || fields[0].len() != 32 {
            return Err(ProtocolError::Crypto(CryptoError::MalformedFrame));
        }
        let mut id = [0u8; 32];
        id.copy_from_slice(&fields[0]);
        Ok((Identity::from_padded(id), fields[1].clone()))
    }

    /// Authenticates both the user and the RSU behind an M2. The
    /// server recovers each masked identity via its chaotic secret,
    /// recomputes the binding hashes and, on success, emits the
    /// verdicts Z_i and Z_j.
    pub fn process_m2(
        &self,
        m2: &M2,
        meter: &mut OpCounters,
    ) -> Result<(M3, ServerAudit), ProtocolError> {
        let params = &self.params;
        let ks = self.cheby_secret.exponent();

        // user side: Q*_i2 = T_ks(Q_i1), ID* = X_1 xor h(Q*_i2)
        let q_i2 = meter.cheby(ks, &m2.q_i1, params)?;
        let pad_user = meter.hash(&[&elem_bytes(&q_i2)]);
        let id_star = Identity::from_padded(mask(&m2.x1, pad_user.as_bytes())?);
        let a_star = meter.hash(&[id_star.as_bytes(), &self.r]);

        // rsu side: Q*_j2 = T_ks(Q_j1), RSUID* = Y_1 xor h(Q*_j2)
        let q_j2 = meter.cheby(ks, &m2.q_j1, params)?;
        let pad_rsu = meter.hash(&[&elem_bytes(&q_j2)]);
        let rsuid_star = RsuId::from_padded(mask(&m2.y1, pad_rsu.as_bytes())?);
        let b_star = meter.hash(&[rsuid_star.as_bytes(), &self.r]);

        let x2_expect = meter.hash(&[
            a_star.as_bytes(),
            rsuid_star.as_bytes(),
            &elem_bytes(&m2.q_i1),
            &elem_bytes(&q_i2),
            &m2.x1,
            &m2.ts.to_bytes(),
        ]);
        if x2_expect != m2.x2 {
            return Err(ProtocolError::AuthFailureAt(Party::User));
        }

        let y2_expect = meter.hash(&[
            &elem_bytes(&m2.q_i1),
            &elem_bytes(&q_j2),
            &elem_bytes(&m2.q_j1),
            &m2.y1,
            m2.x2.as_bytes(),
            b_star.as_bytes(),
        ]);
        if y2_expect != m2.y2 {
            return Err(ProtocolError::AuthFailureAt(Party::Rsu));
        }

        let z_i = meter.hash(&[
            &elem_bytes(&m2.q_j1),
            &elem_bytes(&m2.q_i1),
            rsuid_star.as_bytes(),
            a_star.as_bytes(),
            m2.x2.as_bytes(),
        ]);
        let z_j = meter.hash(&[
            b_star.as_bytes(),
            &elem_bytes(&m2.q_i1),
            &elem_bytes(&m2.q_j1),
            z_i.as_bytes(),
        ]);

        Ok((M3 { z_i, z_j }, ServerAudit { user: id_star, rsu: rsuid_star }))
    }

    /// True once `id` has completed registration.
    pub fn is_registered(&self, id: &Identity) -> bool {
        self.registered.contains(id)
    }

    /// 32-byte encodings of long-term secrets, for the harness leak
    /// canary that scans emitted traffic.
    pub(crate) fn secret_patterns(&self) -> Vec<[u8; 32]> {
        vec![self.r, self.s, elem_bytes(self.cheby_secret.exponent())]
    }
}
