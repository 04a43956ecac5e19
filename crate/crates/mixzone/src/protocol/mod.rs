//! The three-party authenticated key-establishment engine: smart-card
//! users, roadside units and the mix-zone server, with registration,
//! first-time login, consequent login and password change.
//!
//! Message flow for a first-time login runs user -> RSU -> server ->
//! RSU -> user -> RSU (M1..M5); consequent logins skip the server
//! entirely (C1..C3). Both end with user and RSU holding the same
//! session key `h(DH || RSUID)` where DH is the Chebyshev shared
//! value.

mod card;
mod messages;
mod rsu;
mod server;

pub use card::{user_begin_registration, user_finalize_registration, CardEntry, RegPending,
    SmartCard, UserConsequentSession, UserFirstSession};
pub use messages::{AddrReqMsg, AddrRespMsg, DecodeError, RegReq, RegResp, WireMessage, C1, C2,
    C3, M1, M2, M3, M4, M5, WIRE_VERSION};
pub use rsu::{CidStatus, RsuConsequentPending, RsuFirstSession, RsuPendingKey, RsuState};
pub use server::{MixZoneServerState, ServerAudit};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{CryptoError, Digest, DIGEST_BYTES};

/// Canonical identity of a mobile vehicle user: at most 32 bytes,
/// stored left-padded to the mask width so blinding and recovery agree
/// byte for byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Identity([u8; DIGEST_BYTES]);

/// Canonical identity of a roadside unit; same representation rules as
/// [`Identity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RsuId([u8; DIGEST_BYTES]);

macro_rules! canonical_id {
    ($ty:ident, $empty_err:expr) => {
        impl $ty {
            pub fn new(bytes: &[u8]) -> Result<Self, ProtocolError> {
                if bytes.is_empty() {
                    return Err($empty_err);
                }
                if bytes.len() > DIGEST_BYTES {
                    return Err(ProtocolError::IdentityTooLong);
                }
                let mut out = [0u8; DIGEST_BYTES];
                out[DIGEST_BYTES - bytes.len()..].copy_from_slice(bytes);
                Ok(Self(out))
            }

            pub(crate) fn from_padded(bytes: [u8; DIGEST_BYTES]) -> Self {
                Self(bytes)
            }

            pub fn as_bytes(&self) -> &[u8; DIGEST_BYTES] {
                &self.0
            }
        }

        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                let start = self.0.iter().position(|b| *b != 0).unwrap_or(self.0.len());
                match std::str::from_utf8(&self.0[start..]) {
                    Ok(s) => write!(f, "{s}"),
                    Err(_) => {
                        for b in &self.0[start..] {
                            write!(f, "{b:02x}")?;
                        }
                        Ok(())
                    }
                }
            }
        }
    };
}

canonical_id!(Identity, ProtocolError::EmptyIdentity);
canonical_id!(RsuId, ProtocolError::EmptyRsuId);

/// Random 128-bit pseudo-identity assigned per enrollment to hide the
/// real identity in consequent logins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cid(pub [u8; 16]);

impl Cid {
    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl std::fmt::Display for Cid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Agreed session key, `h(DH || RSUID)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionKey(pub Digest);

impl SessionKey {
    pub fn as_bytes(&self) -> &[u8; DIGEST_BYTES] {
        self.0.as_bytes()
    }
}

/// Which handshake participant a failed server-side check points at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    User,
    Rsu,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("identity must be non-empty")]
    EmptyIdentity,
    #[error("roadside unit id must be non-empty")]
    EmptyRsuId,
    #[error("password must be non-empty")]
    EmptyPassword,
    #[error("identity exceeds {DIGEST_BYTES} bytes")]
    IdentityTooLong,
    #[error("iris template must be non-empty")]
    EmptyTemplate,
    #[error("identity already registered")]
    DuplicateRegistration,
    #[error("password verification failed")]
    PasswordMismatch,
    #[error("message timestamp outside the freshness window")]
    StaleTimestamp,
    #[error("verification equality failed")]
    AuthFailure,
    #[error("verification equality failed for {0:?}")]
    AuthFailureAt(Party),
    #[error("card holds no enrollment for this roadside unit")]
    NoEntry,
    #[error("unknown pseudo-identity")]
    UnknownCid,
    #[error("pseudo-identity has been revoked")]
    RevokedCid,
    #[error("crypto: {0}")]
    Crypto(#[from] CryptoError),
    #[error("decode: {0}")]
    Decode(#[from] DecodeError),
}

impl ProtocolError {
    /// Stable lowercase tag used for rejection accounting in reports.
    pub fn kind(&self) -> &'static str {
        match self {
            ProtocolError::EmptyIdentity => "empty_identity",
            ProtocolError::EmptyRsuId => "empty_rsu_id",
            ProtocolError::EmptyPassword => "empty_password",
            ProtocolError::IdentityTooLong => "identity_too_long",
            ProtocolError::EmptyTemplate => "empty_template",
            ProtocolError::DuplicateRegistration => "duplicate_registration",
            ProtocolError::PasswordMismatch => "password_mismatch",
            ProtocolError::StaleTimestamp => "stale_timestamp",
            ProtocolError::AuthFailure => "auth_failure",
            ProtocolError::AuthFailureAt(Party::User) => "auth_failure_user",
            ProtocolError::AuthFailureAt(Party::Rsu) => "auth_failure_rsu",
            ProtocolError::NoEntry => "no_entry",
            ProtocolError::UnknownCid => "unknown_cid",
            ProtocolError::RevokedCid => "revoked_cid",
            ProtocolError::Crypto(CryptoError::AuthFailure) => "auth_failure",
            ProtocolError::Crypto(_) => "crypto_error",
            ProtocolError::Decode(_) => "decode_error",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_canonical_padding() {
        let id = Identity::new(b"VEH-1").unwrap();
        assert_eq!(&id.as_bytes()[..27], &[0u8; 27]);
        assert_eq!(&id.as_bytes()[27..], b"VEH-1");
        assert_eq!(id.to_string(), "VEH-1");
        assert_eq!(Identity::new(b""), Err(ProtocolError::EmptyIdentity));
        assert_eq!(Identity::new(&[0u8; 33]), Err(ProtocolError::IdentityTooLong));
        // full-width ids pass through untouched
        let full = [7u8; 32];
        assert_eq!(Identity::new(&full).unwrap().as_bytes(), &full);
    }
}
