//! RSU-prefixed IPv6 addressing: a 128-bit address is the RSU
//! identifier in the top 128-i bits and the vehicle identifier in the
//! low i bits, so allocation within one RSU can never collide with
//! another RSU's addresses and duplicate address detection is
//! unnecessary by construction.

mod exchange;
mod pool;

pub use exchange::{rsu_handle_addr_request, vehicle_handle_addr_response,
    vehicle_request_address};
pub use pool::{AddressPool, LeaseRecord};

use std::net::Ipv6Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::CryptoError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AddrError {
    #[error("value does not fit its address field")]
    WidthOverflow,
    #[error("vehicle-id width must lie in [8, 64]")]
    BadSplit,
    #[error("all vehicle ids hold unexpired leases")]
    PoolExhausted,
    #[error("request timestamp outside the freshness window")]
    StaleTimestamp,
    #[error("request not authenticated under the session key")]
    AuthFailure,
    #[error("unknown pseudo-identity")]
    UnknownCid,
    #[error("revoked pseudo-identity")]
    RevokedCid,
    #[error("malformed encrypted payload")]
    Malformed,
}

impl AddrError {
    pub fn kind(&self) -> &'static str {
        match self {
            AddrError::WidthOverflow => "width_overflow",
            AddrError::BadSplit => "bad_split",
            AddrError::PoolExhausted => "pool_exhausted",
            AddrError::StaleTimestamp => "stale_timestamp",
            AddrError::AuthFailure => "auth_failure",
            AddrError::UnknownCid => "unknown_cid",
            AddrError::RevokedCid => "revoked_cid",
            AddrError::Malformed => "malformed_payload",
        }
    }
}

impl From<CryptoError> for AddrError {
    fn from(e: CryptoError) -> Self {
        match e {
            CryptoError::AuthFailure => AddrError::AuthFailure,
            _ => AddrError::Malformed,
        }
    }
}

/// How the 128 address bits divide between RSU id and vehicle id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct AddressSplit {
    vehicle_bits: u8,
}

impl AddressSplit {
    /// `i` vehicle-id bits, `128 - i` RSU-id bits, `8 <= i <= 64`.
    pub fn new(vehicle_bits: u8) -> Result<Self, AddrError> {
        if !(8..=64).contains(&vehicle_bits) {
            return Err(AddrError::BadSplit);
        }
        Ok(Self { vehicle_bits })
    }

    pub fn vehicle_bits(&self) -> u8 {
        self.vehicle_bits
    }

    pub fn rsu_bits(&self) -> u8 {
        128 - self.vehicle_bits
    }

    /// Number of vehicle ids the split can address, capped at u128.
    pub fn capacity(&self) -> u128 {
        1u128 << self.vehicle_bits
    }
}

impl TryFrom<u8> for AddressSplit {
    type Error = AddrError;
    fn try_from(v: u8) -> Result<Self, AddrError> {
        AddressSplit::new(v)
    }
}

impl From<AddressSplit> for u8 {
    fn from(s: AddressSplit) -> u8 {
        s.vehicle_bits
    }
}

impl Default for AddressSplit {
    fn default() -> Self {
        Self { vehicle_bits: 64 }
    }
}

/// A full 128-bit address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ipv6Address(pub u128);

impl Ipv6Address {
    pub fn to_bytes(self) -> [u8; 16] {
        self.0.to_be_bytes()
    }

    pub fn from_bytes(bytes: &[u8; 16]) -> Self {
        Self(u128::from_be_bytes(*bytes))
    }
}

impl std::fmt::Display for Ipv6Address {
    /// Canonical lowercase notation with zero compression.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", Ipv6Addr::from(self.0))
    }
}

/// Concatenates an RSU id and a vehicle id into one address.
pub fn compose_address(
    rsu_id: u128,
    vehicle_id: u64,
    split: AddressSplit,
) -> Result<Ipv6Address, AddrError> {
    let i = split.vehicle_bits() as u32;
    if i < 64 && vehicle_id >= 1u64 << i {
        return Err(AddrError::WidthOverflow);
    }
    if split.rsu_bits() < 128 && rsu_id >= 1u128 << split.rsu_bits() {
        return Err(AddrError::WidthOverflow);
    }
    Ok(Ipv6Address((rsu_id << i) | vehicle_id as u128))
}

/// Splits an address back into its RSU and vehicle parts; exact
/// inverse of [`compose_address`].
pub fn decompose_address(addr: Ipv6Address, split: AddressSplit) -> (u128, u64) {
    let i = split.vehicle_bits() as u32;
    let vehicle = (addr.0 & (split.capacity() - 1)) as u64;
    (addr.0 >> i, vehicle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_form() {
        let split = AddressSplit::new(64).unwrap();
        let addr = compose_address(0x20010DB800010001, 0x42, split).unwrap();
        assert_eq!(addr.to_string(), "2001:db8:1:1::42");
    }

    #[test]
    fn zero_vehicle_id_is_the_prefix() {
        let split = AddressSplit::new(16).unwrap();
        let addr = compose_address(0xABCD, 0, split).unwrap();
        assert_eq!(addr.0, 0xABCDu128 << 16);
    }

    #[test]
    fn overflow_rejected() {
        let split = AddressSplit::new(8).unwrap();
        assert_eq!(
            compose_address(0, 256, split),
            Err(AddrError::WidthOverflow)
        );
        assert!(compose_address(0, 255, split).is_ok());
        // rsu id wider than 120 bits
        assert_eq!(
            compose_address(1u128 << 120, 0, split),
            Err(AddrError::WidthOverflow)
        );
    }

    #[test]
    fn split_range_enforced() {
        assert_eq!(AddressSplit::new(7), Err(AddrError::BadSplit));
        assert_eq!(AddressSplit::new(65), Err(AddrError::BadSplit));
        assert!(AddressSplit::new(8).is_ok());
        assert!(AddressSplit::new(64).is_ok());
    }

    #[test]
    fn compose_decompose_roundtrip() {
        let split = AddressSplit::new(24).unwrap();
        let addr = compose_address(0x2001_0DB8, 0x00F0_0F, split).unwrap();
        assert_eq!(decompose_address(addr, split), (0x2001_0DB8, 0x00F0_0F));
    }

    #[test]
    fn address_bytes_roundtrip() {
        let addr = Ipv6Address(0x2001_0db8_0000_0000_0000_0000_0000_0042);
        assert_eq!(Ipv6Address::from_bytes(&addr.to_bytes()), addr);
    }
}
