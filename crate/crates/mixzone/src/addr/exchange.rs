use rand::RngCore;

use crate::clock::{SimClock, Timestamp};
use crate::crypto::{decode_fields, encode_fields};
use crate::metrics::OpCounters;
use crate::protocol::{AddrReqMsg, AddrRespMsg, Cid, RsuState, SessionKey};

use super::{AddrError, AddressPool, Ipv6Address};

/// Builds the encrypted address request `E_SK(CID || ts)`. Only the
/// holder of the session key can produce or read it.
pub fn vehicle_request_address<R: RngCore>(
    sk: &SessionKey,
    cid: Cid,
    clock: &SimClock,
    rng: &mut R,
    meter: &mut OpCounters,
) -> AddrReqMsg {
    let inner = encode_fields(&[cid.as_bytes(), &clock.now().to_bytes()])
        .expect("two short fields");
    AddrReqMsg { blob: meter.sym_encrypt(sk.as_bytes(), &inner, rng) }
}

/// RSU side of the address exchange: decrypt under the session key,
/// check freshness and enrollment, lease the smallest free vehicle id
/// and answer encrypted under the same key. Returns the allocation
/// alongside the response so callers can track ownership.
pub fn rsu_handle_addr_request<R: RngCore>(
    rsu: &RsuState,
    pool: &mut AddressPool,
    sk: &SessionKey,
    req: &AddrReqMsg,
    clock: &SimClock,
    rng: &mut R,
    meter: &mut OpCounters,
) -> Result<(AddrRespMsg, Ipv6Address, Timestamp), AddrError> {
    let inner = meter.sym_decrypt(sk.as_bytes(), &req.blob)?;
    let fields = decode_fields(&inner).map_err(|_| AddrError::Malformed)?;
    if fields.len() != 2 || fields[0].len() != 16 || fields[1].len() != 8 {
        return Err(AddrError::Malformed);
    }
    let mut cid = [0u8; 16];
    cid.copy_from_slice(&fields[0]);
    let cid = Cid(cid);
    let ts = Timestamp::from_bytes(fields[1].as_slice().try_into().expect("checked width"));
    if clock.now().abs_diff(ts) > rsu.delta_secs() {
        return Err(AddrError::StaleTimestamp);
    }
    match rsu.cid_status(&cid) {
        None => return Err(AddrError::UnknownCid),
        Some(crate::protocol::CidStatus::Revoked) => return Err(AddrError::RevokedCid),
        Some(crate::protocol::CidStatus::Active) => {}
    }
    let (addr, expiry) = pool.allocate(cid, clock)?;
    let inner = encode_fields(&[
        &addr.to_bytes(),
        &expiry.to_bytes(),
        &clock.now().to_bytes(),
    ])
    .expect("three short fields");
    let resp = AddrRespMsg { blob: meter.sym_encrypt(sk.as_bytes(), &inner, rng) };
    Ok((resp, addr, expiry))
}

/// Vehicle side: decrypt the response, check its freshness and adopt
/// the address with its lease expiry.
pub fn vehicle_handle_addr_response(
    sk: &SessionKey,
    resp: &AddrRespMsg,
    delta_secs: u64,
    clock: &SimClock,
    meter: &mut OpCounters,
) -> Result<(Ipv6Address, Timestamp), AddrError> {
    let inner = meter.sym_decrypt(sk.as_bytes(), &resp.blob)?;
    let fields = decode_fields(&inner).map_err(|_| AddrError::Malformed)?;
    if fields.len() != 3 || fields[0].len() != 16 || fields[1].len() != 8 || fields[2].len() != 8 {
        return Err(AddrError::Malformed);
    }
    let addr = Ipv6Address::from_bytes(fields[0].as_slice().try_into().expect("checked width"));
    let expiry = Timestamp::from_bytes(fields[1].as_slice().try_into().expect("checked width"));
    let ts = Timestamp::from_bytes(fields[2].as_slice().try_into().expect("checked width"));
    if clock.now().abs_diff(ts) > delta_secs {
        return Err(AddrError::StaleTimestamp);
    }
    Ok((addr, expiry))
}
