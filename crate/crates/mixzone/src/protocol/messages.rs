//! Wire codec. Every message is a 1-byte version, a 1-byte type tag
//! and a length-framed field list; integers ride big-endian at fixed
//! width (32 bytes for group elements and masked values, 16 for
//! pseudo-identities, 8 for timestamps). Decoding is the exact inverse
//! of encoding and rejects anything else.

use num_bigint::BigUint;
use thiserror::Error;

use crate::clock::Timestamp;
use crate::crypto::{decode_fields, elem_bytes, elem_from_bytes, encode_fields, CryptoError,
    Digest, DIGEST_BYTES, ELEM_BYTES};

use super::{Cid, Identity};

pub const WIRE_VERSION: u8 = 0x01;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("empty message")]
    Empty,
    #[error("unsupported wire version {0:#04x}")]
    BadVersion(u8),
    #[error("unknown message tag {0:#04x}")]
    UnknownTag(u8),
    #[error("malformed field frame")]
    Frame,
    #[error("expected {expected} fields, got {got}")]
    FieldCount { expected: usize, got: usize },
    #[error("field {index} has width {got}, expected {expected}")]
    FieldWidth { index: usize, expected: usize, got: usize },
    #[error("field {0} must be non-empty")]
    EmptyField(usize),
}

/// Registration request `{ID, d0, ST}`, sent over the secure
/// registration channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegReq {
    pub id: Identity,
    pub d0: [u8; DIGEST_BYTES],
    pub st: Vec<u8>,
}

/// Registration response `{c, T, params, P_s}` carried back to the
/// card.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegResp {
    pub c: [u8; DIGEST_BYTES],
    pub escrow: Vec<u8>,
    pub p: BigUint,
    pub x: BigUint,
    pub p_s: BigUint,
}

/// First-time login request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct M1 {
    pub q_i1: BigUint,
    pub x1: [u8; DIGEST_BYTES],
    pub x2: Digest,
    pub ts: Timestamp,
}

/// RSU forward of M1 plus its own half of the exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct M2 {
    pub q_i1: BigUint,
    pub x1: [u8; DIGEST_BYTES],
    pub x2: Digest,
    pub ts: Timestamp,
    pub q_j1: BigUint,
    pub y1: [u8; DIGEST_BYTES],
    pub y2: Digest,
}

/// Server verdict for both parties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct M3 {
    pub z_i: Digest,
    pub z_j: Digest,
}

/// RSU enrollment grant: pseudo-identity, enrollment time and the
/// masked user-RSU secret.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct M4 {
    pub q_j1: BigUint,
    pub r_j: Digest,
    pub cid: Cid,
    pub t: Timestamp,
    pub r_mask: [u8; DIGEST_BYTES],
}

/// User confirmation closing the first-time handshake.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct M5 {
    pub r_i: Digest,
}

/// Consequent login request, addressed by pseudo-identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct C1 {
    pub cid: Cid,
    pub t: Timestamp,
    pub x1: [u8; DIGEST_BYTES],
    pub x2: Digest,
    pub ts: Timestamp,
}

/// RSU half of the consequent exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct C2 {
    pub y1: [u8; DIGEST_BYTES],
    pub y2: Digest,
}

/// User confirmation closing the consequent handshake.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct C3 {
    pub r_i: Digest,
}

/// Encrypted address request; the payload is AEAD under the session
/// key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddrReqMsg {
    pub blob: Vec<u8>,
}

/// Encrypted address response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddrRespMsg {
    pub blob: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireMessage {
    RegReq(RegReq),
    RegResp(RegResp),
    M1(M1),
    M2(M2),
    M3(M3),
    M4(M4),
    M5(M5),
    C1(C1),
    C2(C2),
    C3(C3),
    AddrReq(AddrReqMsg),
    AddrResp(AddrRespMsg),
}

const TAG_REG_REQ: u8 = 0x01;
const TAG_REG_RESP: u8 = 0x02;
const TAG_M1: u8 = 0x10;
const TAG_M2: u8 = 0x11;
const TAG_M3: u8 = 0x12;
const TAG_M4: u8 = 0x13;
const TAG_M5: u8 = 0x14;
const TAG_C1: u8 = 0x20;
const TAG_C2: u8 = 0x21;
const TAG_C3: u8 = 0x22;
const TAG_ADDR_REQ: u8 = 0x30;
const TAG_ADDR_RESP: u8 = 0x31;

impl WireMessage {
    pub fn tag(&self) -> u8 {
        match self {
            WireMessage::RegReq(_) => TAG_REG_REQ,
            WireMessage::RegResp(_) => TAG_REG_RESP,
            WireMessage::M1(_) => TAG_M1,
            WireMessage::M2(_) => TAG_M2,
            WireMessage::M3(_) => TAG_M3,
            WireMessage::M4(_) => TAG_M4,
            WireMessage::M5(_) => TAG_M5,
            WireMessage::C1(_) => TAG_C1,
            WireMessage::C2(_) => TAG_C2,
            WireMessage::C3(_) => TAG_C3,
            WireMessage::AddrReq(_) => TAG_ADDR_REQ,
            WireMessage::AddrResp(_) => TAG_ADDR_RESP,
        }
    }

    /// Short name for reports and traces.
    pub fn name(&self) -> &'static str {
        match self {
            WireMessage::RegReq(_) => "reg_req",
            WireMessage::RegResp(_) => "reg_resp",
            WireMessage::M1(_) => "m1",
            WireMessage::M2(_) => "m2",
            WireMessage::M3(_) => "m3",
            WireMessage::M4(_) => "m4",
            WireMessage::M5(_) => "m5",
            WireMessage::C1(_) => "c1",
            WireMessage::C2(_) => "c2",
            WireMessage::C3(_) => "c3",
            WireMessage::AddrReq(_) => "addr_req",
            WireMessage::AddrResp(_) => "addr_resp",
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let fields: Vec<Vec<u8>> = match self {
            WireMessage::RegReq(m) => vec![
                m.id.as_bytes().to_vec(),
                m.d0.to_vec(),
                m.st.clone(),
            ],
            WireMessage::RegResp(m) => vec![
                m.c.to_vec(),
                m.escrow.clone(),
                elem_bytes(&m.p).to_vec(),
                elem_bytes(&m.x).to_vec(),
                elem_bytes(&m.p_s).to_vec(),
            ],
            WireMessage::M1(m) => vec![
                elem_bytes(&m.q_i1).to_vec(),
                m.x1.to_vec(),
                m.x2.as_bytes().to_vec(),
                m.ts.to_bytes().to_vec(),
            ],
            WireMessage::M2(m) => vec![
                elem_bytes(&m.q_i1).to_vec(),
                m.x1.to_vec(),
                m.x2.as_bytes().to_vec(),
                m.ts.to_bytes().to_vec(),
                elem_bytes(&m.q_j1).to_vec(),
                m.y1.to_vec(),
                m.y2.as_bytes().to_vec(),
            ],
            WireMessage::M3(m) => vec![m.z_i.as_bytes().to_vec(), m.z_j.as_bytes().to_vec()],
            WireMessage::M4(m) => vec![
                elem_bytes(&m.q_j1).to_vec(),
                m.r_j.as_bytes().to_vec(),
                m.cid.as_bytes().to_vec(),
                m.t.to_bytes().to_vec(),
                m.r_mask.to_vec(),
            ],
            WireMessage::M5(m) => vec![m.r_i.as_bytes().to_vec()],
            WireMessage::C1(m) => vec![
                m.cid.as_bytes().to_vec(),
                m.t.to_bytes().to_vec(),
                m.x1.to_vec(),
                m.x2.as_bytes().to_vec(),
                m.ts.to_bytes().to_vec(),
            ],
            WireMessage::C2(m) => vec![m.y1.to_vec(), m.y2.as_bytes().to_vec()],
            WireMessage::C3(m) => vec![m.r_i.as_bytes().to_vec()],
            WireMessage::AddrReq(m) => vec![m.blob.clone()],
            WireMessage::AddrResp(m) => vec![m.blob.clone()],
        };
        let refs: Vec<&[u8]> = fields.iter().map(|f| f.as_slice()).collect();
        let body = encode_fields(&refs).expect("wire fields are bounded");
        let mut out = Vec::with_capacity(2 + body.len());
        out.push(WIRE_VERSION);
        out.push(self.tag());
        out.extend_from_slice(&body);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        if bytes.len() < 2 {
            return Err(DecodeError::Empty);
        }
        if bytes[0] != WIRE_VERSION {
            return Err(DecodeError::BadVersion(bytes[0]));
        }
        let tag = bytes[1];
        let fields = decode_fields(&bytes[2..]).map_err(|e| match e {
            CryptoError::MalformedFrame | CryptoError::TooManyFields => DecodeError::Frame,
            _ => DecodeError::Frame,
        })?;
        let mut r = FieldReader::new(&fields);
        let msg = match tag {
            TAG_REG_REQ => WireMessage::RegReq(RegReq {
                id: Identity::from_padded(r.arr::<DIGEST_BYTES>()?),
                d0: r.arr()?,
                st: r.var_nonempty()?,
            }),
            TAG_REG_RESP => WireMessage::RegResp(RegResp {
                c: r.arr()?,
                escrow: r.var_nonempty()?,
                p: r.elem()?,
                x: r.elem()?,
                p_s: r.elem()?,
            }),
            TAG_M1 => WireMessage::M1(M1 {
                q_i1: r.elem()?,
                x1: r.arr()?,
                x2: Digest(r.arr()?),
                ts: r.ts()?,
            }),
            TAG_M2 => WireMessage::M2(M2 {
                q_i1: r.elem()?,
                x1: r.arr()?,
                x2: Digest(r.arr()?),
                ts: r.ts()?,
                q_j1: r.elem()?,
                y1: r.arr()?,
                y2: Digest(r.arr()?),
            }),
            TAG_M3 => WireMessage::M3(M3 {
                z_i: Digest(r.arr()?),
                z_j: Digest(r.arr()?),
            }),
            TAG_M4 => WireMessage::M4(M4 {
                q_j1: r.elem()?,
                r_j: Digest(r.arr()?),
                cid: Cid(r.arr()?),
                t: r.ts()?,
                r_mask: r.arr()?,
            }),
            TAG_M5 => WireMessage::M5(M5 { r_i: Digest(r.arr()?) }),
            TAG_C1 => WireMessage::C1(C1 {
                cid: Cid(r.arr()?),
                t: r.ts()?,
                x1: r.arr()?,
                x2: Digest(r.arr()?),
                ts: r.ts()?,
            }),
            TAG_C2 => WireMessage::C2(C2 {
                y1: r.arr()?,
                y2: Digest(r.arr()?),
            }),
            TAG_C3 => WireMessage::C3(C3 { r_i: Digest(r.arr()?) }),
            TAG_ADDR_REQ => WireMessage::AddrReq(AddrReqMsg { blob: r.var_nonempty()? }),
            TAG_ADDR_RESP => WireMessage::AddrResp(AddrRespMsg { blob: r.var_nonempty()? }),
            other => return Err(DecodeError::UnknownTag(other)),
        };
        r.finish()?;
        Ok(msg)
    }
}

/// Strict positional reader over a decoded field list.
struct FieldReader<'a> {
    fields: &'a [Vec<u8>],
    index: usize,
}

impl<'a> FieldReader<'a> {
    fn new(fields: &'a [Vec<u8>]) -> Self {
        Self { fields, index: 0 }
    }

    fn next(&mut self) -> Result<&'a [u8], DecodeError> {
        let f = self.fields.get(self.index).ok_or(DecodeError::FieldCount {
            expected: self.index + 1,
            got: self.fields.len(),
        })?;
        self.index += 1;
        Ok(f)
    }

    fn arr<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        let index = self.index;
        let f = self.next()?;
        let buf: [u8; N] = f.try_into().map_err(|_| DecodeError::FieldWidth {
            index,
            expected: N,
            got: f.len(),
        })?;
        Ok(buf)
    }

    fn elem(&mut self) -> Result<BigUint, DecodeError> {
        Ok(elem_from_bytes(&self.arr::<ELEM_BYTES>()?))
    }

    fn ts(&mut self) -> Result<Timestamp, DecodeError> {
        Ok(Timestamp::from_bytes(&self.arr::<8>()?))
    }

    fn var_nonempty(&mut self) -> Result<Vec<u8>, DecodeError> {
        let index = self.index;
        let f = self.next()?;
        if f.is_empty() {
            return Err(DecodeError::EmptyField(index));
        }
        Ok(f.to_vec())
    }

    fn finish(&self) -> Result<(), DecodeError> {
        if self.index != self.fields.len() {
            return Err(DecodeError::FieldCount {
                expected: self.index,
                got: self.fields.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    fn sample_m1() -> WireMessage {
        WireMessage::M1(M1 {
            q_i1: BigUint::from(123456u32),
            x1: [3u8; 32],
            x2: Digest([4u8; 32]),
            ts: Timestamp(99),
        })
    }

    #[test]
    fn roundtrip_m1() {
        let msg = sample_m1();
        let bytes = msg.encode();
        assert_eq!(bytes[0], WIRE_VERSION);
        assert_eq!(bytes[1], 0x10);
        assert_eq!(WireMessage::decode(&bytes).unwrap(), msg);
    }

    #[test]
    fn roundtrip_all_variants() {
        let msgs = vec![
            WireMessage::RegReq(RegReq {
                id: Identity::new(b"u").unwrap(),
                d0: [1; 32],
                st: vec![9, 9],
            }),
            WireMessage::RegResp(RegResp {
                c: [2; 32],
                escrow: vec![1],
                p: BigUint::from(251u32),
                x: BigUint::from(2u32),
                p_s: BigUint::zero(),
            }),
            sample_m1(),
            WireMessage::M2(M2 {
                q_i1: BigUint::from(1u32),
                x1: [0; 32],
                x2: Digest([1; 32]),
                ts: Timestamp(7),
                q_j1: BigUint::from(2u32),
                y1: [3; 32],
                y2: Digest([4; 32]),
            }),
            WireMessage::M3(M3 { z_i: Digest([5; 32]), z_j: Digest([6; 32]) }),
            WireMessage::M4(M4 {
                q_j1: BigUint::from(9u32),
                r_j: Digest([7; 32]),
                cid: Cid([8; 16]),
                t: Timestamp(1),
                r_mask: [9; 32],
            }),
            WireMessage::M5(M5 { r_i: Digest([1; 32]) }),
            WireMessage::C1(C1 {
                cid: Cid([2; 16]),
                t: Timestamp(3),
                x1: [4; 32],
                x2: Digest([5; 32]),
                ts: Timestamp(6),
            }),
            WireMessage::C2(C2 { y1: [6; 32], y2: Digest([7; 32]) }),
            WireMessage::C3(C3 { r_i: Digest([8; 32]) }),
            WireMessage::AddrReq(AddrReqMsg { blob: vec![1, 2, 3] }),
            WireMessage::AddrResp(AddrRespMsg { blob: vec![4] }),
        ];
        for msg in msgs {
            let bytes = msg.encode();
            assert_eq!(WireMessage::decode(&bytes).unwrap(), msg, "{}", msg.name());
        }
    }

    #[test]
    fn unknown_tag_rejected() {
        let mut bytes = sample_m1().encode();
        bytes[1] = 0x7f;
        assert_eq!(WireMessage::decode(&bytes), Err(DecodeError::UnknownTag(0x7f)));
    }

    #[test]
    fn bad_version_rejected() {
        let mut bytes = sample_m1().encode();
        bytes[0] = 0x02;
        assert_eq!(WireMessage::decode(&bytes), Err(DecodeError::BadVersion(0x02)));
    }

    #[test]
    fn wrong_widths_rejected() {
        // M5 with a 31-byte digest field
        let body = encode_fields(&[&[0u8; 31]]).unwrap();
        let mut bytes = vec![WIRE_VERSION, 0x14];
        bytes.extend_from_slice(&body);
        assert!(matches!(
            WireMessage::decode(&bytes),
            Err(DecodeError::FieldWidth { index: 0, expected: 32, got: 31 })
        ));
    }

    #[test]
    fn trailing_fields_rejected() {
        let body = encode_fields(&[&[0u8; 32], &[0u8; 32]]).unwrap();
        let mut bytes = vec![WIRE_VERSION, 0x14];
        bytes.extend_from_slice(&body);
        assert!(matches!(
            WireMessage::decode(&bytes),
            Err(DecodeError::FieldCount { .. })
        ));
    }

    #[test]
    fn truncated_frame_rejected() {
        let bytes = sample_m1().encode();
        for cut in [0, 1, 2, 3, bytes.len() - 1] {
            assert!(WireMessage::decode(&bytes[..cut]).is_err(), "cut={cut}");
        }
    }
}
