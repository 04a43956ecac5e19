use sha2::{Digest as _, Sha256};

use super::CryptoError;

/// Output width of the configured hash, k/8 bytes for k = 256.
pub const DIGEST_BYTES: usize = 32;

/// Fixed-width hash output.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; DIGEST_BYTES]);

impl Digest {
    pub fn as_bytes(&self) -> &[u8; DIGEST_BYTES] {
        &self.0
    }
}

impl AsRef<[u8]> for Digest {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl std::fmt::Debug for Digest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Digest(")?;
        for b in &self.0[..6] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

/// Unambiguous realization of field concatenation: each field is
/// emitted as a 4-byte big-endian length followed by its bytes, so the
/// encoding is injective over field lists.
pub fn encode_fields(fields: &[&[u8]]) -> Result<Vec<u8>, CryptoError> {
    if fields.len() >= 1 << 16 {
        return Err(CryptoError::TooManyFields);
    }
    let mut total = 0usize;
    for f in fields {
        if f.len() >= 1 << 32 {
            return Err(CryptoError::FieldTooLong);
        }
        total += 4 + f.len();
    }
    let mut out = Vec::with_capacity(total);
    for f in fields {
        out.extend_from_slice(&(f.len() as u32).to_be_bytes());
        out.extend_from_slice(f);
    }
    Ok(out)
}

/// Inverse of [`encode_fields`]; rejects truncated frames and trailing
/// bytes. Length prefixes are validated against the remaining input
/// before any allocation.
pub fn decode_fields(bytes: &[u8]) -> Result<Vec<Vec<u8>>, CryptoError> {
    let mut fields = Vec::new();
    let mut rest = bytes;
    while !rest.is_empty() {
        if rest.len() < 4 {
            return Err(CryptoError::MalformedFrame);
        }
        let len = u32::from_be_bytes([rest[0], rest[1], rest[2], rest[3]]) as usize;
        rest = &rest[4..];
        if rest.len() < len {
            return Err(CryptoError::MalformedFrame);
        }
        fields.push(rest[..len].to_vec());
        rest = &rest[len..];
        if fields.len() >= 1 << 16 {
            return Err(CryptoError::TooManyFields);
        }
    }
    Ok(fields)
}

/// SHA-256 over the length-framed encoding of `fields`.
pub fn hash_fields(fields: &[&[u8]]) -> Digest {
    let mut hasher = Sha256::new();
    for f in fields {
        debug_assert!((f.len() as u64) < 1 << 32);
        hasher.update((f.len() as u32).to_be_bytes());
        hasher.update(f);
    }
    let mut out = [0u8; DIGEST_BYTES];
    out.copy_from_slice(&hasher.finalize());
    Digest(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoding_matches_definition() {
        let enc = encode_fields(&[b"AB", b"C"]).unwrap();
        assert_eq!(enc, b"\x00\x00\x00\x02AB\x00\x00\x00\x01C");
        assert_eq!(encode_fields(&[]).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn length_prefix_disambiguates() {
        assert_ne!(
            encode_fields(&[b"ABC"]).unwrap(),
            encode_fields(&[b"AB", b"C"]).unwrap()
        );
    }

    #[test]
    fn decode_inverts_encode() {
        let fields: [&[u8]; 3] = [b"", b"hello", b"\x00\x01"];
        let enc = encode_fields(&fields).unwrap();
        let dec = decode_fields(&enc).unwrap();
        assert_eq!(dec, fields.map(|f| f.to_vec()));
    }

    #[test]
    fn decode_rejects_truncation_and_overrun() {
        let enc = encode_fields(&[b"hello"]).unwrap();
        assert_eq!(
            decode_fields(&enc[..enc.len() - 1]),
            Err(CryptoError::MalformedFrame)
        );
        // claimed length far beyond the buffer
        let bogus = [0xff, 0xff, 0xff, 0xff, b'x'];
        assert_eq!(decode_fields(&bogus), Err(CryptoError::MalformedFrame));
        assert_eq!(decode_fields(&[0, 0]), Err(CryptoError::MalformedFrame));
    }

    #[test]
    fn hash_is_deterministic_and_sensitive() {
        let a = hash_fields(&[b"a"]);
        assert_eq!(a, hash_fields(&[b"a"]));
        assert_ne!(a, hash_fields(&[b"b"]));
        assert_eq!(a.as_bytes().len(), DIGEST_BYTES);
        // hash of the framing, not the raw concatenation
        assert_ne!(hash_fields(&[b"AB", b"C"]), hash_fields(&[b"ABC"]));
    }

    #[test]
    fn hash_matches_encoded_frame() {
        use sha2::{Digest as _, Sha256};
        let fields: [&[u8]; 2] = [b"xy", b"z"];
        let enc = encode_fields(&fields).unwrap();
        let direct: [u8; 32] = Sha256::digest(&enc).into();
        assert_eq!(hash_fields(&fields).0, direct);
    }
}
