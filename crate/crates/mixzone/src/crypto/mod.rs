//! Byte-level and number-theoretic primitives: extended Chebyshev
//! polynomials over Z_p, length-framed field hashing, XOR masking and
//! authenticated symmetric encryption.

mod aead;
mod cheby;
mod framing;
mod mask;
mod params;

pub use aead::{sym_decrypt, sym_encrypt, NONCE_BYTES};
pub use cheby::{cheby_eval, cheby_eval_naive, cheby_keypair, ChebySecret};
pub use framing::{decode_fields, encode_fields, hash_fields, Digest, DIGEST_BYTES};
pub use mask::mask;
pub use params::{
    default_prime, elem_bytes, elem_from_bytes, is_probable_prime, random_below, test_prime,
    ChebyParams, ELEM_BYTES,
};

use thiserror::Error;

/// Errors raised by the primitive layer.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("invalid chaotic-map parameters: {0}")]
    InvalidParams(&'static str),
    #[error("field exceeds 2^32 - 1 bytes")]
    FieldTooLong,
    #[error("frame holds more than 2^16 - 1 fields")]
    TooManyFields,
    #[error("malformed field frame")]
    MalformedFrame,
    #[error("value longer than mask pad")]
    ValueTooLong,
    #[error("authenticated decryption failed")]
    AuthFailure,
}
