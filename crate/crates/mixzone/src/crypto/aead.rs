use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use rand::RngCore;

use super::CryptoError;

pub const NONCE_BYTES: usize = 12;

/// Authenticated encryption with a fresh random nonce per call.
/// Output layout: nonce || ciphertext+tag.
pub fn sym_encrypt<R: RngCore>(key: &[u8; 32], plaintext: &[u8], rng: &mut R) -> Vec<u8> {
    let cipher = ChaCha20Poly1305::new(Key::from_slice(key));
    let mut nonce = [0u8; NONCE_BYTES];
    rng.fill_bytes(&mut nonce);
    let ct = cipher
        .encrypt(Nonce::from_slice(&nonce), plaintext)
        .expect("encryption is infallible for in-memory plaintexts");
    let mut out = Vec::with_capacity(NONCE_BYTES + ct.len());
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&ct);
    out
}

/// Inverse of [`sym_encrypt`]. Any modification of the ciphertext, or
/// decryption under a different key, fails authentication.
pub fn sym_decrypt(key: &[u8; 32], ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if ciphertext.len() < NONCE_BYTES {
        return Err(CryptoError::AuthFailure);
    }
    let (nonce, ct) = ciphertext.split_at(NONCE_BYTES);
    let cipher = ChaCha20Poly1305::new(Key::from_slice(key));
    cipher
        .decrypt(Nonce::from_slice(nonce), ct)
        .map_err(|_| CryptoError::AuthFailure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let key = [7u8; 32];
        for len in [0usize, 1, 31, 32, 100] {
            let msg = vec![0xabu8; len];
            let ct = sym_encrypt(&key, &msg, &mut rng);
            assert_eq!(sym_decrypt(&key, &ct).unwrap(), msg);
        }
    }

    #[test]
    fn fresh_nonce_per_call() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let key = [7u8; 32];
        let a = sym_encrypt(&key, b"m", &mut rng);
        let b = sym_encrypt(&key, b"m", &mut rng);
        assert_ne!(a, b);
    }

    #[test]
    fn single_bit_tamper_detected() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let key = [9u8; 32];
        let ct = sym_encrypt(&key, b"payload", &mut rng);
        for bit in 0..ct.len() * 8 {
            let mut bad = ct.clone();
            bad[bit / 8] ^= 1 << (bit % 8);
            assert_eq!(sym_decrypt(&key, &bad), Err(CryptoError::AuthFailure));
        }
    }

    #[test]
    fn wrong_key_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let ct = sym_encrypt(&[1u8; 32], b"secret", &mut rng);
        assert_eq!(sym_decrypt(&[2u8; 32], &ct), Err(CryptoError::AuthFailure));
    }

    #[test]
    fn truncated_input_rejected() {
        assert_eq!(sym_decrypt(&[0u8; 32], &[1, 2, 3]), Err(CryptoError::AuthFailure));
    }
}
