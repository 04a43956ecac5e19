use super::framing::DIGEST_BYTES;
use super::CryptoError;

/// XOR of `value` against a fixed-width pad, the protocol's blinding
/// operation. `value` is left-padded with zeros to the pad width, so
/// integers must already be big-endian encoded. Applying the same pad
/// twice restores the padded value.
pub fn mask(value: &[u8], pad: &[u8; DIGEST_BYTES]) -> Result<[u8; DIGEST_BYTES], CryptoError> {
    if value.len() > DIGEST_BYTES {
        return Err(CryptoError::ValueTooLong);
    }
    let mut out = *pad;
    let offset = DIGEST_BYTES - value.len();
    for (i, b) in value.iter().enumerate() {
        out[offset + i] ^= b;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn involution() {
        let pad = [0xa5u8; DIGEST_BYTES];
        let value = [0x12u8; DIGEST_BYTES];
        let once = mask(&value, &pad).unwrap();
        assert_eq!(mask(&once, &pad).unwrap(), value);
    }

    #[test]
    fn zero_value_yields_pad() {
        let pad: [u8; 32] = core::array::from_fn(|i| i as u8);
        assert_eq!(mask(&[0u8; 32], &pad).unwrap(), pad);
        assert_eq!(mask(&[], &pad).unwrap(), pad);
    }

    #[test]
    fn pad_masks_to_zero() {
        let pad: [u8; 32] = core::array::from_fn(|i| (i * 7) as u8);
        assert_eq!(mask(&pad.clone(), &pad).unwrap(), [0u8; 32]);
    }

    #[test]
    fn short_value_left_padded() {
        let pad = [0u8; 32];
        let out = mask(b"\x01\x02", &pad).unwrap();
        assert_eq!(&out[..30], &[0u8; 30]);
        assert_eq!(&out[30..], &[1, 2]);
    }

    #[test]
    fn oversize_value_rejected() {
        let pad = [0u8; 32];
        assert_eq!(mask(&[0u8; 33], &pad), Err(CryptoError::ValueTooLong));
    }
}
