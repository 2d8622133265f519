//! Fixed-width identifiers and their canonical encodings.
//!
//! Addresses are 20 bytes, batch identifiers 12 bytes, and a storage word is
//! 32 bytes, so one (contract, batch) reference fits exactly into one word.
//! All of them cross process boundaries as lowercase hex without a prefix.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;
use tiny_keccak::{Hasher, Keccak};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentError {
    #[error("expected {expected} bytes, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("expected {expected} hex digits, got {actual}")]
    HexLength { expected: usize, actual: usize },
    #[error("invalid hex: {0}")]
    Hex(String),
}

/// Keccak-256, the hash behind the EVM's `SHA3` opcode.
pub fn keccak256(data: &[u8]) -> [u8; 32] {
    let mut hasher = Keccak::v256();
    hasher.update(data);
    let mut out = [0u8; 32];
    hasher.finalize(&mut out);
    out
}

fn decode_hex<const N: usize>(s: &str) -> Result<[u8; N], IdentError> {
    if s.len() != N * 2 {
        return Err(IdentError::HexLength {
            expected: N * 2,
            actual: s.len(),
        });
    }
    // Canonical form is lowercase only.
    if s.bytes().any(|b| b.is_ascii_uppercase()) {
        return Err(IdentError::Hex(format!("{s:?} is not lowercase")));
    }
    let mut out = [0u8; N];
    hex::decode_to_slice(s, &mut out).map_err(|e| IdentError::Hex(e.to_string()))?;
    Ok(out)
}

macro_rules! fixed_bytes {
    ($(#[$meta:meta])* $name:ident, $len:expr) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
        pub struct $name([u8; $len]);

        impl $name {
            pub const LEN: usize = $len;
            pub const ZERO: Self = Self([0u8; $len]);

            pub const fn new(bytes: [u8; $len]) -> Self {
                Self(bytes)
            }

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }
        }

        impl TryFrom<&[u8]> for $name {
            type Error = IdentError;

            fn try_from(bytes: &[u8]) -> Result<Self, Self::Error> {
                let arr: [u8; $len] = bytes.try_into().map_err(|_| IdentError::Length {
                    expected: $len,
                    actual: bytes.len(),
                })?;
                Ok(Self(arr))
            }
        }

        impl From<[u8; $len]> for $name {
            fn from(bytes: [u8; $len]) -> Self {
                Self(bytes)
            }
        }

        impl FromStr for $name {
            type Err = IdentError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                decode_hex::<$len>(s).map(Self)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.to_hex())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

fixed_bytes!(
    /// Participant account or contract address.
    Address,
    20
);
fixed_bytes!(
    /// Identifier of a batch, unique within its token contract.
    BatchId,
    12
);
fixed_bytes!(
    /// One 32-byte storage word.
    Word32,
    32
);

impl Address {
    /// Stable address for a human-readable participant label: the low 20
    /// bytes of `keccak256(label)`.
    pub fn from_label(label: &str) -> Self {
        let digest = keccak256(label.as_bytes());
        let mut out = [0u8; 20];
        out.copy_from_slice(&digest[12..]);
        Self(out)
    }

    /// Address left-padded to a full word, the way the EVM stores it.
    pub fn to_word(&self) -> Word32 {
        let mut out = [0u8; 32];
        out[12..].copy_from_slice(&self.0);
        Word32(out)
    }
}

/// One draw of an input batch, as consumed by a batch creation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConsumedInput {
    pub contract: Address,
    pub batch: BatchId,
    pub amount: u64,
}

impl ConsumedInput {
    pub fn new(contract: Address, batch: BatchId, amount: u64) -> Self {
        Self {
            contract,
            batch,
            amount,
        }
    }
}

/// Canonical pre-image of a batch identifier:
/// `(slot ‖ amount_be8)*  ‖ sender ‖ timestamp_be8`.
///
/// Every field is fixed width, so no length prefixes are needed.
pub fn batch_id_preimage(inputs: &[ConsumedInput], sender: &Address, timestamp: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(inputs.len() * 40 + 28);
    for input in inputs {
        out.extend_from_slice(pack_slot(&input.contract, &input.batch).as_bytes());
        out.extend_from_slice(&input.amount.to_be_bytes());
    }
    out.extend_from_slice(sender.as_bytes());
    out.extend_from_slice(&timestamp.to_be_bytes());
    out
}

/// First 12 bytes of the Keccak-256 digest of the canonical pre-image.
pub fn derive_batch_id(inputs: &[ConsumedInput], sender: &Address, timestamp: u64) -> BatchId {
    let digest = keccak256(&batch_id_preimage(inputs, sender, timestamp));
    let mut id = [0u8; 12];
    id.copy_from_slice(&digest[..12]);
    BatchId(id)
}

/// Concatenates a contract address and a batch id into one word.
pub fn pack_slot(contract: &Address, id: &BatchId) -> Word32 {
    let mut out = [0u8; 32];
    out[..20].copy_from_slice(&contract.0);
    out[20..].copy_from_slice(&id.0);
    Word32(out)
}

/// Inverse of [`pack_slot`].
pub fn unpack_slot(word: &Word32) -> (Address, BatchId) {
    let mut addr = [0u8; 20];
    let mut id = [0u8; 12];
    addr.copy_from_slice(&word.0[..20]);
    id.copy_from_slice(&word.0[20..]);
    (Address(addr), BatchId(id))
}

/// Byte-slice variant of [`pack_slot`] for untyped callers.
pub fn pack_slot_bytes(contract: &[u8], id: &[u8]) -> Result<Word32, IdentError> {
    Ok(pack_slot(&Address::try_from(contract)?, &BatchId::try_from(id)?))
}

/// Byte-slice variant of [`unpack_slot`].
pub fn unpack_slot_bytes(word: &[u8]) -> Result<(Address, BatchId), IdentError> {
    Ok(unpack_slot(&Word32::try_from(word)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(start: u8, len: usize) -> Vec<u8> {
        (0..len).map(|i| start + i as u8).collect()
    }

    #[test]
    fn pack_is_concatenation() {
        let addr = Address::try_from(seq(1, 20).as_slice()).unwrap();
        let id = BatchId::try_from(seq(21, 12).as_slice()).unwrap();
        let word = pack_slot(&addr, &id);
        assert_eq!(word.as_bytes().to_vec(), seq(1, 32));
        assert_eq!(
            word.to_hex(),
            "0102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f20"
        );
    }

    #[test]
    fn zero_round_trip() {
        let word = pack_slot(&Address::ZERO, &BatchId::ZERO);
        assert_eq!(word, Word32::ZERO);
        assert_eq!(unpack_slot(&Word32::ZERO), (Address::ZERO, BatchId::ZERO));
    }

    #[test]
    fn slice_lengths_are_checked() {
        assert_eq!(
            pack_slot_bytes(&[0u8; 19], &[0u8; 12]),
            Err(IdentError::Length {
                expected: 20,
                actual: 19
            })
        );
        assert_eq!(
            pack_slot_bytes(&[0u8; 20], &[0u8; 13]),
            Err(IdentError::Length {
                expected: 12,
                actual: 13
            })
        );
        assert!(unpack_slot_bytes(&[0u8; 31]).is_err());
        assert!(unpack_slot_bytes(&[0u8; 32]).is_ok());
    }

    #[test]
    fn flipping_byte_21_only_touches_the_batch_id() {
        let addr = Address::from_label("a");
        let id = BatchId::new([7; 12]);
        let mut bytes = *pack_slot(&addr, &id).as_bytes();
        // byte 21 in 1-based numbering is the first byte of the id
        bytes[20] ^= 0xff;
        let (a2, id2) = unpack_slot(&Word32::new(bytes));
        assert_eq!(a2, addr);
        assert_ne!(id2, id);
        assert_eq!(id2.as_bytes()[1..], id.as_bytes()[1..]);
    }

    #[test]
    fn every_byte_position_maps_to_one_side() {
        let base = pack_slot(&Address::from_label("x"), &BatchId::new([3; 12]));
        let (a0, b0) = unpack_slot(&base);
        for pos in 0..32 {
            let mut bytes = *base.as_bytes();
            bytes[pos] ^= 0x01;
            let (a, b) = unpack_slot(&Word32::new(bytes));
            if pos < 20 {
                assert!(a != a0 && b == b0, "byte {pos}");
            } else {
                assert!(a == a0 && b != b0, "byte {pos}");
            }
        }
    }

    #[test]
    fn hex_forms_are_fixed_width_lowercase() {
        let addr = Address::from_label("forester");
        assert_eq!(addr.to_hex().len(), 40);
        assert_eq!(addr.to_hex().parse::<Address>().unwrap(), addr);
        assert_eq!(BatchId::ZERO.to_hex().len(), 24);
        assert!("0xaa".parse::<Address>().is_err());
        assert!("AA".repeat(20).parse::<Address>().is_err());
        assert!("zz".repeat(12).parse::<BatchId>().is_err());
    }

    #[test]
    fn keccak_known_vectors() {
        assert_eq!(
            hex::encode(keccak256(b"")),
            "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"
        );
        assert_eq!(
            hex::encode(keccak256(b"abc")),
            "4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45"
        );
    }

    #[test]
    fn golden_empty_inputs_id() {
        let id = derive_batch_id(&[], &Address::new([0xaa; 20]), 0);
        assert_eq!(id.to_hex(), "4fe386c0e82932022fab151f");
    }

    #[test]
    fn preimage_layout() {
        let input = ConsumedInput::new(Address::new([1; 20]), BatchId::new([2; 12]), 5);
        let pre = batch_id_preimage(&[input], &Address::new([3; 20]), 258);
        assert_eq!(pre.len(), 40 + 28);
        assert_eq!(&pre[32..40], &5u64.to_be_bytes());
        assert_eq!(&pre[40..60], &[3u8; 20]);
        assert_eq!(&pre[60..], &258u64.to_be_bytes());
    }

    #[test]
    fn consecutive_timestamps_never_collide() {
        let sender = Address::from_label("forester");
        let ids: std::collections::HashSet<_> =
            (0..10_000u64).map(|t| derive_batch_id(&[], &sender, t)).collect();
        assert_eq!(ids.len(), 10_000);
    }
}
