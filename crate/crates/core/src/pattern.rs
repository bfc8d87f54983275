//! Activation patterns: one bit per hidden node, layer-major.

use std::fmt;

use crate::error::{Error, Result};

/// Sign pattern of every hidden pre-activation. Bit `i` is 1 when the
/// pre-activation of hidden node `i` (counted layer-major) is `>= 0`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ActivationPattern {
    len: usize,
    words: Vec<u64>,
}

impl ActivationPattern {
    pub fn zeros(len: usize) -> Self {
        ActivationPattern {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for bit in bits {
            if len % 64 == 0 {
                words.push(0);
            }
            if bit {
                words[len / 64] |= 1 << (len % 64);
            }
            len += 1;
        }
        ActivationPattern { len, words }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {} out of range for pattern of length {}", i, self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len);
        if value {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Fraction of active nodes. An empty pattern (no hidden layers) counts as fully active.
    pub fn activation_rate(&self) -> f64 {
        if self.len == 0 {
            1.0
        } else {
            self.count_ones() as f64 / self.len as f64
        }
    }

    /// Number of positions where the two patterns differ.
    pub fn hamming(&self, other: &ActivationPattern) -> usize {
        assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// Stable 64-bit FNV-1a hash over the length and the packed bits.
    pub fn hash64(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut feed = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(PRIME);
            }
        };
        feed(&(self.len as u64).to_le_bytes());
        for w in &self.words {
            feed(&w.to_le_bytes());
        }
        h
    }

    /// Hex bit-string: each digit packs four consecutive bits, the first bit
    /// being the most significant. The last digit is zero-padded.
    pub fn to_hex(&self) -> String {
        let mut out = String::with_capacity(self.len.div_ceil(4));
        for chunk in 0..self.len.div_ceil(4) {
            let mut digit = 0u32;
            for k in 0..4 {
                let i = chunk * 4 + k;
                digit <<= 1;
                if i < self.len && self.get(i) {
                    digit |= 1;
                }
            }
            out.push(char::from_digit(digit, 16).unwrap());
        }
        out
    }

    pub fn from_hex(hex: &str, len: usize) -> Result<Self> {
        if hex.len() != len.div_ceil(4) {
            return Err(Error::Format {
                offset: 0,
                message: format!("pattern hex has {} digits, expected {}", hex.len(), len.div_ceil(4)),
            });
        }
        let mut pattern = ActivationPattern::zeros(len);
        for (chunk, c) in hex.chars().enumerate() {
            let digit = c.to_digit(16).ok_or_else(|| Error::Format {
                offset: chunk as u64,
                message: format!("invalid hex digit {c:?}"),
            })?;
            for k in 0..4 {
                let i = chunk * 4 + k;
                let bit = digit >> (3 - k) & 1 == 1;
                if i < len {
                    pattern.set(i, bit);
                } else if bit {
                    return Err(Error::Format {
                        offset: chunk as u64,
                        message: "nonzero padding bits".into(),
                    });
                }
            }
        }
        Ok(pattern)
    }
}

impl fmt::Debug for ActivationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ActivationPattern({}:{})", self.len, self.to_hex())
    }
}
