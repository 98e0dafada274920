//! Fixed-length bit words, the unit mapped to one constellation symbol.

use std::fmt;

use crate::error::{Error, Result};
use crate::num::Real;

/// Maximum number of bits per symbol supported by the toolkit.
pub const MAX_BITS_PER_SYMBOL: usize = 4;

/// An ordered sequence of up to four bits. The leftmost bit is the most
/// significant when the word is interpreted as an unsigned integer.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitWord {
    value: u8,
    len: u8,
}

impl BitWord {
    /// Builds a word from its integer value and bit length.
    pub fn new(value: usize, len: usize) -> Self {
        assert!(
            (1..=MAX_BITS_PER_SYMBOL).contains(&len),
            "bit word length must be in 1..=4, got {len}"
        );
        assert!(value < (1 << len), "value {value} does not fit in {len} bits");
        BitWord {
            value: value as u8,
            len: len as u8,
        }
    }

    /// Builds a word from individual bits, most significant first.
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut value = 0usize;
        for &b in bits {
            debug_assert!(b <= 1);
            value = (value << 1) | (b as usize & 1);
        }
        BitWord::new(value, bits.len())
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The word interpreted as an unsigned integer (leftmost bit most
    /// significant). Doubles as the index into a constellation table.
    pub fn index(&self) -> usize {
        self.value as usize
    }

    /// Bit at position `i`, counting from the left.
    pub fn bit(&self, i: usize) -> u8 {
        debug_assert!(i < self.len());
        (self.value >> (self.len() - 1 - i)) & 1
    }

    /// Iterates bits most significant first.
    pub fn bits(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len()).map(move |i| self.bit(i))
    }

    /// Bipolar view: 0 maps to -1 and 1 maps to +1, elementwise.
    pub fn bipolar<R: Real>(&self) -> impl Iterator<Item = R> + '_ {
        self.bits().map(|b| {
            if b == 1 {
                R::one()
            } else {
                -R::one()
            }
        })
    }

    /// Number of differing bit positions between two equal-length words.
    pub fn hamming(&self, other: &BitWord) -> Result<u32> {
        if self.len != other.len {
            return Err(Error::WordLengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok((self.value ^ other.value).count_ones())
    }

    /// All `2^len` words of the given length, in integer order.
    pub fn all(len: usize) -> impl Iterator<Item = BitWord> + Clone {
        (0..1usize << len).map(move |v| BitWord::new(v, len))
    }

    /// Parses a bit string such as `0011`.
    pub fn parse(s: &str) -> Result<Self> {
        if s.is_empty() || s.len() > MAX_BITS_PER_SYMBOL {
            return Err(Error::invalid(format!("bad bit word '{s}'")));
        }
        let mut value = 0usize;
        for c in s.chars() {
            value = (value << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => return Err(Error::invalid(format!("bad bit word '{s}'"))),
                };
        }
        Ok(BitWord::new(value, s.len()))
    }
}

impl fmt::Display for BitWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitWord({self})")
    }
}
