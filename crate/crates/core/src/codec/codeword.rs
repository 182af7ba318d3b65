use std::fmt;
use std::str::FromStr;

use crate::error::{param, Error, Result};

pub(crate) const WORD_BITS: usize = 64;

pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

/// A fixed-length bit vector of `b` bits.
///
/// Bits are packed LSB-first into `u64` words; bit `t` lives in word `t / 64`
/// at position `t % 64`. Padding bits past `len` are always zero.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Codeword {
    len: usize,
    words: Vec<u64>,
}

impl Codeword {
    pub fn zeros(len: usize) -> Self {
        Self { len, words: vec![0; words_for(len)] }
    }

    pub(crate) fn from_words(len: usize, words: Vec<u64>) -> Self {
        debug_assert_eq!(words.len(), words_for(len));
        let mut cw = Self { len, words };
        cw.clear_padding();
        cw
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut cw = Self::zeros(bits.len());
        for (t, &b) in bits.iter().enumerate() {
            if b {
                cw.set(t, true);
            }
        }
        cw
    }

    /// Unpacks `ceil(len/8)` little-endian bytes (bit `t` is bit `t % 8` of
    /// byte `t / 8`).
    pub fn from_le_bytes(len: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return param(format!("expected {} bytes for {len} bits, got {}", len.div_ceil(8), bytes.len()));
        }
        let mut words = vec![0u64; words_for(len)];
        for (idx, &byte) in bytes.iter().enumerate() {
            words[idx / 8] |= u64::from(byte) << ((idx % 8) * 8);
        }
        let cw = Self { len, words };
        if cw.clone().clear_padding_changed() {
            return Err(Error::Format("set bits beyond codeword length".into()));
        }
        Ok(cw)
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        let nbytes = self.len.div_ceil(8);
        self.words.iter().flat_map(|w| w.to_le_bytes()).take(nbytes).collect()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, t: usize) -> bool {
        assert!(t < self.len, "bit {t} out of range for length {}", self.len);
        self.words[t / WORD_BITS] >> (t % WORD_BITS) & 1 == 1
    }

    pub fn set(&mut self, t: usize, value: bool) {
        assert!(t < self.len, "bit {t} out of range for length {}", self.len);
        let mask = 1u64 << (t % WORD_BITS);
        if value {
            self.words[t / WORD_BITS] |= mask;
        } else {
            self.words[t / WORD_BITS] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// `self |= other`.
    pub fn or_assign(&mut self, other: &Codeword) -> Result<()> {
        self.check_len(other)?;
        or_into(&mut self.words, &other.words);
        Ok(())
    }

    pub(crate) fn or_words(&mut self, other: &[u64]) {
        or_into(&mut self.words, other);
    }

    /// True when every 1-bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Codeword) -> bool {
        self.len == other.len && is_subset(&self.words, &other.words)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&t| self.get(t))
    }

    fn check_len(&self, other: &Codeword) -> Result<()> {
        if self.len != other.len {
            return param(format!("codeword length mismatch: {} vs {}", self.len, other.len));
        }
        Ok(())
    }

    fn clear_padding(&mut self) {
        let rem = self.len % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    fn clear_padding_changed(mut self) -> bool {
        let before = self.words.clone();
        self.clear_padding();
        before != self.words
    }
}

pub(crate) fn or_into(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d |= *s;
    }
}

pub(crate) fn is_subset(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

impl fmt::Display for Codeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in 0..self.len {
            f.write_str(if self.get(t) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Codeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Codeword({self})")
    }
}

/// Parses a string of `0`/`1` characters; the first character is bit 0.
impl FromStr for Codeword {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Format(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_bits(&bits))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cw(s: &str) -> Codeword {
        s.parse().unwrap()
    }

    #[test]
    fn or_of_two_words() {
        let mut x = cw("00001111");
        x.or_assign(&cw("00110011")).unwrap();
        assert_eq!(x, cw("00111111"));
    }

    #[test]
    fn subset_test() {
        assert!(cw("0100").is_subset_of(&cw("0110")));
        assert!(!cw("1100").is_subset_of(&cw("0110")));
        assert!(Codeword::zeros(4).is_subset_of(&cw("0000")));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let mut x = Codeword::zeros(5);
        assert!(x.or_assign(&Codeword::zeros(6)).is_err());
    }

    #[test]
    fn rejects_bad_characters_and_padding() {
        assert!("01x".parse::<Codeword>().is_err());
        assert!(Codeword::from_le_bytes(3, &[0b1000]).is_err());
        assert!(Codeword::from_le_bytes(3, &[0, 0]).is_err());
    }

    proptest! {
        #[test]
        fn byte_packing_roundtrips(bits in proptest::collection::vec(any::<bool>(), 0..200)) {
            let c = Codeword::from_bits(&bits);
            let back = Codeword::from_le_bytes(bits.len(), &c.to_le_bytes()).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(back.to_string().parse::<Codeword>().unwrap(), c.clone());
            prop_assert_eq!(c.count_ones(), bits.iter().filter(|b| **b).count());
        }
    }
}
