//! Seeded sub-binned codebooks.
//!
//! Encoder `m` owns `t` sub-bins of `l` codewords each, every bit drawn
//! i.i.d. Bernoulli(`ln 2 / k`). Codebooks are regenerated, never exchanged:
//! the bit stream of encoder `m` is ChaCha8 keyed with the 32-byte seed
//!
//! ```text
//! bytes  0..8   master_seed, little-endian
//! bytes  8..16  m (zero-based encoder index), little-endian
//! bytes 16..32  zero
//! ```
//!
//! The stream is consumed one `u32` per bit in the order sub-bin `i`, level
//! `j = 1..=l`, bit `0..b`; a bit is set iff the draw is below
//! `floor(p · 2^32)`. Any implementation of ChaCha8 (8 rounds, 64-bit block
//! counter starting at 0, stream 0) reproduces the codebooks bit-exactly.

use std::io::{Read, Write};
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::codeword::{words_for, Codeword, WORD_BITS};
use crate::error::{param, Error, Result};
use crate::model::SystemParams;

pub const CODEBOOK_FORMAT_VERSION: u32 = 1;

/// Probability of a 1-bit in every codeword: `min(ln 2 / k, 1)`.
pub fn bit_probability(k: usize) -> f64 {
    (std::f64::consts::LN_2 / k as f64).min(1.0)
}

fn threshold(p: f64) -> u64 {
    (p * 4_294_967_296.0).floor() as u64
}

/// Key of encoder `m`'s bit stream.
pub fn stream_key(master_seed: u64, m: usize) -> [u8; 32] {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&(m as u64).to_le_bytes());
    key
}

/// The codebook of one encoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    encoder: usize,
    t: usize,
    l: usize,
    b: usize,
    stride: usize,
    bits: Vec<u64>,
    zero: Vec<u64>,
}

impl Codebook {
    pub fn generate(b: usize, t: usize, l: usize, k: usize, m: usize, master_seed: u64) -> Result<Self> {
        if b == 0 || t == 0 || l == 0 {
            return param(format!("codebook needs b, t, l >= 1 (b={b}, t={t}, l={l})"));
        }
        if k == 0 {
            return param("codebook density needs k >= 1");
        }
        let stride = words_for(b);
        let total = t
            .checked_mul(l)
            .and_then(|x| x.checked_mul(stride))
            .ok_or_else(|| Error::Param("codebook size overflows".into()))?;
        let thr = threshold(bit_probability(k));
        let mut rng = ChaCha8Rng::from_seed(stream_key(master_seed, m));
        let mut bits = Vec::with_capacity(total);
        for _ in 0..t * l {
            let mut remaining = b;
            for _ in 0..stride {
                let take = remaining.min(WORD_BITS);
                let mut w = 0u64;
                for pos in 0..take {
                    if u64::from(rng.next_u32()) < thr {
                        w |= 1 << pos;
                    }
                }
                bits.push(w);
                remaining -= take;
            }
        }
        Ok(Self { encoder: m, t, l, b, stride, bits, zero: vec![0; stride] })
    }

    /// Assembles a codebook from explicit codewords, sub-bin major
    /// (`c_{m,0,1}, ..., c_{m,0,l}, c_{m,1,1}, ...`).
    pub fn from_codewords(m: usize, t: usize, l: usize, b: usize, codewords: &[Codeword]) -> Result<Self> {
        if b == 0 || t == 0 || l == 0 {
            return param(format!("codebook needs b, t, l >= 1 (b={b}, t={t}, l={l})"));
        }
        if codewords.len() != t * l {
            return param(format!("expected {} codewords, got {}", t * l, codewords.len()));
        }
        let stride = words_for(b);
        let mut bits = Vec::with_capacity(t * l * stride);
        for c in codewords {
            if c.len() != b {
                return param(format!("codeword of length {} in a {b}-bit codebook", c.len()));
            }
            bits.extend_from_slice(c.words());
        }
        Ok(Self { encoder: m, t, l, b, stride, bits, zero: vec![0; stride] })
    }

    pub fn encoder(&self) -> usize {
        self.encoder
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn b(&self) -> usize {
        self.b
    }

    /// Packed words of `c_{m,i,j}`; `j = 0` is the all-zero codeword.
    pub fn words(&self, i: usize, j: usize) -> &[u64] {
        assert!(i < self.t && j <= self.l, "codeword ({i}, {j}) out of range");
        if j == 0 {
            return &self.zero;
        }
        let start = (i * self.l + (j - 1)) * self.stride;
        &self.bits[start..start + self.stride]
    }

    pub fn codeword(&self, i: usize, j: usize) -> Codeword {
        Codeword::from_words(self.b, self.words(i, j).to_vec())
    }

    pub fn zero_codeword(&self) -> Codeword {
        Codeword::zeros(self.b)
    }

    /// The `l` nonzero codewords of sub-bin `i`, as `(j, words)`.
    pub fn sub_bin(&self, i: usize) -> impl Iterator<Item = (usize, &[u64])> + '_ {
        (1..=self.l).map(move |j| (j, self.words(i, j)))
    }

    /// Total number of 1-bits over all nonzero codewords.
    pub fn count_ones(&self) -> u64 {
        self.bits.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    /// Number of bits over all nonzero codewords (`t · l · b`).
    pub fn bit_count(&self) -> u64 {
        (self.t * self.l * self.b) as u64
    }
}

/// Builds encoder `m`'s codebook for a system instance.
pub fn build_codebook(params: &SystemParams, k: usize, m: usize, master_seed: u64) -> Result<Codebook> {
    if m >= params.n {
        return param(format!("encoder {m} out of range for n = {}", params.n));
    }
    Codebook::generate(params.b, params.t, params.l, k, m, master_seed)
}

pub fn build_codebooks(params: &SystemParams, k: usize, master_seed: u64) -> Result<Vec<Codebook>> {
    (0..params.n).map(|m| build_codebook(params, k, m, master_seed)).collect()
}

/// Everything needed to regenerate a full codebook set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodebookHeader {
    pub version: u32,
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub l: usize,
    pub b: usize,
    pub k: usize,
    pub master_seed: u64,
}

impl CodebookHeader {
    pub fn new(n: usize, t: usize, l: usize, b: usize, k: usize, master_seed: u64) -> Self {
        Self { version: CODEBOOK_FORMAT_VERSION, n, t, l, b, k, master_seed }
    }

    pub fn regenerate(&self) -> Result<Vec<Codebook>> {
        if self.version != CODEBOOK_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported codebook header version {}", self.version)));
        }
        if self.n == 0 {
            return param("codebook header needs n >= 1");
        }
        (0..self.n).map(|m| Codebook::generate(self.b, self.t, self.l, self.k, m, self.master_seed)).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("header serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(format!("codebook header: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::harness::write_atomic(path, self.to_toml().as_bytes())
    }
}

/// Writes every nonzero codeword, encoder-major then sub-bin then level, each
/// as `ceil(b/8)` little-endian packed bytes. The zero codeword is implicit.
pub fn write_dump<W: Write>(codebooks: &[Codebook], mut out: W) -> Result<()> {
    for cb in codebooks {
        for i in 0..cb.t {
            for j in 1..=cb.l {
                out.write_all(&cb.codeword(i, j).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Reads a dump written by [`write_dump`], returning codewords in file order.
pub fn read_dump<R: Read>(header: &CodebookHeader, mut input: R) -> Result<Vec<Codeword>> {
    let per = header.b.div_ceil(8);
    let count = header.n * header.t * header.l;
    let mut buf = vec![0u8; per];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        input.read_exact(&mut buf)?;
        out.push(Codeword::from_le_bytes(header.b, &buf)?);
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes in codebook dump", rest.len())));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_matches_ln2_over_k() {
        let cb = Codebook::generate(10_000, 4, 5, 3, 0, 11).unwrap();
        let density = cb.count_ones() as f64 / cb.bit_count() as f64;
        assert!((density - std::f64::consts::LN_2 / 3.0).abs() < 0.005, "{density}");
    }

    #[test]
    fn zero_codeword_is_zero() {
        let cb = Codebook::generate(70, 3, 2, 1, 0, 5).unwrap();
        assert!(cb.zero_codeword().is_zero());
        assert!(cb.codeword(2, 0).is_zero());
        assert_eq!(cb.sub_bin(1).count(), 2);
    }

    #[test]
    fn deterministic_per_seed_and_encoder() {
        let a = Codebook::generate(130, 4, 3, 2, 1, 99).unwrap();
        let b = Codebook::generate(130, 4, 3, 2, 1, 99).unwrap();
        let c = Codebook::generate(130, 4, 3, 2, 2, 99).unwrap();
        let d = Codebook::generate(130, 4, 3, 2, 1, 98).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.bits, c.bits);
        assert_ne!(a.bits, d.bits);
    }

    #[test]
    fn padding_bits_stay_clear() {
        let cb = Codebook::generate(70, 2, 2, 1, 0, 3).unwrap();
        for i in 0..2 {
            for (_, w) in cb.sub_bin(i) {
                assert_eq!(w[1] >> 6, 0);
            }
        }
    }

    #[test]
    fn encoder_index_checked() {
        let p = SystemParams::new(2, 3, 10, 2, 2.0, 1.0).unwrap();
        assert!(build_codebook(&p, 1, 2, 0).is_err());
        assert!(build_codebook(&p, 0, 0, 0).is_err());
        assert_eq!(build_codebooks(&p, 1, 0).unwrap().len(), 2);
    }

    #[test]
    fn header_and_dump_roundtrip() {
        let header = CodebookHeader::new(2, 3, 2, 19, 2, 42);
        let parsed = CodebookHeader::from_toml(&header.to_toml()).unwrap();
        assert_eq!(parsed, header);
        let books = parsed.regenerate().unwrap();
        let mut buf = Vec::new();
        write_dump(&books, &mut buf).unwrap();
        assert_eq!(buf.len(), 2 * 3 * 2 * 3);
        let words = read_dump(&header, buf.as_slice()).unwrap();
        assert_eq!(words[0], books[0].codeword(0, 1));
        assert_eq!(words[11], books[1].codeword(2, 2));
        buf.push(0);
        assert!(read_dump(&header, buf.as_slice()).is_err());
    }
}
