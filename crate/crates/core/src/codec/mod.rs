//! Per-encoder machinery: the ADC model, codebooks and the OR-register encoder.

mod codebook;
mod codeword;
mod encoder;
mod quantizer;

pub use codebook::{
    bit_probability, build_codebook, build_codebooks, read_dump, stream_key, write_dump, Codebook, CodebookHeader,
    CODEBOOK_FORMAT_VERSION,
};
pub use codeword::Codeword;
pub use encoder::{encode_sequence, Encoder};
pub use quantizer::QuantizerSpec;

pub(crate) use codeword::{is_subset, or_into, words_for};
