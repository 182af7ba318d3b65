use super::codebook::Codebook;
use super::codeword::Codeword;
use super::quantizer::QuantizerSpec;
use crate::error::{param, Result};

/// Serial encoder for one sequence.
///
/// Holds a single `b`-bit register. Each sample is quantized on arrival, the
/// selected codeword of the current sub-bin is OR-ed into the register, and
/// the sample is discarded.
#[derive(Debug)]
pub struct Encoder<'a> {
    codebook: &'a Codebook,
    quantizer: &'a QuantizerSpec,
    register: Codeword,
    step: usize,
}

impl<'a> Encoder<'a> {
    pub fn new(codebook: &'a Codebook, quantizer: &'a QuantizerSpec) -> Result<Self> {
        if codebook.l() != quantizer.l() {
            return param(format!(
                "codebook has {} levels per sub-bin but quantizer has {}",
                codebook.l(),
                quantizer.l()
            ));
        }
        Ok(Self { codebook, quantizer, register: Codeword::zeros(codebook.b()), step: 0 })
    }

    /// Consumes the next sample and returns the selected level index.
    pub fn push(&mut self, sample: f64) -> Result<usize> {
        if self.step >= self.codebook.t() {
            return param(format!("encoder already consumed all {} samples", self.codebook.t()));
        }
        let j = self.quantizer.index(sample);
        if j != 0 {
            self.register.or_words(self.codebook.words(self.step, j));
        }
        self.step += 1;
        Ok(j)
    }

    pub fn register(&self) -> &Codeword {
        &self.register
    }

    pub fn finish(self) -> Result<Codeword> {
        if self.step != self.codebook.t() {
            return param(format!("encoder saw {} of {} samples", self.step, self.codebook.t()));
        }
        Ok(self.register)
    }
}

/// Encodes a full sequence of `t` samples into its `b`-bit codeword.
pub fn encode_sequence(codebook: &Codebook, quantizer: &QuantizerSpec, samples: &[f64]) -> Result<Codeword> {
    if samples.len() != codebook.t() {
        return param(format!("expected {} samples, got {}", codebook.t(), samples.len()));
    }
    let mut enc = Encoder::new(codebook, quantizer)?;
    for &s in samples {
        enc.push(s)?;
    }
    enc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn setup() -> (Codebook, QuantizerSpec) {
        (Codebook::generate(96, 3, 4, 2, 0, 17).unwrap(), QuantizerSpec::new(4, 2.0).unwrap())
    }

    #[test]
    fn zero_samples_give_zero_word() {
        let (cb, q) = setup();
        assert!(encode_sequence(&cb, &q, &[0.0; 3]).unwrap().is_zero());
    }

    #[test]
    fn output_is_or_of_selected_codewords() {
        let (cb, q) = setup();
        let samples = [1.2, 0.0, -0.7];
        let got = encode_sequence(&cb, &q, &samples).unwrap();
        let mut expected = cb.codeword(2, q.index(-0.7));
        expected.or_assign(&cb.codeword(0, q.index(1.2))).unwrap();
        assert_eq!(got, expected);
    }

    #[test]
    fn length_and_level_mismatch() {
        let (cb, q) = setup();
        assert!(encode_sequence(&cb, &q, &[0.0; 2]).is_err());
        let q8 = QuantizerSpec::new(8, 2.0).unwrap();
        assert!(encode_sequence(&cb, &q8, &[0.0; 3]).is_err());
        let mut enc = Encoder::new(&cb, &q).unwrap();
        enc.push(0.0).unwrap();
        assert!(enc.finish().is_err());
    }

    proptest! {
        #[test]
        fn register_grows_monotonically(samples in proptest::collection::vec(-3.0f64..3.0, 3)) {
            let (cb, q) = setup();
            let mut enc = Encoder::new(&cb, &q).unwrap();
            let mut prev = enc.register().clone();
            let mut bound = 0;
            for &s in &samples {
                let j = enc.push(s).unwrap();
                prop_assert!(prev.is_subset_of(enc.register()));
                prev = enc.register().clone();
                bound += cb.codeword(enc.step - 1, j).count_ones();
            }
            let out = enc.finish().unwrap();
            prop_assert!(out.count_ones() <= bound);
            prop_assert_eq!(out, encode_sequence(&cb, &q, &samples).unwrap());
        }
    }
}
