//! Comparison systems: per-sample uniform quantization and distributed
//! compressed sensing (Gaussian projections, scalar-quantized measurements)
//! recovered with QIHT or FISTA.

mod fista;
mod qiht;
mod tuning;

pub use fista::fista_decode;
pub use qiht::{qiht_decode, QihtOutcome};
pub use tuning::golden_section_min;

use ndarray::{Array1, Array2, ArrayView1};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::model::{SignalMatrix, SystemParams};
use crate::seed;

/// Mid-rise uniform quantizer with `2^bits` levels over `[-range, range]`;
/// `bits = None` passes values through unquantized. Ties go toward `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformQuantizer {
    bits: Option<u32>,
    range: f64,
}

impl UniformQuantizer {
    pub fn new(bits: Option<u32>, range: f64) -> Result<Self> {
        if let Some(b) = bits {
            if b == 0 || b > 52 {
                return param(format!("quantizer bits must be in 1..=52, got {b}"));
            }
        }
        if !(range > 0.0 && range.is_finite()) {
            return param(format!("range must be positive, got {range}"));
        }
        Ok(Self { bits, range })
    }

    pub fn bits(&self) -> Option<u32> {
        self.bits
    }

    pub fn levels(&self) -> Option<u64> {
        self.bits.map(|b| 1u64 << b)
    }

    pub fn quantize(&self, x: f64) -> f64 {
        let Some(levels) = self.levels() else {
            return x;
        };
        let delta = 2.0 * self.range / levels as f64;
        let x = if x.is_nan() { 0.0 } else { x.clamp(-self.range, self.range) };
        let idx = (((x + self.range) / delta).floor() as i64).clamp(0, levels as i64 - 1);
        -self.range + (idx as f64 + 0.5) * delta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformOutcome {
    pub reconstruction: Array2<f64>,
    pub bits_per_sample: u32,
    /// Bits actually spent across all encoders.
    pub total_bits: usize,
}

/// Quantizes every sample independently with `floor(R)` bits over
/// `[-γ, γ]`. Needs at least one bit per sample.
pub fn uniform_baseline(params: &SystemParams, signals: &SignalMatrix) -> Result<UniformOutcome> {
    if (signals.n(), signals.t()) != (params.n, params.t) {
        return param("signal shape does not match parameters");
    }
    let bits = params.b / params.samples();
    if bits == 0 {
        return Err(Error::Infeasible(format!("uniform quantization needs R >= 1 bit/sample, got {}", params.rate())));
    }
    let q = UniformQuantizer::new(Some(bits as u32), params.gamma)?;
    Ok(UniformOutcome {
        reconstruction: signals.values().mapv(|v| q.quantize(v)),
        bits_per_sample: bits as u32,
        total_bits: bits * params.samples(),
    })
}

/// Distributed CS configuration: one `a × t` sensing matrix per encoder and a
/// shared measurement quantizer.
#[derive(Debug, Clone, PartialEq)]
pub struct CsConfig {
    pub a: usize,
    pub quantizer: UniformQuantizer,
    sensing: Vec<Array2<f64>>,
}

impl CsConfig {
    /// I.i.d. standard Gaussian sensing with the bit budget of `params`: each
    /// encoder spends at most `b / n` bits, i.e. `floor(b / (n a))` bits per
    /// measurement.
    pub fn gaussian(params: &SystemParams, a: usize, seed: u64) -> Result<Self> {
        if a == 0 {
            return param("need at least one measurement per encoder");
        }
        let bits = params.b / (params.n * a);
        if bits == 0 {
            return Err(Error::Infeasible(format!(
                "{} bits per encoder cannot give {a} measurements one bit each",
                params.b / params.n
            )));
        }
        let quantizer = UniformQuantizer::new(Some(bits as u32), params.gamma)?;
        let sensing = (0..params.n)
            .map(|m| {
                let mut rng = seed::rng(seed::mix(seed, m as u64));
                Array2::from_shape_simple_fn((a, params.t), || StandardNormal.sample(&mut rng))
            })
            .collect();
        Ok(Self { a, quantizer, sensing })
    }

    /// Explicit sensing matrices (all `a × t`).
    pub fn with_matrices(sensing: Vec<Array2<f64>>, quantizer: UniformQuantizer) -> Result<Self> {
        let first = sensing.first().ok_or_else(|| Error::Param("no sensing matrices".into()))?;
        let dim = first.dim();
        if dim.0 == 0 || dim.1 == 0 || sensing.iter().any(|m| m.dim() != dim) {
            return param("sensing matrices must share a nonempty shape");
        }
        Ok(Self { a: dim.0, quantizer, sensing })
    }

    pub fn n(&self) -> usize {
        self.sensing.len()
    }

    pub fn t(&self) -> usize {
        self.sensing[0].ncols()
    }

    pub fn sensing(&self, m: usize) -> &Array2<f64> {
        &self.sensing[m]
    }

    /// Bits spent by one encoder.
    pub fn bits_per_encoder(&self) -> Option<usize> {
        self.quantizer.bits().map(|b| b as usize * self.a)
    }

    pub fn total_bits(&self) -> Option<usize> {
        self.bits_per_encoder().map(|b| b * self.n())
    }

    fn quantize_vec(&self, v: Array1<f64>) -> Array1<f64> {
        v.mapv(|x| self.quantizer.quantize(x))
    }
}

/// `Q(A_m s_m)`: project encoder `m`'s sequence and quantize.
pub fn cs_encode(cfg: &CsConfig, m: usize, signal: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    if m >= cfg.n() {
        return param(format!("encoder {m} out of range"));
    }
    if signal.len() != cfg.t() {
        return param(format!("expected {} samples, got {}", cfg.t(), signal.len()));
    }
    Ok(cfg.quantize_vec(cfg.sensing[m].dot(&signal)))
}

pub fn cs_encode_all(cfg: &CsConfig, signals: &SignalMatrix) -> Result<Vec<Array1<f64>>> {
    if signals.n() != cfg.n() {
        return param("signal has a different number of encoders than the CS config");
    }
    (0..cfg.n()).map(|m| cs_encode(cfg, m, signals.values().row(m))).collect()
}

fn check_measurements(cfg: &CsConfig, measurements: &[Array1<f64>]) -> Result<()> {
    if measurements.len() != cfg.n() {
        return param(format!("{} measurement vectors for {} encoders", measurements.len(), cfg.n()));
    }
    if measurements.iter().any(|q| q.len() != cfg.a) {
        return param(format!("every measurement vector must have {} entries", cfg.a));
    }
    Ok(())
}

/// Recovery solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// QIHT gradient step; `None` uses `1 / a`.
    pub step_size: Option<f64>,
    /// Joint support size kept by QIHT's hard threshold.
    pub sparsity: usize,
    /// FISTA ℓ1 weight.
    pub lambda: f64,
    pub tol: f64,
}

impl SolverConfig {
    pub fn new(sparsity: usize) -> Self {
        Self { max_iters: 300, step_size: None, sparsity, lambda: 0.01, tol: 1e-7 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return param("max_iters must be positive");
        }
        if let Some(mu) = self.step_size {
            if !(mu > 0.0 && mu.is_finite()) {
                return param(format!("step size must be positive, got {mu}"));
            }
        }
        if self.sparsity == 0 {
            return param("sparsity must be positive");
        }
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return param(format!("lambda must be nonnegative, got {}", self.lambda));
        }
        if !(self.tol >= 0.0) {
            return param("tolerance must be nonnegative");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn uniform_quantizer_levels() {
        let q = UniformQuantizer::new(Some(1), 2.0).unwrap();
        assert_eq!(q.quantize(0.3), 1.0);
        assert_eq!(q.quantize(-0.3), -1.0);
        // 0 is a cell edge; ties go up
        assert_eq!(q.quantize(0.0), 1.0);
        assert_eq!(q.quantize(-7.0), -1.0);
        let q2 = UniformQuantizer::new(Some(2), 2.0).unwrap();
        assert_eq!(q2.quantize(1.2), 1.5);
        assert_eq!(q2.quantize(2.0), 1.5);
        assert_eq!(UniformQuantizer::new(None, 2.0).unwrap().quantize(3.7), 3.7);
        assert!(UniformQuantizer::new(Some(0), 2.0).is_err());
    }

    #[test]
    fn uniform_baseline_needs_a_bit() {
        let p = SystemParams::new(5, 20, 60, 1, 2.0, 1.0).unwrap();
        let s = SignalMatrix::zeros(5, 20);
        assert!(matches!(uniform_baseline(&p, &s), Err(Error::Infeasible(_))));
        let p = SystemParams::new(5, 20, 120, 1, 2.0, 1.0).unwrap();
        let out = uniform_baseline(&p, &s).unwrap();
        assert_eq!(out.bits_per_sample, 1);
        assert_eq!(out.total_bits, 100);
        assert!(out.reconstruction.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn cs_bit_budget() {
        let p = SystemParams::new(5, 20, 120, 1, 2.0, 1.0).unwrap();
        let cfg = CsConfig::gaussian(&p, 7, 1).unwrap();
        assert_eq!(cfg.quantizer.bits(), Some(3));
        assert!(cfg.total_bits().unwrap() <= p.b);
        assert!(matches!(CsConfig::gaussian(&p, 25, 1), Err(Error::Infeasible(_))));
        assert_eq!(CsConfig::gaussian(&p, 7, 1).unwrap(), cfg);
    }

    #[test]
    fn cs_encode_examples() {
        let p = SystemParams::new(2, 4, 64, 1, 2.0, 1.0).unwrap();
        let cfg = CsConfig::gaussian(&p, 4, 3).unwrap();
        let zero = cs_encode(&cfg, 0, Array1::zeros(4).view()).unwrap();
        let nearest = cfg.quantizer.quantize(0.0);
        assert!(zero.iter().all(|v| *v == nearest));

        let ident = CsConfig::with_matrices(vec![Array2::eye(3)], UniformQuantizer::new(None, 2.0).unwrap()).unwrap();
        let s = array![0.25, -3.0, 0.0];
        assert_eq!(cs_encode(&ident, 0, s.view()).unwrap(), s);
        assert!(cs_encode(&ident, 1, s.view()).is_err());
        assert!(cs_encode(&ident, 0, array![1.0].view()).is_err());
    }
}
