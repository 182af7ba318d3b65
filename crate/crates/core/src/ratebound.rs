//! Closed-form rate mathematics.
//!
//! `ϑ` counts candidate supports, `R_ε(l)` is the rate above which the
//! scheme attains the quantizer's own distortion `D(l)`, and `D(l)` itself is
//! estimated by Monte Carlo. Rates are in bits per sample (base-2 logs).

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::codec::QuantizerSpec;
use crate::error::{param, Error, Result};
use crate::model::{self, SignalMatrix, SparsityModel, SystemParams};
use crate::seed;

/// Exact binomial coefficient.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        // acc * (n - i) is always divisible by (i + 1) here
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Number of candidate supports `ϑ`.
///
/// Overall: `C(n t, k)`. Structured: `C(n, k_s) · C(t, k_t)`, i.e. choose the
/// active sequences and the active instants.
pub fn support_count(model: &SparsityModel, n: usize, t: usize) -> Result<BigUint> {
    model.validate(n, t)?;
    Ok(match *model {
        SparsityModel::Overall { k } => binomial(n * t, k),
        SparsityModel::Structured { k_s, k_t } => binomial(n, k_s) * binomial(t, k_t),
    })
}

/// `log2` of a big integer, accurate to double precision.
pub fn log2_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 64 {
        return x.to_u64().expect("fits in 64 bits").to_f64().unwrap().log2();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().expect("top 64 bits");
    (top as f64).log2() + shift as f64
}

/// The index set `I(k)` of the rate maximization, sorted and deduplicated.
pub fn index_set(model: &SparsityModel) -> Vec<usize> {
    let mut us: Vec<usize> = match *model {
        SparsityModel::Overall { k } => (1..=k).collect(),
        SparsityModel::Structured { k_s, k_t } => (1..=k_t).flat_map(|ut| (1..=k_s).map(move |us| ut * us)).collect(),
    };
    us.sort_unstable();
    us.dedup();
    us
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateQuery {
    pub n: usize,
    pub t: usize,
    pub model: SparsityModel,
    pub epsilon: f64,
}

impl RateQuery {
    pub fn new(n: usize, t: usize, model: SparsityModel, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return param(format!("epsilon must be positive, got {epsilon}"));
        }
        model.validate(n, t)?;
        Ok(Self { n, t, model, epsilon })
    }

    pub fn from_params(params: &SystemParams, model: SparsityModel) -> Result<Self> {
        Self::new(params.n, params.t, model, params.epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateThreshold {
    /// `R_ε(l)` in bits per sample.
    pub rate: f64,
    /// The maximizing `u ∈ I(k)` (smallest on ties).
    pub u: usize,
}

/// `R_ε(l) = max_{u ∈ I(k)} (1+ε) k / (u n t) · log2(ϑ · l^u)`.
pub fn rate_threshold(query: &RateQuery, l: usize) -> Result<RateThreshold> {
    if l == 0 {
        return param("resolution l must be at least 1");
    }
    let log_theta = log2_big(&support_count(&query.model, query.n, query.t)?);
    let log_l = (l as f64).log2();
    let k = query.model.k() as f64;
    let nt = (query.n * query.t) as f64;
    let mut best = RateThreshold { rate: f64::NEG_INFINITY, u: 0 };
    for u in index_set(&query.model) {
        let uf = u as f64;
        let rate = (1.0 + query.epsilon) * k / (uf * nt) * (log_theta + uf * log_l);
        if rate > best.rate {
            best = RateThreshold { rate, u };
        }
    }
    Ok(best)
}

/// Resolution rule used to pick `l` for a given rate:
/// `l = floor(2^{n t R / (k (1+ε))} / (n t))`.
pub fn resolution_for_rate(rate: f64, n: usize, t: usize, k: usize, epsilon: f64) -> Result<usize> {
    if !(rate > 0.0 && rate.is_finite()) {
        return param(format!("rate must be positive, got {rate}"));
    }
    if n == 0 || t == 0 || k == 0 {
        return param("n, t and k must be at least 1");
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return param(format!("epsilon must be positive, got {epsilon}"));
    }
    let nt = (n * t) as f64;
    let exponent = nt * rate / (k as f64 * (1.0 + epsilon));
    let log_l = exponent - nt.log2();
    if log_l >= 52.0 {
        return Err(Error::Infeasible(format!("resolution 2^{log_l:.1} is not representable")));
    }
    let l = (exponent.exp2() / nt).floor();
    if l < 1.0 {
        return Err(Error::Infeasible(format!(
            "rate {rate} supports no nonzero level (n={n}, t={t}, k={k}, epsilon={epsilon})"
        )));
    }
    Ok(l as usize)
}

/// Largest `l` with `R_ε(l) <= rate`, i.e. the exact inversion of the
/// threshold over the whole index set.
pub fn max_resolution_for_threshold(query: &RateQuery, rate: f64) -> Result<usize> {
    if !(rate > 0.0 && rate.is_finite()) {
        return param(format!("rate must be positive, got {rate}"));
    }
    let log_theta = log2_big(&support_count(&query.model, query.n, query.t)?);
    let k = query.model.k() as f64;
    let nt = (query.n * query.t) as f64;
    let mut log_l_max = f64::INFINITY;
    for u in index_set(&query.model) {
        let uf = u as f64;
        let bound = (rate * uf * nt / ((1.0 + query.epsilon) * k) - log_theta) / uf;
        log_l_max = log_l_max.min(bound);
    }
    if log_l_max < 0.0 {
        return Err(Error::Infeasible(format!("rate {rate} is below R_eps(1)")));
    }
    if log_l_max >= 52.0 {
        return Err(Error::Infeasible(format!("resolution 2^{log_l_max:.1} is not representable")));
    }
    let mut l = log_l_max.exp2().floor().max(1.0) as usize;
    // Float slack at the boundary: settle against the forward formula.
    while l > 1 && rate_threshold(query, l)?.rate > rate {
        l -= 1;
    }
    while rate_threshold(query, l + 1)?.rate <= rate {
        l += 1;
    }
    if rate_threshold(query, l)?.rate > rate {
        return Err(Error::Infeasible(format!("rate {rate} is below R_eps(1)")));
    }
    Ok(l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionEstimate {
    pub d_hat: f64,
    pub trials: usize,
    pub std_err: f64,
}

/// Monte Carlo estimate of `D(l) = (1/(n t)) Σ E[(s - Q_l(s))²]` under the
/// random jointly sparse signal law of [`model::generate_signals`].
pub fn estimate_distortion(
    q: &QuantizerSpec,
    model: &SparsityModel,
    n: usize,
    t: usize,
    trials: usize,
    seed: u64,
) -> Result<DistortionEstimate> {
    if trials == 0 {
        return param("need at least one trial");
    }
    let signals = (0..trials)
        .map(|trial| model::generate(n, t, model, seed::mix(seed, trial as u64)))
        .collect::<Result<Vec<_>>>()?;
    empirical_distortion(q, &signals)
}

/// Average of `mse(s, Q_l(s))` over the given signals.
pub fn empirical_distortion(q: &QuantizerSpec, signals: &[SignalMatrix]) -> Result<DistortionEstimate> {
    if signals.is_empty() {
        return param("need at least one signal");
    }
    let mut acc = crate::harness::Accumulator::default();
    for s in signals {
        let quantized = s.values().mapv(|v| q.value(v));
        acc.push(model::mse_between(s, quantized.view())?);
    }
    Ok(DistortionEstimate { d_hat: acc.mean(), trials: signals.len(), std_err: acc.std_err() })
}
