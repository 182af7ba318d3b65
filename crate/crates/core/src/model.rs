//! System parameters, joint-sparsity models and test-signal generation.
//!
//! Indices are zero-based throughout: encoder `m ∈ 0..n`, time instance
//! `i ∈ 0..t`. A signal ensemble is stored as an `n × t` matrix whose row `m`
//! is the sequence observed by encoder `m`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::seed;

/// Dimensions and operating point of one system instance.
///
/// The register length `b` is authoritative; the rate `R = b / (n t)` is
/// always derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub n: usize,
    pub t: usize,
    pub b: usize,
    pub l: usize,
    pub gamma: f64,
    pub epsilon: f64,
}

impl SystemParams {
    pub fn new(n: usize, t: usize, b: usize, l: usize, gamma: f64, epsilon: f64) -> Result<Self> {
        if n == 0 || t == 0 {
            return param(format!("need n >= 1 and t >= 1, got n={n}, t={t}"));
        }
        if b == 0 {
            return param("register length b must be at least one bit");
        }
        if l == 0 {
            return param("resolution l must be at least 1");
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return param(format!("gamma must be positive, got {gamma}"));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return param(format!("epsilon must be positive, got {epsilon}"));
        }
        Ok(Self { n, t, b, l, gamma, epsilon })
    }

    /// Builds parameters from a rate in bits per sample: `b = round(R n t)`.
    pub fn from_rate(n: usize, t: usize, rate: f64, l: usize, gamma: f64, epsilon: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return param(format!("rate must be positive, got {rate}"));
        }
        let b = (rate * (n * t) as f64).round();
        if b < 1.0 {
            return Err(Error::Infeasible(format!(
                "rate {rate} gives a register shorter than one bit for n*t = {}",
                n * t
            )));
        }
        Self::new(n, t, b as usize, l, gamma, epsilon)
    }

    pub fn samples(&self) -> usize {
        self.n * self.t
    }

    /// Quantization rate in bits per sample.
    pub fn rate(&self) -> f64 {
        self.b as f64 / self.samples() as f64
    }
}

/// Joint-sparsity model of the signal ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum SparsityModel {
    /// At most `k` nonzeros anywhere in the `n × t` ensemble.
    Overall { k: usize },
    /// Each sequence has at most `k_t` nonzeros over time and each time
    /// instance has at most `k_s` nonzeros across sequences.
    Structured { k_s: usize, k_t: usize },
}

/// `overall:<k>` or `structured:<k_s>x<k_t>`.
impl FromStr for SparsityModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format(format!("model {s:?}: expected overall:<k> or structured:<k_s>x<k_t>"));
        let (kind, rest) = s.trim().split_once(':').ok_or_else(bad)?;
        let num = |v: &str| v.trim().parse::<usize>().map_err(|_| bad());
        match kind.trim() {
            "overall" => Ok(SparsityModel::Overall { k: num(rest)? }),
            "structured" => {
                let (ks, kt) = rest.split_once('x').ok_or_else(bad)?;
                Ok(SparsityModel::Structured { k_s: num(ks)?, k_t: num(kt)? })
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for SparsityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SparsityModel::Overall { k } => write!(f, "overall:{k}"),
            SparsityModel::Structured { k_s, k_t } => write!(f, "structured:{k_s}x{k_t}"),
        }
    }
}

impl SparsityModel {
    /// Total support size.
    pub fn k(&self) -> usize {
        match *self {
            SparsityModel::Overall { k } => k,
            SparsityModel::Structured { k_s, k_t } => k_s * k_t,
        }
    }

    pub fn validate(&self, n: usize, t: usize) -> Result<()> {
        match *self {
            SparsityModel::Overall { k } => {
                if k == 0 || k > n * t {
                    return param(format!("overall sparsity needs 1 <= k <= n*t = {}, got k={k}", n * t));
                }
            }
            SparsityModel::Structured { k_s, k_t } => {
                if k_t == 0 || k_t > t {
                    return param(format!("structured sparsity needs 1 <= k_t <= t = {t}, got {k_t}"));
                }
                if k_s == 0 || k_s > n {
                    return param(format!("structured sparsity needs 1 <= k_s <= n = {n}, got {k_s}"));
                }
            }
        }
        Ok(())
    }

    /// Row (per-sequence) and column (per-instant) limits, if any.
    pub fn limits(&self) -> (usize, usize) {
        match *self {
            SparsityModel::Overall { k } => (k, k),
            SparsityModel::Structured { k_s, k_t } => (k_t, k_s),
        }
    }

    /// Whether a support set is admissible under the model.
    pub fn admits<'a, I>(&self, n: usize, t: usize, pairs: I) -> bool
    where
        I: IntoIterator<Item = &'a (usize, usize)>,
    {
        let (row_cap, col_cap) = self.limits();
        let mut rows = vec![0usize; n];
        let mut cols = vec![0usize; t];
        let mut total = 0;
        for &(m, i) in pairs {
            if m >= n || i >= t {
                return false;
            }
            rows[m] += 1;
            cols[i] += 1;
            total += 1;
            if rows[m] > row_cap || cols[i] > col_cap || total > self.k() {
                return false;
            }
        }
        true
    }

    pub fn label(&self) -> String {
        match *self {
            SparsityModel::Overall { k } => format!("overall(k={k})"),
            SparsityModel::Structured { k_s, k_t } => format!("structured(k_s={k_s},k_t={k_t})"),
        }
    }
}

/// An `n × t` ensemble of jointly sparse sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    values: Array2<f64>,
    support: BTreeSet<(usize, usize)>,
}

impl SignalMatrix {
    /// Wraps a matrix, deriving the support from its nonzero entries.
    pub fn from_values(values: Array2<f64>) -> Self {
        let support = values.indexed_iter().filter(|(_, v)| **v != 0.0).map(|(idx, _)| idx).collect();
        Self { values, support }
    }

    pub fn zeros(n: usize, t: usize) -> Self {
        Self::from_values(Array2::zeros((n, t)))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn support(&self) -> &BTreeSet<(usize, usize)> {
        &self.support
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn t(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, m: usize) -> Vec<f64> {
        self.values.row(m).to_vec()
    }

    pub fn satisfies(&self, model: &SparsityModel) -> bool {
        self.support.len() <= model.k() && model.admits(self.n(), self.t(), &self.support)
    }
}

/// Draws a random jointly sparse ensemble.
///
/// The support is uniform over all supports of size `k` admissible under the
/// model; nonzero values are i.i.d. standard Gaussian. Structured supports are
/// drawn by rejection from the uniform overall law.
pub fn generate_signals(params: &SystemParams, model: &SparsityModel, seed: u64) -> Result<SignalMatrix> {
    generate(params.n, params.t, model, seed)
}

const MAX_REJECTIONS: usize = 1_000_000;

pub(crate) fn generate(n: usize, t: usize, model: &SparsityModel, seed: u64) -> Result<SignalMatrix> {
    model.validate(n, t)?;
    let mut rng = seed::rng(seed);
    let k = model.k();
    let cells = n * t;

    let mut attempts = 0;
    let chosen = loop {
        let pick: Vec<(usize, usize)> = index::sample(&mut rng, cells, k).into_iter().map(|c| (c / t, c % t)).collect();
        if model.admits(n, t, &pick) {
            break pick;
        }
        attempts += 1;
        if attempts >= MAX_REJECTIONS {
            return param(format!(
                "{} support rejected {MAX_REJECTIONS} times; model is too tight for n={n}, t={t}",
                model.label()
            ));
        }
    };

    let mut values = Array2::zeros((n, t));
    let mut sorted = chosen;
    sorted.sort_unstable();
    for (m, i) in sorted {
        let mut v: f64 = StandardNormal.sample(&mut rng);
        // A Gaussian draw of exactly zero would silently shrink the support.
        while v == 0.0 {
            v = StandardNormal.sample(&mut rng);
        }
        values[(m, i)] = v;
    }
    Ok(SignalMatrix::from_values(values))
}

/// Per-sample mean squared error `(1/(n t)) Σ (a - b)²`.
pub fn mse_between(a: &SignalMatrix, b: ArrayView2<'_, f64>) -> Result<f64> {
    mse(a.view(), b)
}

pub fn mse(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return param(format!("shape mismatch: {:?} vs {:?}", a.dim(), b.dim()));
    }
    let count = a.len();
    if count == 0 {
        return Ok(0.0);
    }
    let sum: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / count as f64)
}
