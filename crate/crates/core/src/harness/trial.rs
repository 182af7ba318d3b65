use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::{CodebookRefresh, ExperimentConfig, Scheme};
use crate::baselines::{cs_encode_all, fista_decode, qiht_decode, uniform_baseline, CsConfig, SolverConfig};
use crate::codec::{build_codebooks, encode_sequence, QuantizerSpec};
use crate::decoder::{decode, fuse_outputs, DecodeStatus};
use crate::error::Result;
use crate::model::{self, mse_between, SignalMatrix, SystemParams};
use crate::network::{simulate_network, LinkFailureProcess};
use crate::seed;

const SIGNAL_STREAM: u64 = 1;
const CODEBOOK_STREAM: u64 = 2;
const SENSING_STREAM: u64 = 3;
const FAILURE_STREAM: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    /// Baseline run; there is no discrete decode to fail.
    Ok,
    Unique,
    Ambiguous,
    Infeasible,
}

impl TrialStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrialStatus::Ok => "ok",
            TrialStatus::Unique => "unique",
            TrialStatus::Ambiguous => "ambiguous",
            TrialStatus::Infeasible => "infeasible",
        }
    }

    /// Ambiguous and infeasible decodes count as decode failures.
    pub fn is_failure(&self) -> bool {
        matches!(self, TrialStatus::Ambiguous | TrialStatus::Infeasible)
    }
}

impl From<DecodeStatus> for TrialStatus {
    fn from(s: DecodeStatus) -> Self {
        match s {
            DecodeStatus::Unique => TrialStatus::Unique,
            DecodeStatus::Ambiguous => TrialStatus::Ambiguous,
            DecodeStatus::Infeasible => TrialStatus::Infeasible,
        }
    }
}

/// One CSV row. `l` is the number of quantizer levels the scheme used (the
/// measurement quantizer for CS). Equality ignores the wall time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub scheme: Scheme,
    #[serde(rename = "R")]
    pub rate: f64,
    pub b: usize,
    pub l: u64,
    pub epsilon: f64,
    pub mse: f64,
    pub status: TrialStatus,
    pub ms: f64,
}

impl PartialEq for TrialRecord {
    fn eq(&self, other: &Self) -> bool {
        (self.seed, self.scheme, self.b, self.l, self.status)
            == (other.seed, other.scheme, other.b, other.l, other.status)
            && self.rate.to_bits() == other.rate.to_bits()
            && self.epsilon.to_bits() == other.epsilon.to_bits()
            && self.mse.to_bits() == other.mse.to_bits()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsChoice {
    pub a: usize,
    pub lambda: f64,
}

/// A trial with the data behind its record.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub signals: SignalMatrix,
    pub estimate: Array2<f64>,
    /// Encoders with a surviving path to the decoder (all true for baselines).
    pub reachable: Vec<bool>,
}

/// Generates a signal, runs it through `cfg.scheme` and scores the estimate.
/// Deterministic in `(cfg, seed)` apart from the wall time.
pub fn run_trial(cfg: &ExperimentConfig, seed: u64) -> Result<TrialRecord> {
    run_trial_detailed(cfg, seed).map(|o| o.record)
}

pub fn run_trial_detailed(cfg: &ExperimentConfig, seed: u64) -> Result<TrialOutcome> {
    let start = Instant::now();
    cfg.validate()?;
    let b = cfg.register_bits()?;
    let signals = trial_signals(cfg, seed)?;
    let (estimate, status, levels, reachable) = match cfg.scheme {
        Scheme::Proposed => proposed(cfg, b, &signals, seed)?,
        Scheme::Uniform => {
            let params = SystemParams::new(cfg.n, cfg.t, b, 1, cfg.gamma, cfg.epsilon)?;
            let out = uniform_baseline(&params, &signals)?;
            (out.reconstruction, TrialStatus::Ok, 1u64 << out.bits_per_sample, vec![true; cfg.n])
        }
        Scheme::CsQiht | Scheme::CsFista => {
            let choice = CsChoice { a: cfg.cs.a.unwrap_or(2 * cfg.model.k()), lambda: cfg.cs.lambda.unwrap_or(0.01) };
            let (est, levels) = cs_estimate(cfg, b, &signals, seed, choice)?;
            (est, TrialStatus::Ok, levels, vec![true; cfg.n])
        }
    };
    let mse = mse_between(&signals, estimate.view())?;
    let ms = (start.elapsed().as_secs_f64() * 1e6).round() / 1e3;
    let record = TrialRecord {
        seed,
        scheme: cfg.scheme,
        rate: b as f64 / (cfg.n * cfg.t) as f64,
        b,
        l: levels,
        epsilon: cfg.epsilon,
        mse,
        status,
        ms,
    };
    Ok(TrialOutcome { record, signals, estimate, reachable })
}

fn proposed(
    cfg: &ExperimentConfig,
    b: usize,
    signals: &SignalMatrix,
    seed: u64,
) -> Result<(Array2<f64>, TrialStatus, u64, Vec<bool>)> {
    let l = cfg.resolution()?;
    let params = SystemParams::new(cfg.n, cfg.t, b, l, cfg.gamma, cfg.epsilon)?;
    let q = QuantizerSpec::new(l, cfg.gamma)?;
    let codebook_seed = match cfg.codebook {
        CodebookRefresh::PerTrial => seed::mix(seed, CODEBOOK_STREAM),
        CodebookRefresh::Fixed => cfg.master_seed,
    };
    let codebooks = build_codebooks(&params, cfg.model.k(), codebook_seed)?;
    let inputs = codebooks
        .iter()
        .enumerate()
        .map(|(m, cb)| encode_sequence(cb, &q, &signals.row(m)))
        .collect::<Result<Vec<_>>>()?;

    let topology = cfg.topology.resolve(cfg.n)?;
    let failures = match cfg.failures {
        LinkFailureProcess::Iid { p_fail, seed: s } => {
            LinkFailureProcess::Iid { p_fail, seed: seed::mix(s, seed::mix(seed, FAILURE_STREAM)) }
        }
        ref other => other.clone(),
    };
    let state = failures.realize(&topology)?;
    let net = simulate_network(&topology, &state, &inputs)?;
    let y = fuse_outputs(b, &net.outputs)?;
    let (_, res) = decode(&y, &codebooks, &cfg.model, &q, net.reachable.clone())?;
    Ok((res.estimate, res.decode_status.into(), l as u64, net.reachable))
}

/// CS baseline estimate with a given measurement count and ℓ1 weight.
/// Returns the estimate and the number of measurement-quantizer levels.
fn cs_estimate(
    cfg: &ExperimentConfig,
    b: usize,
    signals: &SignalMatrix,
    seed: u64,
    choice: CsChoice,
) -> Result<(Array2<f64>, u64)> {
    let params = SystemParams::new(cfg.n, cfg.t, b, 1, cfg.gamma, cfg.epsilon)?;
    let cs = CsConfig::gaussian(&params, choice.a, seed::mix(seed, SENSING_STREAM))?;
    let measurements = cs_encode_all(&cs, signals)?;
    let solver = SolverConfig {
        max_iters: cfg.cs.max_iters,
        step_size: cfg.cs.step_size,
        sparsity: cfg.model.k(),
        lambda: choice.lambda,
        tol: cfg.cs.tol,
    };
    let estimate = match cfg.scheme {
        Scheme::CsFista => fista_decode(&cs, &solver, &measurements)?,
        _ => qiht_decode(&cs, &solver, &measurements)?.estimate,
    };
    Ok((estimate, cs.quantizer.levels().unwrap_or(0)))
}

fn trial_signals(cfg: &ExperimentConfig, seed: u64) -> Result<SignalMatrix> {
    model::generate(cfg.n, cfg.t, &cfg.model, seed::mix(seed, SIGNAL_STREAM))
}
