//! Distributed serial quantization of jointly sparse sequences.
//!
//! Each encoder quantizes its samples with a dead-zone scalar quantizer and
//! ORs one random codeword per nonzero sample into a `b`-bit register. Relays
//! forward the OR of what they receive, and the decoder recovers the support
//! and levels by exact cover over the fused word.

pub mod baselines;
pub mod codec;
pub mod decoder;
pub mod error;
pub mod harness;
pub mod model;
pub mod network;
pub mod ratebound;
pub mod seed;

pub use codec::{Codebook, CodebookHeader, Codeword, Encoder, QuantizerSpec};
pub use decoder::{decode, ml_decode, DecodeOutcome, DecodeStatus, ReconstructionResult, SupportHypothesis};
pub use error::{Error, Result};
pub use harness::{run_trial, sweep_rate, sweep_resolution, ExperimentConfig, Scheme, TrialRecord};
pub use model::{generate_signals, SignalMatrix, SparsityModel, SystemParams};
pub use network::{simulate_network, LinkFailureProcess, LinkState, NetworkTopology, NodeId};
pub use ratebound::{rate_threshold, resolution_for_rate, RateQuery};
