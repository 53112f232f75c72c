//! Benchmark framework for brainwave authentication built on event-related
//! potentials.
//!
//! The crate covers the whole chain from a neutral on-disk dataset format
//! ([`bundle`]) through preprocessing, classical and learned features,
//! per-user authenticators, attacker/session evaluation scenarios and
//! biometric error metrics, up to a YAML-driven runner ([`orchestrator`]).
//! A synthetic ERP generator ([`synth`]) makes every path runnable without
//! real recordings.

pub mod bundle;
pub mod classifiers;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod metrics;
pub mod orchestrator;
pub mod preprocess;
pub mod rng;
pub mod synth;
pub mod twin;

pub use error::{Error, Result};
