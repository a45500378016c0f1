//! Knowledge-base inference over (entity, relation, entity) triples.
//!
//! The crate trains embedding models for link prediction and evaluates them
//! with ranking metrics that handle out-of-vocabulary (OOV) entity pairs
//! explicitly instead of silently assigning them random vectors.
//!
//! The pieces fit together like this:
//!
//! * [`kb`] — datasets: loading/writing tab-separated triple files, dense
//!   vocabularies, a pair index over the training split, corpus statistics,
//!   and synthetic corpus generators for controlled experiments.
//! * [`models`] — embedding stores and scoring functions for the four base
//!   models (`E`, `F`, `TransE`, `DistMult`) plus their additive and
//!   jointly-trained combinations.
//! * [`training`] — negative sampling, log-likelihood and max-margin losses
//!   with analytic gradients, AdaGrad, and the epoch loop with
//!   best-checkpoint retention.
//! * [`eval`] — ranking protocols (`standard` and `kbi`), expected-rank tie
//!   handling, per-query reports, and the per-query oracle combiner.
//! * [`baselines`] — frequency baselines ranked with the same machinery.
//! * [`persist`] — checkpoint manifest + TSV block round-tripping.
//!
//! Every random decision flows from a single root seed through named
//! substreams ([`rng::substream`]), so runs are reproducible byte-for-byte.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod kb;
pub mod models;
pub mod persist;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
