//! Probabilistic dynamic-time-warping engine for unsupervised discovery of
//! recurring patterns in speech.
//!
//! The pipeline runs in two stages. A low-resolution sweep embeds fixed-length
//! windows of the corpus and keeps, for each window, the nearest neighbours whose
//! cosine distance is improbably small under a normal model fitted to the corpus.
//! A high-resolution stage then aligns every candidate at frame level over a
//! matrix of calibrated tail probabilities and keeps the sub-path that is least
//! likely to arise by chance.
//!
//! Module map:
//!
//! * [`stats`]: normal fit and CDF, pairwise distance sampling, 1-D two-component GMM.
//! * [`features`]: WAV ingestion, MFCCs with deltas, normalization, feature files.
//! * [`vad`]: GMM-based speech/non-speech masking on the 0th cepstral coefficient.
//! * [`stage1`]: segmentation, embedding, calibrated k-NN candidate search.
//! * [`stage2`]: expansion, probability matrix, DTW, likelihood-ratio sub-path.
//! * [`eval`]: NED, coverage, M-score and boundary precision/recall/F.
//! * [`pipeline`]: configuration, orchestration, serialization, synthetic corpora.

pub mod error;
pub mod eval;
pub mod features;
pub mod pipeline;
pub mod stage1;
pub mod stage2;
pub mod stats;
pub mod vad;

pub use error::{Error, Result};
