//! Frame-level feature matrices: ingestion, MFCC front-end and normalization.

mod featfile;
mod matrix;
mod mfcc;
mod normalize;
mod wav;

pub use featfile::{load_features, read_csv_features, read_pdtwfeat, write_pdtwfeat, FEAT_MAGIC};
pub use matrix::FeatureMatrix;
pub use mfcc::{compute_mfcc, compute_mfcc_with, frame_count, MfccConfig, MFCC_DIMS};
pub use normalize::{normalize_features, NormalizationScope, Normalized};
pub use wav::{load_wav, write_wav, Waveform, SAMPLE_RATE};

/// Frame shift of the MFCC front-end, seconds.
pub const FRAME_SHIFT_S: f64 = 0.010;
/// Analysis window length of the MFCC front-end, seconds.
pub const FRAME_LENGTH_S: f64 = 0.025;
