//! End-to-end orchestration: configuration, discovery runs, serialization of
//! discovered pairs, evaluation runs and synthetic test corpora.

mod classfile;
mod config;
mod discover;
mod synth;

pub use classfile::{read_class_file, write_class_file, write_lr_sidecar, ClassEntry};
pub use config::{FeatureSource, PipelineConfig};
pub use discover::{
    discover, discover_matrices, load_inputs, read_manifest, run_discover, run_eval,
    DiscoverOutputs, DiscoveryResult, EvalInputs, RunStats, StageTimings,
};
pub use synth::{
    generate_synthetic_corpus, write_synthetic_corpus, PlantedInstance, SynthCorpus, SynthPaths,
    SynthSpec,
};
