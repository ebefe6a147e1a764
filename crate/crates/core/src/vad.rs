//! Unsupervised voice activity detection.
//!
//! A two-component GMM is fitted to the 0th cepstral coefficient pooled over the
//! whole corpus. One component is taken to be speech, and frames lying in the
//! far tail of that component (the tail facing the other component) are
//! dropped.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::stats::{fit_gmm2, Gmm2Params, GMM_DEFAULT_MAX_ITERS, GMM_DEFAULT_TOL};

pub const DEFAULT_VAD_THRESHOLD: f64 = 0.01;

/// Which GMM component counts as "the larger cluster".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpeechRule {
    #[default]
    LargerWeight,
    LargerMean,
}

impl FromStr for SpeechRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weight" => Ok(Self::LargerWeight),
            "mean" => Ok(Self::LargerMean),
            other => Err(Error::BadConfig(format!("unknown speech rule {other:?}"))),
        }
    }
}

impl fmt::Display for SpeechRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LargerWeight => "weight",
            Self::LargerMean => "mean",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VadConfig {
    pub threshold: f64,
    pub rule: SpeechRule,
    pub max_iters: usize,
    pub tol: f64,
    pub rng_seed: u64,
}

impl Default for VadConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_VAD_THRESHOLD,
            rule: SpeechRule::default(),
            max_iters: GMM_DEFAULT_MAX_ITERS,
            tol: GMM_DEFAULT_TOL,
            rng_seed: 0,
        }
    }
}

/// Per-frame keep flags for one file.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeechMask {
    pub file_id: String,
    pub keep: Vec<bool>,
    pub kept_frame_times: Vec<f64>,
}

impl SpeechMask {
    /// A mask that keeps every frame of `m`.
    pub fn keep_all(m: &FeatureMatrix) -> Self {
        Self {
            file_id: m.file_id.clone(),
            keep: vec![true; m.n_frames()],
            kept_frame_times: m.frame_times(),
        }
    }

    pub fn kept_indices(&self) -> Vec<usize> {
        self.keep
            .iter()
            .enumerate()
            .filter_map(|(i, &k)| k.then_some(i))
            .collect()
    }

    pub fn kept_count(&self) -> usize {
        self.kept_frame_times.len()
    }
}

/// The fitted speech model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VadModel {
    pub gmm: Gmm2Params,
    pub speech: usize,
    pub threshold: f64,
}

impl VadModel {
    pub fn fit(pooled_c0: &[f64], cfg: &VadConfig) -> Result<Self> {
        let fit = fit_gmm2(pooled_c0, cfg.max_iters, cfg.tol, cfg.rng_seed)?;
        let gmm = fit.params;
        let speech = match cfg.rule {
            SpeechRule::LargerWeight => usize::from(gmm.weight[1] > gmm.weight[0]),
            // components are sorted by mean
            SpeechRule::LargerMean => 1,
        };
        Ok(Self {
            gmm,
            speech,
            threshold: cfg.threshold,
        })
    }

    pub fn other(&self) -> usize {
        1 - self.speech
    }

    /// One-tailed probability of `x` under the speech component, on the tail
    /// facing the other component's mean.
    pub fn tail_probability(&self, x: f64) -> f64 {
        let comp = self.gmm.component(self.speech);
        let cdf = comp.cdf_unclamped(x);
        if self.gmm.mean[self.speech] >= self.gmm.mean[self.other()] {
            cdf
        } else {
            1.0 - cdf
        }
    }

    pub fn keeps(&self, x: f64) -> bool {
        self.tail_probability(x) >= self.threshold
    }
}

#[derive(Debug, Clone)]
pub struct VadOutcome {
    pub masks: Vec<SpeechMask>,
    /// `None` when the GMM fit was degenerate and everything was kept.
    pub model: Option<VadModel>,
    pub warning: Option<String>,
}

/// Fits one global model on column 0 of every matrix and masks each file.
pub fn compute_speech_masks(mats: &[FeatureMatrix], cfg: &VadConfig) -> VadOutcome {
    let pooled: Vec<f64> = mats.iter().flat_map(|m| m.frames().map(|f| f[0])).collect();
    match VadModel::fit(&pooled, cfg) {
        Ok(model) => {
            let masks = mats.par_iter().map(|m| apply_model(m, &model)).collect();
            VadOutcome {
                masks,
                model: Some(model),
                warning: None,
            }
        }
        Err(e) => {
            let msg = format!("VAD disabled, keeping all frames: {e}");
            log::warn!("{msg}");
            VadOutcome {
                masks: mats.iter().map(SpeechMask::keep_all).collect(),
                model: None,
                warning: Some(msg),
            }
        }
    }
}

pub fn apply_model(m: &FeatureMatrix, model: &VadModel) -> SpeechMask {
    let keep: Vec<bool> = m.frames().map(|f| model.keeps(f[0])).collect();
    let kept_frame_times = keep
        .iter()
        .enumerate()
        .filter(|(_, &k)| k)
        .map(|(i, _)| m.frame_time(i))
        .collect();
    SpeechMask {
        file_id: m.file_id.clone(),
        keep,
        kept_frame_times,
    }
}

/// Writes `<file_id>\t<frame_index>\t<0|1>` lines.
pub fn write_mask_tsv(path: impl AsRef<Path>, masks: &[SpeechMask]) -> Result<()> {
    let path = path.as_ref();
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for m in masks {
        for (i, &k) in m.keep.iter().enumerate() {
            writeln!(w, "{}\t{}\t{}", m.file_id, i, u8::from(k)).map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a mask TSV; frame `i` is stamped at `time_offset + i * frame_shift`.
/// Files keep their order of first appearance.
pub fn read_mask_tsv(
    path: impl AsRef<Path>,
    frame_shift: f64,
    time_offset: f64,
) -> Result<Vec<SpeechMask>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut masks: Vec<SpeechMask> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| Error::MalformedLine {
            path: path.to_path_buf(),
            line: idx + 1,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(bad("expected 3 tab-separated fields"));
        }
        let frame: usize = fields[1].parse().map_err(|_| bad("bad frame index"))?;
        let keep = match fields[2].trim() {
            "0" => false,
            "1" => true,
            _ => return Err(bad("keep flag must be 0 or 1")),
        };
        if masks.last().map(|m| m.file_id.as_str()) != Some(fields[0]) {
            if masks.iter().any(|m| m.file_id == fields[0]) {
                return Err(bad("file rows are not contiguous"));
            }
            masks.push(SpeechMask {
                file_id: fields[0].to_string(),
                keep: Vec::new(),
                kept_frame_times: Vec::new(),
            });
        }
        let m = masks.last_mut().expect("pushed above");
        if frame != m.keep.len() {
            return Err(bad("frame indices must be consecutive from 0"));
        }
        m.keep.push(keep);
        if keep {
            m.kept_frame_times
                .push(time_offset + frame as f64 * frame_shift);
        }
    }
    Ok(masks)
}
