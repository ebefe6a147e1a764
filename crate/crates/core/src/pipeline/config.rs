use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::{NormalizationScope, FRAME_SHIFT_S};
use crate::stage1::{
    SearchConfig, SegmentConfig, DEFAULT_ALPHA, DEFAULT_DOWNSAMPLE, DEFAULT_K, DEFAULT_SHIFT,
    DEFAULT_WINDOW,
};
use crate::stage2::{AlignConfig, DtwCostMode, DEFAULT_EXPAND, DEFAULT_MIN_PATH_STEPS};
use crate::stats::{CDF_FLOOR, DEFAULT_CALIB_SAMPLES};
use crate::vad::{SpeechRule, VadConfig, DEFAULT_VAD_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureSource {
    /// WAV files through the MFCC front-end.
    #[default]
    Mfcc,
    /// Precomputed PDTWFEAT or CSV feature files.
    Files,
}

impl FromStr for FeatureSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mfcc" | "wav+mfcc" => Ok(Self::Mfcc),
            "files" | "feature-files" => Ok(Self::Files),
            other => Err(Error::BadConfig(format!(
                "unknown feature source {other:?}"
            ))),
        }
    }
}

impl fmt::Display for FeatureSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mfcc => "mfcc",
            Self::Files => "files",
        })
    }
}

/// Every tunable of a discovery run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub alpha: f64,
    pub window_frames: usize,
    pub shift_frames: usize,
    pub downsample_frames: usize,
    pub knn: usize,
    pub expand_frames: usize,
    pub min_path_steps: usize,
    pub calib_samples: usize,
    pub vad_threshold: f64,
    pub vad_enabled: bool,
    pub vad_rule: SpeechRule,
    /// Fit the VAD on normalized rather than raw c0.
    pub vad_on_normalized: bool,
    pub rng_seed: u64,
    pub threads: usize,
    pub features: FeatureSource,
    pub normalization: NormalizationScope,
    pub dtw_cost: DtwCostMode,
    pub cdf_floor: f64,
    /// Frame shift assumed for CSV feature input.
    pub csv_frame_shift: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            window_frames: DEFAULT_WINDOW,
            shift_frames: DEFAULT_SHIFT,
            downsample_frames: DEFAULT_DOWNSAMPLE,
            knn: DEFAULT_K,
            expand_frames: DEFAULT_EXPAND,
            min_path_steps: DEFAULT_MIN_PATH_STEPS,
            calib_samples: DEFAULT_CALIB_SAMPLES,
            vad_threshold: DEFAULT_VAD_THRESHOLD,
            vad_enabled: true,
            vad_rule: SpeechRule::LargerWeight,
            vad_on_normalized: false,
            rng_seed: 0,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            features: FeatureSource::Mfcc,
            normalization: NormalizationScope::PerFile,
            dtw_cost: DtwCostMode::RawProb,
            cdf_floor: CDF_FLOOR,
            csv_frame_shift: FRAME_SHIFT_S,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::BadConfig(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::BadConfig(format!(
            "invalid boolean {value:?} for {key}"
        ))),
    }
}

impl PipelineConfig {
    /// Sets one option by its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim() {
            "alpha" => self.alpha = parse(key, value)?,
            "window_frames" => self.window_frames = parse(key, value)?,
            "shift_frames" => self.shift_frames = parse(key, value)?,
            "downsample_frames" => self.downsample_frames = parse(key, value)?,
            "knn" => self.knn = parse(key, value)?,
            "expand_frames" => self.expand_frames = parse(key, value)?,
            "min_path_steps" => self.min_path_steps = parse(key, value)?,
            "calib_samples" => self.calib_samples = parse(key, value)?,
            "vad_threshold" => self.vad_threshold = parse(key, value)?,
            "vad" => self.vad_enabled = parse_bool(key, value)?,
            "vad_speech_rule" => self.vad_rule = value.trim().parse()?,
            "vad_on_normalized" => self.vad_on_normalized = parse_bool(key, value)?,
            "seed" => self.rng_seed = parse(key, value)?,
            "threads" => self.threads = parse(key, value)?,
            "features" => self.features = value.trim().parse()?,
            "normalization" => self.normalization = value.trim().parse()?,
            "dtw_cost" => self.dtw_cost = value.trim().parse()?,
            "cdf_floor" => self.cdf_floor = parse(key, value)?,
            "csv_frame_shift" => self.csv_frame_shift = parse(key, value)?,
            other => return Err(Error::BadConfig(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a flat `key=value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::BadConfig(format!("line {}: expected key=value, got {raw:?}", i + 1))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn to_key_values(&self) -> String {
        format!(
            "alpha={}\nwindow_frames={}\nshift_frames={}\ndownsample_frames={}\nknn={}\nexpand_frames={}\n\
             min_path_steps={}\ncalib_samples={}\nvad_threshold={}\nvad={}\nvad_speech_rule={}\n\
             vad_on_normalized={}\nseed={}\nthreads={}\nfeatures={}\nnormalization={}\ndtw_cost={}\n\
             cdf_floor={}\ncsv_frame_shift={}\n",
            self.alpha,
            self.window_frames,
            self.shift_frames,
            self.downsample_frames,
            self.knn,
            self.expand_frames,
            self.min_path_steps,
            self.calib_samples,
            self.vad_threshold,
            self.vad_enabled,
            self.vad_rule,
            self.vad_on_normalized,
            self.rng_seed,
            self.threads,
            self.features,
            self.normalization,
            self.dtw_cost,
            self.cdf_floor,
            self.csv_frame_shift,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadConfig(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.vad_threshold > 0.0 && self.vad_threshold < 1.0) {
            return bad(format!(
                "vad_threshold must lie in (0, 1), got {}",
                self.vad_threshold
            ));
        }
        if !(self.cdf_floor > 0.0 && self.cdf_floor < 0.5) {
            return bad(format!(
                "cdf_floor must lie in (0, 0.5), got {}",
                self.cdf_floor
            ));
        }
        let counts = [
            ("window_frames", self.window_frames),
            ("shift_frames", self.shift_frames),
            ("downsample_frames", self.downsample_frames),
            ("knn", self.knn),
            ("min_path_steps", self.min_path_steps),
            ("calib_samples", self.calib_samples),
            ("threads", self.threads),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return bad(format!("{name} must be positive"));
        }
        if self.downsample_frames > self.window_frames {
            return bad("downsample_frames must not exceed window_frames".into());
        }
        if self.shift_frames > self.window_frames {
            return bad("shift_frames must not exceed window_frames".into());
        }
        if self.csv_frame_shift.is_nan() || self.csv_frame_shift <= 0.0 {
            return bad("csv_frame_shift must be positive".into());
        }
        Ok(())
    }

    pub fn segment_config(&self) -> SegmentConfig {
        SegmentConfig {
            window: self.window_frames,
            shift: self.shift_frames,
            downsample: self.downsample_frames,
        }
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            k: self.knn,
            alpha: self.alpha,
        }
    }

    pub fn align_config(&self) -> AlignConfig {
        AlignConfig {
            alpha: self.alpha,
            expand: self.expand_frames,
            min_path_steps: self.min_path_steps,
            cost_mode: self.dtw_cost,
            cdf_floor: self.cdf_floor,
        }
    }

    pub fn vad_config(&self) -> VadConfig {
        VadConfig {
            threshold: self.vad_threshold,
            rule: self.vad_rule,
            rng_seed: self.rng_seed,
            ..VadConfig::default()
        }
    }
}
