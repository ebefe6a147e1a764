use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{FeatureMatrix, Waveform, FRAME_LENGTH_S, FRAME_SHIFT_S};
use crate::error::{Error, Result};

/// 13 static cepstra, their deltas and delta-deltas.
pub const MFCC_DIMS: usize = 39;

/// MFCC front-end settings. The defaults are the conventional 16 kHz choices.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccConfig {
    pub sample_rate: u32,
    pub frame_length: usize,
    pub frame_shift: usize,
    pub n_fft: usize,
    pub n_mels: usize,
    pub n_ceps: usize,
    pub preemphasis: f64,
    pub low_hz: f64,
    pub high_hz: f64,
    pub delta_window: usize,
    /// Filterbank energies are floored here before the logarithm.
    pub energy_floor: f64,
    pub remove_dc: bool,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            frame_length: 400,
            frame_shift: 160,
            n_fft: 512,
            n_mels: 24,
            n_ceps: 13,
            preemphasis: 0.97,
            low_hz: 0.0,
            high_hz: 8_000.0,
            delta_window: 2,
            energy_floor: 1e-10,
            remove_dc: true,
        }
    }
}

/// Number of full analysis windows in `n_samples` samples.
pub fn frame_count(n_samples: usize, frame_length: usize, frame_shift: usize) -> usize {
    if n_samples < frame_length {
        0
    } else {
        (n_samples - frame_length) / frame_shift + 1
    }
}

/// 39-dimensional MFCCs with the default front-end. No normalization applied.
pub fn compute_mfcc(w: &Waveform) -> Result<FeatureMatrix> {
    compute_mfcc_with(w, &MfccConfig::default())
}

pub fn compute_mfcc_with(w: &Waveform, cfg: &MfccConfig) -> Result<FeatureMatrix> {
    let n_frames = frame_count(w.samples.len(), cfg.frame_length, cfg.frame_shift);
    if n_frames == 0 {
        return Err(Error::TooShort {
            samples: w.samples.len(),
            needed: cfg.frame_length,
        });
    }
    if cfg.n_fft < cfg.frame_length || cfg.n_ceps > cfg.n_mels {
        return Err(Error::BadConfig(format!(
            "inconsistent MFCC configuration {cfg:?}"
        )));
    }

    let window = hamming(cfg.frame_length);
    let bank = MelBank::new(cfg);
    let dct = dct_matrix(cfg.n_ceps, cfg.n_mels);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.n_fft);

    let mut buf = vec![Complex::new(0.0, 0.0); cfg.n_fft];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut frame = vec![0.0; cfg.frame_length];
    let mut magnitude = vec![0.0; cfg.n_fft / 2 + 1];
    let mut log_mel = vec![0.0; cfg.n_mels];
    let mut statics = Vec::with_capacity(n_frames * cfg.n_ceps);

    for t in 0..n_frames {
        let start = t * cfg.frame_shift;
        frame.copy_from_slice(&w.samples[start..start + cfg.frame_length]);
        if cfg.remove_dc {
            let mean = frame.iter().sum::<f64>() / frame.len() as f64;
            frame.iter_mut().for_each(|x| *x -= mean);
        }
        // per-frame pre-emphasis; the first sample is filtered against itself
        for i in (1..frame.len()).rev() {
            frame[i] -= cfg.preemphasis * frame[i - 1];
        }
        frame[0] -= cfg.preemphasis * frame[0];

        for (i, c) in buf.iter_mut().enumerate() {
            let v = if i < cfg.frame_length {
                frame[i] * window[i]
            } else {
                0.0
            };
            *c = Complex::new(v, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (m, c) in magnitude.iter_mut().zip(&buf) {
            *m = c.norm();
        }
        bank.apply(&magnitude, &mut log_mel, cfg.energy_floor);
        for row in &dct {
            statics.push(row.iter().zip(&log_mel).map(|(a, b)| a * b).sum::<f64>());
        }
    }

    let deltas = delta(&statics, cfg.n_ceps, cfg.delta_window);
    let delta2 = delta(&deltas, cfg.n_ceps, cfg.delta_window);
    let dims = 3 * cfg.n_ceps;
    let mut data = Vec::with_capacity(n_frames * dims);
    for t in 0..n_frames {
        let r = t * cfg.n_ceps..(t + 1) * cfg.n_ceps;
        data.extend_from_slice(&statics[r.clone()]);
        data.extend_from_slice(&deltas[r.clone()]);
        data.extend_from_slice(&delta2[r]);
    }
    let rate = cfg.sample_rate as f64;
    let shift = if cfg.frame_shift == 160 && cfg.sample_rate == 16_000 {
        FRAME_SHIFT_S
    } else {
        cfg.frame_shift as f64 / rate
    };
    let length = if cfg.frame_length == 400 && cfg.sample_rate == 16_000 {
        FRAME_LENGTH_S
    } else {
        cfg.frame_length as f64 / rate
    };
    FeatureMatrix::new(w.file_id.clone(), data, dims, shift, length, length / 2.0)
}

fn hamming(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

// Triangular filters equally spaced on the mel scale, stored sparsely.
struct MelBank {
    filters: Vec<(usize, Vec<f64>)>,
}

impl MelBank {
    fn new(cfg: &MfccConfig) -> Self {
        let n_bins = cfg.n_fft / 2 + 1;
        let lo = hz_to_mel(cfg.low_hz);
        let hi = hz_to_mel(cfg.high_hz);
        let step = (hi - lo) / (cfg.n_mels + 1) as f64;
        let bin_mel: Vec<f64> = (0..n_bins)
            .map(|k| hz_to_mel(k as f64 * cfg.sample_rate as f64 / cfg.n_fft as f64))
            .collect();
        let filters = (0..cfg.n_mels)
            .map(|m| {
                let left = lo + m as f64 * step;
                let centre = left + step;
                let right = centre + step;
                let weights: Vec<(usize, f64)> = bin_mel
                    .iter()
                    .enumerate()
                    .filter_map(|(k, &mel)| {
                        let w = if mel > left && mel <= centre {
                            (mel - left) / (centre - left)
                        } else if mel > centre && mel < right {
                            (right - mel) / (right - centre)
                        } else {
                            0.0
                        };
                        (w > 0.0).then_some((k, w))
                    })
                    .collect();
                let first = weights.first().map_or(0, |&(k, _)| k);
                let dense = weights.iter().map(|&(_, w)| w).collect();
                (first, dense)
            })
            .collect();
        Self { filters }
    }

    fn apply(&self, magnitude: &[f64], out: &mut [f64], floor: f64) {
        for ((first, weights), o) in self.filters.iter().zip(out.iter_mut()) {
            let e: f64 = weights
                .iter()
                .zip(&magnitude[*first..])
                .map(|(w, m)| w * m)
                .sum();
            *o = e.max(floor).ln();
        }
    }
}

// Orthonormal DCT-II rows.
fn dct_matrix(n_out: usize, n_in: usize) -> Vec<Vec<f64>> {
    let n = n_in as f64;
    (0..n_out)
        .map(|i| {
            let scale = if i == 0 {
                (1.0 / n).sqrt()
            } else {
                (2.0 / n).sqrt()
            };
            (0..n_in)
                .map(|m| scale * (PI * i as f64 * (m as f64 + 0.5) / n).cos())
                .collect()
        })
        .collect()
}

/// Regression deltas over `±window` frames with edge replication.
pub(crate) fn delta(values: &[f64], width: usize, window: usize) -> Vec<f64> {
    let n_frames = values.len() / width;
    let denom = 2.0 * (1..=window).map(|n| (n * n) as f64).sum::<f64>();
    let mut out = vec![0.0; values.len()];
    for t in 0..n_frames {
        for d in 0..width {
            let mut acc = 0.0;
            for n in 1..=window {
                let ahead = (t + n).min(n_frames - 1);
                let behind = t.saturating_sub(n);
                acc += n as f64 * (values[ahead * width + d] - values[behind * width + d]);
            }
            out[t * width + d] = acc / denom;
        }
    }
    out
}
