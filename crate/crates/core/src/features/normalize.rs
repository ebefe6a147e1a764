use std::fmt;
use std::str::FromStr;

use super::FeatureMatrix;
use crate::error::Error;

/// Pool over which per-dimension mean and variance are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormalizationScope {
    #[default]
    PerFile,
    PerCorpus,
}

impl FromStr for NormalizationScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-file" | "file" => Ok(Self::PerFile),
            "per-corpus" | "corpus" => Ok(Self::PerCorpus),
            other => Err(Error::BadConfig(format!(
                "unknown normalization scope {other:?}"
            ))),
        }
    }
}

impl fmt::Display for NormalizationScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PerFile => "per-file",
            Self::PerCorpus => "per-corpus",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Normalized {
    pub matrices: Vec<FeatureMatrix>,
    /// `(file_id, dimension)` for every dimension whose variance was zero in
    /// its scope. Those dimensions are centred but not scaled. With per-corpus
    /// scope the file id is empty.
    pub degenerate_dims: Vec<(String, usize)>,
}

impl Normalized {
    pub fn has_degenerate(&self) -> bool {
        !self.degenerate_dims.is_empty()
    }
}

/// Zero-mean, unit-variance (population) normalization of every dimension.
pub fn normalize_features(mats: &[FeatureMatrix], scope: NormalizationScope) -> Normalized {
    let mut out: Vec<FeatureMatrix> = mats.to_vec();
    let mut degenerate_dims = Vec::new();
    match scope {
        NormalizationScope::PerFile => {
            for m in &mut out {
                let (mean, std) = moments(std::slice::from_ref(m));
                apply(m, &mean, &std);
                degenerate_dims.extend(
                    std.iter()
                        .enumerate()
                        .filter(|(_, &s)| s == 0.0)
                        .map(|(d, _)| (m.file_id.clone(), d)),
                );
            }
        }
        NormalizationScope::PerCorpus => {
            if mats.is_empty() {
                return Normalized {
                    matrices: out,
                    degenerate_dims,
                };
            }
            let (mean, std) = moments(mats);
            for m in &mut out {
                apply(m, &mean, &std);
            }
            degenerate_dims.extend(
                std.iter()
                    .enumerate()
                    .filter(|(_, &s)| s == 0.0)
                    .map(|(d, _)| (String::new(), d)),
            );
        }
    }
    if !degenerate_dims.is_empty() {
        log::warn!(
            "{} zero-variance feature dimensions left unscaled",
            degenerate_dims.len()
        );
    }
    Normalized {
        matrices: out,
        degenerate_dims,
    }
}

fn moments(mats: &[FeatureMatrix]) -> (Vec<f64>, Vec<f64>) {
    let dims = mats[0].dims();
    let n: usize = mats.iter().map(FeatureMatrix::n_frames).sum();
    let mut mean = vec![0.0; dims];
    for f in mats.iter().flat_map(FeatureMatrix::frames) {
        mean.iter_mut().zip(f).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; dims];
    for f in mats.iter().flat_map(FeatureMatrix::frames) {
        for ((s, v), m) in var.iter_mut().zip(f).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / n as f64).sqrt()).collect();
    (mean, std)
}

fn apply(m: &mut FeatureMatrix, mean: &[f64], std: &[f64]) {
    let dims = m.dims();
    for row in m.as_mut_slice().chunks_exact_mut(dims) {
        for ((v, mu), s) in row.iter_mut().zip(mean).zip(std) {
            *v -= mu;
            if *s > 0.0 {
                *v /= s;
            }
        }
    }
}
