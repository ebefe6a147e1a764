use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::eval::{FileGold, GoldAnnotation, Interval};
use crate::features::{write_pdtwfeat, FeatureMatrix, FRAME_SHIFT_S, MFCC_DIMS};

/// Parameters of a synthetic planted-pattern corpus.
///
/// Word templates are smooth random trajectories whose control points have
/// unit standard deviation ("trajectory scale" 1). Background frames are iid
/// unit-variance noise, and a fraction of every background gap is low-energy
/// silence (column 0 far below the speech range) so the VAD has something to
/// remove.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub words: usize,
    pub instances: usize,
    /// Additive noise std relative to the trajectory scale.
    pub noise_sigma: f64,
    /// Tempo warp drawn uniformly from `[-warp, warp]`.
    pub warp: f64,
    pub background_s: f64,
    pub files: usize,
    pub dims: usize,
    pub frame_shift: f64,
    pub min_word_frames: usize,
    pub max_word_frames: usize,
    /// Frames between consecutive control points of a template.
    pub control_spacing: usize,
    pub min_gap_frames: usize,
    pub silence_fraction: f64,
    pub silence_level: f64,
    pub rng_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            words: 20,
            instances: 10,
            noise_sigma: 0.3,
            warp: 0.2,
            background_s: 600.0,
            files: 10,
            dims: MFCC_DIMS,
            frame_shift: FRAME_SHIFT_S,
            min_word_frames: 15,
            max_word_frames: 40,
            control_spacing: 5,
            min_gap_frames: 30,
            silence_fraction: 0.1,
            silence_level: -8.0,
            rng_seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::BadConfig(format!("synthetic corpus: {m}")));
        if self.words == 0 || self.instances == 0 || self.files == 0 || self.dims == 0 {
            return bad("words, instances, files and dims must be positive");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise sigma must be non-negative");
        }
        if !(0.0..1.0).contains(&self.warp) {
            return bad("warp must lie in [0, 1)");
        }
        if self.min_word_frames < 2 || self.max_word_frames < self.min_word_frames {
            return bad("need 2 <= min_word_frames <= max_word_frames");
        }
        if !(0.0..1.0).contains(&self.silence_fraction) {
            return bad("silence fraction must lie in [0, 1)");
        }
        let non_positive = |x: f64| x.is_nan() || x <= 0.0;
        if self.control_spacing == 0
            || non_positive(self.frame_shift)
            || self.background_s.is_nan()
            || self.background_s < 0.0
        {
            return bad("control spacing, frame shift and background must be positive");
        }
        Ok(())
    }
}

/// One embedded word instance: the oracle for recovery checks.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance {
    pub file_id: String,
    pub word: usize,
    pub instance: usize,
    /// Raw frame range `[start, end)`.
    pub start_frame: usize,
    pub end_frame: usize,
    pub onset: f64,
    pub offset: f64,
    pub template_frames: usize,
}

impl PlantedInstance {
    pub fn label(&self) -> String {
        word_label(self.word)
    }
}

fn word_label(w: usize) -> String {
    format!("w{w:03}")
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub spec: SynthSpec,
    pub matrices: Vec<FeatureMatrix>,
    pub planted: Vec<PlantedInstance>,
    pub gold: GoldAnnotation,
}

struct Template {
    ctrl: Vec<Vec<f64>>,
    frames: usize,
}

impl Template {
    fn random(rng: &mut ChaCha8Rng, spec: &SynthSpec) -> Self {
        let frames = rng.random_range(spec.min_word_frames..=spec.max_word_frames);
        let n_ctrl = frames.div_ceil(spec.control_spacing) + 1;
        let std = Normal::new(0.0, 1.0).expect("unit normal");
        let ctrl = (0..n_ctrl)
            .map(|_| (0..spec.dims).map(|_| std.sample(rng)).collect())
            .collect();
        Self { ctrl, frames }
    }

    /// Cosine interpolation between control points at position `u` in `[0, 1]`.
    fn at(&self, u: f64, out: &mut [f64]) {
        let x = u.clamp(0.0, 1.0) * (self.ctrl.len() - 1) as f64;
        let i = (x.floor() as usize).min(self.ctrl.len() - 2);
        let t = x - i as f64;
        let w = (1.0 - (std::f64::consts::PI * t).cos()) / 2.0;
        for (d, o) in out.iter_mut().enumerate() {
            *o = self.ctrl[i][d] * (1.0 - w) + self.ctrl[i + 1][d] * w;
        }
    }
}

/// Splits `total` into `parts` non-negative integers with random proportions.
fn random_partition(rng: &mut ChaCha8Rng, total: usize, parts: usize) -> Vec<usize> {
    let weights: Vec<f64> = (0..parts).map(|_| rng.random::<f64>() + 1e-9).collect();
    let sum: f64 = weights.iter().sum();
    let mut out: Vec<usize> = weights
        .iter()
        .map(|w| (w / sum * total as f64).floor() as usize)
        .collect();
    let mut rest = total - out.iter().sum::<usize>();
    let mut i = 0;
    while rest > 0 {
        out[i % parts] += 1;
        rest -= 1;
        i += 1;
    }
    out
}

/// Generates the corpus in memory. Values are rounded to `f32` so that the
/// matrices equal what the feature files hold.
pub fn generate_synthetic_corpus(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let templates: Vec<Template> = (0..spec.words)
        .map(|_| Template::random(&mut rng, spec))
        .collect();

    let mut order: Vec<(usize, usize)> = (0..spec.words)
        .flat_map(|w| (0..spec.instances).map(move |i| (w, i)))
        .collect();
    order.shuffle(&mut rng);
    let mut per_file: Vec<Vec<(usize, usize)>> = vec![Vec::new(); spec.files];
    for (n, item) in order.into_iter().enumerate() {
        per_file[n % spec.files].push(item);
    }

    let bg_frames = (spec.background_s / spec.frame_shift).round() as usize;
    let bg_per_file = bg_frames / spec.files;
    let mut matrices = Vec::with_capacity(spec.files);
    let mut planted = Vec::new();
    let mut gold = GoldAnnotation::default();
    let mut frame = vec![0.0; spec.dims];

    for (fi, items) in per_file.iter().enumerate() {
        let file_id = format!("synth_{fi:03}");
        let gaps = items.len() + 1;
        let min_total = gaps * spec.min_gap_frames;
        let extra = random_partition(&mut rng, bg_per_file.saturating_sub(min_total), gaps);
        let mut data: Vec<f64> = Vec::new();
        let mut tier = Vec::new();
        let push_gap = |data: &mut Vec<f64>, rng: &mut ChaCha8Rng, len: usize| {
            let sil = (len as f64 * spec.silence_fraction).round() as usize;
            let sil_start = (len - sil) / 2;
            for t in 0..len {
                let silent = t >= sil_start && t < sil_start + sil;
                for d in 0..spec.dims {
                    let v = if silent {
                        if d == 0 {
                            spec.silence_level + 0.1 * unit.sample(rng)
                        } else {
                            0.1 * unit.sample(rng)
                        }
                    } else {
                        unit.sample(rng)
                    };
                    data.push(v);
                }
            }
        };
        for (k, &(w, inst)) in items.iter().enumerate() {
            push_gap(&mut data, &mut rng, spec.min_gap_frames + extra[k]);
            let tpl = &templates[w];
            let factor = if spec.warp > 0.0 {
                1.0 + rng.random_range(-spec.warp..=spec.warp)
            } else {
                1.0
            };
            let len = ((tpl.frames as f64 * factor).round() as usize).max(2);
            let start = data.len() / spec.dims;
            for t in 0..len {
                tpl.at(t as f64 / (len - 1) as f64, &mut frame);
                for &v in &frame {
                    let n = if spec.noise_sigma > 0.0 {
                        noise.sample(&mut rng)
                    } else {
                        0.0
                    };
                    data.push(v + n);
                }
            }
            let end = start + len;
            let onset = start as f64 * spec.frame_shift;
            let offset = end as f64 * spec.frame_shift;
            tier.push(Interval {
                start: onset,
                end: offset,
                label: word_label(w),
            });
            planted.push(PlantedInstance {
                file_id: file_id.clone(),
                word: w,
                instance: inst,
                start_frame: start,
                end_frame: end,
                onset,
                offset,
                template_frames: tpl.frames,
            });
        }
        push_gap(
            &mut data,
            &mut rng,
            spec.min_gap_frames + extra[items.len()],
        );
        data.iter_mut().for_each(|v| *v = *v as f32 as f64);
        let shift = spec.frame_shift;
        matrices.push(FeatureMatrix::new(
            file_id.clone(),
            data,
            spec.dims,
            shift,
            shift,
            0.0,
        )?);
        gold.files.insert(
            file_id,
            FileGold {
                phones: tier.clone(),
                words: tier,
            },
        );
    }
    Ok(SynthCorpus {
        spec: spec.clone(),
        matrices,
        planted,
        gold,
    })
}

/// Paths written by [`write_synthetic_corpus`].
#[derive(Debug, Clone)]
pub struct SynthPaths {
    pub manifest: PathBuf,
    pub phones: PathBuf,
    pub words: PathBuf,
    pub planted: PathBuf,
    pub features: Vec<PathBuf>,
}

fn write_tier(path: &Path, gold: &GoldAnnotation, words: bool) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for (id, g) in &gold.files {
        for iv in if words { &g.words } else { &g.phones } {
            writeln!(w, "{id}\t{:.3}\t{:.3}\t{}", iv.start, iv.end, iv.label)
                .map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `feats/<file_id>.feat`, `manifest.txt` (relative paths),
/// `phones.tsv`, `words.tsv` and `planted.tsv` under `out_dir`.
pub fn write_synthetic_corpus(
    corpus: &SynthCorpus,
    out_dir: impl AsRef<Path>,
) -> Result<SynthPaths> {
    let out = out_dir.as_ref();
    let feats = out.join("feats");
    fs::create_dir_all(&feats).map_err(|e| Error::io(&feats, e))?;
    let mut features = Vec::new();
    let mut manifest = String::new();
    for m in &corpus.matrices {
        let p = feats.join(format!("{}.feat", m.file_id));
        write_pdtwfeat(&p, m)?;
        manifest.push_str(&format!("feats/{}.feat\n", m.file_id));
        features.push(p);
    }
    let paths = SynthPaths {
        manifest: out.join("manifest.txt"),
        phones: out.join("phones.tsv"),
        words: out.join("words.tsv"),
        planted: out.join("planted.tsv"),
        features,
    };
    fs::write(&paths.manifest, manifest).map_err(|e| Error::io(&paths.manifest, e))?;
    write_tier(&paths.phones, &corpus.gold, false)?;
    write_tier(&paths.words, &corpus.gold, true)?;
    let mut text = String::from("#file_id\tword\tinstance\tstart_frame\tend_frame\tonset\toffset\tframes\ttemplate_frames\n");
    for p in &corpus.planted {
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{:.3}\t{:.3}\t{}\t{}\n",
            p.file_id,
            p.label(),
            p.instance,
            p.start_frame,
            p.end_frame,
            p.onset,
            p.offset,
            p.end_frame - p.start_frame,
            p.template_frames
        ));
    }
    fs::write(&paths.planted, text).map_err(|e| Error::io(&paths.planted, e))?;
    Ok(paths)
}
