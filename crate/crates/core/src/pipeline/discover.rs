use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::classfile::{read_class_file, write_class_file, write_lr_sidecar};
use super::config::{FeatureSource, PipelineConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate, load_gold, EvalConfig, EvalReport};
use crate::features::{compute_mfcc, load_features, load_wav, normalize_features, FeatureMatrix};
use crate::stage1::{
    calibrate_segment_distances, find_candidates, segment_corpus, write_candidates_tsv,
    CandidatePair, MaskedFile, SegmentTable,
};
use crate::stage2::{align_candidates, calibrate_frame_distances, AlignOutcome, DiscoveredPair};
use crate::stats::NormalParams;
use crate::vad::{compute_speech_masks, read_mask_tsv, write_mask_tsv, SpeechMask};

/// Offset between the VAD/segment seed and the frame-calibration seed, so the
/// two samplers draw different index streams.
const FRAME_CALIB_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub features: f64,
    pub vad: f64,
    pub normalize: f64,
    pub stage1_calibration: f64,
    pub stage1_search: f64,
    pub stage2_calibration: f64,
    pub stage2_align: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.features
            + self.vad
            + self.normalize
            + self.stage1_calibration
            + self.stage1_search
            + self.stage2_calibration
            + self.stage2_align
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub file_count: usize,
    pub frames_total: usize,
    pub frames_kept: usize,
    pub segment_count: usize,
    pub candidate_count: usize,
    pub accepted_pairs: usize,
    pub rejected_too_short: usize,
    pub rejected_self_overlap: usize,
    pub timings: StageTimings,
}

impl RunStats {
    /// `accepted + rejections == candidates`.
    pub fn is_consistent(&self) -> bool {
        self.accepted_pairs + self.rejected_too_short + self.rejected_self_overlap
            == self.candidate_count
    }

    pub fn to_key_values(&self) -> String {
        let t = &self.timings;
        format!(
            "files={}\nframes_total={}\nframes_kept={}\nsegments={}\ncandidates={}\naccepted={}\n\
             rejected_too_short={}\nrejected_self_overlap={}\ntime_features_s={:.3}\ntime_vad_s={:.3}\n\
             time_normalize_s={:.3}\ntime_stage1_calibration_s={:.3}\ntime_stage1_search_s={:.3}\n\
             time_stage2_calibration_s={:.3}\ntime_stage2_align_s={:.3}\ntime_total_s={:.3}\n",
            self.file_count,
            self.frames_total,
            self.frames_kept,
            self.segment_count,
            self.candidate_count,
            self.accepted_pairs,
            self.rejected_too_short,
            self.rejected_self_overlap,
            t.features,
            t.vad,
            t.normalize,
            t.stage1_calibration,
            t.stage1_search,
            t.stage2_calibration,
            t.stage2_align,
            t.total(),
        )
    }
}

impl fmt::Display for RunStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} files, {}/{} frames kept, {} segments, {} candidates, {} accepted, {} too short, {} self-overlap, {:.2} s",
            self.file_count,
            self.frames_kept,
            self.frames_total,
            self.segment_count,
            self.candidate_count,
            self.accepted_pairs,
            self.rejected_too_short,
            self.rejected_self_overlap,
            self.timings.total()
        )
    }
}

/// Everything a discovery run produced, kept in memory.
#[derive(Debug, Clone)]
pub struct DiscoveryResult {
    pub files: Vec<MaskedFile>,
    pub masks: Vec<SpeechMask>,
    pub table: SegmentTable,
    pub segment_params: NormalParams,
    pub frame_params: NormalParams,
    pub candidates: Vec<CandidatePair>,
    pub outcomes: Vec<AlignOutcome>,
    pub pairs: Vec<DiscoveredPair>,
    pub stats: RunStats,
    pub warnings: Vec<String>,
    pub frame_shift: f64,
    /// Time of frame 0 of every file; needed to read the mask file back.
    pub frame_offset: f64,
}

/// Reads a manifest: one input path per line, blank lines and `#` comments
/// skipped. Relative paths resolve against the manifest's directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let p = PathBuf::from(l);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        })
        .collect())
}

/// Loads every input as a feature matrix, in manifest order.
pub fn load_inputs(paths: &[PathBuf], cfg: &PipelineConfig) -> Result<Vec<FeatureMatrix>> {
    paths
        .par_iter()
        .map(|p| {
            let loaded = match cfg.features {
                FeatureSource::Mfcc => load_wav(p).and_then(|w| compute_mfcc(&w)),
                FeatureSource::Files => load_features(p, cfg.csv_frame_shift),
            };
            loaded.map_err(|e| e.in_stage("features", p.display().to_string()))
        })
        .collect()
}

fn with_pool<T: Send>(cfg: &PipelineConfig, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| {
            Error::BadConfig(format!(
                "cannot build a pool of {} threads: {e}",
                cfg.threads
            ))
        })?;
    pool.install(f)
}

/// Loads the inputs and runs the whole pipeline inside a pool of `cfg.threads`.
pub fn discover(inputs: &[PathBuf], cfg: &PipelineConfig) -> Result<DiscoveryResult> {
    if inputs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    with_pool(cfg, || {
        let t = Instant::now();
        let raw = load_inputs(inputs, cfg)?;
        let mut result = run_stages(raw, cfg)?;
        result.stats.timings.features = t.elapsed().as_secs_f64() - result.stats.timings.total();
        Ok(result)
    })
}

/// Runs VAD, normalization and both stages on matrices already in memory.
pub fn discover_matrices(raw: Vec<FeatureMatrix>, cfg: &PipelineConfig) -> Result<DiscoveryResult> {
    if raw.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    with_pool(cfg, || run_stages(raw, cfg))
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn check_corpus(raw: &[FeatureMatrix]) -> Result<()> {
    let first = &raw[0];
    for m in &raw[1..] {
        if m.dims() != first.dims() {
            return Err(Error::BadConfig(format!(
                "{} has {} dimensions, {} has {}",
                m.file_id,
                m.dims(),
                first.file_id,
                first.dims()
            ))
            .in_stage("features", m.file_id.clone()));
        }
        if (m.frame_shift - first.frame_shift).abs() > 1e-9
            || (m.time_offset - first.time_offset).abs() > 1e-9
        {
            return Err(
                Error::BadConfig("all inputs must share frame shift and offset".into())
                    .in_stage("features", m.file_id.clone()),
            );
        }
    }
    let mut ids: Vec<&str> = raw.iter().map(|m| m.file_id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(
            Error::BadConfig(format!("duplicate file id {:?}", w[0])).in_stage("features", w[0])
        );
    }
    Ok(())
}

fn run_stages(raw: Vec<FeatureMatrix>, cfg: &PipelineConfig) -> Result<DiscoveryResult> {
    check_corpus(&raw)?;
    let mut stats = RunStats {
        file_count: raw.len(),
        frames_total: raw.iter().map(FeatureMatrix::n_frames).sum(),
        ..RunStats::default()
    };
    let mut warnings = Vec::new();
    let (frame_shift, frame_offset) = (raw[0].frame_shift, raw[0].time_offset);

    let t = Instant::now();
    let normalized = normalize_features(&raw, cfg.normalization);
    for (file, dim) in &normalized.degenerate_dims {
        let msg = format!("zero-variance dimension {dim} in {file:?} left unscaled");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    stats.timings.normalize = secs(t);

    let t = Instant::now();
    let masks = if cfg.vad_enabled {
        let source = if cfg.vad_on_normalized {
            &normalized.matrices
        } else {
            &raw
        };
        let outcome = compute_speech_masks(source, &cfg.vad_config());
        warnings.extend(outcome.warning);
        outcome.masks
    } else {
        raw.iter().map(SpeechMask::keep_all).collect()
    };
    drop(raw);
    let files: Vec<MaskedFile> = normalized
        .matrices
        .par_iter()
        .zip(&masks)
        .map(|(m, mask)| MaskedFile::new(m, mask).map_err(|e| e.in_stage("vad", m.file_id.clone())))
        .collect::<Result<_>>()?;
    stats.frames_kept = files.iter().map(MaskedFile::n_frames).sum();
    stats.timings.vad = secs(t);

    let t = Instant::now();
    let table =
        segment_corpus(&files, cfg.segment_config()).map_err(|e| e.in_stage("stage1", "corpus"))?;
    stats.segment_count = table.len();
    let segment_params = calibrate_segment_distances(&table, cfg.calib_samples, cfg.rng_seed)
        .map_err(|e| e.in_stage("stage1", "corpus"))?;
    stats.timings.stage1_calibration = secs(t);

    let t = Instant::now();
    let candidates = find_candidates(&table, &segment_params, cfg.search_config());
    stats.candidate_count = candidates.len();
    stats.timings.stage1_search = secs(t);

    let t = Instant::now();
    let frame_params = calibrate_frame_distances(
        &files,
        cfg.calib_samples,
        cfg.rng_seed ^ FRAME_CALIB_SEED_OFFSET,
    )
    .map_err(|e| e.in_stage("stage2", "corpus"))?;
    stats.timings.stage2_calibration = secs(t);

    let t = Instant::now();
    let outcomes = align_candidates(
        &candidates,
        &table,
        &files,
        &frame_params,
        &cfg.align_config(),
    );
    let mut pairs = Vec::new();
    for o in &outcomes {
        match o {
            AlignOutcome::Accepted(p) => pairs.push(p.clone()),
            AlignOutcome::TooShort { .. } => stats.rejected_too_short += 1,
            AlignOutcome::SelfOverlap => stats.rejected_self_overlap += 1,
        }
    }
    stats.accepted_pairs = pairs.len();
    stats.timings.stage2_align = secs(t);
    debug_assert!(stats.is_consistent());
    log::info!("{stats}");

    Ok(DiscoveryResult {
        files,
        masks,
        table,
        segment_params,
        frame_params,
        candidates,
        outcomes,
        pairs,
        stats,
        warnings,
        frame_shift,
        frame_offset,
    })
}

/// Paths written by [`run_discover`].
#[derive(Debug, Clone)]
pub struct DiscoverOutputs {
    pub stats: RunStats,
    pub pairs: PathBuf,
    pub lr_sidecar: PathBuf,
    pub masks: PathBuf,
    pub candidates: PathBuf,
    pub stats_file: PathBuf,
    pub config_file: PathBuf,
}

/// Staged output files: written under temporary names, renamed together, and
/// removed again if anything fails on the way.
struct Staging {
    written: Vec<(PathBuf, PathBuf)>,
    committed: bool,
}

impl Staging {
    fn new() -> Self {
        Self {
            written: Vec::new(),
            committed: false,
        }
    }

    fn write(
        &mut self,
        dir: &Path,
        name: &str,
        f: impl FnOnce(&Path) -> Result<()>,
    ) -> Result<PathBuf> {
        let tmp = dir.join(format!(".{name}.partial"));
        let dest = dir.join(name);
        self.written.push((tmp.clone(), dest.clone()));
        f(&tmp)?;
        Ok(dest)
    }

    fn commit(mut self) -> Result<()> {
        for (tmp, dest) in &self.written {
            fs::rename(tmp, dest).map_err(|e| Error::io(dest, e))?;
        }
        self.committed = true;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            for (tmp, dest) in &self.written {
                let _ = fs::remove_file(tmp);
                let _ = fs::remove_file(dest);
            }
        }
    }
}

/// Runs discovery on a manifest and writes `pairs.txt` (class file),
/// `pairs_lr.tsv`, `masks.tsv`, `candidates.tsv`, `stats.txt` and
/// `config.txt` into `out_dir`.
pub fn run_discover(
    manifest: impl AsRef<Path>,
    cfg: &PipelineConfig,
    out_dir: impl AsRef<Path>,
) -> Result<DiscoverOutputs> {
    let inputs = read_manifest(manifest)?;
    let result = discover(&inputs, cfg)?;
    write_outputs(&result, cfg, out_dir.as_ref())
}

fn write_outputs(r: &DiscoveryResult, cfg: &PipelineConfig, out: &Path) -> Result<DiscoverOutputs> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut staging = Staging::new();
    let pairs = staging.write(out, "pairs.txt", |p| write_class_file(p, &r.pairs))?;
    let lr_sidecar = staging.write(out, "pairs_lr.tsv", |p| write_lr_sidecar(p, &r.pairs))?;
    let masks = staging.write(out, "masks.tsv", |p| write_mask_tsv(p, &r.masks))?;
    let candidates = staging.write(out, "candidates.tsv", |p| {
        write_candidates_tsv(p, &r.candidates)
    })?;
    let stats_file = staging.write(out, "stats.txt", |p| {
        let mut text = r.stats.to_key_values();
        text.push_str(&format!(
            "frame_shift={}\nframe_offset={}\nsegment_mu={}\nsegment_sigma={}\nframe_mu={}\nframe_sigma={}\n",
            r.frame_shift,
            r.frame_offset,
            r.segment_params.mu,
            r.segment_params.sigma,
            r.frame_params.mu,
            r.frame_params.sigma
        ));
        for w in &r.warnings {
            text.push_str(&format!("warning={w}\n"));
        }
        fs::write(p, text).map_err(|e| Error::io(p, e))
    })?;
    let config_file = staging.write(out, "config.txt", |p| {
        fs::write(p, cfg.to_key_values()).map_err(|e| Error::io(p, e))
    })?;
    staging.commit()?;
    Ok(DiscoverOutputs {
        stats: r.stats.clone(),
        pairs,
        lr_sidecar,
        masks,
        candidates,
        stats_file,
        config_file,
    })
}

/// Files consumed by [`run_eval`].
#[derive(Debug, Clone)]
pub struct EvalInputs {
    pub pairs: PathBuf,
    pub phones: PathBuf,
    pub words: PathBuf,
    pub masks: PathBuf,
    pub frame_shift: f64,
    pub frame_offset: f64,
}

/// Scores a class file against gold tiers; every fragment must name a file
/// present in both the gold annotation and the masks.
pub fn run_eval(inputs: &EvalInputs, cfg: &EvalConfig) -> Result<EvalReport> {
    let (pairs, entries) = read_class_file(&inputs.pairs)?;
    let gold = load_gold(&inputs.phones, &inputs.words)?;
    let masks = read_mask_tsv(&inputs.masks, inputs.frame_shift, inputs.frame_offset)?;
    for e in &entries {
        let id = &e.fragment.file_id;
        if !gold.contains(id) || !masks.iter().any(|m| &m.file_id == id) {
            return Err(Error::UnknownFile {
                file_id: id.clone(),
                line: Some(e.line),
            });
        }
    }
    evaluate(&pairs, &gold, &masks, inputs.frame_shift, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_manifest_is_an_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.txt");
        fs::write(&m, "\n# nothing\n").unwrap();
        let err = run_discover(&m, &PipelineConfig::default(), dir.path().join("out")).unwrap_err();
        assert!(matches!(err, Error::EmptyCorpus));
    }

    #[test]
    fn manifest_paths_resolve_against_its_directory() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.txt");
        fs::write(&m, "a.feat\n/abs/b.feat\n\n").unwrap();
        let paths = read_manifest(&m).unwrap();
        assert_eq!(
            paths,
            vec![dir.path().join("a.feat"), PathBuf::from("/abs/b.feat")]
        );
    }

    #[test]
    fn missing_input_names_stage_and_file() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.txt");
        fs::write(&m, "missing.feat\n").unwrap();
        let cfg = PipelineConfig {
            features: FeatureSource::Files,
            threads: 1,
            ..PipelineConfig::default()
        };
        let out = dir.path().join("out");
        let err = run_discover(&m, &cfg, &out).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("features") && msg.contains("missing.feat"),
            "{msg}"
        );
        assert!(!out.join("pairs.txt").exists());
    }

    #[test]
    fn staging_removes_partial_files_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut s = Staging::new();
            s.write(dir.path(), "a.txt", |p| {
                fs::write(p, "x").map_err(|e| Error::io(p, e))
            })
            .unwrap();
            let _ = s.write(dir.path(), "b.txt", |_| Err(Error::EmptyCorpus));
        }
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
