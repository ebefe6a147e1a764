//! Low-resolution candidate search.
//!
//! The masked corpus is cut into fixed-length windows, each window is
//! downsampled to a fixed-size embedding, and every embedding is compared with
//! every other one. A neighbour is kept when its cosine distance falls in the
//! lower `alpha` tail of a normal model of corpus-wide segment distances.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::stats::{sample_distance_distribution, NormalParams, NORM_FLOOR};
use crate::vad::SpeechMask;

pub const DEFAULT_WINDOW: usize = 20;
pub const DEFAULT_SHIFT: usize = 10;
pub const DEFAULT_DOWNSAMPLE: usize = 4;
pub const DEFAULT_K: usize = 5;
pub const DEFAULT_ALPHA: f64 = 0.001;

/// Queries handled per parallel work item.
const QUERY_BLOCK: usize = 32;
/// Reference segments scanned per tile inside a query block.
const REF_TILE: usize = 512;

/// The kept (speech) frames of one file, in order, with their original times.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedFile {
    pub file_id: String,
    pub frame_shift: f64,
    pub kept_frame_times: Vec<f64>,
    dims: usize,
    data: Vec<f64>,
}

impl MaskedFile {
    pub fn new(m: &FeatureMatrix, mask: &SpeechMask) -> Result<Self> {
        if mask.keep.len() != m.n_frames() {
            return Err(Error::BadConfig(format!(
                "mask for {} has {} entries, matrix has {} frames",
                m.file_id,
                mask.keep.len(),
                m.n_frames()
            )));
        }
        let mut data = Vec::with_capacity(mask.kept_count() * m.dims());
        for (f, _) in m.frames().zip(&mask.keep).filter(|(_, &k)| k) {
            data.extend_from_slice(f);
        }
        Ok(Self {
            file_id: m.file_id.clone(),
            frame_shift: m.frame_shift,
            kept_frame_times: mask.kept_frame_times.clone(),
            dims: m.dims(),
            data,
        })
    }

    /// Every frame kept.
    pub fn unmasked(m: &FeatureMatrix) -> Self {
        Self::new(m, &SpeechMask::keep_all(m)).expect("keep-all mask matches")
    }

    #[inline]
    pub fn n_frames(&self) -> usize {
        self.kept_frame_times.len()
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.dims
    }

    #[inline]
    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    /// Rows `start..end` as one flat slice.
    pub fn rows(&self, start: usize, end: usize) -> &[f64] {
        &self.data[start * self.dims..end * self.dims]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentConfig {
    /// Window length `L` in frames.
    pub window: usize,
    /// Window shift `S` in frames.
    pub shift: usize,
    /// Downsampled length `M` in frames.
    pub downsample: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            shift: DEFAULT_SHIFT,
            downsample: DEFAULT_DOWNSAMPLE,
        }
    }
}

impl SegmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.shift == 0 || self.downsample == 0 {
            return Err(Error::BadConfig(
                "window, shift and downsample must be positive".into(),
            ));
        }
        if self.downsample > self.window {
            return Err(Error::BadConfig(format!(
                "cannot downsample {} frames to {}",
                self.window, self.downsample
            )));
        }
        Ok(())
    }
}

/// One fixed-length window over the masked frames of a file.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub segment_id: usize,
    pub file_index: usize,
    pub file_id: String,
    /// Masked-frame range `[start_frame, end_frame)`.
    pub start_frame: usize,
    pub end_frame: usize,
    pub start_time: f64,
    pub end_time: f64,
    pub embedding: Vec<f64>,
}

/// All segments of a corpus plus their unit-normalized `f32` embeddings laid
/// out contiguously for the all-pairs sweep.
#[derive(Debug, Clone)]
pub struct SegmentTable {
    pub config: SegmentConfig,
    pub segments: Vec<Segment>,
    embed_dim: usize,
    unit: Vec<f32>,
}

impl SegmentTable {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    #[inline]
    pub fn unit(&self, i: usize) -> &[f32] {
        &self.unit[i * self.embed_dim..(i + 1) * self.embed_dim]
    }

    /// Distance between segments `i` and `j` as used by the sweep.
    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        unit_distance(self.unit(i), self.unit(j))
    }

    /// Whether the pair may be matched: segments from the same file must be
    /// at least `window + shift` masked frames apart.
    #[inline]
    pub fn admissible(&self, i: usize, j: usize) -> bool {
        let (a, b) = (&self.segments[i], &self.segments[j]);
        a.file_index != b.file_index
            || a.start_frame.abs_diff(b.start_frame) >= self.config.window + self.config.shift
    }

    /// Builds a table from explicit segments (used by tests and bindings).
    pub fn from_segments(config: SegmentConfig, segments: Vec<Segment>) -> Result<Self> {
        let embed_dim = segments.first().map_or(0, |s| s.embedding.len());
        if let Some(s) = segments.iter().find(|s| s.embedding.len() != embed_dim) {
            return Err(Error::LengthMismatch(embed_dim, s.embedding.len()));
        }
        if segments.iter().enumerate().any(|(i, s)| s.segment_id != i) {
            return Err(Error::BadConfig(
                "segment ids must equal their table position".into(),
            ));
        }
        let mut unit = Vec::with_capacity(segments.len() * embed_dim);
        for s in &segments {
            unit.extend(unit_normalize(&s.embedding));
        }
        Ok(Self {
            config,
            segments,
            embed_dim,
            unit,
        })
    }
}

/// Windows every file at masked offsets `0, S, 2S, ...` and embeds each window.
pub fn segment_corpus(files: &[MaskedFile], config: SegmentConfig) -> Result<SegmentTable> {
    config.validate()?;
    let mut segments = Vec::new();
    for (file_index, f) in files.iter().enumerate() {
        let mut start = 0;
        while start + config.window <= f.n_frames() {
            let end = start + config.window;
            let embedding = embed_segment(f.rows(start, end), f.dims(), config.downsample)?;
            segments.push(Segment {
                segment_id: segments.len(),
                file_index,
                file_id: f.file_id.clone(),
                start_frame: start,
                end_frame: end,
                start_time: f.kept_frame_times[start],
                end_time: f.kept_frame_times[end - 1] + f.frame_shift,
                embedding,
            });
            start += config.shift;
        }
    }
    SegmentTable::from_segments(config, segments)
}

/// Averages `L` frames (flat, row-major, width `dims`) into `m` contiguous bins,
/// bin `b` covering frames `[floor(b L / m), floor((b + 1) L / m))`, and
/// concatenates the bin means.
pub fn embed_segment(frames: &[f64], dims: usize, m: usize) -> Result<Vec<f64>> {
    if dims == 0 || !frames.len().is_multiple_of(dims) {
        return Err(Error::LengthMismatch(frames.len(), dims));
    }
    let len = frames.len() / dims;
    if m == 0 || m > len {
        return Err(Error::BadConfig(format!(
            "cannot downsample {len} frames to {m}"
        )));
    }
    let mut out = Vec::with_capacity(m * dims);
    for b in 0..m {
        let lo = b * len / m;
        let hi = (b + 1) * len / m;
        let count = (hi - lo) as f64;
        for d in 0..dims {
            let sum: f64 = (lo..hi).map(|t| frames[t * dims + d]).sum();
            out.push(sum / count);
        }
    }
    Ok(out)
}

/// `1 - u·v / (|u| |v|)`, norms floored at 1e-12 so a zero vector sits at
/// distance 1 from everything.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch(u.len(), v.len()));
    }
    Ok(crate::stats::cosine_distance_f64(u, v))
}

/// Scales to unit norm (norm floored at 1e-12) and narrows to `f32`.
pub fn unit_normalize(v: &[f64]) -> Vec<f32> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(NORM_FLOOR);
    v.iter().map(|x| (x / norm) as f32).collect()
}

/// `1 - a·b` for unit `f32` vectors, products widened to `f64` and summed in
/// four interleaved lanes (element `k` goes to lane `k % 4`), combined as
/// `(l0 + l1) + (l2 + l3)`.
#[inline]
pub fn unit_distance(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        lanes[0] += a[k] as f64 * b[k] as f64;
        lanes[1] += a[k + 1] as f64 * b[k + 1] as f64;
        lanes[2] += a[k + 2] as f64 * b[k + 2] as f64;
        lanes[3] += a[k + 3] as f64 * b[k + 3] as f64;
    }
    for k in 4 * chunks..a.len() {
        lanes[k % 4] += a[k] as f64 * b[k] as f64;
    }
    1.0 - ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]))
}

/// Fits the segment-distance normal model on randomly sampled segment pairs.
pub fn calibrate_segment_distances(
    table: &SegmentTable,
    n_samples: usize,
    rng_seed: u64,
) -> Result<NormalParams> {
    sample_distance_distribution(table.len(), n_samples, rng_seed, |i, j| {
        table.distance(i, j)
    })
}

/// A stage-1 match, `seg_a < seg_b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidatePair {
    pub seg_a: usize,
    pub seg_b: usize,
    pub distance: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub k: usize,
    pub alpha: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            alpha: DEFAULT_ALPHA,
        }
    }
}

/// For every segment, keeps the `k` nearest admissible segments whose distance
/// has CDF below `alpha`, ties broken by lower segment id. Pairs are returned
/// canonically ordered and deduplicated.
///
/// The CDF is monotone in distance, so taking the `k` nearest first and then
/// thresholding selects the same neighbours as thresholding first.
pub fn find_candidates(
    table: &SegmentTable,
    params: &NormalParams,
    search: SearchConfig,
) -> Vec<CandidatePair> {
    if table.is_empty() || search.k == 0 {
        return Vec::new();
    }
    let n = table.len();
    let per_query: Vec<Vec<(f64, usize)>> = (0..n)
        .collect::<Vec<_>>()
        .par_chunks(QUERY_BLOCK)
        .flat_map_iter(|block| {
            let mut lists: Vec<TopK> = block.iter().map(|_| TopK::new(search.k)).collect();
            for tile_start in (0..n).step_by(REF_TILE) {
                let tile_end = (tile_start + REF_TILE).min(n);
                for (list, &q) in lists.iter_mut().zip(block) {
                    let uq = table.unit(q);
                    for j in tile_start..tile_end {
                        if j == q || !table.admissible(q, j) {
                            continue;
                        }
                        list.offer(unit_distance(uq, table.unit(j)), j);
                    }
                }
            }
            lists.into_iter().map(TopK::into_sorted)
        })
        .collect();

    let mut pairs: Vec<CandidatePair> = per_query
        .into_iter()
        .enumerate()
        .flat_map(|(q, list)| {
            list.into_iter().filter_map(move |(d, j)| {
                let p = params.cdf(d);
                (p < search.alpha).then_some(CandidatePair {
                    seg_a: q.min(j),
                    seg_b: q.max(j),
                    distance: d,
                    p_value: p,
                })
            })
        })
        .collect();
    pairs.sort_by_key(|x| (x.seg_a, x.seg_b));
    pairs.dedup_by(|x, y| x.seg_a == y.seg_a && x.seg_b == y.seg_b);
    pairs
}

// Bounded list of the k smallest (distance, id), ordered ascending.
struct TopK {
    k: usize,
    items: Vec<(f64, usize)>,
}

impl TopK {
    fn new(k: usize) -> Self {
        Self {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    #[inline]
    fn offer(&mut self, d: f64, id: usize) {
        let better = |a: (f64, usize), b: (f64, usize)| a.0 < b.0 || (a.0 == b.0 && a.1 < b.1);
        if self.items.len() == self.k && !better((d, id), self.items[self.k - 1]) {
            return;
        }
        let pos = self.items.partition_point(|&x| better(x, (d, id)));
        self.items.insert(pos, (d, id));
        self.items.truncate(self.k);
    }

    fn into_sorted(self) -> Vec<(f64, usize)> {
        self.items
    }
}

/// Writes `<seg_a>\t<seg_b>\t<distance>\t<p_value>` lines.
pub fn write_candidates_tsv(path: impl AsRef<Path>, pairs: &[CandidatePair]) -> Result<()> {
    let path = path.as_ref();
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for p in pairs {
        writeln!(
            w,
            "{}\t{}\t{:.9}\t{:.6e}",
            p.seg_a, p.seg_b, p.distance, p.p_value
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
