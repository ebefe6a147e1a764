//! High-resolution probabilistic alignment of stage-1 candidates.
//!
//! Each candidate is widened by `E` frames on both sides, every frame pair is
//! mapped to the CDF of its cosine distance under a corpus-wide normal model,
//! and DTW finds the cheapest corner-to-corner path through that probability
//! matrix. The log-domain likelihood ratio against a chance model `alpha^|Z|`
//! is then minimized over contiguous sub-paths; the winning sub-path becomes
//! the discovered fragment pair if it is at least `L_min` steps long.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stage1::{CandidatePair, MaskedFile, Segment, SegmentTable};
use crate::stats::{sample_distance_distribution, NormalParams, CDF_FLOOR, NORM_FLOOR};

pub const DEFAULT_EXPAND: usize = 25;
pub const DEFAULT_MIN_PATH_STEPS: usize = 5;

/// Local cost used by the DTW.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DtwCostMode {
    /// The probability itself; positive, so longer paths cost more.
    #[default]
    RawProb,
    /// `ln p`; non-positive, favours long warped paths. Experimental.
    LogProb,
}

impl FromStr for DtwCostMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" | "raw-prob" => Ok(Self::RawProb),
            "log" | "log-prob" => Ok(Self::LogProb),
            other => Err(Error::BadConfig(format!("unknown DTW cost mode {other:?}"))),
        }
    }
}

impl fmt::Display for DtwCostMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::RawProb => "raw",
            Self::LogProb => "log",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignConfig {
    pub alpha: f64,
    /// Expansion `E` in frames on each side.
    pub expand: usize,
    /// Minimum accepted sub-path length `L_min` in steps.
    pub min_path_steps: usize,
    pub cost_mode: DtwCostMode,
    pub cdf_floor: f64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            alpha: crate::stage1::DEFAULT_ALPHA,
            expand: DEFAULT_EXPAND,
            min_path_steps: DEFAULT_MIN_PATH_STEPS,
            cost_mode: DtwCostMode::RawProb,
            cdf_floor: CDF_FLOOR,
        }
    }
}

/// `[start - E, end + E)` clipped to `[0, n_frames)`.
pub fn expand_segment(seg: &Segment, expand: usize, n_frames: usize) -> Range<usize> {
    seg.start_frame.saturating_sub(expand)..(seg.end_frame + expand).min(n_frames)
}

/// Fits the frame-distance normal model on randomly sampled frame pairs drawn
/// from the whole masked corpus.
pub fn calibrate_frame_distances(
    files: &[MaskedFile],
    n_samples: usize,
    rng_seed: u64,
) -> Result<NormalParams> {
    let mut offsets = Vec::with_capacity(files.len() + 1);
    offsets.push(0usize);
    for f in files {
        offsets.push(offsets.last().unwrap() + f.n_frames());
    }
    let total = *offsets.last().unwrap();
    let locate = |g: usize| {
        let fi = offsets.partition_point(|&o| o <= g) - 1;
        files[fi].frame(g - offsets[fi])
    };
    sample_distance_distribution(total, n_samples, rng_seed, |i, j| {
        crate::stats::cosine_distance_f64(locate(i), locate(j))
    })
}

/// Dense row-major matrix of per-frame-pair probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ProbMatrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::BadConfig(format!(
                "{} values cannot form a non-empty {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadConfig("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.data[p * self.cols + q]
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for q in 0..self.cols {
            for p in 0..self.rows {
                data.push(self.get(p, q));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

/// `P[y][z] = cdf(cosine_distance(x_y, x_z))`, clamped to
/// `[floor, 1 - floor]`. Inputs are flat row-major frames of width `dims`.
pub fn probability_matrix(
    xi: &[f64],
    xj: &[f64],
    dims: usize,
    params: &NormalParams,
    floor: f64,
) -> ProbMatrix {
    assert!(
        dims > 0 && !xi.is_empty() && !xj.is_empty(),
        "segments must be non-empty"
    );
    let norms = |x: &[f64]| -> Vec<f64> {
        x.chunks_exact(dims)
            .map(|f| f.iter().map(|v| v * v).sum::<f64>().sqrt().max(NORM_FLOOR))
            .collect()
    };
    let (ni, nj) = (norms(xi), norms(xj));
    let mut data = Vec::with_capacity(ni.len() * nj.len());
    for (a, na) in xi.chunks_exact(dims).zip(&ni) {
        for (b, nb) in xj.chunks_exact(dims).zip(&nj) {
            let dot: f64 = a.iter().zip(b).map(|(u, v)| u * v).sum();
            let d = 1.0 - dot / (na * nb);
            data.push(params.cdf_clamped(d, floor));
        }
    }
    ProbMatrix {
        rows: ni.len(),
        cols: nj.len(),
        data,
    }
}

/// Monotone corner-to-corner alignment through a probability matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentPath {
    steps: Vec<(usize, usize)>,
    probs: Vec<f64>,
}

impl AlignmentPath {
    /// Validates anchoring at `(0, 0)` and `(rows - 1, cols - 1)` and unit
    /// steps from `{(1,0), (0,1), (1,1)}`.
    pub fn new(
        steps: Vec<(usize, usize)>,
        probs: Vec<f64>,
        rows: usize,
        cols: usize,
    ) -> Result<Self> {
        let bad = |why: &str| Err(Error::BadConfig(format!("invalid alignment path: {why}")));
        if steps.is_empty() || steps.len() != probs.len() {
            return bad("empty or probability count mismatch");
        }
        if steps[0] != (0, 0) || *steps.last().unwrap() != (rows - 1, cols - 1) {
            return bad("not anchored at both corners");
        }
        for w in steps.windows(2) {
            let (dp, dq) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
            if !matches!((dp, dq), (1, 0) | (0, 1) | (1, 1)) {
                return bad("illegal step");
            }
        }
        Ok(Self { steps, probs })
    }

    pub fn steps(&self) -> &[(usize, usize)] {
        &self.steps
    }

    /// Per-step local probabilities `p_d`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_probs(&self) -> Vec<f64> {
        self.probs.iter().map(|p| p.ln()).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Sum of local costs along the path, accumulated from the start.
    pub fn cost(&self, mode: DtwCostMode) -> f64 {
        self.probs
            .iter()
            .fold(0.0, |acc, &p| acc + local_cost(p, mode))
    }
}

#[inline]
fn local_cost(p: f64, mode: DtwCostMode) -> f64 {
    match mode {
        DtwCostMode::RawProb => p,
        DtwCostMode::LogProb => p.ln(),
    }
}

/// Minimum-cost path with the default raw-probability cost.
pub fn dtw_min_cost_path(p: &ProbMatrix) -> (AlignmentPath, f64) {
    dtw_min_cost_path_with(p, DtwCostMode::RawProb)
}

/// Dynamic program over the accumulated cost matrix. Backtracking resolves
/// ties by preferring the diagonal, then the vertical `(p - 1, q)`, then the
/// horizontal `(p, q - 1)` predecessor.
pub fn dtw_min_cost_path_with(p: &ProbMatrix, mode: DtwCostMode) -> (AlignmentPath, f64) {
    let (rows, cols) = (p.rows(), p.cols());
    let mut acc = vec![0.0f64; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let local = local_cost(p.get(r, c), mode);
            let best_prev = match (r, c) {
                (0, 0) => 0.0,
                (0, _) => acc[c - 1],
                (_, 0) => acc[(r - 1) * cols],
                _ => acc[(r - 1) * cols + c - 1]
                    .min(acc[(r - 1) * cols + c])
                    .min(acc[r * cols + c - 1]),
            };
            acc[r * cols + c] = best_prev + local;
        }
    }
    let total = acc[rows * cols - 1];

    let mut steps = Vec::with_capacity(rows + cols);
    let (mut r, mut c) = (rows - 1, cols - 1);
    steps.push((r, c));
    while (r, c) != (0, 0) {
        (r, c) = if r == 0 {
            (0, c - 1)
        } else if c == 0 {
            (r - 1, 0)
        } else {
            let diag = acc[(r - 1) * cols + c - 1];
            let up = acc[(r - 1) * cols + c];
            let left = acc[r * cols + c - 1];
            if diag <= up && diag <= left {
                (r - 1, c - 1)
            } else if up <= left {
                (r - 1, c)
            } else {
                (r, c - 1)
            }
        };
        steps.push((r, c));
    }
    steps.reverse();
    let probs = steps.iter().map(|&(r, c)| p.get(r, c)).collect();
    let path = AlignmentPath::new(steps, probs, rows, cols).expect("backtracked path is valid");
    (path, total)
}

/// `ln p_align`: the sum of per-step log-probabilities.
pub fn path_alignment_logprob(path: &AlignmentPath) -> f64 {
    path.probs().iter().map(|p| p.ln()).sum()
}

/// Inclusive step range `[start, end]` of a path with its log-domain LR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubPath {
    pub start: usize,
    pub end: usize,
    pub lr: f64,
}

impl SubPath {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Minimum-sum non-empty contiguous range, ties broken by earliest start and
/// then by shortest length. Linear time.
pub fn min_sum_subarray(s: &[f64]) -> Option<SubPath> {
    let (&first, rest) = s.split_first()?;
    let mut best = SubPath {
        start: 0,
        end: 0,
        lr: first,
    };
    let (mut cur, mut cur_start) = (first, 0usize);
    for (i, &v) in rest.iter().enumerate() {
        let e = i + 1;
        let extended = cur + v;
        if extended <= v {
            cur = extended;
        } else {
            cur = v;
            cur_start = e;
        }
        if cur < best.lr || (cur == best.lr && cur_start < best.start) {
            best = SubPath {
                start: cur_start,
                end: e,
                lr: cur,
            };
        }
    }
    Some(best)
}

/// Per-step log-LR terms `ln p_d(n) - ln alpha`.
pub fn lr_terms(path: &AlignmentPath, alpha: f64) -> Vec<f64> {
    let la = alpha.ln();
    path.probs().iter().map(|p| p.ln() - la).collect()
}

/// The contiguous sub-path minimizing `sum(ln p_d) - |Z| ln alpha`.
pub fn best_subpath_lr(path: &AlignmentPath, alpha: f64) -> SubPath {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    min_sum_subarray(&lr_terms(path, alpha)).expect("paths are non-empty")
}

/// A pair of aligned fragments.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveredPair {
    pub file_a: String,
    pub file_b: String,
    pub onset_a: f64,
    pub offset_a: f64,
    pub onset_b: f64,
    pub offset_b: f64,
    /// Masked-frame ranges `[first, last + 1)` of each fragment.
    pub frames_a: Range<usize>,
    pub frames_b: Range<usize>,
    pub lr_score: f64,
    pub path_length: usize,
    pub source_candidate: CandidatePair,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlignOutcome {
    Accepted(DiscoveredPair),
    TooShort { steps: usize },
    SelfOverlap,
}

impl AlignOutcome {
    pub fn accepted(&self) -> Option<&DiscoveredPair> {
        match self {
            Self::Accepted(p) => Some(p),
            _ => None,
        }
    }
}

/// Everything about an alignment short of the accept/reject decision.
#[derive(Debug, Clone)]
pub struct Alignment {
    pub range_a: Range<usize>,
    pub range_b: Range<usize>,
    pub path: AlignmentPath,
    pub path_cost: f64,
    pub subpath: SubPath,
}

/// Expands both segments, builds the probability matrix and runs DTW and the
/// LR sub-path search.
pub fn align_segments(
    seg_a: &Segment,
    seg_b: &Segment,
    files: &[MaskedFile],
    params_d: &NormalParams,
    cfg: &AlignConfig,
) -> Alignment {
    let (fa, fb) = (&files[seg_a.file_index], &files[seg_b.file_index]);
    let range_a = expand_segment(seg_a, cfg.expand, fa.n_frames());
    let range_b = expand_segment(seg_b, cfg.expand, fb.n_frames());
    let p = probability_matrix(
        fa.rows(range_a.start, range_a.end),
        fb.rows(range_b.start, range_b.end),
        fa.dims(),
        params_d,
        cfg.cdf_floor,
    );
    let (path, path_cost) = dtw_min_cost_path_with(&p, cfg.cost_mode);
    let subpath = best_subpath_lr(&path, cfg.alpha);
    Alignment {
        range_a,
        range_b,
        path,
        path_cost,
        subpath,
    }
}

/// Aligns one candidate and applies the `L_min` and self-overlap rejections.
pub fn align_pair(
    cand: &CandidatePair,
    table: &SegmentTable,
    files: &[MaskedFile],
    params_d: &NormalParams,
    cfg: &AlignConfig,
) -> AlignOutcome {
    let seg_a = &table.segments[cand.seg_a];
    let seg_b = &table.segments[cand.seg_b];
    let al = align_segments(seg_a, seg_b, files, params_d, cfg);
    let sub = al.subpath;
    if sub.len() < cfg.min_path_steps {
        return AlignOutcome::TooShort { steps: sub.len() };
    }
    let steps = al.path.steps();
    let (first, last) = (steps[sub.start], steps[sub.end]);
    let frames_a = al.range_a.start + first.0..al.range_a.start + last.0 + 1;
    let frames_b = al.range_b.start + first.1..al.range_b.start + last.1 + 1;
    let (fa, fb) = (&files[seg_a.file_index], &files[seg_b.file_index]);
    let span = |f: &MaskedFile, r: &Range<usize>| {
        (
            f.kept_frame_times[r.start],
            f.kept_frame_times[r.end - 1] + f.frame_shift,
        )
    };
    let (onset_a, offset_a) = span(fa, &frames_a);
    let (onset_b, offset_b) = span(fb, &frames_b);
    if seg_a.file_index == seg_b.file_index && onset_a < offset_b && onset_b < offset_a {
        return AlignOutcome::SelfOverlap;
    }
    AlignOutcome::Accepted(DiscoveredPair {
        file_a: fa.file_id.clone(),
        file_b: fb.file_id.clone(),
        onset_a,
        offset_a,
        onset_b,
        offset_b,
        frames_a,
        frames_b,
        lr_score: sub.lr,
        path_length: sub.len(),
        source_candidate: *cand,
    })
}

/// Aligns all candidates in parallel; outcomes come back in candidate order.
pub fn align_candidates(
    cands: &[CandidatePair],
    table: &SegmentTable,
    files: &[MaskedFile],
    params_d: &NormalParams,
    cfg: &AlignConfig,
) -> Vec<AlignOutcome> {
    cands
        .par_iter()
        .map(|c| align_pair(c, table, files, params_d, cfg))
        .collect()
}
