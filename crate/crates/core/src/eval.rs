//! Scoring discovered fragment pairs against time-aligned gold annotations.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::stage2::DiscoveredPair;
use crate::vad::SpeechMask;

const EPS: f64 = 1e-9;

/// A labelled time interval `[start, end)` in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub label: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileGold {
    pub phones: Vec<Interval>,
    pub words: Vec<Interval>,
}

/// Phone and word tiers per file, each tier sorted and non-overlapping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoldAnnotation {
    pub files: BTreeMap<String, FileGold>,
}

impl GoldAnnotation {
    pub fn contains(&self, file_id: &str) -> bool {
        self.files.contains_key(file_id)
    }
}

/// Reads phone and word tiers from `<file_id>\t<start_s>\t<end_s>\t<label>` TSVs.
pub fn load_gold(
    phones_path: impl AsRef<Path>,
    words_path: impl AsRef<Path>,
) -> Result<GoldAnnotation> {
    let phones = read_tier(phones_path.as_ref())?;
    let words = read_tier(words_path.as_ref())?;
    let mut gold = GoldAnnotation::default();
    for (id, tier) in phones {
        gold.files.entry(id).or_default().phones = tier;
    }
    for (id, tier) in words {
        gold.files.entry(id).or_default().words = tier;
    }
    Ok(gold)
}

fn read_tier(path: &Path) -> Result<BTreeMap<String, Vec<Interval>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tier(path, &text)
}

pub(crate) fn parse_tier(path: &Path, text: &str) -> Result<BTreeMap<String, Vec<Interval>>> {
    let mut tiers: BTreeMap<String, Vec<Interval>> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| Error::MalformedLine {
            path: path.to_path_buf(),
            line: idx + 1,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(bad(format!(
                "expected 4 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let start: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|_| bad("bad start time".into()))?;
        let end: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| bad("bad end time".into()))?;
        if !(start.is_finite() && end.is_finite()) || end <= start {
            return Err(bad(format!("interval end {end} must exceed start {start}")));
        }
        tiers
            .entry(fields[0].to_string())
            .or_default()
            .push(Interval {
                start,
                end,
                label: fields[3].trim().to_string(),
            });
    }
    for (id, tier) in &mut tiers {
        tier.sort_by(|a, b| a.start.total_cmp(&b.start));
        if let Some(w) = tier.windows(2).find(|w| w[1].start < w[0].end - EPS) {
            return Err(Error::OverlappingIntervals {
                path: path.to_path_buf(),
                file_id: id.clone(),
                a_start: w[0].start,
                a_end: w[0].end,
                b_start: w[1].start,
                b_end: w[1].end,
            });
        }
    }
    Ok(tiers)
}

/// Matching rules, in seconds and fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// A phone is transcribed when this fraction of it is covered...
    pub phone_min_fraction: f64,
    /// ...or when at least this much of it is covered.
    pub phone_min_overlap_s: f64,
    pub boundary_tolerance_s: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            phone_min_fraction: 0.5,
            phone_min_overlap_s: 0.030,
            boundary_tolerance_s: 0.030,
        }
    }
}

/// One side of a discovered pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    pub file_id: String,
    pub onset: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FragmentPair {
    pub a: Fragment,
    pub b: Fragment,
}

impl From<&DiscoveredPair> for FragmentPair {
    fn from(p: &DiscoveredPair) -> Self {
        Self {
            a: Fragment {
                file_id: p.file_a.clone(),
                onset: p.onset_a,
                offset: p.offset_a,
            },
            b: Fragment {
                file_id: p.file_b.clone(),
                onset: p.onset_b,
                offset: p.offset_b,
            },
        }
    }
}

/// Labels of the phones that sufficiently overlap `[t0, t1]`, in time order.
pub fn transcribe_interval(
    gold: &GoldAnnotation,
    file_id: &str,
    t0: f64,
    t1: f64,
    cfg: &EvalConfig,
) -> Result<Vec<String>> {
    let file = gold.files.get(file_id).ok_or_else(|| Error::UnknownFile {
        file_id: file_id.to_string(),
        line: None,
    })?;
    Ok(file
        .phones
        .iter()
        .filter(|ph| {
            let overlap = t1.min(ph.end) - t0.max(ph.start);
            overlap > 0.0
                && (overlap + EPS >= cfg.phone_min_fraction * (ph.end - ph.start)
                    || overlap + EPS >= cfg.phone_min_overlap_s)
        })
        .map(|ph| ph.label.clone())
        .collect())
}

/// Unit-cost edit distance.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Normalized edit distance of one pair of transcriptions; 1 when both are empty.
pub fn pair_ned(a: &[String], b: &[String]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    levenshtein(a, b) as f64 / longest as f64
}

/// Mean pair NED as a percentage.
pub fn ned(pairs: &[FragmentPair], gold: &GoldAnnotation, cfg: &EvalConfig) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyPairSet);
    }
    let mut total = 0.0;
    for p in pairs {
        let ta = transcribe_interval(gold, &p.a.file_id, p.a.onset, p.a.offset, cfg)?;
        let tb = transcribe_interval(gold, &p.b.file_id, p.b.onset, p.b.offset, cfg)?;
        total += pair_ned(&ta, &tb);
    }
    Ok(100.0 * total / pairs.len() as f64)
}

/// Percentage of kept (speech) frames covered by at least one fragment.
///
/// A kept frame stamped at `t` is covered by `[onset, offset)` when
/// `onset - shift/2 <= t < offset - shift/2`, which tolerates millisecond
/// rounding of serialized times. Fragments in files without a mask are ignored.
pub fn coverage(pairs: &[FragmentPair], masks: &[SpeechMask], frame_shift: f64) -> f64 {
    let total: usize = masks.iter().map(SpeechMask::kept_count).sum();
    if total == 0 {
        return 0.0;
    }
    let index: BTreeMap<&str, usize> = masks
        .iter()
        .enumerate()
        .map(|(i, m)| (m.file_id.as_str(), i))
        .collect();
    let mut covered: Vec<Vec<bool>> = masks.iter().map(|m| vec![false; m.kept_count()]).collect();
    let half = frame_shift / 2.0;
    for frag in pairs.iter().flat_map(|p| [&p.a, &p.b]) {
        let Some(&mi) = index.get(frag.file_id.as_str()) else {
            continue;
        };
        let times = &masks[mi].kept_frame_times;
        let lo = times.partition_point(|&t| t < frag.onset - half);
        let hi = times.partition_point(|&t| t < frag.offset - half);
        covered[mi][lo..hi.max(lo)]
            .iter_mut()
            .for_each(|c| *c = true);
    }
    let hit: usize = covered
        .iter()
        .map(|c| c.iter().filter(|&&x| x).count())
        .sum();
    100.0 * hit as f64 / total as f64
}

/// Harmonic mean of `100 - ned` and `cov`; 0 when the denominator vanishes.
pub fn m_score(ned: f64, cov: f64) -> f64 {
    let purity = 100.0 - ned;
    let denom = purity + cov;
    if denom <= 0.0 {
        return 0.0;
    }
    2.0 * purity * cov / denom
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryScores {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    /// No boundaries were predicted, so precision was reported as 0.
    pub precision_undefined: bool,
}

/// Word-boundary precision, recall and F (percentages).
///
/// Predicted boundaries are all fragment onsets and offsets; within a file,
/// predictions closer than the tolerance to an earlier kept prediction are
/// merged into it. Each gold boundary can be matched once, greedily from the
/// left.
pub fn boundary_prf(
    pairs: &[FragmentPair],
    gold: &GoldAnnotation,
    cfg: &EvalConfig,
) -> BoundaryScores {
    let tol = cfg.boundary_tolerance_s;
    let mut predicted: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for frag in pairs.iter().flat_map(|p| [&p.a, &p.b]) {
        let v = predicted.entry(frag.file_id.as_str()).or_default();
        v.push(frag.onset);
        v.push(frag.offset);
    }
    let mut n_pred = 0usize;
    let mut n_match = 0usize;
    for (file, preds) in &mut predicted {
        preds.sort_by(f64::total_cmp);
        let mut merged: Vec<f64> = Vec::with_capacity(preds.len());
        for &b in preds.iter() {
            if merged.last().is_none_or(|&last| b - last > tol + EPS) {
                merged.push(b);
            }
        }
        n_pred += merged.len();
        let golds = gold
            .files
            .get(*file)
            .map(|g| word_boundaries(&g.words))
            .unwrap_or_default();
        let mut used = vec![false; golds.len()];
        let mut first_open = 0usize;
        for &p in &merged {
            while first_open < golds.len() && golds[first_open] < p - tol - EPS {
                first_open += 1;
            }
            let hit = (first_open..golds.len())
                .take_while(|&g| golds[g] <= p + tol + EPS)
                .find(|&g| !used[g]);
            if let Some(g) = hit {
                used[g] = true;
                n_match += 1;
            }
        }
    }
    let n_gold: usize = gold
        .files
        .values()
        .map(|g| word_boundaries(&g.words).len())
        .sum();
    let precision_undefined = n_pred == 0;
    let precision = if precision_undefined {
        0.0
    } else {
        100.0 * n_match as f64 / n_pred as f64
    };
    let recall = if n_gold == 0 {
        0.0
    } else {
        100.0 * n_match as f64 / n_gold as f64
    };
    let f = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    BoundaryScores {
        precision,
        recall,
        f,
        precision_undefined,
    }
}

/// Distinct word onsets and offsets of one file, ascending.
fn word_boundaries(words: &[Interval]) -> Vec<f64> {
    let mut b: Vec<f64> = words.iter().flat_map(|w| [w.start, w.end]).collect();
    b.sort_by(f64::total_cmp);
    b.dedup_by(|x, y| (*x - *y).abs() < EPS);
    b
}

/// Full evaluation of a pair set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ned: f64,
    pub cov: f64,
    pub m_score: f64,
    pub boundary_prc: f64,
    pub boundary_rcl: f64,
    pub boundary_f: f64,
    pub pair_count: usize,
    /// NED is undefined for an empty pair set and reported as 0.
    pub ned_undefined: bool,
    pub precision_undefined: bool,
}

pub fn evaluate(
    pairs: &[FragmentPair],
    gold: &GoldAnnotation,
    masks: &[SpeechMask],
    frame_shift: f64,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let (ned_value, ned_undefined) = match ned(pairs, gold, cfg) {
        Ok(v) => (v, false),
        Err(Error::EmptyPairSet) => (0.0, true),
        Err(e) => return Err(e),
    };
    let cov = coverage(pairs, masks, frame_shift);
    let b = boundary_prf(pairs, gold, cfg);
    Ok(EvalReport {
        ned: ned_value,
        cov,
        m_score: m_score(ned_value, cov),
        boundary_prc: b.precision,
        boundary_rcl: b.recall,
        boundary_f: b.f,
        pair_count: pairs.len(),
        ned_undefined,
        precision_undefined: b.precision_undefined,
    })
}

impl EvalReport {
    /// Flat `key=value` lines.
    pub fn to_key_values(&self) -> String {
        format!(
            "pairs={}\nned={:.4}\ncov={:.4}\nm_score={:.4}\nboundary_prc={:.4}\nboundary_rcl={:.4}\nboundary_f={:.4}\nned_undefined={}\nprecision_undefined={}\n",
            self.pair_count,
            self.ned,
            self.cov,
            self.m_score,
            self.boundary_prc,
            self.boundary_rcl,
            self.boundary_f,
            self.ned_undefined,
            self.precision_undefined
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>8} {:>7} {:>7} {:>7} | {:>7} {:>7} {:>7}",
            "pairs", "NED", "Cov", "M", "PRC", "RCL", "F"
        )?;
        writeln!(
            f,
            "{:>8} {:>7.1} {:>7.1} {:>7.1} | {:>7.1} {:>7.1} {:>7.1}",
            self.pair_count,
            self.ned,
            self.cov,
            self.m_score,
            self.boundary_prc,
            self.boundary_rcl,
            self.boundary_f
        )
    }
}
