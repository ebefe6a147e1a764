//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use pdtw_core::eval::{m_score, ned, EvalConfig, FragmentPair};
use pdtw_core::features::{normalize_features, FeatureMatrix, NormalizationScope};
use pdtw_core::pipeline::{
    discover, generate_synthetic_corpus, read_manifest, run_discover, write_class_file,
    write_synthetic_corpus, DiscoveryResult, FeatureSource, PipelineConfig, PlantedInstance,
    SynthCorpus, SynthSpec,
};
use pdtw_core::stage1::{
    find_candidates, segment_corpus, CandidatePair, MaskedFile, SearchConfig, Segment,
    SegmentConfig, SegmentTable,
};
use pdtw_core::stage2::{
    align_candidates, align_pair, best_subpath_lr, calibrate_frame_distances, dtw_min_cost_path,
    AlignConfig, AlignOutcome, AlignmentPath, ProbMatrix,
};
use pdtw_core::stats::{standard_normal_cdf, NormalParams, CDF_FLOOR};
use pdtw_core::vad::{compute_speech_masks, VadConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const M_TOLERANCE: f64 = 0.05;
const M_FIXTURE_ROWS: usize = 41;
const DTW_MATRICES: usize = 200;
const DTW_MAX_SIDE: usize = 8;
const LR_SEQUENCES: usize = 200;
const LR_MAX_LEN: usize = 64;
const LR_ALPHAS: [f64; 2] = [0.001, 0.0001];
const CDF_MAX_ABS_ERROR: f64 = 1e-8;
const CDF_GRID_POINTS: usize = 100;
const STAGE1_SEGMENTS: usize = 300;
const RECOVERY_MIN: f64 = 0.80;
const SYNTH_NED_MAX: f64 = 30.0;
const PLANT_OVERLAP: f64 = 0.5;
const NOISE_PAIRS: usize = 1000;
const NOISE_REJECTION_MIN: f64 = 0.99;
const SCALING_RATIO: (f64, f64) = (3.0, 6.0);
const STAGE2_PER_CANDIDATE_MAX_RATIO: f64 = 2.0;
const SPEEDUP_SOFT_MIN: f64 = 1.5;
const VAD_DISCARD_MIN: f64 = 0.99;
const VAD_THRESHOLD: f64 = 0.01;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn run(name: &str, budget_s: Option<f64>, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let o = f();
    let secs = t.elapsed().as_secs_f64();
    let over = budget_s.is_some_and(|b| secs > b);
    let pass = o.pass && !over;
    let budget = budget_s.map_or(String::new(), |b| format!(" (budget {b} s)"));
    let mark = if pass { "PASS" } else { "FAIL" };
    println!("[{mark}] {name}: {}; {secs:.2} s{budget}", o.detail);
    pass
}

// 1. M-score fixture

fn criterion_m_fixture() -> Outcome {
    let text = include_str!("data/table1_m_scores.tsv");
    let mut rows = 0;
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for line in text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
    {
        let f: Vec<&str> = line.split('\t').collect();
        let (ned, cov, m): (f64, f64, f64) = (
            f[2].parse().unwrap(),
            f[3].parse().unwrap(),
            f[4].parse().unwrap(),
        );
        let got = m_score(ned, cov);
        let err = (got - m).abs();
        worst = worst.max(err);
        if err > M_TOLERANCE || (got - oracle::m_score(ned, cov)).abs() > 1e-12 {
            failures.push(format!("{} / {}: {got:.3} vs {m}", f[0], f[1]));
        }
        rows += 1;
    }
    outcome(
        rows == M_FIXTURE_ROWS && failures.is_empty(),
        format!(
            "{rows} rows, max |M - published| = {worst:.4} (tol {M_TOLERANCE}){}",
            fail_list(&failures)
        ),
    )
}

fn fail_list(f: &[String]) -> String {
    if f.is_empty() {
        String::new()
    } else {
        format!("; failures: {}", f.join(", "))
    }
}

// 2. DTW oracle

fn criterion_dtw() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    for _ in 0..DTW_MATRICES {
        let rows = rng.random_range(1..=DTW_MAX_SIDE);
        let cols = rng.random_range(1..=DTW_MAX_SIDE);
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| rng.random_range(CDF_FLOOR..1.0))
            .collect();
        let p = ProbMatrix::from_vec(rows, cols, data.clone()).unwrap();
        let (path, cost) = dtw_min_cost_path(&p);
        let cell = |r: usize, c: usize| data[r * cols + c];
        let brute = oracle::all_path_costs(&cell, rows, cols)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let path_sum = path.probs().iter().fold(0.0, |a, v| a + v);
        if cost != brute || path_sum != cost {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!("{DTW_MATRICES} matrices up to {DTW_MAX_SIDE}x{DTW_MAX_SIDE}, {mismatches} cost mismatches (exact)"),
    )
}

// 3. Sub-path LR oracle

fn criterion_lr() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    let mut total = 0;
    for _ in 0..LR_SEQUENCES {
        let n = rng.random_range(1..=LR_MAX_LEN);
        // log-uniform probabilities spanning the clamped range
        let probs: Vec<f64> = (0..n)
            .map(|_| (rng.random_range(CDF_FLOOR.ln()..0.0f64)).exp())
            .collect();
        let steps: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
        let path = AlignmentPath::new(steps, probs.clone(), n, n).unwrap();
        for alpha in LR_ALPHAS {
            let terms: Vec<f64> = probs.iter().map(|p| p.ln() - alpha.ln()).collect();
            let (a, b, sum) = oracle::brute_min_subarray(&terms);
            let sub = best_subpath_lr(&path, alpha);
            total += 1;
            if sub.lr != sum || sub.start != a || sub.end != b {
                mismatches += 1;
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("{total} sequence/alpha cases (len <= {LR_MAX_LEN}), {mismatches} sum or range mismatches (exact)"),
    )
}

// 4. Normal CDF accuracy

fn criterion_cdf() -> Outcome {
    let grid = oracle::cdf_grid();
    let worst = grid
        .iter()
        .map(|&(z, p)| (standard_normal_cdf(z) - p).abs())
        .fold(0.0, f64::max);
    let oracle_gap = grid
        .iter()
        .map(|&(z, p)| (oracle::phi(z) - p).abs())
        .fold(0.0, f64::max);
    outcome(
        grid.len() == CDF_GRID_POINTS && worst <= CDF_MAX_ABS_ERROR,
        format!(
            "{} grid points in [-8, 8], max abs error {worst:.2e} (tol {CDF_MAX_ABS_ERROR:e}); grid vs series/CF oracle {oracle_gap:.2e}",
            grid.len()
        ),
    )
}

// 5. Stage-1 oracle

fn synthetic_table(
    n: usize,
    dim: usize,
    files: usize,
    seed: u64,
    planted_copies: usize,
) -> SegmentTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut embeddings: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| unit.sample(&mut rng)).collect())
        .collect();
    for _ in 0..planted_copies {
        let (src, dst) = (rng.random_range(0..n), rng.random_range(0..n));
        let noisy: Vec<f64> = embeddings[src]
            .iter()
            .map(|v| v + 0.2 * unit.sample(&mut rng))
            .collect();
        embeddings[dst] = noisy;
    }
    let per_file = n.div_ceil(files);
    let segments = embeddings
        .into_iter()
        .enumerate()
        .map(|(i, embedding)| {
            let (file_index, slot) = (i / per_file, i % per_file);
            Segment {
                segment_id: i,
                file_index,
                file_id: format!("f{file_index}"),
                start_frame: slot * 10,
                end_frame: slot * 10 + 20,
                start_time: slot as f64 * 0.1,
                end_time: slot as f64 * 0.1 + 0.2,
                embedding,
            }
        })
        .collect();
    SegmentTable::from_segments(SegmentConfig::default(), segments).unwrap()
}

fn naive_candidates(
    t: &SegmentTable,
    params: &NormalParams,
    k: usize,
    alpha: f64,
) -> Vec<CandidatePair> {
    let cfg = t.config;
    let mut out = Vec::new();
    for i in 0..t.len() {
        let mut all: Vec<(f64, usize)> = (0..t.len())
            .filter(|&j| {
                let (a, b) = (&t.segments[i], &t.segments[j]);
                j != i
                    && (a.file_index != b.file_index
                        || a.start_frame.abs_diff(b.start_frame) >= cfg.window + cfg.shift)
            })
            .map(|j| (oracle::lane_distance(t.unit(i), t.unit(j)), j))
            .collect();
        all.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        for &(d, j) in all.iter().take(k) {
            let p = params.cdf(d);
            if p < alpha {
                out.push(CandidatePair {
                    seg_a: i.min(j),
                    seg_b: i.max(j),
                    distance: d,
                    p_value: p,
                });
            }
        }
    }
    out.sort_by_key(|x| (x.seg_a, x.seg_b));
    out.dedup_by(|x, y| x.seg_a == y.seg_a && x.seg_b == y.seg_b);
    out
}

fn criterion_stage1() -> Outcome {
    let table = synthetic_table(STAGE1_SEGMENTS, 156, 5, 5, 40);
    let params = pdtw_core::stage1::calibrate_segment_distances(&table, 50_000, 5).unwrap();
    let search = SearchConfig::default();
    let fast = find_candidates(&table, &params, search);
    let naive = naive_candidates(&table, &params, search.k, search.alpha);
    let same = fast.len() == naive.len()
        && fast.iter().zip(&naive).all(|(a, b)| {
            a.seg_a == b.seg_a
                && a.seg_b == b.seg_b
                && a.distance.to_bits() == b.distance.to_bits()
                && a.p_value.to_bits() == b.p_value.to_bits()
        });
    outcome(
        same && !fast.is_empty(),
        format!(
            "{} segments, {} candidates vs {} naive, pair sets and distances bit-equal: {same}",
            table.len(),
            fast.len(),
            naive.len()
        ),
    )
}

// 6 and 8. Planted-pattern recovery and determinism

struct Planted {
    corpus: SynthCorpus,
}

fn overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1.min(b.1) - a.0.max(b.0)).max(0.0)
}

impl Planted {
    /// The planted instance a time span lands on: overlap of at least half the
    /// span or half the instance.
    fn instance_for(&self, file: &str, span: (f64, f64)) -> Option<usize> {
        self.corpus
            .planted
            .iter()
            .enumerate()
            .filter(|(_, p)| p.file_id == file)
            .map(|(i, p)| (i, overlap(span, (p.onset, p.offset)), p))
            .filter(|(_, ov, p)| {
                *ov >= PLANT_OVERLAP * (span.1 - span.0).min(p.offset - p.onset) - 1e-9
            })
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(i, _, _)| i)
    }

    fn same_word_pair(&self, a: Option<usize>, b: Option<usize>) -> Option<(usize, usize)> {
        let (a, b) = (a?, b?);
        let (pa, pb): (&PlantedInstance, &PlantedInstance) =
            (&self.corpus.planted[a], &self.corpus.planted[b]);
        (a != b && pa.word == pb.word).then_some((a.min(b), a.max(b)))
    }
}

struct RecoveryStats {
    aligned_targets: usize,
    recovered: usize,
    all_planted_pairs: usize,
    recovered_any: usize,
    correct_pairs: usize,
    accepted: usize,
    ned: f64,
    lr_all_negative: bool,
}

fn recovery(planted: &Planted, r: &DiscoveryResult) -> RecoveryStats {
    let mut targets = BTreeSet::new();
    for c in &r.candidates {
        let (sa, sb) = (&r.table.segments[c.seg_a], &r.table.segments[c.seg_b]);
        let ia = planted.instance_for(&sa.file_id, (sa.start_time, sa.end_time));
        let ib = planted.instance_for(&sb.file_id, (sb.start_time, sb.end_time));
        if let Some(t) = planted.same_word_pair(ia, ib) {
            targets.insert(t);
        }
    }
    let mut found = BTreeSet::new();
    let mut correct = 0;
    for p in &r.pairs {
        let ia = planted.instance_for(&p.file_a, (p.onset_a, p.offset_a));
        let ib = planted.instance_for(&p.file_b, (p.onset_b, p.offset_b));
        if let Some(t) = planted.same_word_pair(ia, ib) {
            correct += 1;
            found.insert(t);
        }
    }
    let spec = &planted.corpus.spec;
    let frag_pairs: Vec<FragmentPair> = r.pairs.iter().map(FragmentPair::from).collect();
    let ned_value =
        ned(&frag_pairs, &planted.corpus.gold, &EvalConfig::default()).unwrap_or(f64::NAN);
    RecoveryStats {
        aligned_targets: targets.len(),
        recovered: targets.intersection(&found).count(),
        all_planted_pairs: spec.words * spec.instances * (spec.instances - 1) / 2,
        recovered_any: found.len(),
        correct_pairs: correct,
        accepted: r.pairs.len(),
        ned: ned_value,
        lr_all_negative: r.pairs.iter().all(|p| p.lr_score < 0.0),
    }
}

fn planted_config(alpha: f64, threads: usize) -> PipelineConfig {
    PipelineConfig {
        alpha,
        threads,
        rng_seed: 7,
        features: FeatureSource::Files,
        ..PipelineConfig::default()
    }
}

fn criteria_planted(dir: &Path) -> (Outcome, Outcome) {
    let spec = SynthSpec {
        rng_seed: 6,
        ..SynthSpec::default()
    };
    let corpus = generate_synthetic_corpus(&spec).unwrap();
    let paths = write_synthetic_corpus(&corpus, dir.join("corpus")).unwrap();
    let frames: usize = corpus.matrices.iter().map(FeatureMatrix::n_frames).sum();
    let planted = Planted { corpus };
    let inputs = read_manifest(&paths.manifest).unwrap();

    let t = Instant::now();
    let strict_cfg = planted_config(0.001, 4);
    let r1 = discover(&inputs, &strict_cfg).unwrap();
    let run_secs = t.elapsed().as_secs_f64();
    let r2 = discover(&inputs, &planted_config(0.0001, 4)).unwrap();
    let s1 = recovery(&planted, &r1);
    let s2 = recovery(&planted, &r2);
    let recall = s1.recovered as f64 / s1.aligned_targets.max(1) as f64;
    let consistent = r1.stats.is_consistent() && r2.stats.is_consistent();
    let pass6 = recall >= RECOVERY_MIN
        && s1.ned <= SYNTH_NED_MAX
        && s2.accepted < s1.accepted
        && s2.ned <= s1.ned
        && consistent;
    let detail6 = format!(
        "{frames} frames, {} segments, {} candidates; alpha=0.001: recall {:.1}% ({}/{} aligned planted pairs, min {:.0}%), \
         {} accepted, precision {:.1}%, NED {:.1} (max {SYNTH_NED_MAX}), all-planted recall {:.1}%, lr<0 for all: {}; \
         alpha=0.0001: {} accepted, NED {:.1}, recall {:.1}%; stats identity {consistent}; one run {run_secs:.1} s",
        r1.stats.segment_count,
        r1.stats.candidate_count,
        100.0 * recall,
        s1.recovered,
        s1.aligned_targets,
        100.0 * RECOVERY_MIN,
        s1.accepted,
        100.0 * s1.correct_pairs as f64 / s1.accepted.max(1) as f64,
        s1.ned,
        100.0 * s1.recovered_any as f64 / s1.all_planted_pairs as f64,
        s1.lr_all_negative,
        s2.accepted,
        s2.ned,
        100.0 * s2.recovered as f64 / s2.aligned_targets.max(1) as f64,
    );

    // determinism: in-memory run on 4 threads vs file-based run on 1 thread
    let four = dir.join("pairs_4.txt");
    write_class_file(&four, &r1.pairs).unwrap();
    let out1 = run_discover(
        &paths.manifest,
        &planted_config(0.001, 1),
        dir.join("run_1"),
    )
    .unwrap();
    let (b4, b1) = (fs::read(&four).unwrap(), fs::read(&out1.pairs).unwrap());
    let pass8 = b4 == b1 && !b1.is_empty();
    let detail8 = format!(
        "threads 1 vs 4 at seed {}: pairs files {} bytes vs {} bytes, byte-identical: {}",
        strict_cfg.rng_seed,
        b1.len(),
        b4.len(),
        b4 == b1
    );
    (outcome(pass6, detail6), outcome(pass8, detail8))
}

// 7. Noise rejection

fn noise_corpus(files: usize, frames: usize, seed: u64) -> Vec<MaskedFile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let raw: Vec<FeatureMatrix> = (0..files)
        .map(|f| {
            let data = (0..frames * 39).map(|_| unit.sample(&mut rng)).collect();
            FeatureMatrix::new(format!("noise{f}"), data, 39, 0.01, 0.01, 0.0).unwrap()
        })
        .collect();
    normalize_features(&raw, NormalizationScope::PerFile)
        .matrices
        .iter()
        .map(MaskedFile::unmasked)
        .collect()
}

fn random_cross_file_pairs(table: &SegmentTable, n: usize, seed: u64) -> Vec<CandidatePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (a, b) = (
            rng.random_range(0..table.len()),
            rng.random_range(0..table.len()),
        );
        if table.segments[a].file_index == table.segments[b].file_index {
            continue;
        }
        out.push(CandidatePair {
            seg_a: a.min(b),
            seg_b: a.max(b),
            distance: table.distance(a, b),
            p_value: 0.0,
        });
    }
    out
}

fn criterion_noise() -> Outcome {
    let files = noise_corpus(4, 3000, 7);
    let table = segment_corpus(&files, SegmentConfig::default()).unwrap();
    let params = calibrate_frame_distances(&files, 1_000_000, 7).unwrap();
    let pairs = random_cross_file_pairs(&table, NOISE_PAIRS, 77);
    let cfg = AlignConfig::default();
    let rejected = pairs
        .iter()
        .filter(|c| {
            matches!(
                align_pair(c, &table, &files, &params, &cfg),
                AlignOutcome::TooShort { .. }
            )
        })
        .count();
    let rate = rejected as f64 / pairs.len() as f64;
    outcome(
        rate >= NOISE_REJECTION_MIN,
        format!(
            "{rejected}/{} white-noise pairs rejected as too short at alpha={} ({:.1}%, min {:.0}%)",
            pairs.len(),
            cfg.alpha,
            100.0 * rate,
            100.0 * NOISE_REJECTION_MIN
        ),
    )
}

// 9. Scaling

fn min_time(reps: usize, mut f: impl FnMut()) -> f64 {
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn criterion_scaling(planted_dir: &Path) -> Outcome {
    let small = synthetic_table(3000, 156, 10, 9, 0);
    let large = synthetic_table(6000, 156, 10, 9, 0);
    let params = NormalParams::new(1.0, 0.08).unwrap();
    let search = SearchConfig::default();
    let t_small = in_pool(1, || {
        min_time(3, || drop(find_candidates(&small, &params, search)))
    });
    let t_large = in_pool(1, || {
        min_time(3, || drop(find_candidates(&large, &params, search)))
    });
    let ratio = t_large / t_small;

    let files = noise_corpus(4, 3000, 19);
    let table = segment_corpus(&files, SegmentConfig::default()).unwrap();
    let fparams = calibrate_frame_distances(&files, 100_000, 19).unwrap();
    let cands = random_cross_file_pairs(&table, 1600, 91);
    let cfg = AlignConfig::default();
    let per = |n: usize| {
        in_pool(1, || {
            min_time(3, || {
                drop(align_candidates(
                    &cands[..n],
                    &table,
                    &files,
                    &fparams,
                    &cfg,
                ))
            })
        }) / n as f64
    };
    let (per_small, per_large) = (per(400), per(1600));
    let stage2_ratio = (per_large / per_small).max(per_small / per_large);

    let manifest = planted_dir.join("corpus").join("manifest.txt");
    let inputs = read_manifest(&manifest).unwrap();
    let raw: Vec<FeatureMatrix> = inputs
        .iter()
        .map(|p| pdtw_core::features::read_pdtwfeat(p).unwrap())
        .collect();
    let norm = normalize_features(&raw, NormalizationScope::PerFile);
    let masked: Vec<MaskedFile> = norm.matrices.iter().map(MaskedFile::unmasked).collect();
    let ptable = segment_corpus(&masked, SegmentConfig::default()).unwrap();
    let pparams = pdtw_core::stage1::calibrate_segment_distances(&ptable, 100_000, 1).unwrap();
    let s1 = in_pool(1, || {
        min_time(1, || drop(find_candidates(&ptable, &pparams, search)))
    });
    let s4 = in_pool(4, || {
        min_time(1, || drop(find_candidates(&ptable, &pparams, search)))
    });
    let speedup = s1 / s4;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());

    outcome(
        (SCALING_RATIO.0..=SCALING_RATIO.1).contains(&ratio) && stage2_ratio <= STAGE2_PER_CANDIDATE_MAX_RATIO,
        format!(
            "stage 1 {:.3} s @3000 vs {:.3} s @6000 segments, ratio {ratio:.2} (range [{}, {}]); stage 2 {:.3} ms vs {:.3} ms \
             per candidate @400/@1600, ratio {stage2_ratio:.2} (max {STAGE2_PER_CANDIDATE_MAX_RATIO}); \
             soft: 1->4 thread stage-1 speedup {speedup:.2}x (target {SPEEDUP_SOFT_MIN}x, {cores} cores available, not gating)",
            t_small,
            t_large,
            SCALING_RATIO.0,
            SCALING_RATIO.1,
            1e3 * per_small,
            1e3 * per_large,
        ),
    )
}

// 10. VAD property

fn criterion_vad() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (speech, silence) = (
        Normal::new(0.0, 1.0).unwrap(),
        Normal::new(-8.0, 1.0).unwrap(),
    );
    let n = 100_000;
    let mut values = Vec::with_capacity(n);
    let mut from_silence = Vec::with_capacity(n);
    for _ in 0..n {
        let sil = rng.random::<f64>() >= 0.9;
        values.push(if sil {
            silence.sample(&mut rng)
        } else {
            speech.sample(&mut rng)
        });
        from_silence.push(sil);
    }
    let m = FeatureMatrix::new("vad", values.clone(), 1, 0.01, 0.025, 0.0).unwrap();
    let cfg = VadConfig {
        threshold: VAD_THRESHOLD,
        ..VadConfig::default()
    };
    let out = compute_speech_masks(std::slice::from_ref(&m), &cfg);
    let Some(model) = out.model else {
        return outcome(false, "GMM fit degenerate".into());
    };
    let keep = &out.masks[0].keep;
    let sp = model.gmm.component(model.speech);
    let other_mean = model.gmm.component(model.other()).mu;
    // tail facing the other component, computed directly with the oracle CDF
    let tail = |x: f64| {
        let z = (x - sp.mu) / sp.sigma;
        if other_mean < sp.mu {
            oracle::phi(z)
        } else {
            1.0 - oracle::phi(z)
        }
    };
    let beyond: Vec<usize> = (0..n)
        .filter(|&i| tail(values[i]) < VAD_THRESHOLD)
        .collect();
    let beyond_dropped = beyond.iter().filter(|&&i| !keep[i]).count();
    let facing_speech = |x: f64| {
        if other_mean < sp.mu {
            x >= sp.mu
        } else {
            x <= sp.mu
        }
    };
    let speech_side_dropped = (0..n)
        .filter(|&i| facing_speech(values[i]) && !keep[i])
        .count();
    let sil_total = from_silence.iter().filter(|&&s| s).count();
    let sil_dropped = (0..n).filter(|&i| from_silence[i] && !keep[i]).count();
    let frac = beyond_dropped as f64 / beyond.len().max(1) as f64;
    let sil_frac = sil_dropped as f64 / sil_total.max(1) as f64;
    outcome(
        frac >= VAD_DISCARD_MIN && sil_frac >= VAD_DISCARD_MIN && speech_side_dropped == 0,
        format!(
            "fit speech N({:.3}, {:.3}^2) weight {:.3}; {beyond_dropped}/{} frames beyond the tail threshold discarded ({:.2}%), \
             {sil_dropped}/{sil_total} non-speech frames discarded ({:.2}%), {speech_side_dropped} speech-side frames discarded",
            sp.mu,
            sp.sigma,
            model.gmm.weight[model.speech],
            beyond.len(),
            100.0 * frac,
            100.0 * sil_frac
        ),
    )
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut results = BTreeMap::new();
    results.insert(
        1,
        run(
            "criterion 1 M-score fixture",
            Some(1.0),
            criterion_m_fixture,
        ),
    );
    results.insert(2, run("criterion 2 DTW oracle", Some(10.0), criterion_dtw));
    results.insert(
        3,
        run("criterion 3 sub-path LR oracle", Some(5.0), criterion_lr),
    );
    results.insert(
        4,
        run("criterion 4 normal CDF accuracy", Some(1.0), criterion_cdf),
    );
    results.insert(
        5,
        run("criterion 5 stage-1 oracle", Some(10.0), criterion_stage1),
    );
    let t = Instant::now();
    let (c6, c8) = criteria_planted(dir.path());
    let planted_secs = t.elapsed().as_secs_f64();
    results.insert(6, run("criterion 6 planted-pattern recovery", None, || c6));
    results.insert(
        7,
        run("criterion 7 noise rejection", Some(30.0), criterion_noise),
    );
    results.insert(8, run("criterion 8 determinism", None, || c8));
    println!("       criteria 6 and 8 together took {planted_secs:.1} s (budget 300 s on 4 cores)");
    results.insert(
        9,
        run("criterion 9 scaling", None, || {
            criterion_scaling(dir.path())
        }),
    );
    results.insert(10, run("criterion 10 VAD property", None, criterion_vad));
    let failed: Vec<_> = results
        .iter()
        .filter(|(_, &p)| !p)
        .map(|(k, _)| *k)
        .collect();
    println!(
        "{}/{} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
