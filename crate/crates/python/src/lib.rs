//! Python bindings: the numeric building blocks plus whole-pipeline entry points.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use pdtw_core::eval::{levenshtein as lev, EvalConfig};
use pdtw_core::features::{FeatureMatrix, Waveform};
use pdtw_core::pipeline::{self, EvalInputs, PipelineConfig, SynthSpec};
use pdtw_core::stage2::{AlignmentPath, ProbMatrix};
use pdtw_core::stats;

create_exception!(
    pdtw,
    PdtwError,
    PyException,
    "Raised for any pipeline or validation failure."
);

fn err(e: pdtw_core::Error) -> PyErr {
    PdtwError::new_err(e.to_string())
}

#[pyclass(name = "NormalParams", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyNormalParams {
    #[pyo3(get)]
    mu: f64,
    #[pyo3(get)]
    sigma: f64,
}

impl PyNormalParams {
    fn inner(&self) -> stats::NormalParams {
        stats::NormalParams::new(self.mu, self.sigma).expect("validated on construction")
    }
}

#[pymethods]
impl PyNormalParams {
    #[new]
    fn new(mu: f64, sigma: f64) -> PyResult<Self> {
        stats::NormalParams::new(mu, sigma).map_err(err)?;
        Ok(Self { mu, sigma })
    }

    /// CDF clamped to `[1e-12, 1 - 1e-12]`.
    fn cdf(&self, x: f64) -> f64 {
        self.inner().cdf(x)
    }

    fn __repr__(&self) -> String {
        format!("NormalParams(mu={}, sigma={})", self.mu, self.sigma)
    }
}

#[pyclass(name = "GmmFit", frozen, skip_from_py_object)]
struct PyGmmFit {
    #[pyo3(get)]
    weights: (f64, f64),
    #[pyo3(get)]
    means: (f64, f64),
    #[pyo3(get)]
    variances: (f64, f64),
    #[pyo3(get)]
    log_likelihood: f64,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    converged: bool,
}

#[pymethods]
impl PyGmmFit {
    fn __repr__(&self) -> String {
        format!(
            "GmmFit(weights={:?}, means={:?}, variances={:?}, converged={})",
            self.weights, self.means, self.variances, self.converged
        )
    }
}

/// Fits a normal distribution (population standard deviation).
#[pyfunction]
fn fit_normal(samples: Vec<f64>) -> PyResult<PyNormalParams> {
    let p = stats::fit_normal(&samples).map_err(err)?;
    Ok(PyNormalParams {
        mu: p.mu,
        sigma: p.sigma,
    })
}

#[pyfunction]
fn standard_normal_cdf(z: f64) -> f64 {
    stats::standard_normal_cdf(z)
}

#[pyfunction]
fn normal_cdf(x: f64, params: PyNormalParams) -> f64 {
    stats::normal_cdf(x, &params.inner())
}

/// Two-component 1-D GMM by EM; components come back sorted by mean.
#[pyfunction]
#[pyo3(signature = (samples, max_iters=stats::GMM_DEFAULT_MAX_ITERS, tol=stats::GMM_DEFAULT_TOL, seed=0))]
fn fit_gmm2(samples: Vec<f64>, max_iters: usize, tol: f64, seed: u64) -> PyResult<PyGmmFit> {
    let f = stats::fit_gmm2(&samples, max_iters, tol, seed).map_err(err)?;
    let p = f.params;
    Ok(PyGmmFit {
        weights: (p.weight[0], p.weight[1]),
        means: (p.mean[0], p.mean[1]),
        variances: (p.variance[0], p.variance[1]),
        log_likelihood: f.log_likelihood,
        iterations: f.iterations,
        converged: f.converged,
    })
}

/// 39-dim MFCCs (13 static + deltas + delta-deltas) of a 16 kHz signal, one
/// list per frame.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate=16000))]
fn compute_mfcc(samples: Vec<f64>, sample_rate: u32) -> PyResult<Vec<Vec<f64>>> {
    let w = Waveform {
        samples,
        sample_rate,
        file_id: "python".into(),
    };
    let m = pdtw_core::features::compute_mfcc(&w).map_err(err)?;
    Ok(m.frames().map(<[f64]>::to_vec).collect())
}

/// Samples scaled to [-1, 1) and the sample rate.
#[pyfunction]
fn load_wav(path: PathBuf) -> PyResult<(Vec<f64>, u32)> {
    let w = pdtw_core::features::load_wav(path).map_err(err)?;
    Ok((w.samples, w.sample_rate))
}

#[pyfunction]
fn cosine_distance(u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    pdtw_core::stage1::cosine_distance(&u, &v).map_err(err)
}

fn prob_matrix(rows: Vec<Vec<f64>>) -> PyResult<ProbMatrix> {
    let n_rows = rows.len();
    let n_cols = rows.first().map_or(0, Vec::len);
    if n_rows == 0 || n_cols == 0 || rows.iter().any(|r| r.len() != n_cols) {
        return Err(PdtwError::new_err(
            "matrix must be a non-empty list of equal-length rows",
        ));
    }
    ProbMatrix::from_vec(n_rows, n_cols, rows.into_iter().flatten().collect()).map_err(err)
}

/// Minimum-cost monotone path through a probability matrix: `(steps, cost)`.
#[pyfunction]
#[pyo3(signature = (matrix, cost="raw"))]
fn dtw_min_cost_path(matrix: Vec<Vec<f64>>, cost: &str) -> PyResult<(Vec<(usize, usize)>, f64)> {
    let p = prob_matrix(matrix)?;
    let mode = cost.parse().map_err(err)?;
    let (path, c) = pdtw_core::stage2::dtw_min_cost_path_with(&p, mode);
    Ok((path.steps().to_vec(), c))
}

/// Best sub-path of per-step probabilities: `(start, end_inclusive, lr)`.
#[pyfunction]
fn best_subpath_lr(probs: Vec<f64>, alpha: f64) -> PyResult<(usize, usize, f64)> {
    if probs.is_empty() || !(alpha > 0.0 && alpha < 1.0) {
        return Err(PdtwError::new_err(
            "need at least one probability and 0 < alpha < 1",
        ));
    }
    let n = probs.len();
    let path = AlignmentPath::new((0..n).map(|i| (i, i)).collect(), probs, n, n).map_err(err)?;
    let s = pdtw_core::stage2::best_subpath_lr(&path, alpha);
    Ok((s.start, s.end, s.lr))
}

#[pyfunction]
fn levenshtein(a: Vec<String>, b: Vec<String>) -> usize {
    lev(&a, &b)
}

#[pyfunction]
fn m_score(ned: f64, cov: f64) -> f64 {
    pdtw_core::eval::m_score(ned, cov)
}

fn config_from(options: Option<&Bound<'_, PyDict>>) -> PyResult<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if let Some(d) = options {
        for (k, v) in d.iter() {
            let key: String = k.extract()?;
            let value = v.str()?.to_string();
            let value = match value.as_str() {
                "True" => "true".to_string(),
                "False" => "false".to_string(),
                _ => value,
            };
            cfg.set(&key, &value).map_err(err)?;
        }
    }
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

fn stats_dict<'py>(py: Python<'py>, s: &pipeline::RunStats) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("files", s.file_count)?;
    d.set_item("frames_total", s.frames_total)?;
    d.set_item("frames_kept", s.frames_kept)?;
    d.set_item("segments", s.segment_count)?;
    d.set_item("candidates", s.candidate_count)?;
    d.set_item("accepted", s.accepted_pairs)?;
    d.set_item("rejected_too_short", s.rejected_too_short)?;
    d.set_item("rejected_self_overlap", s.rejected_self_overlap)?;
    d.set_item("seconds", s.timings.total())?;
    Ok(d)
}

/// Runs discovery on a manifest and writes the outputs to `out_dir`.
/// `options` uses the config-file keys, e.g. `{"alpha": 0.0001, "features": "files"}`.
#[pyfunction]
#[pyo3(signature = (manifest, out_dir, options=None))]
fn discover<'py>(
    py: Python<'py>,
    manifest: PathBuf,
    out_dir: PathBuf,
    options: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config_from(options)?;
    let out = py
        .detach(|| pipeline::run_discover(&manifest, &cfg, &out_dir))
        .map_err(err)?;
    let d = stats_dict(py, &out.stats)?;
    d.set_item("pairs_file", out.pairs)?;
    d.set_item("masks_file", out.masks)?;
    Ok(d)
}

/// Runs discovery on in-memory feature matrices (lists of frames) and returns
/// the discovered pairs as dicts.
#[pyfunction]
#[pyo3(signature = (features, file_ids, frame_shift=0.01, options=None))]
fn discover_features<'py>(
    py: Python<'py>,
    features: Vec<Vec<Vec<f64>>>,
    file_ids: Vec<String>,
    frame_shift: f64,
    options: Option<&Bound<'py, PyDict>>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    if features.len() != file_ids.len() {
        return Err(PdtwError::new_err("features and file_ids differ in length"));
    }
    let cfg = config_from(options)?;
    let mats = features
        .iter()
        .zip(&file_ids)
        .map(|(rows, id)| FeatureMatrix::from_rows(id.clone(), rows, frame_shift))
        .collect::<pdtw_core::Result<Vec<_>>>()
        .map_err(err)?;
    let r = py
        .detach(|| pipeline::discover_matrices(mats, &cfg))
        .map_err(err)?;
    r.pairs
        .iter()
        .map(|p| {
            let d = PyDict::new(py);
            d.set_item("file_a", &p.file_a)?;
            d.set_item("onset_a", p.onset_a)?;
            d.set_item("offset_a", p.offset_a)?;
            d.set_item("file_b", &p.file_b)?;
            d.set_item("onset_b", p.onset_b)?;
            d.set_item("offset_b", p.offset_b)?;
            d.set_item("lr_score", p.lr_score)?;
            d.set_item("path_length", p.path_length)?;
            Ok(d)
        })
        .collect()
}

/// Scores a class file; returns NED, coverage, M and boundary scores.
#[pyfunction]
#[pyo3(signature = (pairs, phones, words, masks, frame_shift=0.01, frame_offset=0.0))]
fn evaluate<'py>(
    py: Python<'py>,
    pairs: PathBuf,
    phones: PathBuf,
    words: PathBuf,
    masks: PathBuf,
    frame_shift: f64,
    frame_offset: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let inputs = EvalInputs {
        pairs,
        phones,
        words,
        masks,
        frame_shift,
        frame_offset,
    };
    let r = pipeline::run_eval(&inputs, &EvalConfig::default()).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("pairs", r.pair_count)?;
    d.set_item("ned", r.ned)?;
    d.set_item("cov", r.cov)?;
    d.set_item("m_score", r.m_score)?;
    d.set_item("boundary_prc", r.boundary_prc)?;
    d.set_item("boundary_rcl", r.boundary_rcl)?;
    d.set_item("boundary_f", r.boundary_f)?;
    d.set_item("ned_undefined", r.ned_undefined)?;
    Ok(d)
}

/// Writes a synthetic planted-pattern corpus; returns the manifest and gold paths.
#[pyfunction]
#[pyo3(signature = (out_dir, words=20, instances=10, noise=0.3, warp=0.2, background_s=600.0, files=10, seed=0))]
#[allow(clippy::too_many_arguments)]
fn synth<'py>(
    py: Python<'py>,
    out_dir: PathBuf,
    words: usize,
    instances: usize,
    noise: f64,
    warp: f64,
    background_s: f64,
    files: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = SynthSpec {
        words,
        instances,
        noise_sigma: noise,
        warp,
        background_s,
        files,
        rng_seed: seed,
        ..SynthSpec::default()
    };
    let corpus = pipeline::generate_synthetic_corpus(&spec).map_err(err)?;
    let paths = pipeline::write_synthetic_corpus(&corpus, &out_dir).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("manifest", paths.manifest)?;
    d.set_item("phones", paths.phones)?;
    d.set_item("words", paths.words)?;
    d.set_item("planted", paths.planted)?;
    d.set_item("instances", corpus.planted.len())?;
    Ok(d)
}

#[pymodule]
fn pdtw(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PdtwError", m.py().get_type::<PdtwError>())?;
    m.add_class::<PyNormalParams>()?;
    m.add_class::<PyGmmFit>()?;
    m.add_function(wrap_pyfunction!(fit_normal, m)?)?;
    m.add_function(wrap_pyfunction!(standard_normal_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(normal_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(fit_gmm2, m)?)?;
    m.add_function(wrap_pyfunction!(compute_mfcc, m)?)?;
    m.add_function(wrap_pyfunction!(load_wav, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_distance, m)?)?;
    m.add_function(wrap_pyfunction!(dtw_min_cost_path, m)?)?;
    m.add_function(wrap_pyfunction!(best_subpath_lr, m)?)?;
    m.add_function(wrap_pyfunction!(levenshtein, m)?)?;
    m.add_function(wrap_pyfunction!(m_score, m)?)?;
    m.add_function(wrap_pyfunction!(discover, m)?)?;
    m.add_function(wrap_pyfunction!(discover_features, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    Ok(())
}
