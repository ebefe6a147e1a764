//! Probability primitives shared by both stages and the VAD.
//!
//! Everything here is a pure function of its inputs. Random sampling always goes
//! through a seeded ChaCha generator so that fitted parameters are reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Lower clamp applied to every CDF value handed to a logarithm. The upper clamp
/// is `1 - CDF_FLOOR`.
pub const CDF_FLOOR: f64 = 1e-12;

/// Default number of sampled pairs used to calibrate a distance distribution.
pub const DEFAULT_CALIB_SAMPLES: usize = 1_000_000;

/// Minimum number of sampled pairs accepted by [`sample_distance_distribution`].
pub const MIN_CALIB_SAMPLES: usize = 1_000;

/// Mean and standard deviation of a fitted normal distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalParams {
    pub mu: f64,
    pub sigma: f64,
}

impl NormalParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::DegenerateSample(format!(
                "invalid normal parameters mu={mu}, sigma={sigma}"
            )));
        }
        Ok(Self { mu, sigma })
    }

    /// `P(Z <= x)` clamped to `[CDF_FLOOR, 1 - CDF_FLOOR]`.
    #[inline]
    pub fn cdf(&self, x: f64) -> f64 {
        self.cdf_clamped(x, CDF_FLOOR)
    }

    #[inline]
    pub fn cdf_clamped(&self, x: f64, floor: f64) -> f64 {
        self.cdf_unclamped(x).clamp(floor, 1.0 - floor)
    }

    #[inline]
    pub fn cdf_unclamped(&self, x: f64) -> f64 {
        standard_normal_cdf((x - self.mu) / self.sigma)
    }

    /// Density at `x`.
    pub fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        (-0.5 * z * z).exp() / (self.sigma * (2.0 * std::f64::consts::PI).sqrt())
    }
}

/// Standard normal CDF via the complementary error function.
///
/// `erfc` keeps full relative precision in the lower tail, so the result is
/// accurate to well below 1e-10 absolute over the whole real line.
#[inline]
pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Clamped normal CDF, see [`NormalParams::cdf`].
#[inline]
pub fn normal_cdf(x: f64, params: &NormalParams) -> f64 {
    params.cdf(x)
}

/// Fits a normal distribution by arithmetic mean and population (divide-by-n)
/// standard deviation.
pub fn fit_normal(samples: &[f64]) -> Result<NormalParams> {
    if samples.len() < 2 {
        return Err(Error::DegenerateSample(format!(
            "need at least 2 values, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateSample("non-finite value in sample".into()));
    }
    let first = samples[0];
    if samples.iter().all(|&x| x == first) {
        return Err(Error::DegenerateSample(format!(
            "all {} values equal {first}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let mu = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|&x| (x - mu) * (x - mu)).sum::<f64>() / n;
    let sigma = var.sqrt();
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::DegenerateSample(format!("zero spread around {mu}")));
    }
    Ok(NormalParams { mu, sigma })
}

/// Draws `n_samples` ordered index pairs `(i, j)` with `i != j`, uniformly with
/// replacement from `0..n_items`. Generation is strictly serial.
pub fn sample_index_pairs(n_items: usize, n_samples: usize, rng_seed: u64) -> Vec<(usize, usize)> {
    assert!(n_items >= 2, "need at least two items to sample pairs");
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..n_samples)
        .map(|_| {
            let i = rng.random_range(0..n_items);
            let mut j = rng.random_range(0..n_items - 1);
            if j >= i {
                j += 1;
            }
            (i, j)
        })
        .collect()
}

/// Fits a normal distribution to distances between randomly sampled item pairs.
///
/// `distance(i, j)` may be evaluated on any thread; the pair list itself and the
/// reduction order are fixed by the seed, so the result does not depend on the
/// size of the thread pool.
pub fn sample_distance_distribution<F>(
    n_items: usize,
    n_samples: usize,
    rng_seed: u64,
    distance: F,
) -> Result<NormalParams>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    if n_items < 2 {
        return Err(Error::DegenerateSample(format!(
            "need at least 2 vectors to sample distances, got {n_items}"
        )));
    }
    if n_samples < MIN_CALIB_SAMPLES {
        return Err(Error::BadConfig(format!(
            "calibration needs at least {MIN_CALIB_SAMPLES} samples, got {n_samples}"
        )));
    }
    let pairs = sample_index_pairs(n_items, n_samples, rng_seed);
    let distances: Vec<f64> = pairs.par_iter().map(|&(i, j)| distance(i, j)).collect();
    fit_normal(&distances)
}

/// [`sample_distance_distribution`] over plain vectors with cosine distance.
pub fn sample_cosine_distribution(
    vectors: &[Vec<f64>],
    n_samples: usize,
    rng_seed: u64,
) -> Result<NormalParams> {
    sample_distance_distribution(vectors.len(), n_samples, rng_seed, |i, j| {
        cosine_distance_f64(&vectors[i], &vectors[j])
    })
}

/// Norm floor below which a vector is treated as zero.
pub const NORM_FLOOR: f64 = 1e-12;

/// `1 - u·v / (|u| |v|)` with both norms floored at [`NORM_FLOOR`]. Callers are
/// responsible for equal lengths.
#[inline]
pub(crate) fn cosine_distance_f64(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    let nu = nu.sqrt().max(NORM_FLOOR);
    let nv = nv.sqrt().max(NORM_FLOOR);
    1.0 - dot / (nu * nv)
}

/// Parameters of a univariate two-component Gaussian mixture, components sorted
/// by ascending mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gmm2Params {
    pub weight: [f64; 2],
    pub mean: [f64; 2],
    pub variance: [f64; 2],
}

impl Gmm2Params {
    pub fn component(&self, k: usize) -> NormalParams {
        NormalParams {
            mu: self.mean[k],
            sigma: self.variance[k].sqrt(),
        }
    }

    /// Log-likelihood of `samples` under the mixture.
    pub fn log_likelihood(&self, samples: &[f64]) -> f64 {
        samples.iter().map(|&x| self.log_density(x)).sum()
    }

    fn log_density(&self, x: f64) -> f64 {
        let a = self.weight[0].ln() + log_normal_pdf(x, self.mean[0], self.variance[0]);
        let b = self.weight[1].ln() + log_normal_pdf(x, self.mean[1], self.variance[1]);
        log_sum_exp(a, b)
    }
}

/// Outcome of [`fit_gmm2`]. Running out of iterations is reported through
/// `converged`, not as an error.
#[derive(Debug, Clone)]
pub struct Gmm2Fit {
    pub params: Gmm2Params,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood of every parameter iterate, starting with the initial one.
    pub trace: Vec<f64>,
}

pub const GMM_DEFAULT_MAX_ITERS: usize = 200;
pub const GMM_DEFAULT_TOL: f64 = 1e-6;

/// Fits a two-component univariate Gaussian mixture by EM.
///
/// Initialization is deterministic: means at the 25th and 75th percentiles,
/// equal weights, both variances equal to the sample variance. `rng_seed` is
/// only consumed when the two percentiles coincide, in which case the means are
/// pushed apart by a small seeded jitter.
pub fn fit_gmm2(samples: &[f64], max_iters: usize, tol: f64, rng_seed: u64) -> Result<Gmm2Fit> {
    if samples.len() < 10 {
        return Err(Error::DegenerateSample(format!(
            "GMM fit needs at least 10 values, got {}",
            samples.len()
        )));
    }
    let normal = fit_normal(samples)?;
    let sample_var = normal.sigma * normal.sigma;
    let var_floor = sample_var * 1e-6;

    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut mean = [percentile(&sorted, 0.25), percentile(&sorted, 0.75)];
    if mean[0] == mean[1] {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let jitter = 1e-3 * normal.sigma;
        mean[0] -= jitter * rng.random_range(0.5..1.0);
        mean[1] += jitter * rng.random_range(0.5..1.0);
    }
    let mut params = Gmm2Params {
        weight: [0.5, 0.5],
        mean,
        variance: [sample_var, sample_var],
    };

    let n = samples.len();
    let mut resp = vec![0.0f64; n];
    let mut ll = e_step(&params, samples, &mut resp);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        params = m_step(samples, &resp, var_floor);
        let next = e_step(&params, samples, &mut resp);
        trace.push(next);
        let improvement = next - ll;
        ll = next;
        if improvement < tol {
            converged = true;
            break;
        }
    }

    if params.mean[0] > params.mean[1] {
        params.weight.swap(0, 1);
        params.mean.swap(0, 1);
        params.variance.swap(0, 1);
    }
    Ok(Gmm2Fit {
        params,
        log_likelihood: ll,
        iterations,
        converged,
        trace,
    })
}

// Fills `resp` with the posterior of component 1 and returns the log-likelihood.
fn e_step(params: &Gmm2Params, samples: &[f64], resp: &mut [f64]) -> f64 {
    let lw = [params.weight[0].ln(), params.weight[1].ln()];
    let mut ll = 0.0;
    for (r, &x) in resp.iter_mut().zip(samples) {
        let a = lw[0] + log_normal_pdf(x, params.mean[0], params.variance[0]);
        let b = lw[1] + log_normal_pdf(x, params.mean[1], params.variance[1]);
        let total = log_sum_exp(a, b);
        *r = (b - total).exp();
        ll += total;
    }
    ll
}

fn m_step(samples: &[f64], resp: &[f64], var_floor: f64) -> Gmm2Params {
    let mut nk = [0.0f64; 2];
    let mut sum = [0.0f64; 2];
    for (&r, &x) in resp.iter().zip(samples) {
        nk[0] += 1.0 - r;
        nk[1] += r;
        sum[0] += (1.0 - r) * x;
        sum[1] += r * x;
    }
    // keep an emptied component alive with a vanishing weight
    let tiny = f64::MIN_POSITIVE.sqrt();
    let nk = [nk[0].max(tiny), nk[1].max(tiny)];
    let mean = [sum[0] / nk[0], sum[1] / nk[1]];
    let mut sq = [0.0f64; 2];
    for (&r, &x) in resp.iter().zip(samples) {
        sq[0] += (1.0 - r) * (x - mean[0]) * (x - mean[0]);
        sq[1] += r * (x - mean[1]) * (x - mean[1]);
    }
    let total = nk[0] + nk[1];
    Gmm2Params {
        weight: [nk[0] / total, nk[1] / total],
        mean,
        variance: [
            (sq[0] / nk[0]).max(var_floor),
            (sq[1] / nk[1]).max(var_floor),
        ],
    }
}

#[inline]
fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + d * d / var)
}

#[inline]
fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Linear-interpolated percentile of an ascending slice, `q` in `[0, 1]`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
