//! Shared numeric primitives: standard-normal functions, PSD-tolerant
//! Cholesky factorization, empirical quantiles, draw summaries, and
//! uniform-Dirichlet weights.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};
use std::sync::LazyLock;

static STD_NORMAL: LazyLock<Normal> = LazyLock::new(|| Normal::new(0.0, 1.0).unwrap());

/// Standard normal CDF Φ(x).
pub fn normal_cdf(x: f64) -> f64 {
    STD_NORMAL.cdf(x)
}

/// Standard normal density φ(x).
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile Φ⁻¹(p) for p ∈ (0, 1).
///
/// The library quantile is polished with two Newton steps so that
/// Φ(Φ⁻¹(p)) recovers p to near machine precision.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(
        (0.0..=1.0).contains(&p),
        "normal_quantile requires p in [0, 1], got {p}"
    );
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let mut x = STD_NORMAL.inverse_cdf(p);
    for _ in 0..2 {
        let density = normal_pdf(x);
        if density <= f64::MIN_POSITIVE {
            break;
        }
        x -= (normal_cdf(x) - p) / density;
    }
    x
}

/// Two-tailed critical value c_α = Φ⁻¹(1 − α/2).
pub fn critical_value(alpha: f64) -> f64 {
    normal_quantile(1.0 - alpha / 2.0)
}

/// Deterministic substream: a ChaCha generator keyed by a root seed and a
/// stream index. Distinct indices give independent streams, so draw loops
/// can run in parallel and still merge into a reproducible result.
pub fn substream(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Lower-triangular Cholesky factor of a symmetric PSD matrix.
///
/// Factorization tolerates exact semi-definiteness (zero pivots) and climbs
/// a small jitter ladder before giving up, so validating "PSD to tolerance"
/// and sampling from a degenerate Gaussian both go through the same path.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    lower: Array2<f64>,
    jitter: f64,
}

impl CholeskyFactor {
    /// Factor `matrix`, trying jitter multiples 0, 1e-12, 1e-10, 1e-8 of the
    /// largest diagonal entry. Returns `None` if the matrix is not PSD even
    /// after the largest jitter.
    pub fn new(matrix: &Array2<f64>) -> Option<Self> {
        let n = matrix.nrows();
        if n != matrix.ncols() {
            return None;
        }
        let scale = (0..n)
            .map(|i| matrix[[i, i]].abs())
            .fold(0.0_f64, f64::max)
            .max(1.0);
        for rel in [0.0, 1e-12, 1e-10, 1e-8] {
            let jitter = rel * scale;
            if let Some(lower) = decompose(matrix, jitter) {
                return Some(Self { lower, jitter });
            }
        }
        None
    }

    pub fn dimension(&self) -> usize {
        self.lower.nrows()
    }

    /// Jitter that was added to the diagonal to make the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn lower(&self) -> &Array2<f64> {
        &self.lower
    }

    /// Solve A x = b via forward/backward substitution. Returns `None` when
    /// the factor has a zero pivot (A is singular).
    pub fn solve(&self, b: &Array1<f64>) -> Option<Array1<f64>> {
        let n = self.dimension();
        let l = &self.lower;
        let mut y = Array1::zeros(n);
        for i in 0..n {
            let mut sum = b[i];
            for j in 0..i {
                sum -= l[[i, j]] * y[j];
            }
            if l[[i, i]] == 0.0 {
                return None;
            }
            y[i] = sum / l[[i, i]];
        }
        let mut x = Array1::zeros(n);
        for i in (0..n).rev() {
            let mut sum = y[i];
            for j in (i + 1)..n {
                sum -= l[[j, i]] * x[j];
            }
            x[i] = sum / l[[i, i]];
        }
        Some(x)
    }

    /// log det A = 2 Σ log L_ii; `None` for singular factors.
    pub fn log_det(&self) -> Option<f64> {
        let mut acc = 0.0;
        for i in 0..self.dimension() {
            let d = self.lower[[i, i]];
            if d <= 0.0 {
                return None;
            }
            acc += d.ln();
        }
        Some(2.0 * acc)
    }

    /// One draw from N(mean, A): mean + L z with z standard normal.
    pub fn sample_gaussian<R: Rng + ?Sized>(
        &self,
        mean: &Array1<f64>,
        rng: &mut R,
    ) -> Array1<f64> {
        let n = self.dimension();
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let mut out = mean.clone();
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += self.lower[[i, j]] * z[j];
            }
            out[i] += acc;
        }
        out
    }
}

fn decompose(matrix: &Array2<f64>, jitter: f64) -> Option<Array2<f64>> {
    let n = matrix.nrows();
    let scale = (0..n)
        .map(|i| matrix[[i, i]].abs())
        .fold(0.0_f64, f64::max)
        .max(1.0);
    // Pivots within this tolerance of zero are treated as exactly zero
    // (semi-definite directions); anything more negative fails.
    let pivot_tol = 1e-10 * scale;
    let mut l = Array2::zeros((n, n));
    for j in 0..n {
        let mut d = matrix[[j, j]] + jitter;
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if d > pivot_tol {
            let root = d.sqrt();
            l[[j, j]] = root;
            for i in (j + 1)..n {
                let mut s = matrix[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = s / root;
            }
        } else if d > -pivot_tol {
            // Zero pivot: the rest of the column must vanish too.
            l[[j, j]] = 0.0;
            for i in (j + 1)..n {
                let mut s = matrix[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                if s.abs() > pivot_tol.max(1e-8 * scale) {
                    return None;
                }
                l[[i, j]] = 0.0;
            }
        } else {
            return None;
        }
    }
    Some(l)
}

/// Linear-interpolation quantile (R type 7) of pre-sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    assert!((0.0..=1.0).contains(&p), "quantile level must be in [0, 1]");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Point estimate, equal-tailed interval, and tail probabilities of a set
/// of Monte Carlo draws.
#[derive(Debug, Clone, Copy)]
pub struct DrawSummary {
    pub mean: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    /// Pr{estimand < 0}, the strict-negative tail over the draws.
    pub pr_below_zero: f64,
    /// Two-sided Monte Carlo p-value: min(1, 2 min(Pr{≤0}, Pr{≥0})).
    pub p_value: f64,
}

/// Summarize draws with a 95% equal-tailed interval.
pub fn summarize_draws(draws: &[f64]) -> DrawSummary {
    assert!(!draws.is_empty(), "cannot summarize zero draws");
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite draw"));
    let below = draws.iter().filter(|v| **v < 0.0).count() as f64 / n;
    let at_most = draws.iter().filter(|v| **v <= 0.0).count() as f64 / n;
    let at_least = draws.iter().filter(|v| **v >= 0.0).count() as f64 / n;
    DrawSummary {
        mean,
        ci_lower: quantile_sorted(&sorted, 0.025),
        ci_upper: quantile_sorted(&sorted, 0.975),
        pr_below_zero: below,
        p_value: (2.0 * at_most.min(at_least)).min(1.0),
    }
}

/// One draw of uniform-Dirichlet weights Dir(1, ..., 1): normalized unit
/// exponentials. Weights are strictly positive and sum to one.
pub fn dirichlet_uniform<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    assert!(len > 0, "Dirichlet dimension must be positive");
    let mut weights: Vec<f64> = (0..len).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return vec![1.0 / len as f64; len];
    }
    for w in &mut weights {
        *w /= total;
    }
    weights
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n as f64 - 1.0)
}
