//! Empirical Bayes fits for the effect prior and the posterior sampler for
//! μ | Y used throughout the inference machinery.

mod npmle;
mod parametric;

pub use npmle::{NonparametricEbFit, DEFAULT_GRID_SIZE};
pub use parametric::ParametricEbFit;

use crate::data_model::EffectEstimates;
use crate::losses::LossKind;
use crate::stats::{self, CholeskyFactor};
use ndarray::{Array1, Array2};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EbError {
    #[error("need at least {needed} treatments for an empirical Bayes fit, got {got}")]
    TooFewTreatments { needed: usize, got: usize },
    #[error("covariance problem: {0}")]
    SingularCovariance(String),
    #[error(
        "optimizer did not converge; last iterate τ² = {last_tau_squared}, \
         log-likelihood {last_log_likelihood}"
    )]
    NonConvergence {
        last_tau_squared: f64,
        last_log_likelihood: f64,
    },
    #[error("nonparametric fit requires independently estimated effects (diagonal Σ); \
             use the parametric fit for correlated errors")]
    NonDiagonalCovariance,
    #[error("invalid prior: {what}")]
    InvalidPrior { what: String },
    #[error("invalid grid: {what}")]
    InvalidGrid { what: String },
    #[error(
        "EM log-likelihood decreased at iteration {iteration}: {previous} -> {current}; \
         this indicates a numerical failure"
    )]
    MonotonicityViolated {
        iteration: usize,
        previous: f64,
        current: f64,
    },
    #[error("replication transform needs {expected} sample sizes, got {got}")]
    TransformDimension { expected: usize, got: usize },
}

/// Which family of empirical Bayes estimator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EbChoice {
    Parametric,
    Nonparametric,
    /// Nonparametric when the effects are estimated independently and there
    /// are at least 30 of them, parametric otherwise.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EbKind {
    Parametric,
    Nonparametric,
}

impl EbKind {
    pub fn name(self) -> &'static str {
        match self {
            EbKind::Parametric => "parametric",
            EbKind::Nonparametric => "nonparametric",
        }
    }
}

/// Resolve an [`EbChoice`] against the shape of the data.
pub fn choose_kind(data: &EffectEstimates, choice: EbChoice) -> EbKind {
    match choice {
        EbChoice::Parametric => EbKind::Parametric,
        EbChoice::Nonparametric => EbKind::Nonparametric,
        EbChoice::Auto => {
            if data.is_diagonal() && data.len() >= 30 {
                EbKind::Nonparametric
            } else {
                EbKind::Parametric
            }
        }
    }
}

/// A fitted prior of either family.
#[derive(Debug, Clone)]
pub enum EbFit {
    Parametric(ParametricEbFit),
    Nonparametric(NonparametricEbFit),
}

impl EbFit {
    pub fn fit(data: &EffectEstimates, choice: EbChoice) -> Result<Self, EbError> {
        match choose_kind(data, choice) {
            EbKind::Parametric => Ok(EbFit::Parametric(ParametricEbFit::fit(data)?)),
            EbKind::Nonparametric => Ok(EbFit::Nonparametric(NonparametricEbFit::fit(data)?)),
        }
    }

    pub fn kind(&self) -> EbKind {
        match self {
            EbFit::Parametric(_) => EbKind::Parametric,
            EbFit::Nonparametric(_) => EbKind::Nonparametric,
        }
    }

    pub fn sampler(&self, seed: u64) -> Result<PosteriorSampler, EbError> {
        match self {
            EbFit::Parametric(fit) => PosteriorSampler::parametric(fit, seed),
            EbFit::Nonparametric(fit) => Ok(PosteriorSampler::nonparametric(fit, seed)),
        }
    }
}

/// Convenience: fit the chosen estimator on the data.
pub fn fit_parametric_eb(data: &EffectEstimates) -> Result<ParametricEbFit, EbError> {
    ParametricEbFit::fit(data)
}

pub fn fit_nonparametric_eb(data: &EffectEstimates) -> Result<NonparametricEbFit, EbError> {
    NonparametricEbFit::fit(data)
}

enum Latent {
    /// Multivariate normal posterior: mean plus Cholesky factor of the
    /// posterior covariance (which may be exactly degenerate).
    Parametric {
        mean: Array1<f64>,
        factor: CholeskyFactor,
    },
    /// Independent per-treatment discrete posteriors over a grid. Rows of
    /// `cdf` are cumulative posterior weights.
    Nonparametric {
        grid: Array1<f64>,
        cdf: Array2<f64>,
        mean: Array1<f64>,
    },
    /// Point mass: every draw equals the vector exactly.
    Degenerate { value: Array1<f64> },
}

/// Maps latent effect draws μ* to replication probabilities
/// Φ(√n·μ* − c_α).
#[derive(Debug, Clone)]
struct ReplicationMap {
    sqrt_n: Array1<f64>,
    critical: f64,
}

/// Seedable sampler for the posterior μ | Y.
///
/// Sampling is a pure function of the root seed: every draw index uses its
/// own substream, so `sample` returns the same matrix on every call and
/// consumers can draw in parallel without losing reproducibility.
pub struct PosteriorSampler {
    latent: Latent,
    transform: Option<ReplicationMap>,
    seed: u64,
}

impl PosteriorSampler {
    pub fn parametric(fit: &ParametricEbFit, seed: u64) -> Result<Self, EbError> {
        let factor = CholeskyFactor::new(fit.posterior_covariance()).ok_or_else(|| {
            EbError::SingularCovariance("posterior covariance is not PSD".into())
        })?;
        Ok(Self {
            latent: Latent::Parametric {
                mean: fit.posterior_mean().clone(),
                factor,
            },
            transform: None,
            seed,
        })
    }

    pub fn nonparametric(fit: &NonparametricEbFit, seed: u64) -> Self {
        let weights = fit.posterior_weights();
        let (k, g) = weights.dim();
        let mut cdf = Array2::zeros((k, g));
        for row in 0..k {
            let mut acc = 0.0;
            for col in 0..g {
                acc += weights[[row, col]];
                cdf[[row, col]] = acc;
            }
        }
        Self {
            latent: Latent::Nonparametric {
                grid: fit.grid().clone(),
                cdf,
                mean: fit.posterior_mean(),
            },
            transform: None,
            seed,
        }
    }

    /// Point-mass posterior; useful for oracle-equivalence checks and for
    /// studies whose truth is known exactly.
    pub fn degenerate(value: Array1<f64>, seed: u64) -> Self {
        Self {
            latent: Latent::Degenerate { value },
            transform: None,
            seed,
        }
    }

    /// Interpret the latent effects as normalized replication effects μ*
    /// and sample replication probabilities Φ(√n·μ* − c_α) instead.
    pub fn with_replication_transform(
        mut self,
        sample_sizes: &[u64],
        alpha: f64,
    ) -> Result<Self, EbError> {
        if sample_sizes.len() != self.dimension() {
            return Err(EbError::TransformDimension {
                expected: self.dimension(),
                got: sample_sizes.len(),
            });
        }
        self.transform = Some(ReplicationMap {
            sqrt_n: sample_sizes.iter().map(|n| (*n as f64).sqrt()).collect(),
            critical: stats::critical_value(alpha),
        });
        Ok(self)
    }

    pub fn kind_name(&self) -> &'static str {
        match self.latent {
            Latent::Parametric { .. } => "parametric",
            Latent::Nonparametric { .. } => "nonparametric",
            Latent::Degenerate { .. } => "degenerate",
        }
    }

    pub fn dimension(&self) -> usize {
        match &self.latent {
            Latent::Parametric { mean, .. } => mean.len(),
            Latent::Nonparametric { mean, .. } => mean.len(),
            Latent::Degenerate { value } => value.len(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Draw one posterior vector using the supplied generator.
    pub fn draw_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Array1<f64> {
        let latent = match &self.latent {
            Latent::Parametric { mean, factor } => factor.sample_gaussian(mean, rng),
            Latent::Nonparametric { grid, cdf, .. } => {
                let k = cdf.nrows();
                let g = grid.len();
                let mut out = Array1::zeros(k);
                for row in 0..k {
                    let u: f64 = rng.random();
                    // First index whose cumulative weight reaches u.
                    let mut lo = 0;
                    let mut hi = g - 1;
                    while lo < hi {
                        let mid = (lo + hi) / 2;
                        if cdf[[row, mid]] < u {
                            lo = mid + 1;
                        } else {
                            hi = mid;
                        }
                    }
                    out[row] = grid[lo];
                }
                out
            }
            Latent::Degenerate { value } => value.clone(),
        };
        match &self.transform {
            None => latent,
            Some(map) => Array1::from_iter(
                latent
                    .iter()
                    .zip(map.sqrt_n.iter())
                    .map(|(mu, sqrt_n)| stats::normal_cdf(sqrt_n * mu - map.critical)),
            ),
        }
    }

    /// `count` × K matrix of posterior draws; row s comes from substream s
    /// of the root seed, so the result is identical on every call.
    pub fn sample(&self, count: usize) -> Array2<f64> {
        let k = self.dimension();
        let mut out = Array2::zeros((count, k));
        for s in 0..count {
            let mut rng = stats::substream(self.seed, s as u64);
            let draw = self.draw_with(&mut rng);
            out.row_mut(s).assign(&draw);
        }
        out
    }

    /// Posterior mean of the sampled quantity, computed analytically.
    ///
    /// With a replication transform the mean probability has a closed form
    /// for each latent family: Φ((√n·m − c)/√(1 + n·v)) for the normal
    /// posterior, and the exact weighted sum over the grid otherwise.
    pub fn posterior_mean(&self) -> Array1<f64> {
        match (&self.latent, &self.transform) {
            (Latent::Parametric { mean, .. }, None) => mean.clone(),
            (Latent::Nonparametric { mean, .. }, None) => mean.clone(),
            (Latent::Degenerate { value }, None) => value.clone(),
            (Latent::Parametric { mean, factor }, Some(map)) => {
                let k = mean.len();
                let mut out = Array1::zeros(k);
                for i in 0..k {
                    let variance: f64 = (0..=i).map(|j| {
                        let l = factor.lower()[[i, j]];
                        l * l
                    })
                    .sum();
                    let n = map.sqrt_n[i] * map.sqrt_n[i];
                    let scale = (1.0 + n * variance).sqrt();
                    out[i] = stats::normal_cdf((map.sqrt_n[i] * mean[i] - map.critical) / scale);
                }
                out
            }
            (Latent::Nonparametric { grid, cdf, .. }, Some(map)) => {
                let k = cdf.nrows();
                let g = grid.len();
                let mut out = Array1::zeros(k);
                for row in 0..k {
                    let mut acc = 0.0;
                    let mut prev = 0.0;
                    for col in 0..g {
                        let weight = cdf[[row, col]] - prev;
                        prev = cdf[[row, col]];
                        acc += weight * stats::normal_cdf(map.sqrt_n[row] * grid[col] - map.critical);
                    }
                    out[row] = acc;
                }
                out
            }
            (Latent::Degenerate { value }, Some(map)) => Array1::from_iter(
                value
                    .iter()
                    .zip(map.sqrt_n.iter())
                    .map(|(mu, sqrt_n)| stats::normal_cdf(sqrt_n * mu - map.critical)),
            ),
        }
    }

    /// The oracle's prediction vector: the posterior mean, which minimizes
    /// expected squared error and expected Brier score alike.
    pub fn oracle_predictions(&self, _kind: LossKind) -> Array1<f64> {
        self.posterior_mean()
    }
}
