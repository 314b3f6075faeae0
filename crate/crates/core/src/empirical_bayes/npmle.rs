//! Nonparametric maximum-likelihood empirical Bayes (Kiefer–Wolfowitz) on
//! a fixed grid, fitted by expectation-maximization.
//!
//! The prior is a discrete distribution w over G grid points maximizing
//! Σ_k log Σ_g w_g φ((Y_k − grid_g)/σ_k)/σ_k. EM multiplies each weight by
//! the average responsibility it earns, which never decreases the
//! log-likelihood. Convergence is declared when the relative improvement
//! falls below 1e-9 *and* the first-order optimality gap
//! max_g Σ_k L_kg/f_k − K (an upper bound on the log-likelihood
//! suboptimality, by concavity) is small.

use super::EbError;
use crate::data_model::EffectEstimates;
use crate::stats::normal_pdf;
use ndarray::{Array1, Array2};

pub const DEFAULT_GRID_SIZE: usize = 300;
const RELATIVE_TOLERANCE: f64 = 1e-9;
const GAP_TOLERANCE: f64 = 2.5e-7;
const MAX_ITERATIONS: usize = 200_000;

#[derive(Debug, Clone)]
pub struct NonparametricEbFit {
    grid: Array1<f64>,
    prior_weights: Array1<f64>,
    posterior_weights: Array2<f64>,
    log_likelihood: f64,
    duality_gap: f64,
    iterations: usize,
}

impl NonparametricEbFit {
    /// Fit on the default grid: 300 equally spaced points spanning
    /// [min Y − 3·max σ, max Y + 3·max σ].
    pub fn fit(data: &EffectEstimates) -> Result<Self, EbError> {
        let y = data.estimates();
        let sd = data.std_devs();
        let max_sd = sd.iter().fold(0.0_f64, |acc, v| acc.max(*v));
        let lo = y.iter().fold(f64::INFINITY, |acc, v| acc.min(*v)) - 3.0 * max_sd;
        let hi = y.iter().fold(f64::NEG_INFINITY, |acc, v| acc.max(*v)) + 3.0 * max_sd;
        let grid = Array1::linspace(lo, hi, DEFAULT_GRID_SIZE);
        Self::fit_on_grid(data, grid)
    }

    /// Fit on a caller-supplied grid of support points.
    pub fn fit_on_grid(data: &EffectEstimates, grid: Array1<f64>) -> Result<Self, EbError> {
        if !data.is_diagonal() {
            return Err(EbError::NonDiagonalCovariance);
        }
        let k = data.len();
        if k < 10 {
            log::warn!(
                "nonparametric empirical Bayes fit on only {k} treatments; \
                 the prior estimate may be unstable below ~10"
            );
        }
        let g = grid.len();
        if g < 2 {
            return Err(EbError::InvalidGrid {
                what: format!("need at least 2 grid points, got {g}"),
            });
        }
        if grid.windows(2).into_iter().any(|w| !(w[1] > w[0])) {
            return Err(EbError::InvalidGrid {
                what: "grid points must be strictly increasing".into(),
            });
        }
        let sd = data.std_devs();
        if let Some(idx) = sd.iter().position(|s| !(*s > 0.0)) {
            return Err(EbError::InvalidGrid {
                what: format!(
                    "treatment `{}` has zero variance; the deconvolution likelihood is degenerate",
                    data.treatment_ids()[idx]
                ),
            });
        }

        // Likelihood matrix L[k, g] = φ((Y_k − grid_g)/σ_k)/σ_k.
        let y = data.estimates();
        let mut likelihood = Array2::zeros((k, g));
        for row in 0..k {
            for col in 0..g {
                likelihood[[row, col]] = normal_pdf((y[row] - grid[col]) / sd[row]) / sd[row];
            }
        }

        let mut weights = Array1::from_elem(g, 1.0 / g as f64);
        let mut marginals = likelihood.dot(&weights);
        let mut log_likelihood = log_lik(&marginals)?;
        let mut iterations = 0;
        let mut duality_gap = f64::INFINITY;

        while iterations < MAX_ITERATIONS {
            iterations += 1;

            // Average responsibility each grid point earns across treatments.
            let mut responsibility = Array1::zeros(g);
            for row in 0..k {
                let inv = 1.0 / marginals[row];
                for col in 0..g {
                    responsibility[col] += likelihood[[row, col]] * inv;
                }
            }
            duality_gap = responsibility
                .iter()
                .fold(f64::NEG_INFINITY, |acc, v| acc.max(*v))
                - k as f64;

            let mut next = weights.clone();
            for col in 0..g {
                next[col] *= responsibility[col] / k as f64;
            }
            // Guard against drift from the simplex.
            let total = next.sum();
            next.mapv_inplace(|w| w / total);

            let next_marginals = likelihood.dot(&next);
            let next_log_likelihood = log_lik(&next_marginals)?;
            if next_log_likelihood + 1e-9 * (1.0 + log_likelihood.abs()) < log_likelihood {
                return Err(EbError::MonotonicityViolated {
                    iteration: iterations,
                    previous: log_likelihood,
                    current: next_log_likelihood,
                });
            }
            let improvement = next_log_likelihood - log_likelihood;
            weights = next;
            marginals = next_marginals;
            log_likelihood = next_log_likelihood;

            if improvement.abs() <= RELATIVE_TOLERANCE * (1.0 + log_likelihood.abs())
                && duality_gap <= GAP_TOLERANCE
            {
                break;
            }
        }

        // Posterior weight(k, g) ∝ w_g L_kg.
        let mut posterior_weights = Array2::zeros((k, g));
        for row in 0..k {
            let inv = 1.0 / marginals[row];
            for col in 0..g {
                posterior_weights[[row, col]] = weights[col] * likelihood[[row, col]] * inv;
            }
        }

        Ok(Self {
            grid,
            prior_weights: weights,
            posterior_weights,
            log_likelihood,
            duality_gap,
            iterations,
        })
    }

    pub fn grid(&self) -> &Array1<f64> {
        &self.grid
    }

    pub fn prior_weights(&self) -> &Array1<f64> {
        &self.prior_weights
    }

    /// K×G matrix; row k is the posterior distribution of μ_k over the grid.
    pub fn posterior_weights(&self) -> &Array2<f64> {
        &self.posterior_weights
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    /// First-order optimality gap at the fitted weights; bounds how far the
    /// log-likelihood is from the grid NPMLE optimum.
    pub fn duality_gap(&self) -> f64 {
        self.duality_gap
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn posterior_mean(&self) -> Array1<f64> {
        self.posterior_weights.dot(&self.grid)
    }

    /// Prior mass within `window` of `point`.
    pub fn prior_mass_near(&self, point: f64, window: f64) -> f64 {
        self.grid
            .iter()
            .zip(self.prior_weights.iter())
            .filter(|(g, _)| (**g - point).abs() <= window)
            .map(|(_, w)| *w)
            .sum()
    }

    pub fn grid_step(&self) -> f64 {
        (self.grid[self.grid.len() - 1] - self.grid[0]) / (self.grid.len() - 1) as f64
    }
}

fn log_lik(marginals: &Array1<f64>) -> Result<f64, EbError> {
    let mut total = 0.0;
    for &f in marginals {
        if !(f > 0.0) {
            return Err(EbError::InvalidGrid {
                what: "marginal likelihood underflowed to zero; widen the grid".into(),
            });
        }
        total += f.ln();
    }
    Ok(total)
}
