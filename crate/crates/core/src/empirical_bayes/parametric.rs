//! Normal-prior, normal-likelihood empirical Bayes.
//!
//! The prior is exchangeable, μ ~ N(m·1, τ²·I), and the likelihood is
//! Y | μ ~ N(μ, Σ). The prior mean is profiled out in closed form (GLS)
//! and τ² is found by golden-section search on the profile marginal
//! likelihood, clamped at the τ² = 0 boundary.

use super::EbError;
use crate::data_model::EffectEstimates;
use crate::stats::CholeskyFactor;
use ndarray::{Array1, Array2};

/// Iteration cap for the golden-section search; the bracket shrinks by a
/// constant factor each step, so hitting the cap signals a numeric problem.
const MAX_GOLDEN_ITERATIONS: usize = 400;
const GOLDEN_RATIO: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone)]
pub struct ParametricEbFit {
    prior_mean: f64,
    prior_variance: f64,
    posterior_mean: Array1<f64>,
    posterior_covariance: Array2<f64>,
    log_marginal_likelihood: f64,
}

impl ParametricEbFit {
    /// Maximum-marginal-likelihood fit of (m, τ²).
    pub fn fit(data: &EffectEstimates) -> Result<Self, EbError> {
        let k = data.len();
        if k < 2 {
            return Err(EbError::TooFewTreatments { needed: 2, got: k });
        }
        let y = data.estimates();
        let sigma = data.covariance();

        let y_mean = y.sum() / k as f64;
        let y_var = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / k as f64;
        let max_diag = sigma.diag().iter().fold(0.0_f64, |acc, v| acc.max(*v));
        let hi = (8.0 * (y_var + max_diag)).max(1e-6);

        // Golden-section search for the interior maximum of the profile
        // log-likelihood over τ² ∈ [0, hi].
        let mut a = 0.0_f64;
        let mut b = hi;
        let mut x1 = b - GOLDEN_RATIO * (b - a);
        let mut x2 = a + GOLDEN_RATIO * (b - a);
        let mut f1 = profile_log_likelihood(y, sigma, x1);
        let mut f2 = profile_log_likelihood(y, sigma, x2);
        let tolerance = 1e-12 * hi;
        let mut iterations = 0;
        while b - a > tolerance {
            iterations += 1;
            if iterations > MAX_GOLDEN_ITERATIONS {
                let tau = 0.5 * (a + b);
                return Err(EbError::NonConvergence {
                    last_tau_squared: tau,
                    last_log_likelihood: profile_log_likelihood(y, sigma, tau).unwrap_or(f64::NAN),
                });
            }
            if f1 >= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - GOLDEN_RATIO * (b - a);
                f1 = profile_log_likelihood(y, sigma, x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + GOLDEN_RATIO * (b - a);
                f2 = profile_log_likelihood(y, sigma, x2);
            }
        }
        let interior = 0.5 * (a + b);
        let interior_ll = profile_log_likelihood(y, sigma, interior);
        // Clamp to the boundary when τ² = 0 is at least as good.
        let boundary_ll = profile_log_likelihood(y, sigma, 0.0);
        let (tau_squared, log_likelihood) = match (boundary_ll, interior_ll) {
            (Some(b_ll), Some(i_ll)) if b_ll >= i_ll => (0.0, b_ll),
            (_, Some(i_ll)) => (interior, i_ll),
            (Some(b_ll), None) => (0.0, b_ll),
            (None, None) => {
                return Err(EbError::SingularCovariance(
                    "marginal covariance Σ + τ²I not invertible anywhere in the bracket".into(),
                ))
            }
        };

        let prior_mean = gls_mean(y, sigma, tau_squared).ok_or_else(|| {
            EbError::SingularCovariance("marginal covariance not invertible at the optimum".into())
        })?;
        Self::from_prior(prior_mean, tau_squared, data, Some(log_likelihood))
    }

    /// Conjugate posterior under an externally fixed prior N(m·1, τ²·I).
    pub fn with_prior(
        prior_mean: f64,
        prior_variance: f64,
        data: &EffectEstimates,
    ) -> Result<Self, EbError> {
        if !prior_variance.is_finite() || prior_variance < 0.0 {
            return Err(EbError::InvalidPrior {
                what: format!("prior variance must be finite and >= 0, got {prior_variance}"),
            });
        }
        if !prior_mean.is_finite() {
            return Err(EbError::InvalidPrior {
                what: format!("prior mean must be finite, got {prior_mean}"),
            });
        }
        Self::from_prior(prior_mean, prior_variance, data, None)
    }

    fn from_prior(
        prior_mean: f64,
        prior_variance: f64,
        data: &EffectEstimates,
        log_likelihood: Option<f64>,
    ) -> Result<Self, EbError> {
        let k = data.len();
        let y = data.estimates();
        let sigma = data.covariance();
        let marginal = marginal_covariance(sigma, prior_variance);
        let chol = CholeskyFactor::new(&marginal).ok_or_else(|| {
            EbError::SingularCovariance("Σ + τ²I is not positive definite".into())
        })?;
        let residual = y.mapv(|v| v - prior_mean);
        let solved = chol.solve(&residual).ok_or_else(|| {
            EbError::SingularCovariance("Σ + τ²I is singular; cannot form the posterior".into())
        })?;

        // Posterior mean: m·1 + τ²(Σ + τ²I)⁻¹(Y − m·1).
        let posterior_mean = residual
            .iter()
            .zip(solved.iter())
            .map(|(_, s)| prior_mean + prior_variance * s)
            .collect::<Array1<f64>>();

        // Posterior covariance: τ²I − τ⁴(Σ + τ²I)⁻¹, symmetrized.
        let mut posterior_covariance = Array2::zeros((k, k));
        if prior_variance > 0.0 {
            let mut unit = Array1::zeros(k);
            for col in 0..k {
                unit.fill(0.0);
                unit[col] = 1.0;
                let column = chol.solve(&unit).ok_or_else(|| {
                    EbError::SingularCovariance("Σ + τ²I is singular".into())
                })?;
                for row in 0..k {
                    posterior_covariance[[row, col]] =
                        -prior_variance * prior_variance * column[row];
                }
                posterior_covariance[[col, col]] += prior_variance;
            }
            for row in 0..k {
                for col in (row + 1)..k {
                    let mean = 0.5 * (posterior_covariance[[row, col]]
                        + posterior_covariance[[col, row]]);
                    posterior_covariance[[row, col]] = mean;
                    posterior_covariance[[col, row]] = mean;
                }
            }
        }

        let log_marginal_likelihood = match log_likelihood {
            Some(value) => value,
            None => log_marginal(y, sigma, prior_mean, prior_variance).unwrap_or(f64::NAN),
        };
        Ok(Self {
            prior_mean,
            prior_variance,
            posterior_mean,
            posterior_covariance,
            log_marginal_likelihood,
        })
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    pub fn prior_variance(&self) -> f64 {
        self.prior_variance
    }

    pub fn posterior_mean(&self) -> &Array1<f64> {
        &self.posterior_mean
    }

    pub fn posterior_covariance(&self) -> &Array2<f64> {
        &self.posterior_covariance
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_marginal_likelihood
    }
}

fn marginal_covariance(sigma: &Array2<f64>, tau_squared: f64) -> Array2<f64> {
    let mut marginal = sigma.clone();
    for i in 0..marginal.nrows() {
        marginal[[i, i]] += tau_squared;
    }
    marginal
}

fn gls_mean(y: &Array1<f64>, sigma: &Array2<f64>, tau_squared: f64) -> Option<f64> {
    let marginal = marginal_covariance(sigma, tau_squared);
    let chol = CholeskyFactor::new(&marginal)?;
    let ones = Array1::ones(y.len());
    let w_ones = chol.solve(&ones)?;
    let w_y = chol.solve(y)?;
    let denom = ones.dot(&w_ones);
    if denom <= 0.0 {
        return None;
    }
    Some(ones.dot(&w_y) / denom)
}

/// Marginal log-likelihood of Y under μ ~ N(m·1, τ²I), Y|μ ~ N(μ, Σ).
pub(super) fn log_marginal(
    y: &Array1<f64>,
    sigma: &Array2<f64>,
    prior_mean: f64,
    tau_squared: f64,
) -> Option<f64> {
    let k = y.len() as f64;
    let marginal = marginal_covariance(sigma, tau_squared);
    let chol = CholeskyFactor::new(&marginal)?;
    let log_det = chol.log_det()?;
    let residual = y.mapv(|v| v - prior_mean);
    let solved = chol.solve(&residual)?;
    let quad = residual.dot(&solved);
    Some(-0.5 * (k * (2.0 * std::f64::consts::PI).ln() + log_det + quad))
}

fn profile_log_likelihood(y: &Array1<f64>, sigma: &Array2<f64>, tau_squared: f64) -> Option<f64> {
    let m = gls_mean(y, sigma, tau_squared)?;
    log_marginal(y, sigma, m, tau_squared)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn estimates(y: Vec<f64>, variances: Vec<f64>) -> EffectEstimates {
        let k = y.len();
        EffectEstimates::with_variances(
            (0..k).map(|i| format!("t{i}")).collect(),
            Array1::from(y),
            Array1::from(variances),
        )
        .unwrap()
    }

    #[test]
    fn constant_estimates_force_degenerate_prior() {
        let data = estimates(vec![1.5; 6], vec![0.25; 6]);
        let fit = ParametricEbFit::fit(&data).unwrap();
        assert_eq!(fit.prior_variance(), 0.0);
        for &m in fit.posterior_mean() {
            assert_relative_eq!(m, 1.5, epsilon = 1e-9);
        }
        assert_eq!(fit.posterior_covariance().sum(), 0.0);
    }

    #[test]
    fn two_point_fit_matches_grid_oracle() {
        // K = 2, Y = (−1, 1), Σ = I. Brute-force the profile likelihood on
        // a fine τ² grid and check the optimizer found at least as good a
        // point, and the shrinkage factor matches τ̂²/(τ̂² + 1).
        let data = estimates(vec![-1.0, 1.0], vec![1.0, 1.0]);
        let fit = ParametricEbFit::fit(&data).unwrap();

        let y = data.estimates();
        let sigma = data.covariance();
        let mut best_tau = 0.0;
        let mut best_ll = f64::NEG_INFINITY;
        for i in 0..=40_000 {
            let tau = i as f64 * 1e-4;
            if let Some(ll) = profile_log_likelihood(y, sigma, tau) {
                if ll > best_ll {
                    best_ll = ll;
                    best_tau = tau;
                }
            }
        }
        assert!(fit.log_marginal_likelihood() >= best_ll - 1e-9);
        assert_relative_eq!(fit.prior_variance(), best_tau, epsilon = 1e-3);

        let shrink = fit.prior_variance() / (fit.prior_variance() + 1.0);
        assert_relative_eq!(fit.posterior_mean()[0], -shrink, epsilon = 1e-8);
        assert_relative_eq!(fit.posterior_mean()[1], shrink, epsilon = 1e-8);
    }

    #[test]
    fn fixed_prior_conjugate_closed_form() {
        let data = estimates(vec![2.0], vec![1.0]);
        // K = 1 is allowed with a fixed prior.
        let fit = ParametricEbFit::with_prior(0.0, 1.0, &data).unwrap();
        assert_relative_eq!(fit.posterior_mean()[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(fit.posterior_covariance()[[0, 0]], 0.5, epsilon = 1e-10);
    }

    #[test]
    fn posterior_mean_closed_form_cross_check() {
        // Posterior mean must equal Y − Σ(Σ + τ²I)⁻¹(Y − m·1).
        let data = EffectEstimates::new(
            vec!["a".into(), "b".into(), "c".into()],
            array![0.3, -0.8, 1.4],
            array![[0.5, 0.1, 0.0], [0.1, 0.7, 0.2], [0.0, 0.2, 0.9]],
        )
        .unwrap();
        let fit = ParametricEbFit::fit(&data).unwrap();
        let marginal = marginal_covariance(data.covariance(), fit.prior_variance());
        let chol = CholeskyFactor::new(&marginal).unwrap();
        let residual = data.estimates().mapv(|v| v - fit.prior_mean());
        let solved = chol.solve(&residual).unwrap();
        let sigma_solved = data.covariance().dot(&solved);
        for i in 0..3 {
            let expected = data.estimates()[i] - sigma_solved[i];
            assert_relative_eq!(fit.posterior_mean()[i], expected, epsilon = 1e-8);
        }
    }

    #[test]
    fn fitted_point_beats_surrounding_grid() {
        let data = estimates(vec![0.1, 1.9, -0.7, 0.4, 2.4, -1.2], vec![0.3; 6]);
        let fit = ParametricEbFit::fit(&data).unwrap();
        let y = data.estimates();
        let sigma = data.covariance();
        let m_hat = fit.prior_mean();
        let tau_hat = fit.prior_variance();
        let best = fit.log_marginal_likelihood();
        for i in 0..50 {
            for j in 0..50 {
                let m = m_hat - 0.5 + i as f64 / 49.0;
                let tau = (tau_hat - 0.5 + j as f64 / 49.0).max(0.0);
                if let Some(ll) = log_marginal(y, sigma, m, tau) {
                    assert!(
                        best >= ll - 1e-7,
                        "grid point (m={m}, tau²={tau}) beats the fit: {ll} > {best}"
                    );
                }
            }
        }
    }

    #[test]
    fn shrinkage_lies_between_data_and_prior_mean() {
        let data = estimates(vec![-2.0, -0.5, 0.1, 0.9, 2.5], vec![0.4; 5]);
        let fit = ParametricEbFit::fit(&data).unwrap();
        for (idx, &y) in data.estimates().iter().enumerate() {
            let post = fit.posterior_mean()[idx];
            let lo = y.min(fit.prior_mean()) - 1e-9;
            let hi = y.max(fit.prior_mean()) + 1e-9;
            assert!(
                (lo..=hi).contains(&post),
                "posterior mean {post} outside [{lo}, {hi}]"
            );
        }
    }

    #[test]
    fn rejects_single_treatment_for_full_fit() {
        let data = estimates(vec![1.0], vec![1.0]);
        assert!(matches!(
            ParametricEbFit::fit(&data),
            Err(EbError::TooFewTreatments { .. })
        ));
    }
}
