//! Linear-regression replication model, fitted by Gibbs-style sampling.
//!
//! Per draw: sample regression coefficients β from the sampling
//! distribution of the OLS fit of the backed-out replication effects Y* on
//! Z = [1, original effect]; regress the squared residuals (Zβ − Y*)² on Z
//! and sample γ the same way (the error variance is modeled as linear in
//! Z); draw Y_k ~ N(βᵀZ_k, γᵀZ_k); record Φ(√n_k·Y_k − c_α). The model's
//! prediction is the per-study mean of those probabilities.

use super::BaselineError;
use crate::data_model::{backout_replication_effect, ReplicationDataset};
use crate::stats;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Sampled variances γᵀZ_k can come out negative; they are floored here and
/// the hit rate is reported alongside the predictions.
pub const VARIANCE_FLOOR: f64 = 1e-8;
const MIN_DRAWS: usize = 100;
const MIN_STUDIES: usize = 3;

#[derive(Debug, Clone)]
pub struct GibbsRegressionResult {
    /// Per-study mean predicted replication probability.
    pub probabilities: Array1<f64>,
    /// All recorded probabilities, one row per draw.
    pub draws: Array2<f64>,
    /// How many sampled variances hit the floor.
    pub variance_floor_hits: usize,
    /// Total sampled variances (draws × studies).
    pub variance_draws: usize,
}

impl GibbsRegressionResult {
    pub fn floor_hit_rate(&self) -> f64 {
        self.variance_floor_hits as f64 / self.variance_draws as f64
    }
}

struct Ols {
    coefficients: [f64; 2],
    /// Lower Cholesky factor of σ̂²(ZᵀZ)⁻¹.
    chol: [[f64; 2]; 2],
}

/// OLS of `target` on [1, x] with the homoskedastic coefficient covariance.
fn ols(x: &Array1<f64>, target: &Array1<f64>) -> Option<Ols> {
    let k = x.len() as f64;
    let sum_x = x.sum();
    let sum_xx = x.dot(x);
    let det = k * sum_xx - sum_x * sum_x;
    let scale = (sum_xx / k).max(1.0);
    if det <= 1e-12 * k * scale {
        return None;
    }
    let sum_t = target.sum();
    let sum_xt = x.dot(target);
    let b0 = (sum_xx * sum_t - sum_x * sum_xt) / det;
    let b1 = (k * sum_xt - sum_x * sum_t) / det;

    let mut rss = 0.0;
    for i in 0..x.len() {
        let r = target[i] - b0 - b1 * x[i];
        rss += r * r;
    }
    let dof = (x.len() as f64 - 2.0).max(1.0);
    let sigma2 = rss / dof;

    // σ̂²(ZᵀZ)⁻¹ for the 2×2 system, factored in closed form.
    let c00 = sigma2 * sum_xx / det;
    let c01 = -sigma2 * sum_x / det;
    let c11 = sigma2 * k / det;
    let l00 = c00.max(0.0).sqrt();
    let (l10, l11) = if l00 > 0.0 {
        let l10 = c01 / l00;
        (l10, (c11 - l10 * l10).max(0.0).sqrt())
    } else {
        (0.0, c11.max(0.0).sqrt())
    };
    Some(Ols {
        coefficients: [b0, b1],
        chol: [[l00, 0.0], [l10, l11]],
    })
}

fn sample_coefficients<R: Rng + ?Sized>(fit: &Ols, rng: &mut R) -> [f64; 2] {
    let z0: f64 = StandardNormal.sample(rng);
    let z1: f64 = StandardNormal.sample(rng);
    [
        fit.coefficients[0] + fit.chol[0][0] * z0,
        fit.coefficients[1] + fit.chol[1][0] * z0 + fit.chol[1][1] * z1,
    ]
}

/// Predict replication probabilities with the linear regression model.
pub fn gibbs_regression_replication(
    dataset: &ReplicationDataset,
    draws: usize,
    seed: u64,
) -> Result<GibbsRegressionResult, BaselineError> {
    let k = dataset.len();
    if k < MIN_STUDIES {
        return Err(BaselineError::TooFewStudies {
            needed: MIN_STUDIES,
            got: k,
        });
    }
    if draws < MIN_DRAWS {
        return Err(BaselineError::TooFewDraws {
            needed: MIN_DRAWS,
            got: draws,
        });
    }
    let features = dataset.original_effect().clone();
    let effects = backout_replication_effect(dataset);
    let effect_fit = ols(&features, &effects).ok_or(BaselineError::DegenerateFeatures)?;
    let critical = stats::critical_value(dataset.alpha());
    let sqrt_n: Vec<f64> = dataset
        .replication_n()
        .iter()
        .map(|n| (*n as f64).sqrt())
        .collect();

    let mut probability_draws = Array2::zeros((draws, k));
    let mut floor_hits = 0usize;
    for s in 0..draws {
        let mut rng = stats::substream(seed, s as u64);
        let beta = sample_coefficients(&effect_fit, &mut rng);

        let mut squared_residuals = Array1::zeros(k);
        for i in 0..k {
            let r = beta[0] + beta[1] * features[i] - effects[i];
            squared_residuals[i] = r * r;
        }
        // The residual regression inherits the non-degenerate features.
        let variance_fit =
            ols(&features, &squared_residuals).ok_or(BaselineError::DegenerateFeatures)?;
        let gamma = sample_coefficients(&variance_fit, &mut rng);

        for i in 0..k {
            let mut variance = gamma[0] + gamma[1] * features[i];
            if variance < VARIANCE_FLOOR {
                variance = VARIANCE_FLOOR;
                floor_hits += 1;
            }
            let z: f64 = StandardNormal.sample(&mut rng);
            let effect = beta[0] + beta[1] * features[i] + variance.sqrt() * z;
            probability_draws[[s, i]] = stats::normal_cdf(sqrt_n[i] * effect - critical);
        }
    }

    let probabilities = probability_draws.sum_axis(ndarray::Axis(0)) / draws as f64;
    Ok(GibbsRegressionResult {
        probabilities,
        draws: probability_draws,
        variance_floor_hits: floor_hits,
        variance_draws: draws * k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{ForecastMatrix, ReplicationDataset, Sign};
    use crate::stats::substream;
    use ndarray::Array2;
    use rand_distr::{Distribution, StandardNormal};

    /// Build a replication dataset whose backed-out Y* equal `effects`
    /// exactly, by inverting the two-sided p-value formula.
    fn dataset_with_effects(original: &[f64], effects: &[f64], n: u64) -> ReplicationDataset {
        let k = original.len();
        let mut p = Vec::with_capacity(k);
        let mut directions = Vec::with_capacity(k);
        for &y in effects {
            let z = (n as f64).sqrt() * y;
            // 2Φ(−|z|) = 2(1 − Φ(|z|)) without losing the far tail.
            p.push((2.0 * stats::normal_cdf(-z.abs())).clamp(1e-300, 1.0));
            directions.push(if z >= 0.0 { Sign::Positive } else { Sign::Negative });
        }
        let forecasts = ForecastMatrix::new(
            Array2::from_elem((k, 2), 0.5),
            Array2::from_elem((k, 2), false),
            vec!["f1".into(), "f2".into()],
        )
        .unwrap();
        ReplicationDataset::new(
            (0..k).map(|i| format!("s{i}")).collect(),
            Array1::from(original.to_vec()),
            vec![n; k],
            Array1::from(p),
            directions,
            0.05,
            forecasts,
        )
        .unwrap()
    }

    #[test]
    fn zero_effects_predict_half_alpha() {
        let original: Vec<f64> = (0..20).map(|i| i as f64 / 10.0).collect();
        let effects = vec![0.0; 20];
        let data = dataset_with_effects(&original, &effects, 10_000);
        let result = gibbs_regression_replication(&data, 2_000, 11).unwrap();
        // Degenerate variance fit hits the floor everywhere.
        assert!(result.floor_hit_rate() > 0.99);
        for &p in &result.probabilities {
            assert!((p - 0.025).abs() < 0.01, "expected ~alpha/2, got {p}");
        }
    }

    #[test]
    fn recovers_linear_signal_near_plug_in() {
        let mut rng = substream(17, 0);
        let k = 40;
        let original: Vec<f64> = (0..k).map(|i| 0.8 * i as f64 / (k - 1) as f64).collect();
        let effects: Vec<f64> = original
            .iter()
            .map(|o| {
                let z: f64 = StandardNormal.sample(&mut rng);
                0.5 * o + 0.1 * z
            })
            .collect();
        let data = dataset_with_effects(&original, &effects, 100);
        let result = gibbs_regression_replication(&data, 10_000, 23).unwrap();

        // Plug-in oracle: Φ(√n·β̂ᵀZ_k − c_α) from a direct OLS fit.
        let x = Array1::from(original.clone());
        let y = backout_replication_effect(&data);
        let fit = ols(&x, &y).unwrap();
        let study = original.iter().position(|o| (*o - 0.4).abs() < 0.02).unwrap();
        let plug_in = stats::normal_cdf(
            10.0 * (fit.coefficients[0] + fit.coefficients[1] * original[study]) - 1.959964,
        );
        let diff = (result.probabilities[study] - plug_in).abs();
        assert!(diff < 0.05, "gibbs {} vs plug-in {plug_in}", result.probabilities[study]);
        // True signal at original effect 0.4: Φ(√100·0.2 − 1.96) ≈ 0.516.
        assert!((result.probabilities[study] - 0.516).abs() < 0.08);
    }

    #[test]
    fn deterministic_under_seed_and_probabilities_in_unit_interval() {
        let original = [0.0, 0.2, 0.4, 0.6, 0.8];
        let effects = [0.05, 0.1, 0.2, 0.25, 0.35];
        let data = dataset_with_effects(&original, &effects, 150);
        let a = gibbs_regression_replication(&data, 500, 3).unwrap();
        let b = gibbs_regression_replication(&data, 500, 3).unwrap();
        assert_eq!(a.probabilities, b.probabilities);
        assert_eq!(a.draws, b.draws);
        assert!(a.probabilities.iter().all(|p| (0.0..1.0).contains(p) || *p > 0.0));
        assert!(a.probabilities.iter().all(|p| *p > 0.0 && *p < 1.0));
    }

    #[test]
    fn larger_samples_raise_positive_replication_probability() {
        let original = [0.1, 0.3, 0.5, 0.7, 0.9, 1.1];
        let effects = [0.06, 0.14, 0.26, 0.34, 0.46, 0.54];
        let small = dataset_with_effects(&original, &effects, 100);
        let large = dataset_with_effects(&original, &effects, 400);
        let small_p = gibbs_regression_replication(&small, 4_000, 5).unwrap();
        let large_p = gibbs_regression_replication(&large, 4_000, 5).unwrap();
        let small_mean = small_p.probabilities.sum() / 6.0;
        let large_mean = large_p.probabilities.sum() / 6.0;
        assert!(
            large_mean >= small_mean - 0.02,
            "expected weak increase: {small_mean} -> {large_mean}"
        );
    }

    #[test]
    fn parameter_uncertainty_pulls_probabilities_toward_half() {
        let mut rng = substream(29, 0);
        let k = 30;
        let original: Vec<f64> = (0..k).map(|i| i as f64 / (k - 1) as f64).collect();
        let effects: Vec<f64> = original
            .iter()
            .map(|o| {
                let z: f64 = StandardNormal.sample(&mut rng);
                0.4 * o + 0.05 * z
            })
            .collect();
        let data = dataset_with_effects(&original, &effects, 200);
        let result = gibbs_regression_replication(&data, 8_000, 31).unwrap();
        let x = Array1::from(original.clone());
        let y = backout_replication_effect(&data);
        let fit = ols(&x, &y).unwrap();
        let c = stats::critical_value(0.05);
        for i in 0..k {
            let plug_in = stats::normal_cdf(
                (200.0_f64).sqrt() * (fit.coefficients[0] + fit.coefficients[1] * original[i]) - c,
            );
            let gibbs = result.probabilities[i];
            assert!(
                (gibbs - 0.5).abs() <= (plug_in - 0.5).abs() + 0.02,
                "study {i}: gibbs {gibbs} further from 0.5 than plug-in {plug_in}"
            );
        }
    }

    #[test]
    fn rejects_degenerate_features_and_too_few_draws() {
        let data = dataset_with_effects(&[0.4, 0.4, 0.4, 0.4], &[0.1, 0.2, 0.1, 0.2], 100);
        assert!(matches!(
            gibbs_regression_replication(&data, 1_000, 1),
            Err(BaselineError::DegenerateFeatures)
        ));

        let data = dataset_with_effects(&[0.1, 0.2, 0.3, 0.4], &[0.1, 0.2, 0.1, 0.2], 100);
        assert!(matches!(
            gibbs_regression_replication(&data, 99, 1),
            Err(BaselineError::TooFewDraws { .. })
        ));
    }
}
