//! Ground-truth-known synthetic prediction studies and the brute-force
//! estimand oracle used to validate the Monte Carlo machinery.

use crate::data_model::{DataError, EffectEstimates, ForecastMatrix};
use crate::inference::{EstimandKind, EstimandSpec};
use crate::stats;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("invalid synthetic spec: {what}")]
    Invalid { what: String },
    #[error("generation failed after {attempts} retries: the missing mask kept violating \
             the one-observation-per-row/column invariant")]
    RetriesExhausted { attempts: usize },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("estimand `{estimand}` requires model predictions")]
    ModelRequired { estimand: String },
}

/// Distribution the true effects are drawn from.
#[derive(Debug, Clone, Copy)]
pub enum TrueEffectPrior {
    PointMass(f64),
    Normal { mean: f64, variance: f64 },
    /// Two equally likely atoms.
    TwoPoint { low: f64, high: f64 },
}

#[derive(Debug, Clone)]
pub struct SyntheticStudySpec {
    pub treatments: usize,
    pub forecasters: usize,
    pub true_effect_prior: TrueEffectPrior,
    /// Sampling noise of the experimental estimates, per treatment.
    pub noise_sd: f64,
    /// Constant added to every forecast.
    pub forecaster_bias: f64,
    pub forecaster_noise_sd: f64,
    /// Probability a forecaster skips a treatment.
    pub missing_rate: f64,
    pub seed: u64,
}

impl SyntheticStudySpec {
    fn validate(&self) -> Result<(), SyntheticError> {
        if self.treatments == 0 || self.forecasters == 0 {
            return Err(SyntheticError::Invalid {
                what: "need at least one treatment and one forecaster".into(),
            });
        }
        if self.noise_sd < 0.0 || self.forecaster_noise_sd < 0.0 {
            return Err(SyntheticError::Invalid {
                what: "noise parameters must be non-negative".into(),
            });
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(SyntheticError::Invalid {
                what: format!("missing_rate must be in [0, 1), got {}", self.missing_rate),
            });
        }
        if let TrueEffectPrior::Normal { variance, .. } = self.true_effect_prior {
            if variance < 0.0 {
                return Err(SyntheticError::Invalid {
                    what: "prior variance must be non-negative".into(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticStudy {
    pub true_effects: Array1<f64>,
    pub effects: EffectEstimates,
    pub forecasts: ForecastMatrix,
}

const MAX_RETRIES: usize = 100;

/// Generate a study: μ from the prior, Y = μ + noise, X = μ + bias +
/// forecaster noise, cells dropped at `missing_rate`. When the missing
/// mask strips a row or column bare, generation retries (up to 100 times)
/// on the next substream.
pub fn generate(spec: &SyntheticStudySpec) -> Result<SyntheticStudy, SyntheticError> {
    spec.validate()?;
    for attempt in 0..MAX_RETRIES {
        let mut rng = stats::substream(spec.seed, attempt as u64);
        let k = spec.treatments;
        let f = spec.forecasters;

        let mut true_effects = Array1::zeros(k);
        for value in true_effects.iter_mut() {
            *value = match spec.true_effect_prior {
                TrueEffectPrior::PointMass(v) => v,
                TrueEffectPrior::Normal { mean, variance } => {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mean + variance.sqrt() * z
                }
                TrueEffectPrior::TwoPoint { low, high } => {
                    if rng.random::<bool>() {
                        high
                    } else {
                        low
                    }
                }
            };
        }

        let mut estimates = Array1::zeros(k);
        for (idx, value) in estimates.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *value = true_effects[idx] + spec.noise_sd * z;
        }

        let mut predictions = Array2::zeros((k, f));
        let mut missing = Array2::from_elem((k, f), false);
        for row in 0..k {
            for col in 0..f {
                let z: f64 = StandardNormal.sample(&mut rng);
                predictions[[row, col]] =
                    true_effects[row] + spec.forecaster_bias + spec.forecaster_noise_sd * z;
                if spec.missing_rate > 0.0 {
                    missing[[row, col]] = rng.random::<f64>() < spec.missing_rate;
                }
            }
        }

        let effects = EffectEstimates::with_variances(
            (0..k).map(|i| format!("t{i:03}")).collect(),
            estimates,
            Array1::from_elem(k, spec.noise_sd * spec.noise_sd),
        )?;
        match ForecastMatrix::new(
            predictions,
            missing,
            (0..f).map(|i| format!("f{i:03}")).collect(),
        ) {
            Ok(forecasts) => {
                return Ok(SyntheticStudy {
                    true_effects,
                    effects,
                    forecasts,
                })
            }
            Err(DataError::EmptyForecaster { .. }) | Err(DataError::EmptyTreatment { .. }) => {
                continue;
            }
            Err(other) => return Err(other.into()),
        }
    }
    Err(SyntheticError::RetriesExhausted {
        attempts: MAX_RETRIES,
    })
}

/// Evaluate an estimand directly against known true effects by unweighted
/// averaging over observed cells. This is the oracle the Monte Carlo
/// machinery is checked against; `model` doubles as the oracle prediction
/// vector for [`EstimandKind::RiskOracle`].
pub fn brute_force_estimand(
    true_effects: &Array1<f64>,
    forecasts: &ForecastMatrix,
    spec: &EstimandSpec,
    model: Option<&Array1<f64>>,
) -> Result<f64, SyntheticError> {
    let k = forecasts.num_treatments();
    let f = forecasts.num_forecasters();
    if true_effects.len() != k {
        return Err(SyntheticError::Invalid {
            what: format!("{} true effects vs {k} forecast rows", true_effects.len()),
        });
    }
    let x = forecasts.predictions();
    let needs_model = matches!(
        spec.kind,
        EstimandKind::RiskModel | EstimandKind::RiskOracle | EstimandKind::ComparativeRisk
    );
    if needs_model && model.is_none() {
        return Err(SyntheticError::ModelRequired {
            estimand: spec.kind.name().into(),
        });
    }
    if let Some(model) = model {
        if model.len() != k {
            return Err(SyntheticError::Invalid {
                what: format!("{} model predictions vs {k} treatments", model.len()),
            });
        }
    }

    let mean_over_cells = |value: &dyn Fn(usize, usize) -> f64| -> f64 {
        let mut total = 0.0;
        let mut count = 0usize;
        for row in 0..k {
            for col in 0..f {
                if forecasts.is_observed(row, col) {
                    total += value(row, col);
                    count += 1;
                }
            }
        }
        total / count as f64
    };

    Ok(match spec.kind {
        EstimandKind::BiasOverall => {
            mean_over_cells(&|row, col| x[[row, col]] - true_effects[row])
        }
        EstimandKind::BiasDifference { first, second } => {
            let mut total = 0.0;
            let mut count = 0usize;
            for col in 0..f {
                if forecasts.is_observed(first, col) && forecasts.is_observed(second, col) {
                    total += x[[first, col]] - x[[second, col]];
                    count += 1;
                }
            }
            if count == 0 {
                return Err(SyntheticError::Invalid {
                    what: "no forecaster observes both treatments".into(),
                });
            }
            total / count as f64 - (true_effects[first] - true_effects[second])
        }
        EstimandKind::RiskForecasters => {
            mean_over_cells(&|row, col| spec.loss.apply(true_effects[row], x[[row, col]]))
        }
        EstimandKind::RiskModel | EstimandKind::RiskOracle => {
            let model = model.unwrap();
            (0..k)
                .map(|row| spec.loss.apply(true_effects[row], model[row]))
                .sum::<f64>()
                / k as f64
        }
        EstimandKind::ComparativeRisk => {
            let model = model.unwrap();
            mean_over_cells(&|row, col| {
                spec.loss.apply(true_effects[row], x[[row, col]])
                    - spec.loss.apply(true_effects[row], model[row])
            })
        }
    })
}
