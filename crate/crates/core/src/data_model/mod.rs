//! Dataset abstractions for prediction studies: experimental effect
//! estimates, forecaster prediction matrices, and replication study data.
//!
//! All types validate their invariants at construction and are immutable
//! afterwards, so they are safe to share across threads.

mod csv;

pub use csv::{
    load_categories, load_effect_study, load_replication_study, write_effects_csv,
    write_forecasts_csv, write_replication_csvs,
};

use crate::stats::{self, CholeskyFactor};
use ndarray::{Array1, Array2};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{file}: malformed CSV: {source}")]
    Csv {
        file: String,
        source: Box<::csv::Error>,
    },
    #[error("{file}: missing required column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("{file} row {row}, column `{column}`: {message}")]
    InvalidCell {
        file: String,
        row: usize,
        column: String,
        message: String,
    },
    #[error("{file} row {row}: duplicate entry for {what}")]
    Duplicate {
        file: String,
        row: usize,
        what: String,
    },
    #[error(
        "treatment ids do not align: in forecasts but not effects {unknown:?}, \
         in effects but never forecast {unforecast:?}"
    )]
    MisalignedTreatments {
        unknown: Vec<String>,
        unforecast: Vec<String>,
    },
    #[error("study ids do not align: in forecasts but not replication data {unknown:?}, \
             in replication data but never forecast {unforecast:?}")]
    MisalignedStudies {
        unknown: Vec<String>,
        unforecast: Vec<String>,
    },
    #[error("covariance matrix is not symmetric (max asymmetry {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },
    #[error("covariance matrix is not positive semi-definite: {detail}")]
    NotPositiveSemiDefinite { detail: String },
    #[error("dimension mismatch: {what}")]
    DimensionMismatch { what: String },
    #[error("invalid value: {what}")]
    Invalid { what: String },
    #[error("forecaster `{forecaster_id}` has no observed predictions")]
    EmptyForecaster { forecaster_id: String },
    #[error("treatment `{treatment_id}` has no observed predictions")]
    EmptyTreatment { treatment_id: String },
    #[error("{file} row {row}: forecaster `{forecaster_id}` assigned conflicting groups")]
    InconsistentGroup {
        file: String,
        row: usize,
        forecaster_id: String,
    },
}

/// A ±1 coding used for replication directions and reverse-coded categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }

    /// Parse "+1", "1", or "-1".
    pub fn parse(text: &str) -> Option<Self> {
        match text.trim() {
            "1" | "+1" => Some(Sign::Positive),
            "-1" => Some(Sign::Negative),
            _ => None,
        }
    }
}

/// Category assignment of one treatment: a label plus a ±1 coding so that
/// positive bias always means overestimating the phenomenon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryAssignment {
    pub category: String,
    pub sign: Sign,
}

/// Noisy experimental estimates Y of the true treatment effects, together
/// with the sampling covariance Σ of the estimator.
#[derive(Debug, Clone)]
pub struct EffectEstimates {
    treatment_ids: Vec<String>,
    estimates: Array1<f64>,
    covariance: Array2<f64>,
}

const SYMMETRY_TOL: f64 = 1e-8;

impl EffectEstimates {
    pub fn new(
        treatment_ids: Vec<String>,
        estimates: Array1<f64>,
        covariance: Array2<f64>,
    ) -> Result<Self, DataError> {
        let k = treatment_ids.len();
        if estimates.len() != k || covariance.nrows() != k || covariance.ncols() != k {
            return Err(DataError::DimensionMismatch {
                what: format!(
                    "{} treatment ids, {} estimates, {}x{} covariance",
                    k,
                    estimates.len(),
                    covariance.nrows(),
                    covariance.ncols()
                ),
            });
        }
        if k == 0 {
            return Err(DataError::Invalid {
                what: "need at least one treatment".into(),
            });
        }
        let mut unique = std::collections::HashSet::new();
        for id in &treatment_ids {
            if !unique.insert(id) {
                return Err(DataError::Invalid {
                    what: format!("duplicate treatment id `{id}`"),
                });
            }
        }
        if let Some(bad) = estimates.iter().find(|v| !v.is_finite()) {
            return Err(DataError::Invalid {
                what: format!("non-finite estimate {bad}"),
            });
        }
        if let Some(bad) = covariance.iter().find(|v| !v.is_finite()) {
            return Err(DataError::Invalid {
                what: format!("non-finite covariance entry {bad}"),
            });
        }
        let scale = covariance
            .diag()
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
            .max(1.0);
        let mut max_asym = 0.0_f64;
        for i in 0..k {
            for j in (i + 1)..k {
                max_asym = max_asym.max((covariance[[i, j]] - covariance[[j, i]]).abs());
            }
        }
        if max_asym > SYMMETRY_TOL * scale {
            return Err(DataError::NotSymmetric {
                max_asymmetry: max_asym,
            });
        }
        // Diagonal matrices are PSD iff the diagonal is non-negative; skip
        // the dense factorization, which is cubic in K.
        let diagonal = {
            let mut diagonal = true;
            'outer: for i in 0..k {
                for j in 0..k {
                    if i != j && covariance[[i, j]] != 0.0 {
                        diagonal = false;
                        break 'outer;
                    }
                }
            }
            diagonal
        };
        if diagonal {
            if let Some((idx, bad)) = covariance
                .diag()
                .iter()
                .enumerate()
                .find(|(_, v)| **v < 0.0)
            {
                return Err(DataError::NotPositiveSemiDefinite {
                    detail: format!(
                        "negative variance {bad} for treatment `{}`",
                        treatment_ids[idx]
                    ),
                });
            }
        } else if CholeskyFactor::new(&covariance).is_none() {
            return Err(DataError::NotPositiveSemiDefinite {
                detail: "Cholesky factorization failed even with jitter".into(),
            });
        }
        Ok(Self {
            treatment_ids,
            estimates,
            covariance,
        })
    }

    /// Construct with independent errors from a variance vector (diagonal Σ).
    pub fn with_variances(
        treatment_ids: Vec<String>,
        estimates: Array1<f64>,
        variances: Array1<f64>,
    ) -> Result<Self, DataError> {
        if let Some((idx, bad)) = variances.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(DataError::NotPositiveSemiDefinite {
                detail: format!(
                    "negative variance {bad} for treatment `{}`",
                    treatment_ids.get(idx).map(String::as_str).unwrap_or("?")
                ),
            });
        }
        let covariance = Array2::from_diag(&variances);
        Self::new(treatment_ids, estimates, covariance)
    }

    pub fn len(&self) -> usize {
        self.treatment_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treatment_ids.is_empty()
    }

    pub fn treatment_ids(&self) -> &[String] {
        &self.treatment_ids
    }

    pub fn index_of(&self, treatment_id: &str) -> Option<usize> {
        self.treatment_ids.iter().position(|id| id == treatment_id)
    }

    pub fn estimates(&self) -> &Array1<f64> {
        &self.estimates
    }

    pub fn covariance(&self) -> &Array2<f64> {
        &self.covariance
    }

    pub fn variances(&self) -> Array1<f64> {
        self.covariance.diag().to_owned()
    }

    pub fn std_devs(&self) -> Array1<f64> {
        self.covariance.diag().mapv(f64::sqrt)
    }

    /// True when all off-diagonal covariance entries are (numerically) zero.
    pub fn is_diagonal(&self) -> bool {
        let k = self.len();
        let scale = self
            .covariance
            .diag()
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        for i in 0..k {
            for j in 0..k {
                if i != j && self.covariance[[i, j]].abs() > 1e-12 * scale {
                    return false;
                }
            }
        }
        true
    }
}

/// K×F matrix of forecaster predictions with a missingness mask, plus
/// optional forecaster group labels and treatment category codings.
#[derive(Debug, Clone)]
pub struct ForecastMatrix {
    predictions: Array2<f64>,
    missing: Array2<bool>,
    forecaster_ids: Vec<String>,
    forecaster_groups: Option<Vec<Option<String>>>,
    treatment_categories: Option<Vec<Option<CategoryAssignment>>>,
}

impl ForecastMatrix {
    /// `predictions` is K×F; entries where `missing` is true are ignored
    /// (their stored values are irrelevant).
    pub fn new(
        predictions: Array2<f64>,
        missing: Array2<bool>,
        forecaster_ids: Vec<String>,
    ) -> Result<Self, DataError> {
        let (k, f) = predictions.dim();
        if missing.dim() != (k, f) {
            return Err(DataError::DimensionMismatch {
                what: format!(
                    "predictions {k}x{f} vs mask {}x{}",
                    missing.nrows(),
                    missing.ncols()
                ),
            });
        }
        if forecaster_ids.len() != f {
            return Err(DataError::DimensionMismatch {
                what: format!("{f} prediction columns vs {} forecaster ids", forecaster_ids.len()),
            });
        }
        if k == 0 || f == 0 {
            return Err(DataError::Invalid {
                what: "forecast matrix must have at least one treatment and one forecaster".into(),
            });
        }
        let mut unique = std::collections::HashSet::new();
        for id in &forecaster_ids {
            if !unique.insert(id) {
                return Err(DataError::Invalid {
                    what: format!("duplicate forecaster id `{id}`"),
                });
            }
        }
        for ((row, col), value) in predictions.indexed_iter() {
            if !missing[[row, col]] && !value.is_finite() {
                return Err(DataError::Invalid {
                    what: format!(
                        "non-finite prediction {value} for treatment row {row}, forecaster `{}`",
                        forecaster_ids[col]
                    ),
                });
            }
        }
        for (col, id) in forecaster_ids.iter().enumerate() {
            if (0..k).all(|row| missing[[row, col]]) {
                return Err(DataError::EmptyForecaster {
                    forecaster_id: id.clone(),
                });
            }
        }
        for row in 0..k {
            if (0..f).all(|col| missing[[row, col]]) {
                return Err(DataError::EmptyTreatment {
                    treatment_id: format!("row {row}"),
                });
            }
        }
        Ok(Self {
            predictions,
            missing,
            forecaster_ids,
            forecaster_groups: None,
            treatment_categories: None,
        })
    }

    /// Attach per-forecaster group labels keyed by forecaster id. Ids absent
    /// from the map stay ungrouped.
    pub fn with_groups(mut self, groups: &BTreeMap<String, String>) -> Result<Self, DataError> {
        for id in groups.keys() {
            if !self.forecaster_ids.contains(id) {
                return Err(DataError::Invalid {
                    what: format!("group label for unknown forecaster `{id}`"),
                });
            }
        }
        self.forecaster_groups = Some(
            self.forecaster_ids
                .iter()
                .map(|id| groups.get(id).cloned())
                .collect(),
        );
        Ok(self)
    }

    /// Attach category assignments aligned with the treatment rows.
    pub fn with_categories(
        mut self,
        categories: Vec<Option<CategoryAssignment>>,
    ) -> Result<Self, DataError> {
        if categories.len() != self.num_treatments() {
            return Err(DataError::DimensionMismatch {
                what: format!(
                    "{} category assignments vs {} treatments",
                    categories.len(),
                    self.num_treatments()
                ),
            });
        }
        self.treatment_categories = Some(categories);
        Ok(self)
    }

    pub fn num_treatments(&self) -> usize {
        self.predictions.nrows()
    }

    pub fn num_forecasters(&self) -> usize {
        self.predictions.ncols()
    }

    pub fn forecaster_ids(&self) -> &[String] {
        &self.forecaster_ids
    }

    pub fn predictions(&self) -> &Array2<f64> {
        &self.predictions
    }

    pub fn is_observed(&self, treatment: usize, forecaster: usize) -> bool {
        !self.missing[[treatment, forecaster]]
    }

    pub fn prediction(&self, treatment: usize, forecaster: usize) -> Option<f64> {
        if self.is_observed(treatment, forecaster) {
            Some(self.predictions[[treatment, forecaster]])
        } else {
            None
        }
    }

    pub fn missing_mask(&self) -> &Array2<bool> {
        &self.missing
    }

    pub fn observed_count(&self) -> usize {
        self.missing.iter().filter(|m| !**m).count()
    }

    pub fn group_of(&self, forecaster: usize) -> Option<&str> {
        self.forecaster_groups
            .as_ref()
            .and_then(|groups| groups[forecaster].as_deref())
    }

    pub fn has_groups(&self) -> bool {
        self.forecaster_groups
            .as_ref()
            .is_some_and(|groups| groups.iter().any(Option::is_some))
    }

    /// Distinct group labels in sorted order with their member columns.
    pub fn groups(&self) -> Vec<(String, Vec<usize>)> {
        let mut by_label: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        if let Some(groups) = &self.forecaster_groups {
            for (col, label) in groups.iter().enumerate() {
                if let Some(label) = label {
                    by_label.entry(label.clone()).or_default().push(col);
                }
            }
        }
        by_label.into_iter().collect()
    }

    pub fn category_of(&self, treatment: usize) -> Option<&CategoryAssignment> {
        self.treatment_categories
            .as_ref()
            .and_then(|cats| cats[treatment].as_ref())
    }

    pub fn has_categories(&self) -> bool {
        self.treatment_categories
            .as_ref()
            .is_some_and(|cats| cats.iter().any(Option::is_some))
    }

    /// Distinct category labels in sorted order with member rows and signs.
    pub fn categories(&self) -> Vec<(String, Vec<(usize, Sign)>)> {
        let mut by_label: BTreeMap<String, Vec<(usize, Sign)>> = BTreeMap::new();
        if let Some(cats) = &self.treatment_categories {
            for (row, assignment) in cats.iter().enumerate() {
                if let Some(assignment) = assignment {
                    by_label
                        .entry(assignment.category.clone())
                        .or_default()
                        .push((row, assignment.sign));
                }
            }
        }
        by_label.into_iter().collect()
    }
}

/// One replication prediction study: per-study replication statistics plus
/// the forecasters' predicted replication probabilities.
#[derive(Debug, Clone)]
pub struct ReplicationDataset {
    study_ids: Vec<String>,
    original_effect: Array1<f64>,
    replication_n: Vec<u64>,
    replication_p: Array1<f64>,
    replication_direction: Vec<Sign>,
    alpha: f64,
    forecasts: ForecastMatrix,
}

pub const DEFAULT_ALPHA: f64 = 0.05;

impl ReplicationDataset {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        study_ids: Vec<String>,
        original_effect: Array1<f64>,
        replication_n: Vec<u64>,
        replication_p: Array1<f64>,
        replication_direction: Vec<Sign>,
        alpha: f64,
        forecasts: ForecastMatrix,
    ) -> Result<Self, DataError> {
        let k = study_ids.len();
        if original_effect.len() != k
            || replication_n.len() != k
            || replication_p.len() != k
            || replication_direction.len() != k
        {
            return Err(DataError::DimensionMismatch {
                what: "replication columns have differing lengths".into(),
            });
        }
        if forecasts.num_treatments() != k {
            return Err(DataError::DimensionMismatch {
                what: format!(
                    "{} studies vs {} forecast rows",
                    k,
                    forecasts.num_treatments()
                ),
            });
        }
        if !(0.0..1.0).contains(&alpha) || alpha <= 0.0 {
            return Err(DataError::Invalid {
                what: format!("alpha must be in (0, 1), got {alpha}"),
            });
        }
        if let Some(bad) = original_effect.iter().find(|v| !v.is_finite()) {
            return Err(DataError::Invalid {
                what: format!("non-finite original effect {bad}"),
            });
        }
        for (idx, n) in replication_n.iter().enumerate() {
            if *n < 2 {
                return Err(DataError::Invalid {
                    what: format!("replication_n must be >= 2, study `{}`", study_ids[idx]),
                });
            }
        }
        for (idx, p) in replication_p.iter().enumerate() {
            if !(*p > 0.0 && *p <= 1.0) {
                return Err(DataError::Invalid {
                    what: format!(
                        "replication_p must be in (0, 1], got {p} for study `{}`",
                        study_ids[idx]
                    ),
                });
            }
        }
        for ((row, col), value) in forecasts.predictions().indexed_iter() {
            if forecasts.is_observed(row, col) && !(0.0..=1.0).contains(value) {
                return Err(DataError::Invalid {
                    what: format!(
                        "replication forecast must be a probability in [0, 1], got {value} \
                         for study `{}`, forecaster `{}`",
                        study_ids[row],
                        forecasts.forecaster_ids()[col]
                    ),
                });
            }
        }
        Ok(Self {
            study_ids,
            original_effect,
            replication_n,
            replication_p,
            replication_direction,
            alpha,
            forecasts,
        })
    }

    pub fn len(&self) -> usize {
        self.study_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.study_ids.is_empty()
    }

    pub fn study_ids(&self) -> &[String] {
        &self.study_ids
    }

    pub fn original_effect(&self) -> &Array1<f64> {
        &self.original_effect
    }

    pub fn replication_n(&self) -> &[u64] {
        &self.replication_n
    }

    pub fn replication_p(&self) -> &Array1<f64> {
        &self.replication_p
    }

    pub fn replication_direction(&self) -> &[Sign] {
        &self.replication_direction
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn forecasts(&self) -> &ForecastMatrix {
        &self.forecasts
    }
}

/// Back out the normalized replication effect estimates Y* from sample
/// sizes, p-values, and effect directions:
/// √n·Y* = Φ⁻¹(1 − p/2) when the direction is positive, Φ⁻¹(p/2) otherwise.
pub fn backout_replication_effect(dataset: &ReplicationDataset) -> Array1<f64> {
    let k = dataset.len();
    let mut out = Array1::zeros(k);
    for idx in 0..k {
        let p = dataset.replication_p[idx];
        // Φ⁻¹(1 − p/2) = −Φ⁻¹(p/2); the right-hand form keeps full
        // precision for tiny p, where 1 − p/2 rounds to 1.
        let z = match dataset.replication_direction[idx] {
            Sign::Positive => -stats::normal_quantile(p / 2.0),
            Sign::Negative => stats::normal_quantile(p / 2.0),
        };
        out[idx] = z / (dataset.replication_n[idx] as f64).sqrt();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn simple_forecasts(k: usize, f: usize, value: f64) -> ForecastMatrix {
        ForecastMatrix::new(
            Array2::from_elem((k, f), value),
            Array2::from_elem((k, f), false),
            (0..f).map(|i| format!("f{i}")).collect(),
        )
        .unwrap()
    }

    fn simple_replication(p: f64, direction: Sign, n: u64) -> ReplicationDataset {
        ReplicationDataset::new(
            vec!["s1".into()],
            array![0.4],
            vec![n],
            array![p],
            vec![direction],
            DEFAULT_ALPHA,
            simple_forecasts(1, 2, 0.6),
        )
        .unwrap()
    }

    #[test]
    fn effect_estimates_validate_dimensions() {
        let err = EffectEstimates::new(
            vec!["a".into(), "b".into()],
            array![1.0],
            Array2::eye(2),
        );
        assert!(matches!(err, Err(DataError::DimensionMismatch { .. })));
    }

    #[test]
    fn effect_estimates_reject_asymmetric_covariance() {
        let cov = array![[1.0, 0.5], [0.2, 1.0]];
        let err = EffectEstimates::new(vec!["a".into(), "b".into()], array![0.0, 0.0], cov);
        assert!(matches!(err, Err(DataError::NotSymmetric { .. })));
    }

    #[test]
    fn effect_estimates_reject_negative_variance() {
        let err = EffectEstimates::with_variances(
            vec!["a".into(), "b".into()],
            array![0.0, 0.0],
            array![1.0, -0.01],
        );
        assert!(matches!(err, Err(DataError::NotPositiveSemiDefinite { .. })));
    }

    #[test]
    fn diagonal_detection() {
        let diag = EffectEstimates::with_variances(
            vec!["a".into(), "b".into()],
            array![0.0, 1.0],
            array![1.0, 2.0],
        )
        .unwrap();
        assert!(diag.is_diagonal());

        let full = EffectEstimates::new(
            vec!["a".into(), "b".into()],
            array![0.0, 1.0],
            array![[1.0, 0.3], [0.3, 2.0]],
        )
        .unwrap();
        assert!(!full.is_diagonal());
    }

    #[test]
    fn forecast_matrix_requires_observations_per_row_and_column() {
        let mut missing = Array2::from_elem((2, 2), false);
        missing[[0, 1]] = true;
        missing[[1, 1]] = true;
        let err = ForecastMatrix::new(
            Array2::zeros((2, 2)),
            missing,
            vec!["f1".into(), "f2".into()],
        );
        assert!(matches!(err, Err(DataError::EmptyForecaster { .. })));

        let mut missing = Array2::from_elem((2, 2), false);
        missing[[1, 0]] = true;
        missing[[1, 1]] = true;
        let err = ForecastMatrix::new(
            Array2::zeros((2, 2)),
            missing,
            vec!["f1".into(), "f2".into()],
        );
        assert!(matches!(err, Err(DataError::EmptyTreatment { .. })));
    }

    #[test]
    fn forecast_matrix_rejects_non_finite_observed_cells() {
        let mut predictions = Array2::zeros((1, 2));
        predictions[[0, 1]] = f64::NAN;
        let err = ForecastMatrix::new(
            predictions,
            Array2::from_elem((1, 2), false),
            vec!["f1".into(), "f2".into()],
        );
        assert!(matches!(err, Err(DataError::Invalid { .. })));
    }

    #[test]
    fn groups_collect_sorted() {
        let mut groups = BTreeMap::new();
        groups.insert("f0".to_string(), "novice".to_string());
        groups.insert("f2".to_string(), "expert".to_string());
        let matrix = simple_forecasts(1, 3, 0.0).with_groups(&groups).unwrap();
        assert_eq!(
            matrix.groups(),
            vec![
                ("expert".to_string(), vec![2]),
                ("novice".to_string(), vec![0]),
            ]
        );
        assert_eq!(matrix.group_of(1), None);
    }

    #[test]
    fn replication_dataset_rejects_bad_probabilities() {
        let matrix = simple_forecasts(1, 1, 1.3);
        let err = ReplicationDataset::new(
            vec!["s1".into()],
            array![0.1],
            vec![100],
            array![0.04],
            vec![Sign::Positive],
            DEFAULT_ALPHA,
            matrix,
        );
        assert!(matches!(err, Err(DataError::Invalid { .. })));
    }

    #[test]
    fn replication_dataset_rejects_p_zero_and_small_n() {
        let err = ReplicationDataset::new(
            vec!["s1".into()],
            array![0.1],
            vec![100],
            array![0.0],
            vec![Sign::Positive],
            DEFAULT_ALPHA,
            simple_forecasts(1, 1, 0.5),
        );
        assert!(matches!(err, Err(DataError::Invalid { .. })));

        let err = ReplicationDataset::new(
            vec!["s1".into()],
            array![0.1],
            vec![1],
            array![0.04],
            vec![Sign::Positive],
            DEFAULT_ALPHA,
            simple_forecasts(1, 1, 0.5),
        );
        assert!(matches!(err, Err(DataError::Invalid { .. })));
    }

    #[test]
    fn backout_matches_critical_values() {
        let data = simple_replication(0.05, Sign::Positive, 100);
        let y = backout_replication_effect(&data);
        assert_relative_eq!(10.0 * y[0], 1.959963984540054, epsilon = 1e-8);

        let data = simple_replication(0.05, Sign::Negative, 100);
        let y = backout_replication_effect(&data);
        assert_relative_eq!(10.0 * y[0], -1.959963984540054, epsilon = 1e-8);
    }

    #[test]
    fn backout_inverts_two_sided_p_for_unit_z() {
        // z = 1 has two-sided p = 2(1 − Φ(1)) = 0.31731050786291415.
        let data = simple_replication(0.3173105078629141, Sign::Positive, 400);
        let y = backout_replication_effect(&data);
        assert_relative_eq!(20.0 * y[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(y[0], 0.05, epsilon = 1e-10);
    }

    proptest! {
        #[test]
        fn backout_recovers_p_value(
            p in 1e-12..1.0f64,
            n in 2u64..1_000_000,
            positive in proptest::bool::ANY,
        ) {
            let direction = if positive { Sign::Positive } else { Sign::Negative };
            let data = simple_replication(p, direction, n);
            let y = backout_replication_effect(&data);
            prop_assert!(y[0] * direction.value() >= 0.0);
            let z = (n as f64).sqrt() * y[0];
            let recovered = 2.0 * (1.0 - crate::stats::normal_cdf(z.abs()));
            prop_assert!((recovered - p).abs() < 1e-10, "p={p} recovered={recovered}");
        }
    }
}
