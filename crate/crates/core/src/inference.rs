//! Bias, risk, and comparative-risk estimation with uncertainty.
//!
//! Every estimand is computed from the same two-level Monte Carlo scheme:
//! per draw, sample μ from the posterior μ | Y, sample uniform-Dirichlet
//! weights over treatments and over forecasters, and evaluate the weighted
//! estimand over observed cells (weights renormalize over the observed
//! cells of each draw). The draw loop is data-parallel: draw s uses
//! substream s of the root seed, so results are reproducible regardless of
//! thread count. Simultaneous bands come from the max-statistic over the
//! same shared draws.

use crate::data_model::{ForecastMatrix, Sign};
use crate::empirical_bayes::PosteriorSampler;
use crate::losses::LossKind;
use crate::stats::{self, quantile_sorted, summarize_draws};
use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum number of Monte Carlo draws for a stable report.
pub const MIN_SAMPLES: usize = 1_000;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("need at least {minimum} Monte Carlo samples, got {requested}")]
    InsufficientSamples { minimum: usize, requested: usize },
    #[error("dimension mismatch: {what}")]
    DimensionMismatch { what: String },
    #[error("estimand `{estimand}` requires model predictions")]
    MissingModel { estimand: String },
    #[error("{what} must lie in [0, 1] for the Brier score: got {value}")]
    LossDomain { what: String, value: f64 },
    #[error("bias difference requires two distinct treatment indices below {k}, got ({first}, {second})")]
    InvalidTreatmentPair { k: usize, first: usize, second: usize },
    #[error("no forecaster observes both treatments {first} and {second}")]
    NoJointObservations { first: usize, second: usize },
    #[error("forecaster groups are required for subgroup analysis")]
    MissingGroups,
    #[error("need at least two forecaster groups, got {got}")]
    TooFewGroups { got: usize },
    #[error("group `{label}` has no observed predictions")]
    EmptyGroup { label: String },
    #[error("treatment categories are required for category analysis")]
    MissingCategories,
    #[error("framing category `{label}`: {reason}")]
    FramingCategory { label: String, reason: String },
}

/// Weights used in the outer resampling level. `Uniform` replaces the
/// Dirichlet draws with constant weights; it exists to validate the
/// machinery against brute-force oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightScheme {
    #[default]
    Dirichlet,
    Uniform,
}

#[derive(Debug, Clone, Copy)]
pub struct EstimateOptions {
    pub n_samples: usize,
    pub seed: u64,
    pub weights: WeightScheme,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            seed: 0,
            weights: WeightScheme::Dirichlet,
        }
    }
}

/// A baseline model's prediction vector; stochastic models carry their
/// stored draws and are redrawn per Monte Carlo sample.
#[derive(Debug, Clone)]
pub enum ModelPredictions {
    Fixed(Array1<f64>),
    Stochastic(Array2<f64>),
}

impl ModelPredictions {
    fn dimension(&self) -> usize {
        match self {
            ModelPredictions::Fixed(v) => v.len(),
            ModelPredictions::Stochastic(draws) => draws.ncols(),
        }
    }

    fn row_for_draw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> ArrayView1<'_, f64> {
        match self {
            ModelPredictions::Fixed(v) => v.view(),
            ModelPredictions::Stochastic(draws) => {
                let idx = rng.random_range(0..draws.nrows());
                draws.row(idx)
            }
        }
    }

    fn iter_rows(&self) -> Box<dyn Iterator<Item = ArrayView1<'_, f64>> + '_> {
        match self {
            ModelPredictions::Fixed(v) => Box::new(std::iter::once(v.view())),
            ModelPredictions::Stochastic(draws) => Box::new(draws.rows().into_iter()),
        }
    }
}

/// Scalar estimands supported by [`estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimandKind {
    /// E[X − μ] over treatments and forecasters.
    BiasOverall,
    /// E[(X_k − X_l) − (μ_k − μ_l)] over forecasters observing both.
    BiasDifference { first: usize, second: usize },
    /// E[l(μ, X)] over treatments and forecasters.
    RiskForecasters,
    /// E[l(μ, μᵐ)] over treatments.
    RiskModel,
    /// E[l(μ, oracle)] over treatments; the oracle is the posterior mean.
    RiskOracle,
    /// E[l(μ, X) − l(μ, μᵐ)]; positive means the model wins.
    ComparativeRisk,
}

impl EstimandKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimandKind::BiasOverall => "bias_overall",
            EstimandKind::BiasDifference { .. } => "bias_difference",
            EstimandKind::RiskForecasters => "risk_forecasters",
            EstimandKind::RiskModel => "risk_model",
            EstimandKind::RiskOracle => "risk_oracle",
            EstimandKind::ComparativeRisk => "comparative_risk",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EstimandSpec {
    pub kind: EstimandKind,
    pub loss: LossKind,
}

/// Point estimate, equal-tailed 95% interval, and tail probabilities of
/// one estimand.
#[derive(Debug, Clone, Copy)]
pub struct EstimateSummary {
    pub mean: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub pr_below_zero: f64,
    pub p_value: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// One labeled estimand with marginal and max-statistic simultaneous bands.
#[derive(Debug, Clone)]
pub struct BandEntry {
    pub label: String,
    pub point: f64,
    pub marginal_lower: f64,
    pub marginal_upper: f64,
    pub simultaneous_lower: f64,
    pub simultaneous_upper: f64,
    /// Single-step max-statistic adjusted two-sided p-value for the null
    /// that this estimand is zero.
    pub adjusted_p_value: f64,
    /// True when the simultaneous band excludes zero.
    pub significant: bool,
}

#[derive(Debug, Clone)]
pub struct SubgroupBias {
    pub groups: Vec<BandEntry>,
    pub differences: Vec<BandEntry>,
}

fn weights_for<R: rand::Rng + ?Sized>(
    scheme: WeightScheme,
    len: usize,
    rng: &mut R,
) -> Vec<f64> {
    match scheme {
        WeightScheme::Dirichlet => stats::dirichlet_uniform(len, rng),
        WeightScheme::Uniform => {
            // Consume the same number of random values as the Dirichlet
            // branch so the posterior substream is unaffected by the scheme.
            for _ in 0..len {
                let _: f64 = rng.random();
            }
            vec![1.0 / len as f64; len]
        }
    }
}

fn check_options(opts: &EstimateOptions) -> Result<(), InferenceError> {
    if opts.n_samples < MIN_SAMPLES {
        return Err(InferenceError::InsufficientSamples {
            minimum: MIN_SAMPLES,
            requested: opts.n_samples,
        });
    }
    Ok(())
}

fn check_dimensions(
    forecasts: &ForecastMatrix,
    sampler: &PosteriorSampler,
) -> Result<(), InferenceError> {
    if forecasts.num_treatments() != sampler.dimension() {
        return Err(InferenceError::DimensionMismatch {
            what: format!(
                "{} forecast rows vs {} posterior dimensions",
                forecasts.num_treatments(),
                sampler.dimension()
            ),
        });
    }
    Ok(())
}

fn check_brier_inputs(
    loss: LossKind,
    forecasts: &ForecastMatrix,
    model: Option<&ModelPredictions>,
    oracle: Option<&Array1<f64>>,
) -> Result<(), InferenceError> {
    if loss != LossKind::Brier {
        return Ok(());
    }
    for ((row, col), value) in forecasts.predictions().indexed_iter() {
        if forecasts.is_observed(row, col) && !(0.0..=1.0).contains(value) {
            return Err(InferenceError::LossDomain {
                what: format!(
                    "forecast for treatment row {row}, forecaster `{}`",
                    forecasts.forecaster_ids()[col]
                ),
                value: *value,
            });
        }
    }
    if let Some(model) = model {
        for row in model.iter_rows() {
            if let Some(bad) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(InferenceError::LossDomain {
                    what: "model prediction".into(),
                    value: *bad,
                });
            }
        }
    }
    if let Some(oracle) = oracle {
        if let Some(bad) = oracle.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(InferenceError::LossDomain {
                what: "oracle prediction".into(),
                value: *bad,
            });
        }
    }
    Ok(())
}

fn check_posterior_draw(loss: LossKind, mu: &Array1<f64>) -> Result<(), InferenceError> {
    if loss == LossKind::Brier {
        if let Some(bad) = mu.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(InferenceError::LossDomain {
                what: "posterior draw".into(),
                value: *bad,
            });
        }
    }
    Ok(())
}

/// Estimate one scalar estimand per Algorithm-1-style sampling; returns the
/// Monte Carlo mean, 2.5/97.5 percentiles, and Pr{estimand < 0}.
pub fn estimate(
    forecasts: &ForecastMatrix,
    sampler: &PosteriorSampler,
    spec: &EstimandSpec,
    model: Option<&ModelPredictions>,
    opts: &EstimateOptions,
) -> Result<EstimateSummary, InferenceError> {
    check_options(opts)?;
    check_dimensions(forecasts, sampler)?;
    let k = forecasts.num_treatments();
    let f = forecasts.num_forecasters();

    let needs_model = matches!(
        spec.kind,
        EstimandKind::RiskModel | EstimandKind::ComparativeRisk
    );
    if needs_model && model.is_none() {
        return Err(InferenceError::MissingModel {
            estimand: spec.kind.name().into(),
        });
    }
    if let Some(model) = model {
        if model.dimension() != k {
            return Err(InferenceError::DimensionMismatch {
                what: format!("model has {} predictions for {k} treatments", model.dimension()),
            });
        }
    }
    let oracle = match spec.kind {
        EstimandKind::RiskOracle => Some(sampler.posterior_mean()),
        _ => None,
    };
    check_brier_inputs(spec.loss, forecasts, model, oracle.as_ref())?;

    if let EstimandKind::BiasDifference { first, second } = spec.kind {
        if first == second || first >= k || second >= k {
            return Err(InferenceError::InvalidTreatmentPair { k, first, second });
        }
        let jointly_observed = (0..f)
            .any(|col| forecasts.is_observed(first, col) && forecasts.is_observed(second, col));
        if !jointly_observed {
            return Err(InferenceError::NoJointObservations { first, second });
        }
    }

    let draws: Result<Vec<f64>, InferenceError> = (0..opts.n_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = stats::substream(opts.seed, s as u64);
            let mu = sampler.draw_with(&mut rng);
            check_posterior_draw(spec.loss, &mu)?;
            let w = weights_for(opts.weights, k, &mut rng);
            let m = weights_for(opts.weights, f, &mut rng);
            let model_row = model.map(|p| p.row_for_draw(&mut rng));
            Ok(evaluate_scalar(
                spec,
                forecasts,
                &mu,
                &w,
                &m,
                model_row,
                oracle.as_ref(),
            ))
        })
        .collect();
    let draws = draws?;
    let summary = summarize_draws(&draws);
    Ok(EstimateSummary {
        mean: summary.mean,
        ci_lower: summary.ci_lower,
        ci_upper: summary.ci_upper,
        pr_below_zero: summary.pr_below_zero,
        p_value: summary.p_value,
        n_samples: opts.n_samples,
        seed: opts.seed,
    })
}

fn evaluate_scalar(
    spec: &EstimandSpec,
    forecasts: &ForecastMatrix,
    mu: &Array1<f64>,
    w: &[f64],
    m: &[f64],
    model_row: Option<ArrayView1<'_, f64>>,
    oracle: Option<&Array1<f64>>,
) -> f64 {
    let x = forecasts.predictions();
    let k = forecasts.num_treatments();
    let f = forecasts.num_forecasters();
    match spec.kind {
        EstimandKind::BiasOverall => {
            let mut num = 0.0;
            let mut den = 0.0;
            for row in 0..k {
                for col in 0..f {
                    if forecasts.is_observed(row, col) {
                        let weight = w[row] * m[col];
                        num += weight * (x[[row, col]] - mu[row]);
                        den += weight;
                    }
                }
            }
            num / den
        }
        EstimandKind::BiasDifference { first, second } => {
            let mut num = 0.0;
            let mut den = 0.0;
            for col in 0..f {
                if forecasts.is_observed(first, col) && forecasts.is_observed(second, col) {
                    num += m[col] * (x[[first, col]] - x[[second, col]]);
                    den += m[col];
                }
            }
            num / den - (mu[first] - mu[second])
        }
        EstimandKind::RiskForecasters => {
            let mut num = 0.0;
            let mut den = 0.0;
            for row in 0..k {
                for col in 0..f {
                    if forecasts.is_observed(row, col) {
                        let weight = w[row] * m[col];
                        num += weight * spec.loss.apply(mu[row], x[[row, col]]);
                        den += weight;
                    }
                }
            }
            num / den
        }
        EstimandKind::RiskModel => {
            let model = model_row.expect("validated above");
            (0..k).map(|row| w[row] * spec.loss.apply(mu[row], model[row])).sum()
        }
        EstimandKind::RiskOracle => {
            let oracle = oracle.expect("validated above");
            (0..k).map(|row| w[row] * spec.loss.apply(mu[row], oracle[row])).sum()
        }
        EstimandKind::ComparativeRisk => {
            let model = model_row.expect("validated above");
            let mut num = 0.0;
            let mut den = 0.0;
            for row in 0..k {
                let model_loss = spec.loss.apply(mu[row], model[row]);
                for col in 0..f {
                    if forecasts.is_observed(row, col) {
                        let weight = w[row] * m[col];
                        num += weight * (spec.loss.apply(mu[row], x[[row, col]]) - model_loss);
                        den += weight;
                    }
                }
            }
            num / den
        }
    }
}

/// Build marginal and simultaneous bands from a draws matrix (one column
/// per estimand). Simultaneous bands inflate the standardized deviations
/// by the 95% quantile of the cross-column max statistic, so they are at
/// least as wide as the marginal bands by construction.
fn bands_from_draws(labels: Vec<String>, draws: &Array2<f64>) -> Vec<BandEntry> {
    let (s, m) = draws.dim();
    assert_eq!(labels.len(), m);
    let n = s as f64;
    let points: Vec<f64> = (0..m).map(|j| draws.column(j).sum() / n).collect();
    let sds: Vec<f64> = (0..m)
        .map(|j| {
            let col = draws.column(j);
            let var = col
                .iter()
                .map(|v| (v - points[j]) * (v - points[j]))
                .sum::<f64>()
                / (n - 1.0).max(1.0);
            var.sqrt()
        })
        .collect();

    let mut max_stat = vec![0.0_f64; s];
    let mut abs_dev: Vec<Vec<f64>> = vec![Vec::with_capacity(s); m];
    for row in 0..s {
        let mut row_max = 0.0_f64;
        for j in 0..m {
            let d = if sds[j] > 0.0 {
                ((draws[[row, j]] - points[j]) / sds[j]).abs()
            } else {
                0.0
            };
            abs_dev[j].push(d);
            row_max = row_max.max(d);
        }
        max_stat[row] = row_max;
    }
    let mut sorted_max = max_stat.clone();
    sorted_max.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let critical_sim = quantile_sorted(&sorted_max, 0.95);

    labels
        .into_iter()
        .enumerate()
        .map(|(j, label)| {
            let mut sorted = abs_dev[j].clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let critical_marg = quantile_sorted(&sorted, 0.95);
            let point = points[j];
            let sd = sds[j];
            let t = if sd > 0.0 {
                (point / sd).abs()
            } else if point == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            let exceed = max_stat.iter().filter(|v| **v >= t).count();
            let adjusted_p_value = exceed as f64 / n;
            let simultaneous_lower = point - critical_sim * sd;
            let simultaneous_upper = point + critical_sim * sd;
            BandEntry {
                label,
                point,
                marginal_lower: point - critical_marg * sd,
                marginal_upper: point + critical_marg * sd,
                simultaneous_lower,
                simultaneous_upper,
                adjusted_p_value,
                significant: simultaneous_lower > 0.0 || simultaneous_upper < 0.0,
            }
        })
        .collect()
}

fn vector_draws<F>(
    n_samples: usize,
    width: usize,
    eval: F,
) -> Result<Array2<f64>, InferenceError>
where
    F: Fn(usize) -> Result<Vec<f64>, InferenceError> + Sync,
{
    let rows: Result<Vec<Vec<f64>>, InferenceError> =
        (0..n_samples).into_par_iter().map(&eval).collect();
    let rows = rows?;
    let mut out = Array2::zeros((n_samples, width));
    for (s, row) in rows.into_iter().enumerate() {
        debug_assert_eq!(row.len(), width);
        for (j, value) in row.into_iter().enumerate() {
            out[[s, j]] = value;
        }
    }
    Ok(out)
}

/// Per-treatment bias with simultaneous 95% bands over shared draws; a
/// treatment is flagged significant when its simultaneous band excludes
/// zero.
pub fn per_treatment_bias_simultaneous(
    treatment_ids: &[String],
    forecasts: &ForecastMatrix,
    sampler: &PosteriorSampler,
    opts: &EstimateOptions,
) -> Result<Vec<BandEntry>, InferenceError> {
    check_options(opts)?;
    check_dimensions(forecasts, sampler)?;
    let k = forecasts.num_treatments();
    if treatment_ids.len() != k {
        return Err(InferenceError::DimensionMismatch {
            what: format!("{} labels vs {k} treatments", treatment_ids.len()),
        });
    }
    let f = forecasts.num_forecasters();
    let x = forecasts.predictions();

    let draws = vector_draws(opts.n_samples, k, |s| {
        let mut rng = stats::substream(opts.seed, s as u64);
        let mu = sampler.draw_with(&mut rng);
        let _w = weights_for(opts.weights, k, &mut rng);
        let m = weights_for(opts.weights, f, &mut rng);
        let mut row_values = Vec::with_capacity(k);
        for row in 0..k {
            let mut num = 0.0;
            let mut den = 0.0;
            for col in 0..f {
                if forecasts.is_observed(row, col) {
                    num += m[col] * x[[row, col]];
                    den += m[col];
                }
            }
            row_values.push(num / den - mu[row]);
        }
        Ok(row_values)
    })?;
    Ok(bands_from_draws(treatment_ids.to_vec(), &draws))
}

/// Per-group bias (Dirichlet weights drawn within each group) plus all
/// pairwise differences, with the max-statistic adjustment applied across
/// the whole family of groups and pairs.
pub fn subgroup_bias(
    forecasts: &ForecastMatrix,
    sampler: &PosteriorSampler,
    opts: &EstimateOptions,
) -> Result<SubgroupBias, InferenceError> {
    check_options(opts)?;
    check_dimensions(forecasts, sampler)?;
    if !forecasts.has_groups() {
        return Err(InferenceError::MissingGroups);
    }
    let groups = forecasts.groups();
    if groups.len() < 2 {
        return Err(InferenceError::TooFewGroups { got: groups.len() });
    }
    let k = forecasts.num_treatments();
    for (label, members) in &groups {
        let observed = members
            .iter()
            .any(|col| (0..k).any(|row| forecasts.is_observed(row, *col)));
        if !observed {
            return Err(InferenceError::EmptyGroup {
                label: label.clone(),
            });
        }
    }

    let x = forecasts.predictions();
    let n_groups = groups.len();
    let width = n_groups + n_groups * (n_groups - 1) / 2;
    let draws = vector_draws(opts.n_samples, width, |s| {
        let mut rng = stats::substream(opts.seed, s as u64);
        let mu = sampler.draw_with(&mut rng);
        let w = weights_for(opts.weights, k, &mut rng);
        let mut values = Vec::with_capacity(width);
        for (_, members) in &groups {
            let m = weights_for(opts.weights, members.len(), &mut rng);
            let mut num = 0.0;
            let mut den = 0.0;
            for row in 0..k {
                for (idx, col) in members.iter().enumerate() {
                    if forecasts.is_observed(row, *col) {
                        let weight = w[row] * m[idx];
                        num += weight * (x[[row, *col]] - mu[row]);
                        den += weight;
                    }
                }
            }
            values.push(num / den);
        }
        for i in 0..n_groups {
            for j in (i + 1)..n_groups {
                values.push(values[i] - values[j]);
            }
        }
        Ok(values)
    })?;

    let mut labels: Vec<String> = groups.iter().map(|(label, _)| label.clone()).collect();
    for i in 0..n_groups {
        for j in (i + 1)..n_groups {
            labels.push(format!("{} - {}", groups[i].0, groups[j].0));
        }
    }
    let mut entries = bands_from_draws(labels, &draws);
    let differences = entries.split_off(n_groups);
    Ok(SubgroupBias {
        groups: entries,
        differences,
    })
}

/// Per-category bias with reverse coding, plus an optional framing category
/// measured as the paired difference B_{k,l} between its +1-coded and
/// −1-coded treatments. Bands are simultaneous across all categories.
pub fn category_bias(
    forecasts: &ForecastMatrix,
    sampler: &PosteriorSampler,
    framing_category: Option<&str>,
    opts: &EstimateOptions,
) -> Result<Vec<BandEntry>, InferenceError> {
    check_options(opts)?;
    check_dimensions(forecasts, sampler)?;
    if !forecasts.has_categories() {
        return Err(InferenceError::MissingCategories);
    }
    let categories = forecasts.categories();
    let f = forecasts.num_forecasters();
    let k = forecasts.num_treatments();
    let x = forecasts.predictions();

    // Resolve the framing pair up front: exactly one +1 (k) and one −1 (l).
    enum CategoryPlan {
        Signed(Vec<(usize, Sign)>),
        Framing { positive: usize, negative: usize },
    }
    let mut plans = Vec::with_capacity(categories.len());
    let mut framing_seen = false;
    for (label, members) in &categories {
        if framing_category == Some(label.as_str()) {
            framing_seen = true;
            let positives: Vec<usize> = members
                .iter()
                .filter(|(_, sign)| *sign == Sign::Positive)
                .map(|(row, _)| *row)
                .collect();
            let negatives: Vec<usize> = members
                .iter()
                .filter(|(_, sign)| *sign == Sign::Negative)
                .map(|(row, _)| *row)
                .collect();
            if positives.len() != 1 || negatives.len() != 1 {
                return Err(InferenceError::FramingCategory {
                    label: label.clone(),
                    reason: format!(
                        "needs exactly one +1 and one -1 treatment, found {} and {}",
                        positives.len(),
                        negatives.len()
                    ),
                });
            }
            let (positive, negative) = (positives[0], negatives[0]);
            let jointly = (0..f).any(|col| {
                forecasts.is_observed(positive, col) && forecasts.is_observed(negative, col)
            });
            if !jointly {
                return Err(InferenceError::FramingCategory {
                    label: label.clone(),
                    reason: "no forecaster observes both treatments of the pair".into(),
                });
            }
            plans.push(CategoryPlan::Framing { positive, negative });
        } else {
            plans.push(CategoryPlan::Signed(members.clone()));
        }
    }
    if let Some(name) = framing_category {
        if !framing_seen {
            return Err(InferenceError::FramingCategory {
                label: name.to_string(),
                reason: "no treatments carry this category".into(),
            });
        }
    }

    let width = categories.len();
    let draws = vector_draws(opts.n_samples, width, |s| {
        let mut rng = stats::substream(opts.seed, s as u64);
        let mu = sampler.draw_with(&mut rng);
        let w = weights_for(opts.weights, k, &mut rng);
        let m = weights_for(opts.weights, f, &mut rng);
        let mut values = Vec::with_capacity(width);
        for plan in &plans {
            match plan {
                CategoryPlan::Signed(members) => {
                    let mut num = 0.0;
                    let mut den = 0.0;
                    for (row, sign) in members {
                        for col in 0..f {
                            if forecasts.is_observed(*row, col) {
                                let weight = w[*row] * m[col];
                                num += weight * sign.value() * (x[[*row, col]] - mu[*row]);
                                den += weight;
                            }
                        }
                    }
                    values.push(num / den);
                }
                CategoryPlan::Framing { positive, negative } => {
                    let mut num = 0.0;
                    let mut den = 0.0;
                    for col in 0..f {
                        if forecasts.is_observed(*positive, col)
                            && forecasts.is_observed(*negative, col)
                        {
                            num += m[col] * (x[[*positive, col]] - x[[*negative, col]]);
                            den += m[col];
                        }
                    }
                    values.push(num / den - (mu[*positive] - mu[*negative]));
                }
            }
        }
        Ok(values)
    })?;

    let labels: Vec<String> = categories.iter().map(|(label, _)| label.clone()).collect();
    Ok(bands_from_draws(labels, &draws))
}

/// One row of the evaluation report, mirroring the published tables:
/// a study label, an estimand, and its Monte Carlo summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportEntry {
    pub study: String,
    pub estimand: String,
    pub loss: String,
    pub mean: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub p_value: f64,
    pub pr_below_zero: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub significant: Option<bool>,
    pub n_samples: usize,
    pub seed: u64,
}

impl ReportEntry {
    pub fn from_summary(
        study: &str,
        estimand: impl Into<String>,
        loss: LossKind,
        summary: &EstimateSummary,
    ) -> Self {
        Self {
            study: study.to_string(),
            estimand: estimand.into(),
            loss: loss.name().to_string(),
            mean: summary.mean,
            ci_lower: summary.ci_lower,
            ci_upper: summary.ci_upper,
            p_value: summary.p_value,
            pr_below_zero: summary.pr_below_zero,
            significant: None,
            n_samples: summary.n_samples,
            seed: summary.seed,
        }
    }

    /// Report a band entry with its simultaneous interval and adjusted p.
    pub fn from_band(
        study: &str,
        estimand: impl Into<String>,
        loss: LossKind,
        band: &BandEntry,
        opts: &EstimateOptions,
    ) -> Self {
        Self {
            study: study.to_string(),
            estimand: estimand.into(),
            loss: loss.name().to_string(),
            mean: band.point,
            ci_lower: band.simultaneous_lower,
            ci_upper: band.simultaneous_upper,
            p_value: band.adjusted_p_value,
            pr_below_zero: f64::NAN,
            significant: Some(band.significant),
            n_samples: opts.n_samples,
            seed: opts.seed,
        }
    }
}

/// A full evaluation run: metadata plus one entry per estimand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub library_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub n_samples: usize,
    pub eb_kind: String,
    pub loss: String,
    pub units: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_floor_hit_rate: Option<f64>,
    pub entries: Vec<ReportEntry>,
}
