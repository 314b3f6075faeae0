//! The model zoo: simple benchmark predictors whose risk is compared
//! against the forecasters'.

mod regression;

pub use regression::{gibbs_regression_replication, GibbsRegressionResult};

use crate::data_model::DataError;
use crate::stats;
use csv::{ReaderBuilder, Trim};
use ndarray::Array1;
use std::fs::File;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("invalid parameter: {what}")]
    Invalid { what: String },
    #[error("anchor payments must be strictly increasing, got {payments:?}")]
    AnchorsNotIncreasing { payments: [f64; 3] },
    #[error("condition `{condition_id}` has negative effective payment {payment}")]
    NegativePayment { condition_id: String, payment: f64 },
    #[error("the original effects are (numerically) constant; the regression features are degenerate")]
    DegenerateFeatures,
    #[error("need at least {needed} Gibbs draws for a stable estimate, got {got}")]
    TooFewDraws { needed: usize, got: usize },
    #[error("need at least {needed} studies to fit the regression, got {got}")]
    TooFewStudies { needed: usize, got: usize },
}

/// "Behavioral interventions have no effect": a zero vector.
pub fn null_effect_predictions(k: usize) -> Array1<f64> {
    Array1::zeros(k)
}

/// "Every study has a 50% chance of replicating."
pub fn random_chance_predictions(k: usize) -> Array1<f64> {
    Array1::from_elem(k, 0.5)
}

/// "All published research is false": under a true null, a replication
/// succeeds only by a significant result in the matching direction, so the
/// probability is Φ(−c_α) = α/2.
pub fn null_replication_predictions(k: usize, alpha: f64) -> Result<Array1<f64>, BaselineError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(BaselineError::Invalid {
            what: format!("alpha must be in (0, 1), got {alpha}"),
        });
    }
    let p = stats::normal_cdf(-stats::critical_value(alpha));
    Ok(Array1::from_elem(k, p))
}

/// Probability that a replication with `n` observations of a normalized
/// true effect `mu_star` is significant in the original direction:
/// Φ(√n·μ* − c_α).
pub fn replication_probability(mu_star: f64, n: u64, alpha: f64) -> f64 {
    stats::normal_cdf((n as f64).sqrt() * mu_star - stats::critical_value(alpha))
}

/// How an experimental condition pays participants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncentiveKind {
    PieceRateSelf,
    PieceRateCharity,
    /// Non-piece-rate incentives (peer comparison, gift exchange, ...);
    /// carried with zero payments and predicted at the no-payment anchor.
    Other,
}

impl IncentiveKind {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "piece_rate_self" => Some(IncentiveKind::PieceRateSelf),
            "piece_rate_charity" => Some(IncentiveKind::PieceRateCharity),
            "other" => Some(IncentiveKind::Other),
            _ => None,
        }
    }
}

/// One effort-study condition: its incentive type and the expected own and
/// charity payments in cents per 100 points scored.
#[derive(Debug, Clone)]
pub struct EffortConditionSpec {
    pub condition_id: String,
    pub incentive_kind: IncentiveKind,
    pub own_cents_per_100: f64,
    pub charity_cents_per_100: f64,
}

/// One observed anchor for the interpolation: a piece-rate payment and the
/// points participants actually scored at that payment.
#[derive(Debug, Clone, Copy)]
pub struct Anchor {
    pub payment: f64,
    pub points: f64,
}

/// Whether participants are assumed to value payments to charity as their
/// own ("altruistic") or not at all ("selfish").
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpolationMode {
    Selfish,
    Altruistic,
}

impl InterpolationMode {
    pub fn name(self) -> &'static str {
        match self {
            InterpolationMode::Selfish => "selfish",
            InterpolationMode::Altruistic => "altruistic",
        }
    }
}

/// Piecewise-linear interpolation through the three observed piece-rate
/// anchors, in effective-payment space. Payments above the largest anchor
/// extrapolate along the last segment. Selfish mode ignores charity
/// payments entirely; altruistic mode adds them to the participant's own.
pub fn linear_interpolation_predictions(
    conditions: &[EffortConditionSpec],
    anchors: &[Anchor; 3],
    mode: InterpolationMode,
) -> Result<Array1<f64>, BaselineError> {
    let payments = [anchors[0].payment, anchors[1].payment, anchors[2].payment];
    if !(payments[0] < payments[1] && payments[1] < payments[2]) {
        return Err(BaselineError::AnchorsNotIncreasing { payments });
    }
    if anchors.iter().any(|a| !a.points.is_finite() || !a.payment.is_finite()) {
        return Err(BaselineError::Invalid {
            what: "anchor payments and points must be finite".into(),
        });
    }
    let mut out = Array1::zeros(conditions.len());
    for (idx, condition) in conditions.iter().enumerate() {
        let payment = match mode {
            InterpolationMode::Selfish => condition.own_cents_per_100,
            InterpolationMode::Altruistic => {
                condition.own_cents_per_100 + condition.charity_cents_per_100
            }
        };
        if payment < 0.0 {
            return Err(BaselineError::NegativePayment {
                condition_id: condition.condition_id.clone(),
                payment,
            });
        }
        let (lo, hi) = if payment <= payments[1] {
            (&anchors[0], &anchors[1])
        } else {
            (&anchors[1], &anchors[2])
        };
        let slope = (hi.points - lo.points) / (hi.payment - lo.payment);
        out[idx] = lo.points + slope * (payment - lo.payment);
    }
    Ok(out)
}

/// Load `effort_conditions.csv`:
/// `condition_id,incentive_kind,own_cents_per_100,charity_cents_per_100`.
pub fn load_effort_conditions<P: AsRef<Path>>(
    path: P,
) -> Result<Vec<EffortConditionSpec>, DataError> {
    let path = path.as_ref();
    let file_name = path.display().to_string();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: file_name.clone(),
        source,
    })?;
    let mut reader = ReaderBuilder::new()
        .has_headers(true)
        .trim(Trim::All)
        .from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|source| DataError::Csv {
            file: file_name.clone(),
            source: Box::new(source),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let column = |name: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn {
                file: file_name.clone(),
                column: name.to_string(),
            })
    };
    let id_col = column("condition_id")?;
    let kind_col = column("incentive_kind")?;
    let own_col = column("own_cents_per_100")?;
    let charity_col = column("charity_cents_per_100")?;

    let mut conditions = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| DataError::Csv {
            file: file_name.clone(),
            source: Box::new(source),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let cell = |col: usize, name: &str| -> Result<String, DataError> {
            record
                .get(col)
                .map(str::to_string)
                .ok_or_else(|| DataError::InvalidCell {
                    file: file_name.clone(),
                    row: line,
                    column: name.to_string(),
                    message: "missing field".into(),
                })
        };
        let parse = |col: usize, name: &str| -> Result<f64, DataError> {
            let raw = cell(col, name)?;
            raw.parse::<f64>().map_err(|_| DataError::InvalidCell {
                file: file_name.clone(),
                row: line,
                column: name.to_string(),
                message: format!("`{raw}` is not a number"),
            })
        };
        let condition_id = cell(id_col, "condition_id")?;
        let kind_raw = cell(kind_col, "incentive_kind")?;
        let incentive_kind =
            IncentiveKind::parse(&kind_raw).ok_or_else(|| DataError::InvalidCell {
                file: file_name.clone(),
                row: line,
                column: "incentive_kind".into(),
                message: format!(
                    "`{kind_raw}` is not one of piece_rate_self, piece_rate_charity, other"
                ),
            })?;
        let own = parse(own_col, "own_cents_per_100")?;
        let charity = parse(charity_col, "charity_cents_per_100")?;
        if own < 0.0 || charity < 0.0 {
            return Err(DataError::InvalidCell {
                file: file_name.clone(),
                row: line,
                column: "own_cents_per_100".into(),
                message: "payments must be non-negative".into(),
            });
        }
        if conditions
            .iter()
            .any(|c: &EffortConditionSpec| c.condition_id == condition_id)
        {
            return Err(DataError::Duplicate {
                file: file_name.clone(),
                row: line,
                what: format!("condition `{condition_id}`"),
            });
        }
        conditions.push(EffortConditionSpec {
            condition_id,
            incentive_kind,
            own_cents_per_100: own,
            charity_cents_per_100: charity,
        });
    }
    Ok(conditions)
}
