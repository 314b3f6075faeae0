//! Scoring rules applied to (true effect, prediction) pairs.

use thiserror::Error;

/// Loss function selector. Squared error scores effect predictions; the
/// Brier score is the expected quadratic score of a probability forecast
/// when the outcome occurs with probability `truth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    SquaredError,
    Brier,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::SquaredError => "squared_error",
            LossKind::Brier => "brier",
        }
    }

    /// Evaluate the loss without domain checks. Callers must validate
    /// Brier arguments to [0, 1] first; see [`loss`] for the checked form.
    pub(crate) fn apply(self, truth: f64, prediction: f64) -> f64 {
        match self {
            LossKind::SquaredError => {
                let d = truth - prediction;
                d * d
            }
            LossKind::Brier => {
                let hit = 1.0 - prediction;
                truth * hit * hit + (1.0 - truth) * prediction * prediction
            }
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum LossError {
    #[error("Brier score requires {which} in [0, 1], got {value}")]
    BrierDomain { which: &'static str, value: f64 },
}

/// Score a prediction against the true value.
///
/// Squared error returns (truth − prediction)². Brier returns the expected
/// Brier score under outcome probability `truth`:
/// truth·(1 − prediction)² + (1 − truth)·prediction².
pub fn loss(kind: LossKind, truth: f64, prediction: f64) -> Result<f64, LossError> {
    if kind == LossKind::Brier {
        if !(0.0..=1.0).contains(&truth) {
            return Err(LossError::BrierDomain {
                which: "truth",
                value: truth,
            });
        }
        if !(0.0..=1.0).contains(&prediction) {
            return Err(LossError::BrierDomain {
                which: "prediction",
                value: prediction,
            });
        }
    }
    Ok(kind.apply(truth, prediction))
}
