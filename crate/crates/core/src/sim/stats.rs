use serde::{Deserialize, Serialize};

use super::{StepOutcome, StepStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub outcomes: Vec<StepOutcome>,
    pub total_steps: usize,
}

impl TrialResult {
    pub fn completed(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| o.status == StepStatus::Success)
            .count()
    }

    pub fn is_success(&self) -> bool {
        self.completed() == self.total_steps
    }

    /// Status of the step that ended the trial, if one failed.
    pub fn failure(&self) -> Option<StepStatus> {
        self.outcomes
            .iter()
            .map(|o| o.status)
            .find(|s| *s != StepStatus::Success)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("no trials")]
    Empty,
    #[error("trial {index}: {completed} of {total} steps is not a valid count")]
    BadTrial {
        index: usize,
        completed: usize,
        total: usize,
    },
}

/// Fraction of trials in which every step succeeded.
pub fn success_rate(trials: &[TrialResult]) -> Result<f64, StatsError> {
    if trials.is_empty() {
        return Err(StatsError::Empty);
    }
    let ok = trials.iter().filter(|t| t.is_success()).count();
    Ok(ok as f64 / trials.len() as f64)
}

/// Average completion rate: mean of `completed / total` over trials.
pub fn acr(trials: &[(usize, usize)]) -> Result<f64, StatsError> {
    if trials.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut sum = 0.0;
    for (index, &(completed, total)) in trials.iter().enumerate() {
        if total == 0 || completed > total {
            return Err(StatsError::BadTrial {
                index,
                completed,
                total,
            });
        }
        sum += completed as f64 / total as f64;
    }
    Ok(sum / trials.len() as f64)
}
