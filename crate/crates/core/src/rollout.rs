//! Core rollout data model shared across generation, post-processing, training
//! and analysis.
//!
//! All types here are plain immutable values: they are built once (by the
//! synthetic environment or by log ingestion) and never mutated in place.
//! Validation is total — malformed input yields a typed [`DomainError`],
//! never a partially constructed value.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while validating rollout data.
#[derive(Debug, Error)]
pub enum DomainError {
    /// A field is missing or has the wrong type/shape.
    #[error("schema error: {0}")]
    Schema(String),
    /// Fields parse individually but violate a structural invariant.
    #[error("invariant violation: {0}")]
    Invariant(String),
}

/// A single training prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    /// Opaque identifier, stable across steps.
    pub id: String,
    /// Difficulty bucket index in `[0, D)`. Absent for external logs that do
    /// not record difficulty.
    pub difficulty_bucket: Option<usize>,
    /// Index of the correct answer token (synthetic environment only).
    pub target_answer: Option<usize>,
}

/// One sampled response together with everything the trainer needs to reuse
/// it off-policy: the behavior-policy log-probabilities recorded at sampling
/// time, the verified reward, and its truncation state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    /// Token ids. Opaque non-negative integers.
    pub tokens: Vec<u32>,
    /// Per-token log-probabilities under the policy that sampled the rollout.
    /// Same length as `tokens`; every entry is <= 0.
    pub behavior_logprobs: Vec<f64>,
    /// Verified reward, always 0 or 1.
    pub reward: f64,
    /// Whether the rollout was truncated by post-processing.
    pub truncated: bool,
    /// Length before any truncation. Equals `tokens.len()` when untruncated.
    pub original_length: usize,
    /// Position of the answer token in the *original* (untruncated) sequence,
    /// when an answer was emitted. Retained after truncation as a record of
    /// where the answer used to be.
    pub answer_token_index: Option<usize>,
}

impl Rollout {
    /// Checks every structural invariant of a rollout.
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.behavior_logprobs.len() != self.tokens.len() {
            return Err(DomainError::Invariant(format!(
                "logprobs length {} does not match tokens length {}",
                self.behavior_logprobs.len(),
                self.tokens.len()
            )));
        }
        if let Some(lp) = self.behavior_logprobs.iter().find(|lp| !(**lp <= 0.0)) {
            return Err(DomainError::Invariant(format!(
                "logprob {lp} is not a finite non-positive number"
            )));
        }
        if self.reward != 0.0 && self.reward != 1.0 {
            return Err(DomainError::Invariant(format!(
                "reward {} outside {{0, 1}}",
                self.reward
            )));
        }
        if self.truncated {
            if self.tokens.len() >= self.original_length {
                return Err(DomainError::Invariant(format!(
                    "truncated rollout has {} tokens but original length {}",
                    self.tokens.len(),
                    self.original_length
                )));
            }
        } else if self.tokens.len() != self.original_length {
            return Err(DomainError::Invariant(format!(
                "untruncated rollout has {} tokens but original length {}",
                self.tokens.len(),
                self.original_length
            )));
        }
        if let Some(idx) = self.answer_token_index {
            if idx >= self.original_length {
                return Err(DomainError::Invariant(format!(
                    "answer token index {idx} >= original length {}",
                    self.original_length
                )));
            }
        }
        Ok(())
    }

    /// Current length in tokens (after any truncation).
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// True when the rollout holds no tokens.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// The G rollouts sampled for one prompt: the unit of advantage
/// normalization, truncation gating and effectiveness filtering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub prompt: Prompt,
    pub rollouts: Vec<Rollout>,
    /// Training step at which the group was generated.
    pub step: u64,
}

impl RolloutGroup {
    /// Checks group invariants plus every member rollout.
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.rollouts.len() < 2 {
            return Err(DomainError::Invariant(format!(
                "group '{}' has {} rollouts; at least 2 are required",
                self.prompt.id,
                self.rollouts.len()
            )));
        }
        for (i, r) in self.rollouts.iter().enumerate() {
            r.validate().map_err(|e| match e {
                DomainError::Invariant(msg) => DomainError::Invariant(format!(
                    "group '{}' rollout {i}: {msg}",
                    self.prompt.id
                )),
                other => other,
            })?;
        }
        Ok(())
    }

    /// Group size G.
    pub fn size(&self) -> usize {
        self.rollouts.len()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.rollouts.iter().map(|r| r.reward).collect()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.rollouts.iter().map(|r| r.len()).collect()
    }

    /// True when every rollout carries reward 1.
    pub fn all_correct(&self) -> bool {
        self.rollouts.iter().all(|r| r.reward == 1.0)
    }

    /// True when the group rewards have non-zero variance, i.e. the group
    /// carries a usable learning signal.
    pub fn has_reward_variance(&self) -> bool {
        self.rollouts
            .iter()
            .any(|r| r.reward != self.rollouts[0].reward)
    }
}

/// A fixed-size training batch of exactly B groups. Slots that could not be
/// filled with effective groups are padded and masked out; a masked slot
/// contributes zero to every loss and metric.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainBatch {
    pub groups: Vec<RolloutGroup>,
    pub mask: Vec<bool>,
}

impl TrainBatch {
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.groups.len() != self.mask.len() {
            return Err(DomainError::Invariant(format!(
                "batch has {} groups but {} mask entries",
                self.groups.len(),
                self.mask.len()
            )));
        }
        Ok(())
    }

    /// Batch size B (including masked slots).
    pub fn size(&self) -> usize {
        self.groups.len()
    }

    /// Iterator over the unmasked (real) groups.
    pub fn unmasked(&self) -> impl Iterator<Item = &RolloutGroup> {
        self.groups
            .iter()
            .zip(self.mask.iter())
            .filter(|(_, m)| **m)
            .map(|(g, _)| g)
    }

    /// Number of unmasked groups.
    pub fn effective_len(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// True when every slot is masked (the trainer skips the update).
    pub fn fully_masked(&self) -> bool {
        self.mask.iter().all(|m| !m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn rollout(lens: usize, reward: f64) -> Rollout {
        Rollout {
            tokens: vec![0; lens],
            behavior_logprobs: vec![-0.5; lens],
            reward,
            truncated: false,
            original_length: lens,
            answer_token_index: None,
        }
    }

    #[test]
    fn valid_rollout_passes() {
        assert!(rollout(3, 1.0).validate().is_ok());
        assert!(rollout(5, 0.0).validate().is_ok());
    }

    #[test]
    fn logprob_length_mismatch_rejected() {
        let mut r = rollout(5, 1.0);
        r.behavior_logprobs.truncate(4);
        assert!(matches!(r.validate(), Err(DomainError::Invariant(_))));
    }

    #[test]
    fn fractional_reward_rejected() {
        let mut r = rollout(3, 1.0);
        r.reward = 0.5;
        assert!(matches!(r.validate(), Err(DomainError::Invariant(_))));
    }

    #[test]
    fn positive_logprob_rejected() {
        let mut r = rollout(2, 1.0);
        r.behavior_logprobs[1] = 0.1;
        assert!(matches!(r.validate(), Err(DomainError::Invariant(_))));
    }

    #[test]
    fn nan_logprob_rejected() {
        let mut r = rollout(2, 1.0);
        r.behavior_logprobs[0] = f64::NAN;
        assert!(matches!(r.validate(), Err(DomainError::Invariant(_))));
    }

    #[test]
    fn truncation_state_must_match_lengths() {
        let mut r = rollout(4, 1.0);
        r.truncated = true; // but tokens.len() == original_length
        assert!(r.validate().is_err());
        r.original_length = 6;
        assert!(r.validate().is_ok());
        r.truncated = false; // now lengths disagree
        assert!(r.validate().is_err());
    }

    #[test]
    fn answer_index_bounds() {
        let mut r = rollout(4, 1.0);
        r.answer_token_index = Some(3);
        assert!(r.validate().is_ok());
        r.answer_token_index = Some(4);
        assert!(r.validate().is_err());
    }

    #[test]
    fn group_requires_two_rollouts() {
        let g = RolloutGroup {
            prompt: Prompt {
                id: "p".into(),
                difficulty_bucket: None,
                target_answer: None,
            },
            rollouts: vec![rollout(3, 1.0)],
            step: 0,
        };
        assert!(g.validate().is_err());
    }

    #[test]
    fn reward_variance_detection() {
        let mk = |rews: &[f64]| RolloutGroup {
            prompt: Prompt {
                id: "p".into(),
                difficulty_bucket: None,
                target_answer: None,
            },
            rollouts: rews.iter().map(|&r| rollout(2, r)).collect(),
            step: 0,
        };
        assert!(!mk(&[1.0, 1.0, 1.0]).has_reward_variance());
        assert!(!mk(&[0.0, 0.0]).has_reward_variance());
        assert!(mk(&[1.0, 0.0]).has_reward_variance());
    }
}
