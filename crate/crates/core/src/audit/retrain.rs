use serde::{Deserialize, Serialize};

use super::{AuditMethod, AuditReport, PlayerAudit};
use crate::error::Result;
use crate::game::{exact_state_values, monte_carlo_values, MatrixGame, MonteCarloEstimate, Slot};
use crate::learner::{policy_for_slot, train_vs_fixed_in_slot, TrainConfig};
use crate::strategies::MemoryOnePolicy;

/// Rollouts used for the Monte Carlo cross-check of the retrained policy.
pub const RETRAIN_MC_EPISODES: usize = 4000;

/// A deviation counts when it gains more than
/// `max(relative * |current value|, absolute)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImprovementThreshold {
    pub relative: f64,
    pub absolute: f64,
}

impl Default for ImprovementThreshold {
    fn default() -> Self {
        ImprovementThreshold {
            relative: 0.01,
            absolute: 1e-3,
        }
    }
}

impl ImprovementThreshold {
    pub fn for_value(&self, current: f64) -> f64 {
        (self.relative * current.abs()).max(self.absolute)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainingDetails {
    pub target_slot: u8,
    pub updates: usize,
    pub seed: u64,
    pub learned_policy: MemoryOnePolicy,
    /// Exact value of the learned (stochastic) policy.
    pub learned_value: f64,
    pub monte_carlo_value: f64,
    pub monte_carlo_stderr: f64,
    pub improvement: f64,
    pub threshold: f64,
    pub deviation_flagged: bool,
}

/// Retrains a fresh learner in `target` against the frozen opponent and
/// checks whether it beats the incumbent by more than the threshold.
///
/// The learned policy is scored exactly; the Monte Carlo estimate is
/// reported alongside as a sanity check, not used for the verdict.
pub fn audit_by_retraining(
    game: &MatrixGame,
    policy1: &MemoryOnePolicy,
    policy2: &MemoryOnePolicy,
    target: Slot,
    config: &TrainConfig,
    threshold: ImprovementThreshold,
) -> Result<AuditReport> {
    let gamma = config.gamma;
    let current = exact_state_values(game, policy1, policy2, gamma)?.for_slot(target)[0];
    let opponent = match target {
        Slot::One => policy2,
        Slot::Two => policy1,
    };
    let (params, _) = train_vs_fixed_in_slot(game, opponent, target, config)?;
    let learned = policy_for_slot(&params, target)?;
    let (p1, p2) = match target {
        Slot::One => (&learned, policy2),
        Slot::Two => (policy1, &learned),
    };
    let learned_value = exact_state_values(game, p1, p2, gamma)?.for_slot(target)[0];
    let MonteCarloEstimate { mean, stderr, .. } =
        monte_carlo_values(game, p1, p2, gamma, RETRAIN_MC_EPISODES, config.seed.wrapping_add(1))?;
    let (mc, se) = match target {
        Slot::One => (mean.0, stderr.0),
        Slot::Two => (mean.1, stderr.1),
    };

    let improvement = learned_value - current;
    let limit = threshold.for_value(current);
    let flagged = improvement > limit;
    let player = PlayerAudit {
        slot: target.number(),
        current_value: current,
        best_response_value: learned_value,
        gap: improvement,
        best_response_policy: learned,
        per_state_gaps: None,
    };
    let mut report = AuditReport::from_players(AuditMethod::Retraining, gamma, limit, vec![player]);
    report.is_epsilon_nash = !flagged;
    report.retraining = Some(RetrainingDetails {
        target_slot: target.number(),
        updates: config.total_updates,
        seed: config.seed,
        learned_policy: learned,
        learned_value,
        monte_carlo_value: mc,
        monte_carlo_stderr: se,
        improvement,
        threshold: limit,
        deviation_flagged: flagged,
    });
    Ok(report)
}
