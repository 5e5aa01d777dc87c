use serde::{Deserialize, Serialize};

use super::{masked_policy, run_policy_profile, CommonsConfig, EpisodeRecord, MaskedKind};
use crate::error::{Error, Result};

/// Episode-level totals the indices are computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawAggregates {
    /// Gross output summed over agents and steps.
    pub total_gross_output: f64,
    /// Final minus initial temperature.
    pub temperature_rise: f64,
    /// Discounted utility summed over agents.
    pub total_discounted_utility: f64,
    /// Undiscounted reward per agent, averaged over agents.
    pub episode_reward: f64,
}

impl RawAggregates {
    pub fn from_episode(episode: &EpisodeRecord, config: &CommonsConfig) -> Self {
        let rewards = episode.episode_rewards();
        RawAggregates {
            total_gross_output: episode.total_gross_output(),
            temperature_rise: episode.temperature_rise(),
            total_discounted_utility: episode.discounted_utility(config.discount).iter().sum(),
            episode_reward: rewards.iter().sum::<f64>() / rewards.len() as f64,
        }
    }

    pub fn mean(items: &[RawAggregates]) -> Self {
        let n = items.len() as f64;
        let avg = |f: fn(&RawAggregates) -> f64| items.iter().map(f).sum::<f64>() / n;
        RawAggregates {
            total_gross_output: avg(|a| a.total_gross_output),
            temperature_rise: avg(|a| a.temperature_rise),
            total_discounted_utility: avg(|a| a.total_discounted_utility),
            episode_reward: avg(|a| a.episode_reward),
        }
    }

    fn is_finite(&self) -> bool {
        [
            self.total_gross_output,
            self.temperature_rise,
            self.total_discounted_utility,
            self.episode_reward,
        ]
        .iter()
        .all(|x| x.is_finite())
    }
}

/// Normalisation endpoints. The economic index runs from the
/// full-consumption run (0) to the no-consumption run (1); the climate
/// index is relative to the full-consumption (no mitigation) rise; the
/// utility index runs from no-consumption (0) to full-consumption (1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexReferences {
    pub economic_lo: f64,
    pub economic_hi: f64,
    pub climate_reference_rise: f64,
    pub utility_lo: f64,
    pub utility_hi: f64,
}

impl IndexReferences {
    pub fn from_masked_runs(config: &CommonsConfig, seed: u64) -> Result<Self> {
        let run = |kind| -> Result<RawAggregates> {
            let pols = vec![masked_policy(kind); config.num_agents];
            let ep = run_policy_profile(&pols, config, seed)?;
            Ok(RawAggregates::from_episode(&ep, config))
        };
        let hoard = run(MaskedKind::NoConsumption)?;
        let spend = run(MaskedKind::FullConsumption)?;
        Ok(IndexReferences {
            economic_lo: spend.total_gross_output,
            economic_hi: hoard.total_gross_output,
            climate_reference_rise: spend.temperature_rise,
            utility_lo: hoard.total_discounted_utility,
            utility_hi: spend.total_discounted_utility,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let check = |index, lo: f64, hi: f64| {
            if hi > lo && hi.is_finite() && lo.is_finite() {
                Ok(())
            } else {
                Err(Error::DegenerateReference { index, lo, hi })
            }
        };
        check("economic", self.economic_lo, self.economic_hi)?;
        check("climate", 0.0, self.climate_reference_rise)?;
        check("utility", self.utility_lo, self.utility_hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub economic_index: f64,
    pub climate_index: f64,
    pub utility_index: f64,
    pub raw: RawAggregates,
    pub references: IndexReferences,
}

fn clip01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

pub fn compute_indices(raw: &RawAggregates, references: &IndexReferences) -> Result<IndexReport> {
    references.validate()?;
    if !raw.is_finite() {
        return Err(Error::InvalidConfig(format!("non-finite aggregates {raw:?}")));
    }
    let r = references;
    Ok(IndexReport {
        economic_index: clip01((raw.total_gross_output - r.economic_lo) / (r.economic_hi - r.economic_lo)),
        climate_index: clip01(1.0 - raw.temperature_rise / r.climate_reference_rise),
        utility_index: clip01((raw.total_discounted_utility - r.utility_lo) / (r.utility_hi - r.utility_lo)),
        raw: *raw,
        references: *references,
    })
}

impl EpisodeRecord {
    pub fn indices(&self, config: &CommonsConfig, references: &IndexReferences) -> Result<IndexReport> {
        compute_indices(&RawAggregates::from_episode(self, config), references)
    }
}
