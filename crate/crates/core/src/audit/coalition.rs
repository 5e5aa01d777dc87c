use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ImprovementThreshold;
use crate::commons::{evaluate_profile, train_subset, AllocationPolicy, CommonsConfig, EVAL_EPISODES};
use crate::error::{Error, Result};
use crate::learner::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SubsetSizes {
    Fixed {
        size: usize,
    },
    /// Size drawn uniformly from `min..=max`, then members uniformly.
    Uniform {
        min: usize,
        max: usize,
    },
}

impl SubsetSizes {
    fn bounds(&self, n: usize) -> Result<(usize, usize)> {
        let (lo, hi) = match *self {
            SubsetSizes::Fixed { size } => (size, size),
            SubsetSizes::Uniform { min, max } => (min, max),
        };
        if lo == 0 || lo > hi || hi >= n {
            return Err(Error::Coalition(format!(
                "subset sizes {lo}..={hi} must be proper and non-empty for {n} agents"
            )));
        }
        Ok((lo, hi))
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoalitionAuditConfig {
    pub sizes: SubsetSizes,
    pub num_samples: usize,
    pub seed: u64,
    pub eval_episodes: usize,
    pub threshold: ImprovementThreshold,
}

impl Default for CoalitionAuditConfig {
    fn default() -> Self {
        CoalitionAuditConfig {
            sizes: SubsetSizes::Uniform { min: 1, max: 2 },
            num_samples: 4,
            seed: 0,
            eval_episodes: EVAL_EPISODES,
            threshold: ImprovementThreshold::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalitionSample {
    pub members: Vec<usize>,
    pub train_seed: u64,
    /// Discounted utility of each member before and after retraining.
    pub before: Vec<f64>,
    pub after: Vec<f64>,
    pub improvements: Vec<f64>,
    pub summed_improvement: f64,
    /// Every member gains more than its own threshold.
    pub every_member_improves: bool,
    /// The coalition's summed value gains more than the summed threshold.
    pub sum_improves: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalitionAuditReport {
    pub num_agents: usize,
    pub eval_seed: u64,
    pub samples: Vec<CoalitionSample>,
    /// No sampled coalition found a deviation that helps every member.
    pub stable: bool,
}

/// Draws `num_samples` distinct coalitions.
pub fn sample_coalitions(
    num_agents: usize,
    sizes: SubsetSizes,
    num_samples: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if num_samples == 0 {
        return Err(Error::Coalition("num_samples must be at least 1".into()));
    }
    let (lo, hi) = sizes.bounds(num_agents)?;
    let available: f64 = (lo..=hi).map(|k| binomial(num_agents, k)).sum();
    if (num_samples as f64) > available {
        return Err(Error::Coalition(format!(
            "{num_samples} distinct coalitions requested but only {available} exist"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(num_samples);
    while out.len() < num_samples {
        let k = rng.random_range(lo..=hi);
        let mut members = sample(&mut rng, num_agents, k).into_vec();
        members.sort_unstable();
        if seen.insert(members.clone()) {
            out.push(members);
        }
    }
    Ok(out)
}

fn retrain_members(
    config: &CommonsConfig,
    profile: &[AllocationPolicy],
    members: &[usize],
    train: &TrainConfig,
    eval_episodes: usize,
    eval_seed: u64,
    threshold: ImprovementThreshold,
) -> Result<CoalitionSample> {
    let before = evaluate_profile(config, profile, eval_episodes, eval_seed)?;
    let (policies, _) = train_subset(config, profile, members, train)?;
    let after = evaluate_profile(config, &policies, eval_episodes, eval_seed)?;
    let pick = |v: &[f64]| members.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let pre = pick(&before.per_agent_value);
    let post = pick(&after.per_agent_value);
    let improvements: Vec<f64> = pre.iter().zip(&post).map(|(a, b)| b - a).collect();
    let summed: f64 = improvements.iter().sum();
    let every = pre.iter().zip(&improvements).all(|(&p, &d)| d > threshold.for_value(p));
    let pre_total: f64 = pre.iter().sum();
    Ok(CoalitionSample {
        members: members.to_vec(),
        train_seed: train.seed,
        before: pre,
        after: post,
        improvements,
        summed_improvement: summed,
        every_member_improves: every,
        sum_improves: summed > threshold.for_value(pre_total),
    })
}

/// Retrains sampled coalitions against the rest of a fixed profile.
///
/// Each coalition trains fresh tabular learners with its own seed derived
/// from `audit.seed`; all profiles are evaluated on the same episode seeds.
/// Samples run in parallel on the rayon pool.
pub fn coalition_audit(
    config: &CommonsConfig,
    profile: &[AllocationPolicy],
    audit: &CoalitionAuditConfig,
    train: &TrainConfig,
) -> Result<CoalitionAuditReport> {
    config.validate()?;
    if profile.len() != config.num_agents {
        return Err(Error::ActionCountMismatch {
            expected: config.num_agents,
            got: profile.len(),
        });
    }
    let coalitions = sample_coalitions(config.num_agents, audit.sizes, audit.num_samples, audit.seed)?;
    let mut seeds = ChaCha8Rng::seed_from_u64(audit.seed ^ 0xc0a1);
    let eval_seed = seeds.next_u64();
    let jobs: Vec<(Vec<usize>, TrainConfig)> = coalitions
        .into_iter()
        .map(|m| {
            let cfg = TrainConfig {
                seed: seeds.next_u64(),
                ..*train
            };
            (m, cfg)
        })
        .collect();
    let samples = jobs
        .par_iter()
        .map(|(m, cfg)| retrain_members(config, profile, m, cfg, audit.eval_episodes, eval_seed, audit.threshold))
        .collect::<Result<Vec<_>>>()?;
    Ok(CoalitionAuditReport {
        num_agents: config.num_agents,
        eval_seed,
        stable: !samples.iter().any(|s| s.every_member_improves),
        samples,
    })
}

/// Unilateral retraining audit for one commons agent.
pub fn audit_commons_by_retraining(
    config: &CommonsConfig,
    profile: &[AllocationPolicy],
    agent: usize,
    train: &TrainConfig,
    eval_episodes: usize,
    eval_seed: u64,
    threshold: ImprovementThreshold,
) -> Result<CoalitionSample> {
    config.validate()?;
    if agent >= config.num_agents || profile.len() != config.num_agents {
        return Err(Error::Coalition(format!(
            "agent {agent} not in a {}-agent profile",
            profile.len()
        )));
    }
    retrain_members(config, profile, &[agent], train, eval_episodes, eval_seed, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commons::{masked_policy, AllocationAction, MaskedKind};

    fn quick_train(seed: u64) -> TrainConfig {
        TrainConfig {
            actor_lr: 0.5,
            episodes_per_update: 4,
            total_updates: 40,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn coalitions_are_distinct_and_proper() {
        let c = sample_coalitions(5, SubsetSizes::Uniform { min: 1, max: 4 }, 30, 7).unwrap();
        let set: BTreeSet<_> = c.iter().cloned().collect();
        assert_eq!(set.len(), 30);
        for m in &c {
            assert!(!m.is_empty() && m.len() < 5);
            assert!(m.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(
            c,
            sample_coalitions(5, SubsetSizes::Uniform { min: 1, max: 4 }, 30, 7).unwrap()
        );
    }

    #[test]
    fn bad_requests_rejected() {
        assert!(sample_coalitions(3, SubsetSizes::Fixed { size: 1 }, 0, 0).is_err());
        assert!(sample_coalitions(3, SubsetSizes::Fixed { size: 3 }, 1, 0).is_err());
        assert!(sample_coalitions(3, SubsetSizes::Fixed { size: 0 }, 1, 0).is_err());
        assert!(sample_coalitions(3, SubsetSizes::Fixed { size: 1 }, 4, 0).is_err());
        assert!(sample_coalitions(3, SubsetSizes::Fixed { size: 1 }, 3, 0).is_ok());
    }

    #[test]
    fn hoarding_profile_is_exploitable() {
        // everybody saving and mitigating everything consumes nothing, so
        // any retrained member gains
        let c = CommonsConfig::default();
        let profile = vec![masked_policy(MaskedKind::NoConsumption); 3];
        let audit = CoalitionAuditConfig {
            sizes: SubsetSizes::Fixed { size: 1 },
            num_samples: 2,
            seed: 1,
            eval_episodes: 8,
            ..Default::default()
        };
        let r = coalition_audit(&c, &profile, &audit, &quick_train(0)).unwrap();
        assert!(!r.stable);
        for s in &r.samples {
            assert!(s.every_member_improves && s.sum_improves, "{s:?}");
        }
    }

    #[test]
    fn singleton_coalition_matches_unilateral_audit() {
        let c = CommonsConfig::default();
        let profile = vec![AllocationPolicy::Constant(AllocationAction::new(3, 3)); 3];
        let audit = CoalitionAuditConfig {
            sizes: SubsetSizes::Fixed { size: 1 },
            num_samples: 1,
            seed: 9,
            eval_episodes: 8,
            ..Default::default()
        };
        let r = coalition_audit(&c, &profile, &audit, &quick_train(0)).unwrap();
        let s = &r.samples[0];
        let train = TrainConfig {
            seed: s.train_seed,
            ..quick_train(0)
        };
        let u =
            audit_commons_by_retraining(&c, &profile, s.members[0], &train, 8, r.eval_seed, audit.threshold).unwrap();
        assert_eq!(&u, s);
    }
}
