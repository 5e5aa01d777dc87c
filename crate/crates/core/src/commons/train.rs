use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::indices::{compute_indices, IndexReferences, IndexReport, RawAggregates};
use super::policy::{AllocationPolicy, ObservationGrid, TabularAllocationPolicy};
use super::{run_policy_profile, CommonsConfig, EpisodeRecord};
use crate::error::{Error, Result};
use crate::learner::{ParamInit, TrainConfig};

/// Episodes used for every before/after evaluation.
pub const EVAL_EPISODES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommonsCurvePoint {
    pub update: usize,
    pub agent: usize,
    pub mean_episode_reward: f64,
    pub mean_discounted_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEvaluation {
    pub episodes: usize,
    pub seed: u64,
    /// Mean over episodes of the per-agent average undiscounted reward.
    pub mean_episode_reward: f64,
    /// Mean discounted utility per agent (commons discount).
    pub per_agent_value: Vec<f64>,
    /// Standard error of `per_agent_value`.
    pub per_agent_stderr: Vec<f64>,
    pub aggregates: RawAggregates,
}

/// Averages `episodes` rollouts of a fixed profile. Episode seeds are drawn
/// from a ChaCha stream seeded with `seed`.
pub fn evaluate_profile(
    config: &CommonsConfig,
    policies: &[AllocationPolicy],
    episodes: usize,
    seed: u64,
) -> Result<ProfileEvaluation> {
    if episodes == 0 {
        return Err(Error::InvalidConfig("evaluation needs at least one episode".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.num_agents;
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(episodes); n];
    let mut aggs = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let ep = run_policy_profile(policies, config, rng.next_u64())?;
        for (i, v) in ep.discounted_utility(config.discount).into_iter().enumerate() {
            values[i].push(v);
        }
        aggs.push(RawAggregates::from_episode(&ep, config));
    }
    let (means, ses): (Vec<f64>, Vec<f64>) = values.iter().map(|xs| mean_and_stderr(xs)).unzip();
    let aggregates = RawAggregates::mean(&aggs);
    Ok(ProfileEvaluation {
        episodes,
        seed,
        mean_episode_reward: aggregates.episode_reward,
        per_agent_value: means,
        per_agent_stderr: ses,
        aggregates,
    })
}

pub(crate) fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn fresh_learner(config: &CommonsConfig, init: ParamInit, rng: &mut ChaCha8Rng) -> Result<TabularAllocationPolicy> {
    let mut p = TabularAllocationPolicy::zeros(config);
    if let ParamInit::Gaussian { sigma } = init {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for row in p.savings_logits.iter_mut().chain(p.mitigation_logits.iter_mut()) {
            for x in row.iter_mut() {
                *x = normal.sample(rng);
            }
        }
    }
    Ok(p)
}

struct Sample {
    cell: usize,
    savings: usize,
    mitigation: usize,
    ret: f64,
}

fn head_gradient(logits: &[f64], chosen: usize, advantage: f64, entropy_coef: f64, out: &mut [f64], weight: f64) {
    let pi = super::policy::softmax(logits);
    let entropy: f64 = -pi.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>();
    for (b, &pb) in pi.iter().enumerate() {
        let indicator = if b == chosen { 1.0 } else { 0.0 };
        let log_pb = if pb > 0.0 { pb.ln() } else { 0.0 };
        out[b] += weight * (advantage * (indicator - pb) - entropy_coef * pb * (log_pb + entropy));
    }
}

/// Per-cell averaged actor-critic step on both heads.
fn update_learner(policy: &mut TabularAllocationPolicy, samples: &[Sample], train: &TrainConfig) {
    let cells = policy.values.len();
    let mut visits = vec![0usize; cells];
    for s in samples {
        visits[s.cell] += 1;
    }
    let levels = policy.savings_logits.first().map_or(0, |r| r.len());
    let mut gs = vec![vec![0.0; levels]; cells];
    let mut gm = vec![vec![0.0; levels]; cells];
    let mut critic = vec![0.0; cells];
    for s in samples {
        let w = 1.0 / visits[s.cell] as f64;
        let adv = s.ret - policy.values[s.cell];
        head_gradient(
            &policy.savings_logits[s.cell],
            s.savings,
            adv,
            train.entropy_coef,
            &mut gs[s.cell],
            w,
        );
        head_gradient(
            &policy.mitigation_logits[s.cell],
            s.mitigation,
            adv,
            train.entropy_coef,
            &mut gm[s.cell],
            w,
        );
        critic[s.cell] += w * adv;
    }
    for c in 0..cells {
        if visits[c] == 0 {
            continue;
        }
        for b in 0..levels {
            policy.savings_logits[c][b] += train.actor_lr * gs[c][b];
            policy.mitigation_logits[c][b] += train.actor_lr * gm[c][b];
        }
        policy.values[c] += train.critic_lr * critic[c];
    }
}

fn learner_samples(ep: &EpisodeRecord, agent: usize, grid: &ObservationGrid, gamma: f64) -> Vec<Sample> {
    let mut out = Vec::with_capacity(ep.steps.len());
    let mut g = 0.0;
    for st in ep.steps.iter().rev() {
        let a = &st.agents[agent];
        g = a.reward + gamma * g;
        let obs = super::Observation {
            capital: a.capital,
            temperature: st.temperature,
            t: st.t,
        };
        out.push(Sample {
            cell: grid.index(&obs),
            savings: st.actions[agent].savings_level,
            mitigation: st.actions[agent].mitigation_level,
            ret: g,
        });
    }
    out.reverse();
    out
}

/// Trains fresh tabular learners in the `learners` seats while every other
/// seat keeps its policy from `profile`. Returns the updated profile and one
/// curve point per learner per update.
pub fn train_subset(
    config: &CommonsConfig,
    profile: &[AllocationPolicy],
    learners: &[usize],
    train: &TrainConfig,
) -> Result<(Vec<AllocationPolicy>, Vec<CommonsCurvePoint>)> {
    config.validate()?;
    train.validate()?;
    if profile.len() != config.num_agents {
        return Err(Error::ActionCountMismatch {
            expected: config.num_agents,
            got: profile.len(),
        });
    }
    if let Some(&bad) = learners.iter().find(|&&i| i >= config.num_agents) {
        return Err(Error::InvalidConfig(format!("learner index {bad} out of range")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
    let mut policies = profile.to_vec();
    for &i in learners {
        policies[i] = AllocationPolicy::Tabular(fresh_learner(config, train.init, &mut rng)?);
    }
    let grid = ObservationGrid::new(config);
    let mut curve = Vec::with_capacity(train.total_updates * learners.len());
    for update in 1..=train.total_updates {
        let episodes: Vec<EpisodeRecord> = (0..train.episodes_per_update)
            .map(|_| run_policy_profile(&policies, config, rng.next_u64()))
            .collect::<Result<_>>()?;
        for &i in learners {
            let mut samples = Vec::new();
            let mut reward = 0.0;
            let mut discounted = 0.0;
            for ep in &episodes {
                let s = learner_samples(ep, i, &grid, train.gamma);
                discounted += s.first().map_or(0.0, |x| x.ret);
                reward += ep.steps.iter().map(|st| st.agents[i].reward).sum::<f64>();
                samples.extend(s);
            }
            if let AllocationPolicy::Tabular(p) = &mut policies[i] {
                update_learner(p, &samples, train);
            }
            let n = episodes.len() as f64;
            curve.push(CommonsCurvePoint {
                update,
                agent: i,
                mean_episode_reward: reward / n,
                mean_discounted_return: discounted / n,
            });
        }
    }
    Ok((policies, curve))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonsTrainResult {
    pub policies: Vec<AllocationPolicy>,
    pub curve: Vec<CommonsCurvePoint>,
    pub before: ProfileEvaluation,
    pub after: ProfileEvaluation,
    pub before_indices: IndexReport,
    pub after_indices: IndexReport,
}

/// Independent learners in every seat. The untrained profile is the
/// learners' initial parameters; both profiles are evaluated on the same
/// episode seeds.
pub fn train_commons(config: &CommonsConfig, train: &TrainConfig) -> Result<CommonsTrainResult> {
    config.validate()?;
    train.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
    let initial: Vec<AllocationPolicy> = (0..config.num_agents)
        .map(|_| fresh_learner(config, train.init, &mut rng).map(AllocationPolicy::Tabular))
        .collect::<Result<_>>()?;
    let eval_seed = train.seed.wrapping_add(0x5eed);
    let references = IndexReferences::from_masked_runs(config, eval_seed)?;
    let before = evaluate_profile(config, &initial, EVAL_EPISODES, eval_seed)?;
    let learners: Vec<usize> = (0..config.num_agents).collect();
    let (policies, curve) = if train.total_updates == 0 {
        (initial, Vec::new())
    } else {
        train_subset(config, &initial, &learners, train)?
    };
    let after = evaluate_profile(config, &policies, EVAL_EPISODES, eval_seed)?;
    Ok(CommonsTrainResult {
        before_indices: compute_indices(&before.aggregates, &references)?,
        after_indices: compute_indices(&after.aggregates, &references)?,
        policies,
        curve,
        before,
        after,
    })
}

pub const COMMONS_CURVE_COLUMNS: [&str; 5] = [
    "update",
    "seed",
    "agent",
    "mean_episode_reward",
    "mean_discounted_return",
];

pub fn write_commons_curve_csv<W: std::io::Write>(curve: &[CommonsCurvePoint], seed: u64, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(COMMONS_CURVE_COLUMNS)?;
    for p in curve {
        wtr.write_record(&[
            p.update.to_string(),
            seed.to_string(),
            p.agent.to_string(),
            p.mean_episode_reward.to_string(),
            p.mean_discounted_return.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<commons curve csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commons::{masked_policy, MaskedKind};

    fn train_cfg(seed: u64, updates: usize) -> TrainConfig {
        TrainConfig {
            seed,
            total_updates: updates,
            episodes_per_update: 8,
            actor_lr: 0.5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_updates_reproduce_the_untrained_report() {
        let c = CommonsConfig::default();
        let r = train_commons(&c, &train_cfg(3, 0)).unwrap();
        assert_eq!(r.before, r.after);
        assert_eq!(r.before_indices, r.after_indices);
        assert!(r.curve.is_empty());
    }

    #[test]
    fn training_improves_episode_reward() {
        let c = CommonsConfig::default();
        let mut strict = 0;
        for seed in 0..5 {
            let r = train_commons(&c, &train_cfg(seed, 150)).unwrap();
            assert!(
                r.after.mean_episode_reward >= r.before.mean_episode_reward,
                "seed {seed}: {} < {}",
                r.after.mean_episode_reward,
                r.before.mean_episode_reward
            );
            if r.after.mean_episode_reward > r.before.mean_episode_reward {
                strict += 1;
            }
        }
        assert!(strict >= 4);
    }

    #[test]
    fn frozen_seats_are_untouched() {
        let c = CommonsConfig::default();
        let profile = vec![masked_policy(MaskedKind::NoConsumption); 3];
        let (out, curve) = train_subset(&c, &profile, &[1], &train_cfg(0, 5)).unwrap();
        assert_eq!(out[0], profile[0]);
        assert_eq!(out[2], profile[2]);
        assert!(matches!(out[1], AllocationPolicy::Tabular(_)));
        assert_eq!(curve.len(), 5);
        assert!(curve.iter().all(|p| p.agent == 1));
    }

    #[test]
    fn evaluation_is_deterministic() {
        let c = CommonsConfig::default();
        let pols = vec![masked_policy(MaskedKind::UniformRandom); 3];
        let a = evaluate_profile(&c, &pols, 10, 7).unwrap();
        assert_eq!(a, evaluate_profile(&c, &pols, 10, 7).unwrap());
        assert!(a.per_agent_stderr.iter().all(|&s| s > 0.0));
    }
}
