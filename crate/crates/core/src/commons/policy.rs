use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AllocationAction, CommonsConfig};

/// What an agent sees: its own capital, the shared temperature and the step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub capital: f64,
    pub temperature: f64,
    pub t: usize,
}

/// Discretisation of observations for tabular learners: log-spaced capital
/// bins, linear temperature-rise bins and episode phases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationGrid {
    capital_bins: usize,
    temperature_bins: usize,
    phase_bins: usize,
    log_min: f64,
    log_span: f64,
    temperature_origin: f64,
    temperature_max: f64,
    episode_length: usize,
}

impl ObservationGrid {
    pub fn new(config: &CommonsConfig) -> Self {
        ObservationGrid {
            capital_bins: config.capital_bins,
            temperature_bins: config.temperature_bins,
            phase_bins: config.phase_bins,
            log_min: config.capital_bin_min.ln(),
            log_span: (config.capital_bin_max / config.capital_bin_min).ln(),
            temperature_origin: config.initial_temperature,
            temperature_max: config.temperature_bin_max,
            episode_length: config.episode_length,
        }
    }

    pub fn size(&self) -> usize {
        self.capital_bins * self.temperature_bins * self.phase_bins
    }

    pub fn index(&self, obs: &Observation) -> usize {
        let clamp = |x: f64, n: usize| (x.max(0.0).floor() as usize).min(n - 1);
        let kb = if obs.capital > 0.0 {
            clamp(
                (obs.capital.ln() - self.log_min) / self.log_span * self.capital_bins as f64,
                self.capital_bins,
            )
        } else {
            0
        };
        let tb = clamp(
            (obs.temperature - self.temperature_origin) / self.temperature_max * self.temperature_bins as f64,
            self.temperature_bins,
        );
        let pb = (obs.t * self.phase_bins / self.episode_length.max(1)).min(self.phase_bins - 1);
        (kb * self.temperature_bins + tb) * self.phase_bins + pb
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskedKind {
    /// Both levels pinned to `L - 1`.
    NoConsumption,
    /// Both levels pinned to 0.
    FullConsumption,
    UniformRandom,
}

/// Factored softmax policy: independent heads for the savings and the
/// mitigation level, plus a critic, all indexed by [`ObservationGrid`] cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularAllocationPolicy {
    pub savings_logits: Vec<Vec<f64>>,
    pub mitigation_logits: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl TabularAllocationPolicy {
    pub fn zeros(config: &CommonsConfig) -> Self {
        let cells = ObservationGrid::new(config).size();
        let l = config.action_levels;
        TabularAllocationPolicy {
            savings_logits: vec![vec![0.0; l]; cells],
            mitigation_logits: vec![vec![0.0; l]; cells],
            values: vec![0.0; cells],
        }
    }

    pub fn savings_probs(&self, cell: usize) -> Vec<f64> {
        softmax(&self.savings_logits[cell])
    }

    pub fn mitigation_probs(&self, cell: usize) -> Vec<f64> {
        softmax(&self.mitigation_logits[cell])
    }

    fn sample(&self, cell: usize, rng: &mut ChaCha8Rng) -> AllocationAction {
        let s = sample_categorical(&self.savings_probs(cell), rng.random());
        let m = sample_categorical(&self.mitigation_probs(cell), rng.random());
        AllocationAction::new(s, m)
    }
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn sample_categorical(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AllocationPolicy {
    Masked { mask: MaskedKind },
    Constant(AllocationAction),
    Tabular(TabularAllocationPolicy),
}

pub fn masked_policy(kind: MaskedKind) -> AllocationPolicy {
    AllocationPolicy::Masked { mask: kind }
}

impl AllocationPolicy {
    pub fn act(&self, obs: &Observation, config: &CommonsConfig, rng: &mut ChaCha8Rng) -> AllocationAction {
        let top = config.action_levels - 1;
        match self {
            AllocationPolicy::Masked { mask } => match mask {
                MaskedKind::NoConsumption => AllocationAction::new(top, top),
                MaskedKind::FullConsumption => AllocationAction::new(0, 0),
                MaskedKind::UniformRandom => {
                    AllocationAction::new(rng.random_range(0..=top), rng.random_range(0..=top))
                }
            },
            AllocationPolicy::Constant(a) => *a,
            AllocationPolicy::Tabular(t) => t.sample(ObservationGrid::new(config).index(obs), rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn obs() -> Observation {
        Observation {
            capital: 10.0,
            temperature: 0.0,
            t: 0,
        }
    }

    #[test]
    fn no_consumption_uses_full_rates() {
        let c = CommonsConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = masked_policy(MaskedKind::NoConsumption).act(&obs(), &c, &mut rng);
        assert_eq!(a, AllocationAction::new(9, 9));
        assert_eq!(a.rates(&c).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn full_consumption_uses_zero_rates() {
        let c = CommonsConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = masked_policy(MaskedKind::FullConsumption).act(&obs(), &c, &mut rng);
        assert_eq!(a.rates(&c).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn uniform_random_is_reproducible_and_covers_levels() {
        let c = CommonsConfig::default();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..500)
                .map(|_| masked_policy(MaskedKind::UniformRandom).act(&obs(), &c, &mut rng))
                .collect::<Vec<_>>()
        };
        let a = draw(4);
        assert_eq!(a, draw(4));
        assert_ne!(a, draw(5));
        for level in 0..10 {
            assert!(a.iter().any(|x| x.savings_level == level));
            assert!(a.iter().any(|x| x.mitigation_level == level));
        }
    }

    #[test]
    fn grid_cells_are_in_range() {
        let c = CommonsConfig::default();
        let g = ObservationGrid::new(&c);
        assert_eq!(g.size(), 256);
        for k in [0.0, 0.5, 1.0, 10.0, 99.0, 1e6] {
            for temp in [-1.0, 0.0, 0.2, 0.49, 5.0] {
                for t in 0..c.episode_length {
                    let i = g.index(&Observation {
                        capital: k,
                        temperature: temp,
                        t,
                    });
                    assert!(i < g.size());
                }
            }
        }
        // phases split the episode into quarters
        let at = |t| g.index(&Observation { t, ..obs() });
        assert_eq!(at(0), at(4));
        assert_ne!(at(4), at(5));
    }

    #[test]
    fn zero_tabular_policy_is_uniform() {
        let c = CommonsConfig::default();
        let p = TabularAllocationPolicy::zeros(&c);
        assert!(p.savings_probs(3).iter().all(|&x| (x - 0.1).abs() < 1e-15));
    }
}
