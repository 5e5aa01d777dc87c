//! An N-agent climate commons.
//!
//! Each step every agent produces gross output `Y = A K^alpha Omega(T)` and
//! splits it between investment `s Y`, mitigation spend `theta mu^beta Y`
//! and consumption (the floored residual). Unmitigated output emits
//! `sigma (1 - mu) Y`, which raises the shared temperature by `xi` per unit.
//! Rewards are isoelastic utility of consumption.

mod indices;
mod policy;
mod train;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use indices::{compute_indices, IndexReferences, IndexReport, RawAggregates};
pub use policy::{masked_policy, AllocationPolicy, MaskedKind, Observation, ObservationGrid, TabularAllocationPolicy};
pub use train::{
    evaluate_profile, train_commons, train_subset, write_commons_curve_csv, CommonsCurvePoint, CommonsTrainResult,
    ProfileEvaluation, COMMONS_CURVE_COLUMNS, EVAL_EPISODES,
};

/// Environment parameters. Field names double as config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommonsConfig {
    pub num_agents: usize,
    /// A
    pub productivity: f64,
    /// alpha, in (0, 1)
    pub capital_elasticity: f64,
    /// delta, in (0, 1)
    pub depreciation: f64,
    /// sigma: emissions per unit of unmitigated output
    pub emissions_intensity: f64,
    /// xi: temperature rise per unit of emissions
    pub temperature_sensitivity: f64,
    /// a in `Omega(T) = 1 / (1 + a T^2)`
    pub damage_coef: f64,
    /// theta in the cost fraction `theta mu^beta`
    pub mitigation_cost_scale: f64,
    /// beta
    pub mitigation_cost_exponent: f64,
    /// eta, curvature of `u(c) = (c^(1-eta) - 1) / (1 - eta)`; must not be 1
    pub utility_eta: f64,
    /// Discount applied to utility in the utility index.
    pub discount: f64,
    /// L: discrete levels per action dimension, mapped to `level / (L - 1)`.
    pub action_levels: usize,
    pub episode_length: usize,
    pub initial_capital: f64,
    pub initial_temperature: f64,
    /// Consumption is floored here before utility is evaluated.
    pub consumption_floor: f64,
    pub capital_bins: usize,
    pub capital_bin_min: f64,
    pub capital_bin_max: f64,
    pub temperature_bins: usize,
    pub temperature_bin_max: f64,
    pub phase_bins: usize,
}

impl Default for CommonsConfig {
    fn default() -> Self {
        CommonsConfig {
            num_agents: 3,
            productivity: 1.0,
            capital_elasticity: 0.33,
            depreciation: 0.1,
            emissions_intensity: 1.0,
            temperature_sensitivity: 0.001,
            damage_coef: 0.005,
            mitigation_cost_scale: 0.1,
            mitigation_cost_exponent: 2.0,
            utility_eta: 0.5,
            discount: 0.96,
            action_levels: 10,
            episode_length: 20,
            initial_capital: 10.0,
            initial_temperature: 0.0,
            consumption_floor: 1e-8,
            capital_bins: 8,
            capital_bin_min: 1.0,
            capital_bin_max: 100.0,
            temperature_bins: 8,
            temperature_bin_max: 0.5,
            phase_bins: 4,
        }
    }
}

impl CommonsConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let open01 = |x: f64| x > 0.0 && x < 1.0;
        if self.num_agents == 0 {
            problems.push("num_agents must be positive".to_string());
        }
        if !(self.productivity > 0.0) {
            problems.push("productivity must be positive".into());
        }
        if !open01(self.capital_elasticity) {
            problems.push("capital_elasticity must lie in (0, 1)".into());
        }
        if !open01(self.depreciation) {
            problems.push("depreciation must lie in (0, 1)".into());
        }
        for (name, v) in [
            ("emissions_intensity", self.emissions_intensity),
            ("temperature_sensitivity", self.temperature_sensitivity),
            ("damage_coef", self.damage_coef),
            ("mitigation_cost_scale", self.mitigation_cost_scale),
            ("initial_capital", self.initial_capital),
            ("utility_eta", self.utility_eta),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                problems.push(format!("{name} must be finite and >= 0"));
            }
        }
        if !(self.mitigation_cost_exponent > 0.0) {
            problems.push("mitigation_cost_exponent must be positive".into());
        }
        if (self.utility_eta - 1.0).abs() < 1e-12 {
            problems.push("utility_eta must differ from 1".into());
        }
        if !(0.0..1.0).contains(&self.discount) {
            problems.push("discount must lie in [0, 1)".into());
        }
        if self.action_levels < 2 {
            problems.push("action_levels must be at least 2".into());
        }
        if self.episode_length == 0 {
            problems.push("episode_length must be at least 1".into());
        }
        if !(self.consumption_floor > 0.0) {
            problems.push("consumption_floor must be positive".into());
        }
        if self.capital_bins == 0 || self.temperature_bins == 0 || self.phase_bins == 0 {
            problems.push("observation bins must be positive".into());
        }
        if !(self.capital_bin_min > 0.0 && self.capital_bin_max > self.capital_bin_min) {
            problems.push("capital bin range must satisfy 0 < min < max".into());
        }
        if !(self.temperature_bin_max > 0.0) {
            problems.push("temperature_bin_max must be positive".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }

    pub fn damage(&self, temperature: f64) -> f64 {
        1.0 / (1.0 + self.damage_coef * temperature * temperature)
    }

    pub fn gross_output(&self, capital: f64, temperature: f64) -> f64 {
        self.productivity * capital.powf(self.capital_elasticity) * self.damage(temperature)
    }

    /// Isoelastic utility with the consumption floor applied.
    pub fn utility(&self, consumption: f64) -> f64 {
        let c = consumption.max(self.consumption_floor);
        let e = 1.0 - self.utility_eta;
        (c.powf(e) - 1.0) / e
    }

    pub fn level_rate(&self, level: usize) -> f64 {
        level as f64 / (self.action_levels - 1) as f64
    }
}

/// Savings and mitigation levels in `[0, L - 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AllocationAction {
    pub savings_level: usize,
    pub mitigation_level: usize,
}

impl AllocationAction {
    pub fn new(savings_level: usize, mitigation_level: usize) -> Self {
        AllocationAction {
            savings_level,
            mitigation_level,
        }
    }

    /// `(s, mu)`.
    pub fn rates(&self, config: &CommonsConfig) -> Result<(f64, f64)> {
        let max = config.action_levels - 1;
        if self.savings_level > max || self.mitigation_level > max {
            return Err(Error::InvalidConfig(format!(
                "action levels ({}, {}) exceed L - 1 = {max}",
                self.savings_level, self.mitigation_level
            )));
        }
        Ok((
            config.level_rate(self.savings_level),
            config.level_rate(self.mitigation_level),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonsState {
    pub t: usize,
    pub capital: Vec<f64>,
    pub temperature: f64,
    pub cumulative_output: Vec<f64>,
    pub cumulative_consumption: Vec<f64>,
    pub cumulative_utility: Vec<f64>,
    /// Agent-steps where investment plus mitigation exceeded output.
    pub floor_events: usize,
}

impl CommonsState {
    pub fn initial(config: &CommonsConfig) -> Self {
        let n = config.num_agents;
        CommonsState {
            t: 0,
            capital: vec![config.initial_capital; n],
            temperature: config.initial_temperature,
            cumulative_output: vec![0.0; n],
            cumulative_consumption: vec![0.0; n],
            cumulative_utility: vec![0.0; n],
            floor_events: 0,
        }
    }

    pub fn is_done(&self, config: &CommonsConfig) -> bool {
        self.t >= config.episode_length
    }

    pub fn observation(&self, agent: usize) -> Observation {
        Observation {
            capital: self.capital[agent],
            temperature: self.temperature,
            t: self.t,
        }
    }
}

/// What happened to one agent during one step. `capital` is the stock the
/// step started from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentStep {
    pub capital: f64,
    pub gross_output: f64,
    pub savings_rate: f64,
    pub mitigation_rate: f64,
    pub investment: f64,
    pub mitigation_spend: f64,
    pub consumption: f64,
    pub emissions: f64,
    pub reward: f64,
    pub floored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    /// Temperature the step's output was damaged by.
    pub temperature: f64,
    pub next_temperature: f64,
    pub agents: Vec<AgentStep>,
    pub actions: Vec<AllocationAction>,
}

/// Advances every agent by one period.
pub fn commons_step(
    state: &CommonsState,
    actions: &[AllocationAction],
    config: &CommonsConfig,
) -> Result<(CommonsState, StepRecord)> {
    if actions.len() != config.num_agents || state.capital.len() != config.num_agents {
        return Err(Error::ActionCountMismatch {
            expected: config.num_agents,
            got: actions.len(),
        });
    }
    if state.is_done(config) {
        return Err(Error::EpisodeFinished(state.t));
    }
    let mut next = state.clone();
    let mut agents = Vec::with_capacity(actions.len());
    let mut total_emissions = 0.0;
    for (i, action) in actions.iter().enumerate() {
        let (s, mu) = action.rates(config)?;
        let k = state.capital[i];
        let y = config.gross_output(k, state.temperature);
        let mitigation_spend = config.mitigation_cost_scale * mu.powf(config.mitigation_cost_exponent) * y;
        let investment = s * y;
        let residual = y - investment - mitigation_spend;
        let floored = residual < 0.0;
        let consumption = residual.max(0.0);
        let emissions = config.emissions_intensity * (1.0 - mu) * y;
        let reward = config.utility(consumption);

        next.capital[i] = (1.0 - config.depreciation) * k + investment;
        next.cumulative_output[i] += y;
        next.cumulative_consumption[i] += consumption;
        next.cumulative_utility[i] += reward;
        if floored {
            next.floor_events += 1;
        }
        total_emissions += emissions;
        agents.push(AgentStep {
            capital: k,
            gross_output: y,
            savings_rate: s,
            mitigation_rate: mu,
            investment,
            mitigation_spend,
            consumption,
            emissions,
            reward,
            floored,
        });
    }
    next.temperature = state.temperature + config.temperature_sensitivity * total_emissions;
    next.t = state.t + 1;
    let record = StepRecord {
        t: state.t,
        temperature: state.temperature,
        next_temperature: next.temperature,
        agents,
        actions: actions.to_vec(),
    };
    Ok((next, record))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub initial_temperature: f64,
    pub steps: Vec<StepRecord>,
    pub final_state: CommonsState,
}

pub const EPISODE_COLUMNS: [&str; 10] = [
    "step",
    "agent",
    "capital",
    "gross_output",
    "savings_rate",
    "mitigation_rate",
    "consumption",
    "emissions",
    "temperature",
    "reward",
];

#[derive(Serialize)]
struct EpisodeRow {
    step: usize,
    agent: usize,
    capital: f64,
    gross_output: f64,
    savings_rate: f64,
    mitigation_rate: f64,
    consumption: f64,
    emissions: f64,
    temperature: f64,
    reward: f64,
}

impl EpisodeRecord {
    pub fn num_agents(&self) -> usize {
        self.final_state.capital.len()
    }

    pub fn total_gross_output(&self) -> f64 {
        self.steps
            .iter()
            .flat_map(|s| s.agents.iter())
            .map(|a| a.gross_output)
            .sum()
    }

    pub fn temperature_rise(&self) -> f64 {
        self.final_state.temperature - self.initial_temperature
    }

    /// Per-agent `sum_t discount^t u_t`.
    pub fn discounted_utility(&self, discount: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.num_agents()];
        let mut w = 1.0;
        for st in &self.steps {
            for (i, a) in st.agents.iter().enumerate() {
                out[i] += w * a.reward;
            }
            w *= discount;
        }
        out
    }

    /// Per-agent undiscounted reward totals.
    pub fn episode_rewards(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.num_agents()];
        for st in &self.steps {
            for (i, a) in st.agents.iter().enumerate() {
                out[i] += a.reward;
            }
        }
        out
    }

    /// Rows are (step, agent); `temperature` is the level the step started at.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for st in &self.steps {
            for (i, a) in st.agents.iter().enumerate() {
                wtr.serialize(EpisodeRow {
                    step: st.t,
                    agent: i,
                    capital: a.capital,
                    gross_output: a.gross_output,
                    savings_rate: a.savings_rate,
                    mitigation_rate: a.mitigation_rate,
                    consumption: a.consumption,
                    emissions: a.emissions,
                    temperature: st.temperature,
                    reward: a.reward,
                })?;
            }
        }
        wtr.flush().map_err(|e| Error::io("<episode csv>", e))?;
        Ok(())
    }
}

/// Rolls out one full episode. Agents act in index order from one ChaCha
/// stream seeded with `seed`.
pub fn run_policy_profile(policies: &[AllocationPolicy], config: &CommonsConfig, seed: u64) -> Result<EpisodeRecord> {
    use rand::SeedableRng;
    config.validate()?;
    if policies.len() != config.num_agents {
        return Err(Error::ActionCountMismatch {
            expected: config.num_agents,
            got: policies.len(),
        });
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut state = CommonsState::initial(config);
    let mut steps = Vec::with_capacity(config.episode_length);
    while !state.is_done(config) {
        let actions: Vec<AllocationAction> = policies
            .iter()
            .enumerate()
            .map(|(i, p)| p.act(&state.observation(i), config, &mut rng))
            .collect();
        let (next, record) = commons_step(&state, &actions, config)?;
        steps.push(record);
        state = next;
    }
    Ok(EpisodeRecord {
        seed,
        initial_temperature: config.initial_temperature,
        steps,
        final_state: state,
    })
}
