//! The iterated 2x2 matrix game: payoffs, the five-state observation space,
//! horizon models, rollouts and exact discounted values.
//!
//! States are encoded from a global view. `CD` always means "player 1
//! cooperated, player 2 defected", whichever player is looking at it;
//! strategies for slot 2 are mirrored instead of the state.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{Matrix5, Vector5};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::strategies::MemoryOnePolicy;

/// Residual bound for the direct solve of the five-state reward process.
pub const EXACT_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Cooperate,
    Defect,
}

impl Action {
    pub const BOTH: [Action; 2] = [Action::Cooperate, Action::Defect];

    pub fn index(self) -> usize {
        match self {
            Action::Cooperate => 0,
            Action::Defect => 1,
        }
    }

    pub fn from_index(i: usize) -> Action {
        if i == 0 {
            Action::Cooperate
        } else {
            Action::Defect
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Action::Cooperate => "C",
            Action::Defect => "D",
        }
    }
}

/// Which seat a player occupies in the matrix game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slot {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Slot {
    pub const BOTH: [Slot; 2] = [Slot::One, Slot::Two];

    pub fn index(self) -> usize {
        match self {
            Slot::One => 0,
            Slot::Two => 1,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn other(self) -> Slot {
        match self {
            Slot::One => Slot::Two,
            Slot::Two => Slot::One,
        }
    }

    pub fn from_number(n: u8) -> Result<Slot> {
        match n {
            1 => Ok(Slot::One),
            2 => Ok(Slot::Two),
            _ => Err(Error::InvalidConfig(format!("slot must be 1 or 2, got {n}"))),
        }
    }
}

/// Canonical labels of a prisoner's dilemma from one player's perspective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdPayoffs {
    pub reward: f64,
    pub temptation: f64,
    pub punishment: f64,
    pub sucker: f64,
}

/// A two-player two-action payoff table, `payoff[player][a1][a2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixGame {
    pub payoff: [[[f64; 2]; 2]; 2],
}

impl MatrixGame {
    /// Symmetric game from the canonical labels.
    pub fn symmetric(r: f64, t: f64, p: f64, s: f64) -> Self {
        let p1 = [[r, s], [t, p]];
        let p2 = [[r, t], [s, p]];
        MatrixGame { payoff: [p1, p2] }
    }

    /// R=4, T=5, P=1, S=0.
    pub fn classic() -> Self {
        MatrixGame::symmetric(4.0, 5.0, 1.0, 0.0)
    }

    pub fn payoff(&self, slot: Slot, a1: Action, a2: Action) -> f64 {
        self.payoff[slot.index()][a1.index()][a2.index()]
    }

    pub fn rewards(&self, a1: Action, a2: Action) -> (f64, f64) {
        (self.payoff(Slot::One, a1, a2), self.payoff(Slot::Two, a1, a2))
    }

    /// Payoff to `slot` when it plays `own` and the other player plays `other`.
    pub fn own_payoff(&self, slot: Slot, own: Action, other: Action) -> f64 {
        match slot {
            Slot::One => self.payoff(slot, own, other),
            Slot::Two => self.payoff(slot, other, own),
        }
    }

    pub fn labels(&self, slot: Slot) -> PdPayoffs {
        use Action::*;
        PdPayoffs {
            reward: self.own_payoff(slot, Cooperate, Cooperate),
            temptation: self.own_payoff(slot, Defect, Cooperate),
            punishment: self.own_payoff(slot, Defect, Defect),
            sucker: self.own_payoff(slot, Cooperate, Defect),
        }
    }

    pub fn validate_pd(&self) -> PdValidity {
        let per_player = |slot| {
            let l = self.labels(slot);
            (
                l.temptation > l.reward && l.reward > l.punishment && l.punishment > l.sucker,
                2.0 * l.reward > l.temptation + l.sucker,
            )
        };
        let (o1, c1) = per_player(Slot::One);
        let (o2, c2) = per_player(Slot::Two);
        let symmetric = (0..2).all(|a1| (0..2).all(|a2| self.payoff[1][a1][a2] == self.payoff[0][a2][a1]));
        PdValidity {
            ordering: [o1, o2],
            cooperation_beats_alternation: [c1, c2],
            symmetric,
        }
    }
}

impl Default for MatrixGame {
    fn default() -> Self {
        MatrixGame::classic()
    }
}

/// Outcome of [`MatrixGame::validate_pd`]; one flag per invariant and player.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PdValidity {
    /// T > R > P > S.
    pub ordering: [bool; 2],
    /// 2R > T + S.
    pub cooperation_beats_alternation: [bool; 2],
    pub symmetric: bool,
}

impl PdValidity {
    pub fn is_valid(&self) -> bool {
        self.ordering.iter().all(|&b| b) && self.cooperation_beats_alternation.iter().all(|&b| b) && self.symmetric
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in 0..2 {
            if !self.ordering[i] {
                out.push(format!("player {}: T > R > P > S fails", i + 1));
            }
            if !self.cooperation_beats_alternation[i] {
                out.push(format!("player {}: 2R > T + S fails", i + 1));
            }
        }
        if !self.symmetric {
            out.push("payoff table is not symmetric".into());
        }
        out
    }
}

/// Observation shared by both players: the previous joint action, or `Start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GameState {
    Start,
    CC,
    CD,
    DC,
    DD,
}

impl GameState {
    pub const ALL: [GameState; 5] = [
        GameState::Start,
        GameState::CC,
        GameState::CD,
        GameState::DC,
        GameState::DD,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> GameState {
        GameState::ALL[i]
    }

    pub fn from_actions(a1: Action, a2: Action) -> GameState {
        GameState::ALL[1 + 2 * a1.index() + a2.index()]
    }

    /// The same outcome seen with the players swapped.
    pub fn mirrored(self) -> GameState {
        match self {
            GameState::CD => GameState::DC,
            GameState::DC => GameState::CD,
            s => s,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            GameState::Start => "start",
            GameState::CC => "CC",
            GameState::CD => "CD",
            GameState::DC => "DC",
            GameState::DD => "DD",
        }
    }
}

impl fmt::Display for GameState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for GameState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "start" => Ok(GameState::Start),
            "cc" => Ok(GameState::CC),
            "cd" => Ok(GameState::CD),
            "dc" => Ok(GameState::DC),
            "dd" => Ok(GameState::DD),
            _ => Err(Error::Unknown {
                what: "game state",
                name: s.into(),
            }),
        }
    }
}

/// Pure transition: the next state is the joint action just played.
pub fn step(game: &MatrixGame, _state: GameState, actions: (Action, Action)) -> (GameState, (f64, f64)) {
    let (a1, a2) = actions;
    (GameState::from_actions(a1, a2), game.rewards(a1, a2))
}

/// Episode length distribution.
///
/// `Geometric` terminates after each step with probability `p`, so lengths
/// live on {1, 2, ...} and are truncated at `cap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HorizonModel {
    Fixed { n: usize },
    Geometric { p: f64, cap: usize },
}

impl HorizonModel {
    /// Geometric horizon whose survival probabilities equal `gamma^t`.
    ///
    /// The cap is set to `ceil(200 / p)` so the truncated tail is negligible.
    pub fn matched_to_discount(gamma: f64) -> Result<Self> {
        check_discount(gamma)?;
        let p = 1.0 - gamma;
        let model = HorizonModel::Geometric {
            p,
            cap: (200.0 / p).ceil() as usize,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            HorizonModel::Fixed { n } if n == 0 => Err(Error::InvalidHorizon("fixed horizon must be positive".into())),
            HorizonModel::Geometric { p, cap } => {
                if !(p > 0.0 && p <= 1.0) {
                    Err(Error::InvalidHorizon(format!(
                        "termination probability must lie in (0, 1], got {p}"
                    )))
                } else if cap == 0 {
                    Err(Error::InvalidHorizon("cap must be positive".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn max_len(&self) -> usize {
        match *self {
            HorizonModel::Fixed { n } => n,
            HorizonModel::Geometric { cap, .. } => cap,
        }
    }
}

pub fn sample_horizon<R: Rng + ?Sized>(model: &HorizonModel, rng: &mut R) -> Result<usize> {
    model.validate()?;
    Ok(match *model {
        HorizonModel::Fixed { n } => n,
        HorizonModel::Geometric { p, cap } => {
            let failures = Geometric::new(p)
                .map_err(|e| Error::InvalidHorizon(e.to_string()))?
                .sample(rng);
            (failures.saturating_add(1)).min(cap as u64) as usize
        }
    })
}

/// How action noise is drawn during a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Each player draws its own uniform per step.
    #[default]
    Independent,
    /// One uniform per step drives both players' choices.
    Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: GameState,
    pub actions: (Action, Action),
    pub rewards: (f64, f64),
}

impl Step {
    pub fn action(&self, slot: Slot) -> Action {
        match slot {
            Slot::One => self.actions.0,
            Slot::Two => self.actions.1,
        }
    }

    pub fn reward(&self, slot: Slot) -> f64 {
        match slot {
            Slot::One => self.rewards.0,
            Slot::Two => self.rewards.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRow<'a> {
    step: usize,
    state: &'a str,
    action_p1: &'a str,
    action_p2: &'a str,
    reward_p1: f64,
    reward_p2: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_reward(&self, slot: Slot) -> f64 {
        self.steps.iter().map(|s| s.reward(slot)).sum()
    }

    pub fn discounted_return(&self, slot: Slot, gamma: f64) -> f64 {
        let mut g = 0.0;
        for s in self.steps.iter().rev() {
            g = s.reward(slot) + gamma * g;
        }
        g
    }

    /// Discounted return-to-go from every step, for one player.
    pub fn returns_to_go(&self, slot: Slot, gamma: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.steps.len()];
        let mut g = 0.0;
        for (t, s) in self.steps.iter().enumerate().rev() {
            g = s.reward(slot) + gamma * g;
            out[t] = g;
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for (t, s) in self.steps.iter().enumerate() {
            wtr.serialize(TrajectoryRow {
                step: t,
                state: s.state.label(),
                action_p1: s.actions.0.label(),
                action_p2: s.actions.1.label(),
                reward_p1: s.rewards.0,
                reward_p2: s.rewards.1,
            })?;
        }
        wtr.flush().map_err(|e| Error::io("<trajectory csv>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Plays one episode. The horizon is drawn first, then actions, all from a
/// ChaCha stream seeded with `seed`.
pub fn rollout(
    game: &MatrixGame,
    policy1: &MemoryOnePolicy,
    policy2: &MemoryOnePolicy,
    horizon: &HorizonModel,
    seed: u64,
) -> Result<Trajectory> {
    rollout_with_noise(game, policy1, policy2, horizon, seed, NoiseMode::Independent)
}

pub fn rollout_with_noise(
    game: &MatrixGame,
    policy1: &MemoryOnePolicy,
    policy2: &MemoryOnePolicy,
    horizon: &HorizonModel,
    seed: u64,
    noise: NoiseMode,
) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = sample_horizon(horizon, &mut rng)?;
    let mut steps = Vec::with_capacity(len);
    let mut state = GameState::Start;
    for _ in 0..len {
        let (u1, u2) = match noise {
            NoiseMode::Independent => (rng.random::<f64>(), rng.random::<f64>()),
            NoiseMode::Common => {
                let u = rng.random::<f64>();
                (u, u)
            }
        };
        let a1 = choose(policy1.p_defect(state), u1);
        let a2 = choose(policy2.p_defect(state), u2);
        let (next, rewards) = step(game, state, (a1, a2));
        steps.push(Step {
            state,
            actions: (a1, a2),
            rewards,
        });
        state = next;
    }
    Ok(Trajectory { steps, seed })
}

fn choose(p_defect: f64, u: f64) -> Action {
    if u < p_defect {
        Action::Defect
    } else {
        Action::Cooperate
    }
}

pub(crate) fn check_discount(gamma: f64) -> Result<()> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::InvalidDiscount(gamma))
    }
}

/// Transition matrix and expected rewards of the Markov reward process
/// induced by two memory-one policies. The transitions do not depend on
/// the payoff table.
fn reward_process(
    game: &MatrixGame,
    policy1: &MemoryOnePolicy,
    policy2: &MemoryOnePolicy,
) -> (Matrix5<f64>, Vector5<f64>, Vector5<f64>) {
    let mut trans = Matrix5::zeros();
    let mut r1 = Vector5::zeros();
    let mut r2 = Vector5::zeros();
    for s in GameState::ALL {
        let q1 = policy1.p_defect(s);
        let q2 = policy2.p_defect(s);
        for a1 in Action::BOTH {
            for a2 in Action::BOTH {
                let pa1 = if a1 == Action::Defect { q1 } else { 1.0 - q1 };
                let pa2 = if a2 == Action::Defect { q2 } else { 1.0 - q2 };
                let prob = pa1 * pa2;
                let next = GameState::from_actions(a1, a2);
                trans[(s.index(), next.index())] += prob;
                let (x1, x2) = game.rewards(a1, a2);
                r1[s.index()] += prob * x1;
                r2[s.index()] += prob * x2;
            }
        }
    }
    (trans, r1, r2)
}

/// Per-state discounted values of both players, indexed by [`GameState::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateValues {
    pub player1: [f64; 5],
    pub player2: [f64; 5],
}

impl StateValues {
    pub fn start(&self) -> (f64, f64) {
        (self.player1[0], self.player2[0])
    }

    pub fn for_slot(&self, slot: Slot) -> [f64; 5] {
        match slot {
            Slot::One => self.player1,
            Slot::Two => self.player2,
        }
    }
}

/// Solves `v = r + gamma P v` directly for both players.
pub fn exact_state_values(
    game: &MatrixGame,
    policy1: &MemoryOnePolicy,
    policy2: &MemoryOnePolicy,
    gamma: f64,
) -> Result<StateValues> {
    check_discount(gamma)?;
    let (trans, r1, r2) = reward_process(game, policy1, policy2);
    let system = Matrix5::identity() - trans * gamma;
    let lu = system.lu();
    let solve = |r: &Vector5<f64>| -> Result<Vector5<f64>> {
        let v = lu
            .solve(r)
            .ok_or_else(|| Error::Solver("singular reward-process system".into()))?;
        let residual = (v - r - trans * v * gamma).amax();
        if residual > EXACT_RESIDUAL_TOL {
            return Err(Error::Solver(format!("residual {residual:e} exceeds tolerance")));
        }
        Ok(v)
    };
    let v1 = solve(&r1)?;
    let v2 = solve(&r2)?;
    Ok(StateValues {
        player1: v1.into(),
        player2: v2.into(),
    })
}

/// Start-state discounted values `(v1, v2)`.
pub fn exact_discounted_values(
    game: &MatrixGame,
    policy1: &MemoryOnePolicy,
    policy2: &MemoryOnePolicy,
    gamma: f64,
) -> Result<(f64, f64)> {
    Ok(exact_state_values(game, policy1, policy2, gamma)?.start())
}

/// Normalised discounted state occupancy from `Start`:
/// `(1 - gamma) * sum_t gamma^t Pr[s_t = s]`.
pub fn state_occupancy(policy1: &MemoryOnePolicy, policy2: &MemoryOnePolicy, gamma: f64) -> Result<[f64; 5]> {
    check_discount(gamma)?;
    let trans = reward_process(&MatrixGame::classic(), policy1, policy2).0;
    let system = Matrix5::identity() - trans.transpose() * gamma;
    let mut start = Vector5::zeros();
    start[0] = 1.0 - gamma;
    let d = system
        .lu()
        .solve(&start)
        .ok_or_else(|| Error::Solver("singular occupancy system".into()))?;
    Ok(d.into())
}

/// Occupancy a state needs to count as visited by [`visited_states`].
pub const VISITED_OCCUPANCY: f64 = 0.01;

/// States whose discounted occupancy under the pair reaches
/// [`VISITED_OCCUPANCY`]. `Start` always qualifies when `gamma <= 0.99`.
pub fn visited_states(policy1: &MemoryOnePolicy, policy2: &MemoryOnePolicy, gamma: f64) -> Result<Vec<GameState>> {
    let d = state_occupancy(policy1, policy2, gamma)?;
    Ok(GameState::ALL
        .into_iter()
        .filter(|s| d[s.index()] >= VISITED_OCCUPANCY)
        .collect())
}

/// Monte Carlo estimate of start-state discounted values, with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub episodes: usize,
    pub mean: (f64, f64),
    pub stderr: (f64, f64),
}

/// Estimates discounted values without discounting any reward: episodes
/// stop after each step with probability `1 - gamma`, so the expected
/// undiscounted total equals the discounted value (up to the negligible
/// truncation at the horizon cap).
pub fn monte_carlo_values(
    game: &MatrixGame,
    policy1: &MemoryOnePolicy,
    policy2: &MemoryOnePolicy,
    gamma: f64,
    episodes: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if episodes < 2 {
        return Err(Error::InvalidConfig("need at least two episodes".into()));
    }
    let horizon = HorizonModel::matched_to_discount(gamma)?;
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = [0.0; 2];
    let mut sq = [0.0; 2];
    for _ in 0..episodes {
        let tr = rollout(game, policy1, policy2, &horizon, seeds.random())?;
        for slot in Slot::BOTH {
            let g = tr.total_reward(slot);
            sum[slot.index()] += g;
            sq[slot.index()] += g * g;
        }
    }
    let n = episodes as f64;
    let stat = |i: usize| {
        let mean = sum[i] / n;
        let var = ((sq[i] - n * mean * mean) / (n - 1.0)).max(0.0);
        (mean, (var / n).sqrt())
    };
    let (m1, s1) = stat(0);
    let (m2, s2) = stat(1);
    Ok(MonteCarloEstimate {
        episodes,
        mean: (m1, m2),
        stderr: (s1, s2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategies::{fixed_strategy, StrategyKind};
    use approx::assert_abs_diff_eq;
    use Action::*;

    fn pol(kind: StrategyKind, slot: Slot) -> MemoryOnePolicy {
        fixed_strategy(kind, slot)
    }

    #[test]
    fn classic_matrix_is_a_valid_pd() {
        assert!(MatrixGame::classic().validate_pd().is_valid());
    }

    #[test]
    fn degenerate_matrix_fails_ordering() {
        let v = MatrixGame::symmetric(1.0, 1.0, 1.0, 1.0).validate_pd();
        assert!(!v.is_valid());
        assert_eq!(v.ordering, [false, false]);
        // 2 > 2 is false as well
        assert_eq!(v.cooperation_beats_alternation, [false, false]);
        assert!(v.symmetric);
    }

    #[test]
    fn wide_spread_matrix_is_valid() {
        // 10 > 3 > 1 > -5 and 6 > 5
        let v = MatrixGame::symmetric(3.0, 10.0, 1.0, -5.0).validate_pd();
        assert!(v.is_valid(), "{:?}", v.failures());
    }

    #[test]
    fn asymmetric_table_is_flagged() {
        let mut g = MatrixGame::classic();
        g.payoff[1][0][1] = 6.0;
        let v = g.validate_pd();
        assert!(!v.symmetric);
        assert!(!v.is_valid());
    }

    #[test]
    fn step_examples() {
        let g = MatrixGame::classic();
        assert_eq!(
            step(&g, GameState::Start, (Cooperate, Cooperate)),
            (GameState::CC, (4.0, 4.0))
        );
        assert_eq!(
            step(&g, GameState::DD, (Cooperate, Defect)),
            (GameState::CD, (0.0, 5.0))
        );
        assert_eq!(step(&g, GameState::CC, (Defect, Defect)), (GameState::DD, (1.0, 1.0)));
    }

    #[test]
    fn state_encoding_round_trips() {
        for a1 in Action::BOTH {
            for a2 in Action::BOTH {
                let s = GameState::from_actions(a1, a2);
                assert_eq!(s.mirrored(), GameState::from_actions(a2, a1));
                assert_eq!(s.label().parse::<GameState>().unwrap(), s);
            }
        }
    }

    #[test]
    fn fixed_and_certain_horizons() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(sample_horizon(&HorizonModel::Fixed { n: 20 }, &mut rng).unwrap(), 20);
            let g = HorizonModel::Geometric { p: 1.0, cap: 100 };
            assert_eq!(sample_horizon(&g, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn invalid_horizons_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for bad in [
            HorizonModel::Fixed { n: 0 },
            HorizonModel::Geometric { p: 0.0, cap: 10 },
            HorizonModel::Geometric { p: 1.5, cap: 10 },
            HorizonModel::Geometric { p: 0.5, cap: 0 },
        ] {
            assert!(sample_horizon(&bad, &mut rng).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn geometric_mean_converges_with_large_cap() {
        // cap = 200 / p
        let p = 0.1;
        let model = HorizonModel::Geometric { p, cap: 2000 };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 50_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_horizon(&model, &mut rng).unwrap() as f64)
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - 1.0 / p).abs() < 4.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn deterministic_rollouts() {
        let g = MatrixGame::classic();
        let h = HorizonModel::Fixed { n: 3 };
        let alld1 = pol(StrategyKind::AllD, Slot::One);
        let alld2 = pol(StrategyKind::AllD, Slot::Two);
        let tr = rollout(&g, &alld1, &alld2, &h, 0).unwrap();
        assert!(tr.steps.iter().all(|s| s.rewards == (1.0, 1.0)));

        let tft1 = pol(StrategyKind::TitForTat, Slot::One);
        let tft2 = pol(StrategyKind::TitForTat, Slot::Two);
        let tr = rollout(&g, &tft1, &tft2, &HorizonModel::Fixed { n: 5 }, 0).unwrap();
        assert_eq!(tr.len(), 5);
        assert!(tr.steps.iter().all(|s| s.rewards == (4.0, 4.0)));

        let tr = rollout(&g, &alld1, &tft2, &h, 0).unwrap();
        let rewards: Vec<_> = tr.steps.iter().map(|s| s.rewards).collect();
        assert_eq!(rewards, vec![(5.0, 0.0), (1.0, 1.0), (1.0, 1.0)]);
    }

    #[test]
    fn trajectory_states_chain() {
        let g = MatrixGame::classic();
        let p = MemoryOnePolicy::new([0.3, 0.6, 0.1, 0.9, 0.5]).unwrap();
        let q = MemoryOnePolicy::new([0.7, 0.2, 0.4, 0.5, 0.8]).unwrap();
        let tr = rollout(&g, &p, &q, &HorizonModel::Geometric { p: 0.05, cap: 400 }, 42).unwrap();
        assert_eq!(tr.steps[0].state, GameState::Start);
        for w in tr.steps.windows(2) {
            assert_eq!(w[1].state, GameState::from_actions(w[0].actions.0, w[0].actions.1));
        }
        for s in &tr.steps {
            assert_eq!(s.rewards, g.rewards(s.actions.0, s.actions.1));
        }
        let again = rollout(&g, &p, &q, &HorizonModel::Geometric { p: 0.05, cap: 400 }, 42).unwrap();
        assert_eq!(tr, again);
    }

    #[test]
    fn exact_values_of_constant_pairs() {
        let g = MatrixGame::classic();
        let allc1 = pol(StrategyKind::AllC, Slot::One);
        let allc2 = pol(StrategyKind::AllC, Slot::Two);
        let alld1 = pol(StrategyKind::AllD, Slot::One);
        let alld2 = pol(StrategyKind::AllD, Slot::Two);
        let (a, b) = exact_discounted_values(&g, &allc1, &allc2, 0.96).unwrap();
        assert_abs_diff_eq!(a, 100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b, 100.0, epsilon = 1e-9);
        let (a, b) = exact_discounted_values(&g, &alld1, &alld2, 0.96).unwrap();
        assert_abs_diff_eq!(a, 25.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b, 25.0, epsilon = 1e-9);
        let (a, b) = exact_discounted_values(&g, &allc1, &alld2, 0.96).unwrap();
        assert_abs_diff_eq!(a, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b, 125.0, epsilon = 1e-9);
    }

    #[test]
    fn exact_values_reject_undiscounted() {
        let g = MatrixGame::classic();
        let p = pol(StrategyKind::AllC, Slot::One);
        assert!(matches!(
            exact_discounted_values(&g, &p, &p, 1.0),
            Err(Error::InvalidDiscount(_))
        ));
        assert!(exact_discounted_values(&g, &p, &p, 0.0).is_ok());
    }

    #[test]
    fn occupancy_sums_to_one() {
        let p = MemoryOnePolicy::new([0.3, 0.6, 0.1, 0.9, 0.5]).unwrap();
        let q = MemoryOnePolicy::new([0.7, 0.2, 0.4, 0.5, 0.8]).unwrap();
        let d = state_occupancy(&p, &q, 0.9).unwrap();
        assert_abs_diff_eq!(d.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d[0], 0.1, epsilon = 1e-12);
    }

    #[test]
    fn trajectory_csv_header_and_rows() {
        let g = MatrixGame::classic();
        let tr = rollout(
            &g,
            &pol(StrategyKind::AllD, Slot::One),
            &pol(StrategyKind::TitForTat, Slot::Two),
            &HorizonModel::Fixed { n: 2 },
            0,
        )
        .unwrap();
        let csv = tr.to_csv_string().unwrap();
        assert_eq!(
            csv,
            "step,state,action_p1,action_p2,reward_p1,reward_p2\n0,start,D,C,5.0,0.0\n1,DC,D,D,1.0,1.0\n"
        );
    }
}
