//! Tabular advantage actor-critic for the iterated game.
//!
//! Parameters are always stored from their owner's perspective: in state
//! `CD` the owner cooperated and the other player defected. A learner in
//! slot 2 therefore reads the mirror of the global state.

use std::io::{Read, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{
    check_discount, rollout_with_noise, Action, GameState, HorizonModel, MatrixGame, NoiseMode, Slot, Trajectory,
};
use crate::strategies::{MemoryOnePolicy, PolicyParams};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamInit {
    #[default]
    Zeros,
    Gaussian {
        sigma: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvantageEstimator {
    /// Discounted return-to-go minus the critic baseline.
    #[default]
    MonteCarlo,
    /// One-step temporal difference error.
    TemporalDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub entropy_coef: f64,
    pub episodes_per_update: usize,
    pub total_updates: usize,
    pub horizon: HorizonModel,
    pub seed: u64,
    pub init: ParamInit,
    pub advantage: AdvantageEstimator,
    /// Self-play only: both seats use one parameter table.
    pub share_parameters: bool,
    /// Drive both players' action draws from a single uniform per step.
    pub common_random_numbers: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.96,
            actor_lr: 0.05,
            critic_lr: 0.2,
            entropy_coef: 0.01,
            episodes_per_update: 16,
            total_updates: 2000,
            horizon: HorizonModel::Geometric { p: 0.04, cap: 500 },
            seed: 0,
            init: ParamInit::Zeros,
            advantage: AdvantageEstimator::MonteCarlo,
            share_parameters: false,
            common_random_numbers: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_discount(self.gamma)?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.actor_lr.is_finite() && self.actor_lr >= 0.0) {
            return bad(format!("actor_lr must be non-negative, got {}", self.actor_lr));
        }
        if !(self.critic_lr.is_finite() && self.critic_lr >= 0.0) {
            return bad(format!("critic_lr must be non-negative, got {}", self.critic_lr));
        }
        if !(self.entropy_coef.is_finite() && self.entropy_coef >= 0.0) {
            return bad(format!("entropy_coef must be >= 0, got {}", self.entropy_coef));
        }
        if self.episodes_per_update == 0 {
            return bad("episodes_per_update must be positive".into());
        }
        if let ParamInit::Gaussian { sigma } = self.init {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return bad(format!("gaussian init sigma must be >= 0, got {sigma}"));
            }
        }
        self.horizon.validate()
    }

    pub fn total_episodes(&self) -> usize {
        self.episodes_per_update * self.total_updates
    }

    fn noise(&self) -> NoiseMode {
        if self.common_random_numbers {
            NoiseMode::Common
        } else {
            NoiseMode::Independent
        }
    }
}

fn initial_params(init: ParamInit, rng: &mut ChaCha8Rng) -> Result<PolicyParams> {
    match init {
        ParamInit::Zeros => Ok(PolicyParams::zeros()),
        ParamInit::Gaussian { sigma } => PolicyParams::gaussian(sigma, rng),
    }
}

/// Policy a learner in `slot` plays with, in global-state indexing.
pub fn policy_for_slot(params: &PolicyParams, slot: Slot) -> Result<MemoryOnePolicy> {
    let own = params.to_memory_one()?;
    Ok(match slot {
        Slot::One => own,
        Slot::Two => own.mirrored(),
    })
}

fn own_state(state: GameState, slot: Slot) -> GameState {
    match slot {
        Slot::One => state,
        Slot::Two => state.mirrored(),
    }
}

/// One score-function term of the actor objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActorSample {
    pub state: GameState,
    pub action: Action,
    pub advantage: f64,
}

/// Gradient of the per-state averaged actor objective
/// `sum_s mean_{i: s_i = s} [A_i log pi(a_i|s) + c H(pi(.|s))]`
/// with respect to the logits, advantages held fixed.
///
/// Averaging within each state keeps rarely visited states (the opening,
/// off-path outcomes) learning at the same rate as the dominant one.
pub fn actor_gradient(params: &PolicyParams, samples: &[ActorSample], entropy_coef: f64) -> [[f64; 2]; 5] {
    let mut grad = [[0.0; 2]; 5];
    let mut visits = [0usize; 5];
    for smp in samples {
        visits[smp.state.index()] += 1;
    }
    for smp in samples {
        let s = smp.state.index();
        let n = visits[s] as f64;
        let pi = params.probs(smp.state);
        let entropy: f64 = -pi.iter().map(|&p| xlogx(p)).sum::<f64>();
        for b in 0..2 {
            let indicator = if b == smp.action.index() { 1.0 } else { 0.0 };
            let score = smp.advantage * (indicator - pi[b]);
            let log_pb = if pi[b] > 0.0 { pi[b].ln() } else { 0.0 };
            let dentropy = -pi[b] * (log_pb + entropy);
            grad[s][b] += (score + entropy_coef * dentropy) / n;
        }
    }
    grad
}

fn xlogx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    state: GameState,
    action: Action,
    reward: f64,
    ret: f64,
    next: Option<GameState>,
}

fn collect_samples(out: &mut Vec<Sample>, tr: &Trajectory, slot: Slot, gamma: f64) {
    let returns = tr.returns_to_go(slot, gamma);
    for (t, st) in tr.steps.iter().enumerate() {
        let next = tr.steps.get(t + 1).map(|n| own_state(n.state, slot));
        out.push(Sample {
            state: own_state(st.state, slot),
            action: st.action(slot),
            reward: st.reward(slot),
            ret: returns[t],
            next,
        });
    }
}

fn apply_update(params: &PolicyParams, samples: &[Sample], config: &TrainConfig) -> Result<PolicyParams> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let target = |smp: &Sample| match config.advantage {
        AdvantageEstimator::MonteCarlo => smp.ret,
        AdvantageEstimator::TemporalDifference => {
            smp.reward + config.gamma * smp.next.map_or(0.0, |n| params.values[n.index()])
        }
    };
    let actor: Vec<ActorSample> = samples
        .iter()
        .map(|smp| ActorSample {
            state: smp.state,
            action: smp.action,
            advantage: target(smp) - params.values[smp.state.index()],
        })
        .collect();
    let grad = actor_gradient(params, &actor, config.entropy_coef);

    let mut err_sum = [0.0; 5];
    let mut visits = [0usize; 5];
    for smp in samples {
        let s = smp.state.index();
        err_sum[s] += target(smp) - params.values[s];
        visits[s] += 1;
    }

    let mut next = *params;
    for s in 0..5 {
        for b in 0..2 {
            next.logits[s][b] += config.actor_lr * grad[s][b];
        }
        if visits[s] > 0 {
            next.values[s] += config.critic_lr * err_sum[s] / visits[s] as f64;
        }
    }
    next.check_finite()?;
    Ok(next)
}

/// One actor-critic step for the learner seated in `slot`.
///
/// The actor ascends the advantage-weighted score function plus the
/// entropy bonus (see [`actor_gradient`]). The critic moves each visited
/// state's value toward the mean return observed there.
pub fn a2c_update(
    params: &PolicyParams,
    batch: &[Trajectory],
    slot: Slot,
    config: &TrainConfig,
) -> Result<PolicyParams> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut samples = Vec::new();
    for tr in batch {
        collect_samples(&mut samples, tr, slot, config.gamma);
    }
    apply_update(params, &samples, config)
}

/// Update for one parameter table shared by both seats.
pub fn a2c_update_shared(params: &PolicyParams, batch: &[Trajectory], config: &TrainConfig) -> Result<PolicyParams> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut samples = Vec::new();
    for tr in batch {
        for slot in Slot::BOTH {
            collect_samples(&mut samples, tr, slot, config.gamma);
        }
    }
    apply_update(params, &samples, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub update: usize,
    /// Own-perspective defect probabilities, indexed like [`GameState::ALL`].
    pub p_defect: [f64; 5],
    pub mean_return: f64,
    pub mean_discounted_return: f64,
}

/// Per-update policy snapshots for one learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub seed: u64,
    pub stage: usize,
    pub slot: u8,
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn new(seed: u64, stage: usize, slot: Slot) -> Self {
        LearningCurve {
            seed,
            stage,
            slot: slot.number(),
            points: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&CurvePoint> {
        self.points.last()
    }
}

pub const CURVE_COLUMNS: [&str; 11] = [
    "update",
    "seed",
    "stage",
    "slot",
    "p_defect_start",
    "p_defect_cc",
    "p_defect_cd",
    "p_defect_dc",
    "p_defect_dd",
    "mean_return",
    "mean_discounted_return",
];

#[derive(Debug, Serialize, Deserialize)]
struct CurveRow {
    update: usize,
    seed: u64,
    stage: usize,
    slot: u8,
    p_defect_start: f64,
    p_defect_cc: f64,
    p_defect_cd: f64,
    p_defect_dc: f64,
    p_defect_dd: f64,
    mean_return: f64,
    mean_discounted_return: f64,
}

pub fn write_curves_csv<W: Write>(curves: &[LearningCurve], w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(CURVE_COLUMNS)?;
    for c in curves {
        for pt in &c.points {
            let p = pt.p_defect;
            wtr.serialize(CurveRow {
                update: pt.update,
                seed: c.seed,
                stage: c.stage,
                slot: c.slot,
                p_defect_start: p[0],
                p_defect_cc: p[1],
                p_defect_cd: p[2],
                p_defect_dc: p[3],
                p_defect_dd: p[4],
                mean_return: pt.mean_return,
                mean_discounted_return: pt.mean_discounted_return,
            })?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<curve csv>", e))?;
    Ok(())
}

/// Reads a learning-curve CSV back into one curve per (seed, stage, slot),
/// in order of first appearance.
pub fn read_curves_csv<R: Read>(r: R, source: &std::path::Path) -> Result<Vec<LearningCurve>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    for (i, want) in CURVE_COLUMNS.iter().enumerate() {
        match headers.get(i) {
            Some(h) if h == *want => {}
            Some(h) => {
                return Err(Error::Schema {
                    path: source.into(),
                    detail: format!("column {} is `{h}`, expected `{want}`", i + 1),
                })
            }
            None => {
                return Err(Error::Schema {
                    path: source.into(),
                    detail: format!("missing column `{want}`"),
                })
            }
        }
    }
    if headers.len() != CURVE_COLUMNS.len() {
        return Err(Error::Schema {
            path: source.into(),
            detail: format!("unexpected extra column `{}`", &headers[CURVE_COLUMNS.len()]),
        });
    }
    let mut curves: Vec<LearningCurve> = Vec::new();
    for row in rdr.deserialize::<CurveRow>() {
        let row = row.map_err(|e| Error::Schema {
            path: source.into(),
            detail: e.to_string(),
        })?;
        let point = CurvePoint {
            update: row.update,
            p_defect: [
                row.p_defect_start,
                row.p_defect_cc,
                row.p_defect_cd,
                row.p_defect_dc,
                row.p_defect_dd,
            ],
            mean_return: row.mean_return,
            mean_discounted_return: row.mean_discounted_return,
        };
        match curves
            .iter_mut()
            .find(|c| c.seed == row.seed && c.stage == row.stage && c.slot == row.slot)
        {
            Some(c) => c.points.push(point),
            None => curves.push(LearningCurve {
                seed: row.seed,
                stage: row.stage,
                slot: row.slot,
                points: vec![point],
            }),
        }
    }
    Ok(curves)
}

fn batch_stats(batch: &[Trajectory], slot: Slot, gamma: f64) -> (f64, f64) {
    let n = batch.len() as f64;
    let undiscounted = batch.iter().map(|t| t.total_reward(slot)).sum::<f64>() / n;
    let discounted = batch.iter().map(|t| t.discounted_return(slot, gamma)).sum::<f64>() / n;
    (undiscounted, discounted)
}

fn snapshot(params: &PolicyParams, update: usize, batch: &[Trajectory], slot: Slot, gamma: f64) -> Result<CurvePoint> {
    let (mean_return, mean_discounted_return) = batch_stats(batch, slot, gamma);
    Ok(CurvePoint {
        update,
        p_defect: params.to_memory_one()?.as_array(),
        mean_return,
        mean_discounted_return,
    })
}

fn collect_batch(
    game: &MatrixGame,
    p1: &MemoryOnePolicy,
    p2: &MemoryOnePolicy,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Trajectory>> {
    (0..config.episodes_per_update)
        .map(|_| rollout_with_noise(game, p1, p2, &config.horizon, rng.next_u64(), config.noise()))
        .collect()
}

/// Trains `initial` in `slot` against a frozen opponent policy.
pub fn train_from(
    game: &MatrixGame,
    initial: PolicyParams,
    opponent: &MemoryOnePolicy,
    slot: Slot,
    config: &TrainConfig,
    stage: usize,
) -> Result<(PolicyParams, LearningCurve)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    run_vs_fixed(game, initial, opponent, slot, config, stage, &mut rng)
}

fn run_vs_fixed(
    game: &MatrixGame,
    initial: PolicyParams,
    opponent: &MemoryOnePolicy,
    slot: Slot,
    config: &TrainConfig,
    stage: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(PolicyParams, LearningCurve)> {
    let mut params = initial;
    let mut curve = LearningCurve::new(config.seed, stage, slot);
    for update in 1..=config.total_updates {
        let mine = policy_for_slot(&params, slot)?;
        let batch = match slot {
            Slot::One => collect_batch(game, &mine, opponent, config, rng)?,
            Slot::Two => collect_batch(game, opponent, &mine, config, rng)?,
        };
        params = a2c_update(&params, &batch, slot, config)?;
        curve
            .points
            .push(snapshot(&params, update, &batch, slot, config.gamma)?);
    }
    Ok((params, curve))
}

/// Slot-1 learner against a fixed slot-2 opponent, from `config.init`.
pub fn train_vs_fixed(
    game: &MatrixGame,
    opponent: &MemoryOnePolicy,
    config: &TrainConfig,
) -> Result<(PolicyParams, LearningCurve)> {
    train_vs_fixed_in_slot(game, opponent, Slot::One, config)
}

pub fn train_vs_fixed_in_slot(
    game: &MatrixGame,
    opponent: &MemoryOnePolicy,
    slot: Slot,
    config: &TrainConfig,
) -> Result<(PolicyParams, LearningCurve)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let initial = initial_params(config.init, &mut rng)?;
    run_vs_fixed(game, initial, opponent, slot, config, 0, &mut rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfPlayResult {
    pub params: [PolicyParams; 2],
    pub curves: [LearningCurve; 2],
}

pub fn train_self_play(game: &MatrixGame, config: &TrainConfig) -> Result<SelfPlayResult> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let p1 = initial_params(config.init, &mut rng)?;
    let p2 = if config.share_parameters {
        p1
    } else {
        initial_params(config.init, &mut rng)?
    };
    run_self_play(game, [p1, p2], config, 0, &mut rng)
}

fn run_self_play(
    game: &MatrixGame,
    initial: [PolicyParams; 2],
    config: &TrainConfig,
    stage: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SelfPlayResult> {
    let [mut p1, mut p2] = initial;
    if config.share_parameters {
        p2 = p1;
    }
    let mut c1 = LearningCurve::new(config.seed, stage, Slot::One);
    let mut c2 = LearningCurve::new(config.seed, stage, Slot::Two);
    for update in 1..=config.total_updates {
        let pol1 = policy_for_slot(&p1, Slot::One)?;
        let pol2 = policy_for_slot(&p2, Slot::Two)?;
        let batch = collect_batch(game, &pol1, &pol2, config, rng)?;
        if config.share_parameters {
            p1 = a2c_update_shared(&p1, &batch, config)?;
            p2 = p1;
        } else {
            let n1 = a2c_update(&p1, &batch, Slot::One, config)?;
            let n2 = a2c_update(&p2, &batch, Slot::Two, config)?;
            p1 = n1;
            p2 = n2;
        }
        c1.points.push(snapshot(&p1, update, &batch, Slot::One, config.gamma)?);
        c2.points.push(snapshot(&p2, update, &batch, Slot::Two, config.gamma)?);
    }
    Ok(SelfPlayResult {
        params: [p1, p2],
        curves: [c1, c2],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StageOpponent {
    Fixed { policy: MemoryOnePolicy },
    SelfPlay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumStage {
    pub opponent: StageOpponent,
    pub config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumResult {
    /// Slot-1 learner after the last stage.
    pub params: PolicyParams,
    /// Slot-2 learner, present once a self-play stage has run.
    pub partner: Option<PolicyParams>,
    /// All curves in stage order; `LearningCurve::stage` marks the boundary.
    pub curves: Vec<LearningCurve>,
}

/// Sequential training with parameter carry-over.
///
/// The slot-1 learner runs through every stage. The first self-play stage
/// seats a copy of it in slot 2; later self-play stages keep that partner.
pub fn train_curriculum(game: &MatrixGame, stages: &[CurriculumStage]) -> Result<CurriculumResult> {
    if stages.is_empty() {
        return Err(Error::EmptyCurriculum);
    }
    let mut params: Option<PolicyParams> = None;
    let mut partner: Option<PolicyParams> = None;
    let mut curves = Vec::new();
    for (stage, st) in stages.iter().enumerate() {
        st.config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(st.config.seed);
        let current = match params {
            Some(p) => p,
            None => initial_params(st.config.init, &mut rng)?,
        };
        match &st.opponent {
            StageOpponent::Fixed { policy } => {
                let (p, c) = run_vs_fixed(game, current, policy, Slot::One, &st.config, stage, &mut rng)?;
                params = Some(p);
                curves.push(c);
            }
            StageOpponent::SelfPlay => {
                let other = partner.unwrap_or(current);
                let res = run_self_play(game, [current, other], &st.config, stage, &mut rng)?;
                let [p1, p2] = res.params;
                params = Some(p1);
                partner = Some(p2);
                curves.extend(res.curves);
            }
        }
    }
    Ok(CurriculumResult {
        params: params.expect("at least one stage ran"),
        partner,
        curves,
    })
}
