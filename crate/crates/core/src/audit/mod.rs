//! Equilibrium audits: exact best responses and exploitability, the
//! retraining audit, coalition sampling on the commons, and backward
//! induction for fixed horizons.

mod coalition;
mod induction;
mod retrain;

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{check_discount, exact_state_values, Action, GameState, MatrixGame, Slot};
use crate::strategies::MemoryOnePolicy;

pub use coalition::{
    audit_commons_by_retraining, coalition_audit, CoalitionAuditConfig, CoalitionAuditReport, CoalitionSample,
    SubsetSizes,
};
pub use induction::{backward_induction_fixed_horizon, BackwardInduction, StageCertificate};
pub use retrain::{audit_by_retraining, ImprovementThreshold, RetrainingDetails};

/// Stopping rule for value iteration (sup-norm of the Bellman residual).
pub const VALUE_ITERATION_TOL: f64 = 1e-9;
/// Gaps above `-SOLVER_TOL` are treated as non-negative.
pub const SOLVER_TOL: f64 = 1e-8;
/// Two action values closer than this count as tied; ties go to Defect.
const TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponse {
    /// Deterministic policy for the responding slot (global state indexing).
    pub policy: MemoryOnePolicy,
    pub value: f64,
    pub state_values: [f64; 5],
    pub iterations: usize,
}

fn q_values(
    game: &MatrixGame,
    opponent: &MemoryOnePolicy,
    slot: Slot,
    gamma: f64,
    v: &[f64; 5],
    s: GameState,
) -> [f64; 2] {
    let q = opponent.p_defect(s);
    let mut out = [0.0; 2];
    for own in Action::BOTH {
        let mut total = 0.0;
        for (other, prob) in [(Action::Cooperate, 1.0 - q), (Action::Defect, q)] {
            if prob == 0.0 {
                continue;
            }
            let next = match slot {
                Slot::One => GameState::from_actions(own, other),
                Slot::Two => GameState::from_actions(other, own),
            };
            total += prob * (game.own_payoff(slot, own, other) + gamma * v[next.index()]);
        }
        out[own.index()] = total;
    }
    out
}

fn greedy(q: [f64; 2]) -> Action {
    if q[1] >= q[0] - TIE_TOL {
        Action::Defect
    } else {
        Action::Cooperate
    }
}

fn deterministic(actions: [Action; 5]) -> MemoryOnePolicy {
    MemoryOnePolicy::new(actions.map(|a| if a == Action::Defect { 1.0 } else { 0.0 }))
        .expect("0/1 entries are valid probabilities")
}

/// Best response of the player in `slot` to a fixed memory-one opponent.
///
/// Value iteration runs until the Bellman residual is below
/// [`VALUE_ITERATION_TOL`]; the greedy policy is then polished by exact
/// policy iteration so the reported value is that policy's exact value.
pub fn best_response_in_slot(
    game: &MatrixGame,
    opponent: &MemoryOnePolicy,
    slot: Slot,
    gamma: f64,
) -> Result<BestResponse> {
    check_discount(gamma)?;
    let mut v = [0.0; 5];
    let mut iterations = 0;
    loop {
        let mut next = [0.0; 5];
        for s in GameState::ALL {
            let q = q_values(game, opponent, slot, gamma, &v, s);
            next[s.index()] = q[0].max(q[1]);
        }
        let residual = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        iterations += 1;
        if residual <= VALUE_ITERATION_TOL {
            break;
        }
        if iterations > 1_000_000 {
            return Err(Error::Solver("value iteration did not converge".into()));
        }
    }

    let mut actions = GameState::ALL.map(|s| greedy(q_values(game, opponent, slot, gamma, &v, s)));
    for _ in 0..32 {
        let policy = deterministic(actions);
        let exact = match slot {
            Slot::One => exact_state_values(game, &policy, opponent, gamma)?.player1,
            Slot::Two => exact_state_values(game, opponent, &policy, gamma)?.player2,
        };
        let improved = GameState::ALL.map(|s| {
            let q = q_values(game, opponent, slot, gamma, &exact, s);
            let current = actions[s.index()];
            let best = greedy(q);
            // only switch on a real improvement, so ties cannot cycle
            if best != current && q[best.index()] > q[current.index()] + TIE_TOL {
                best
            } else {
                current
            }
        });
        if improved == actions {
            return Ok(BestResponse {
                policy,
                value: exact[GameState::Start.index()],
                state_values: exact,
                iterations,
            });
        }
        actions = improved;
    }
    Err(Error::Solver("policy iteration polish did not settle".into()))
}

/// Best response for slot 1 against `opponent` seated in slot 2.
pub fn best_response_exact(game: &MatrixGame, opponent: &MemoryOnePolicy, gamma: f64) -> Result<BestResponse> {
    best_response_in_slot(game, opponent, Slot::One, gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditMethod {
    Exact,
    Retraining,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerAudit {
    pub slot: u8,
    pub current_value: f64,
    pub best_response_value: f64,
    pub gap: f64,
    pub best_response_policy: MemoryOnePolicy,
    /// Optimal minus current value from every state; diagnostics only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_state_gaps: Option<[f64; 5]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub method: AuditMethod,
    pub gamma: f64,
    pub epsilon: f64,
    pub players: Vec<PlayerAudit>,
    pub max_gap: f64,
    pub is_epsilon_nash: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retraining: Option<RetrainingDetails>,
}

impl AuditReport {
    fn from_players(method: AuditMethod, gamma: f64, epsilon: f64, players: Vec<PlayerAudit>) -> Self {
        let max_gap = players.iter().map(|p| p.gap).fold(f64::NEG_INFINITY, f64::max);
        AuditReport {
            method,
            gamma,
            epsilon,
            is_epsilon_nash: max_gap <= epsilon,
            max_gap,
            players,
            retraining: None,
        }
    }

    pub fn player(&self, slot: Slot) -> Option<&PlayerAudit> {
        self.players.iter().find(|p| p.slot == slot.number())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let method = match self.method {
            AuditMethod::Exact => "exact",
            AuditMethod::Retraining => "retraining",
        };
        if self.retraining.is_some() {
            // epsilon holds the threshold, printed below
            let _ = writeln!(out, "audit ({method}), gamma = {}", self.gamma);
        } else {
            let _ = writeln!(
                out,
                "audit ({method}), gamma = {}, epsilon = {:e}",
                self.gamma, self.epsilon
            );
        }
        for p in &self.players {
            let _ = writeln!(
                out,
                "  player {}: value {:.6}, best response {:.6}, gap {:.6}",
                p.slot, p.current_value, p.best_response_value, p.gap
            );
            let _ = writeln!(out, "    best response: {}", p.best_response_policy);
        }
        if let Some(r) = &self.retraining {
            let _ = writeln!(
                out,
                "  improvement {:.6} vs threshold {:.6}: {}",
                r.improvement,
                r.threshold,
                if r.deviation_flagged {
                    "deviation found"
                } else {
                    "no profitable deviation"
                }
            );
        }
        let _ = writeln!(
            out,
            "  verdict: {}",
            if self.is_epsilon_nash {
                "epsilon-Nash"
            } else {
                "not epsilon-Nash"
            }
        );
        out
    }
}

/// Exact exploitability of a memory-one profile.
pub fn exploitability(
    game: &MatrixGame,
    policy1: &MemoryOnePolicy,
    policy2: &MemoryOnePolicy,
    gamma: f64,
    epsilon: f64,
) -> Result<AuditReport> {
    let current = exact_state_values(game, policy1, policy2, gamma)?;
    let mut players = Vec::with_capacity(2);
    for slot in Slot::BOTH {
        let opponent = match slot {
            Slot::One => policy2,
            Slot::Two => policy1,
        };
        let br = best_response_in_slot(game, opponent, slot, gamma)?;
        let cur = current.for_slot(slot);
        let mut per_state = [0.0; 5];
        for i in 0..5 {
            per_state[i] = br.state_values[i] - cur[i];
        }
        players.push(PlayerAudit {
            slot: slot.number(),
            current_value: cur[0],
            best_response_value: br.value,
            gap: br.value - cur[0],
            best_response_policy: br.policy,
            per_state_gaps: Some(per_state),
        });
    }
    Ok(AuditReport::from_players(AuditMethod::Exact, gamma, epsilon, players))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub gap_p1: f64,
    pub gap_p2: f64,
    pub is_nash: bool,
}

pub fn gamma_sweep(
    game: &MatrixGame,
    policy1: &MemoryOnePolicy,
    policy2: &MemoryOnePolicy,
    gammas: &[f64],
    epsilon: f64,
) -> Result<Vec<SweepRow>> {
    gammas
        .iter()
        .map(|&gamma| {
            let r = exploitability(game, policy1, policy2, gamma, epsilon)?;
            Ok(SweepRow {
                gamma,
                gap_p1: r.players[0].gap,
                gap_p2: r.players[1].gap,
                is_nash: r.is_epsilon_nash,
            })
        })
        .collect()
}

pub const SWEEP_COLUMNS: [&str; 4] = ["gamma", "gap_p1", "gap_p2", "is_nash"];

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(|e| Error::io("<sweep csv>", e))?;
    Ok(())
}

pub fn read_sweep_csv<R: std::io::Read>(r: R, source: &std::path::Path) -> Result<Vec<SweepRow>> {
    let schema = |detail: String| Error::Schema {
        path: source.into(),
        detail,
    };
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    for (i, want) in SWEEP_COLUMNS.iter().enumerate() {
        match headers.get(i) {
            Some(h) if h == *want => {}
            Some(h) => return Err(schema(format!("column {} is `{h}`, expected `{want}`", i + 1))),
            None => return Err(schema(format!("missing column `{want}`"))),
        }
    }
    if let Some(extra) = headers.get(SWEEP_COLUMNS.len()) {
        return Err(schema(format!("unexpected extra column `{extra}`")));
    }
    rdr.deserialize()
        .map(|row| row.map_err(|e| schema(e.to_string())))
        .collect()
}
