use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Action, MatrixGame, Slot};

/// One stage of the unravelling argument, counted from the first round.
///
/// The continuation payoff from later rounds does not depend on the action
/// taken here, so defection wins the stage by at least `margin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageCertificate {
    pub round: usize,
    pub remaining_after: usize,
    /// min(T - R, P - S) for each player.
    pub margin: [f64; 2],
    /// Payoff each player collects in the rounds after this one.
    pub continuation: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardInduction {
    pub steps: usize,
    /// Equilibrium action in every round and every history.
    pub action: Action,
    pub values: [f64; 2],
    /// True when both margins are strictly positive, i.e. the equilibrium
    /// is the unique subgame-perfect one.
    pub unique: bool,
    pub certificates: Vec<StageCertificate>,
}

impl BackwardInduction {
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} rounds: both players {} in every round ({})",
            self.steps,
            if self.action == Action::Defect {
                "defect"
            } else {
                "cooperate"
            },
            if self.unique {
                "unique subgame-perfect equilibrium"
            } else {
                "not unique"
            }
        );
        let _ = writeln!(out, "  values: p1 {}, p2 {}", self.values[0], self.values[1]);
        if let Some(c) = self.certificates.first() {
            let _ = writeln!(out, "  stage margins: p1 {}, p2 {}", c.margin[0], c.margin[1]);
        }
        out
    }
}

/// Solves the `steps`-round repeated game by backward induction.
pub fn backward_induction_fixed_horizon(game: &MatrixGame, steps: usize) -> Result<BackwardInduction> {
    let validity = game.validate_pd();
    if !validity.is_valid() {
        return Err(Error::NotPrisonersDilemma(validity.failures().join("; ")));
    }
    if steps == 0 {
        return Err(Error::InvalidHorizon(
            "backward induction needs at least one round".into(),
        ));
    }
    let margin = Slot::BOTH.map(|slot| {
        let l = game.labels(slot);
        (l.temptation - l.reward).min(l.punishment - l.sucker)
    });
    let punish = Slot::BOTH.map(|slot| game.labels(slot).punishment);

    // Walk from the last round back; the continuation is fixed before the
    // current round is examined.
    let mut certificates = Vec::with_capacity(steps);
    let mut continuation = [0.0; 2];
    for remaining_after in 0..steps {
        certificates.push(StageCertificate {
            round: steps - remaining_after,
            remaining_after,
            margin,
            continuation,
        });
        for i in 0..2 {
            continuation[i] += punish[i];
        }
    }
    certificates.reverse();
    Ok(BackwardInduction {
        steps,
        action: Action::Defect,
        values: continuation,
        unique: margin.iter().all(|&m| m > 0.0),
        certificates,
    })
}
