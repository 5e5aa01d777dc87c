//! Memory-one policies: the fixed strategy catalog and the tabular softmax
//! parameters the learner optimises.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Action, GameState, Slot};

/// Probability of defecting in each of the five states, for one seat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryOnePolicy {
    p_defect: [f64; 5],
}

impl MemoryOnePolicy {
    pub fn new(p_defect: [f64; 5]) -> Result<Self> {
        for (i, p) in p_defect.iter().enumerate() {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::InvalidConfig(format!(
                    "p_defect[{}] = {p} is outside [0, 1]",
                    GameState::from_index(i)
                )));
            }
        }
        Ok(MemoryOnePolicy { p_defect })
    }

    pub fn constant(p: f64) -> Result<Self> {
        MemoryOnePolicy::new([p; 5])
    }

    pub fn p_defect(&self, state: GameState) -> f64 {
        self.p_defect[state.index()]
    }

    pub fn as_array(&self) -> [f64; 5] {
        self.p_defect
    }

    /// The policy for the other seat: reads `XY` where this one read `YX`.
    pub fn mirrored(&self) -> Self {
        let mut p = [0.0; 5];
        for s in GameState::ALL {
            p[s.mirrored().index()] = self.p_defect[s.index()];
        }
        MemoryOnePolicy { p_defect: p }
    }

    pub fn is_deterministic(&self) -> bool {
        self.p_defect.iter().all(|&p| p == 0.0 || p == 1.0)
    }

    /// Greedy action in `state`; ties go to defection.
    pub fn greedy(&self, state: GameState) -> Action {
        if self.p_defect(state) >= 0.5 {
            Action::Defect
        } else {
            Action::Cooperate
        }
    }

    /// Plain-text table: a `state\tp_defect` header then one row per state.
    pub fn to_table(&self) -> String {
        let mut out = String::from("state\tp_defect\n");
        for s in GameState::ALL {
            out.push_str(&format!("{}\t{}\n", s.label(), self.p_defect(s)));
        }
        out
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next().map(|h| h.split_whitespace().collect::<Vec<_>>()) {
            Some(h) if h == ["state", "p_defect"] => {}
            other => {
                return Err(Error::Parse(format!(
                    "policy table header must be `state p_defect`, got {other:?}"
                )))
            }
        }
        let mut p = [f64::NAN; 5];
        for (lineno, line) in lines.enumerate() {
            let mut cols = line.split_whitespace();
            let (Some(state), Some(value), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Parse(format!("line {}: expected two columns", lineno + 2)));
            };
            let state: GameState = state.parse()?;
            let value: f64 = value
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
            p[state.index()] = value;
        }
        if let Some(i) = p.iter().position(|x| x.is_nan()) {
            return Err(Error::Parse(format!(
                "policy table is missing state {}",
                GameState::from_index(i)
            )));
        }
        MemoryOnePolicy::new(p)
    }
}

impl fmt::Display for MemoryOnePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = GameState::ALL
            .iter()
            .map(|s| format!("{}={:.3}", s.label(), self.p_defect(*s)))
            .collect();
        f.write_str(&parts.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    AllC,
    AllD,
    TitForTat,
    GrimTrigger,
    Pavlov,
}

impl StrategyKind {
    pub const CATALOG: [StrategyKind; 5] = [
        StrategyKind::AllC,
        StrategyKind::AllD,
        StrategyKind::TitForTat,
        StrategyKind::GrimTrigger,
        StrategyKind::Pavlov,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::AllC => "all_c",
            StrategyKind::AllD => "all_d",
            StrategyKind::TitForTat => "tit_for_tat",
            StrategyKind::GrimTrigger => "grim_trigger",
            StrategyKind::Pavlov => "pavlov",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "allc" | "alwayscooperate" => StrategyKind::AllC,
            "alld" | "alwaysdefect" => StrategyKind::AllD,
            "tft" | "titfortat" => StrategyKind::TitForTat,
            "grim" | "grimtrigger" => StrategyKind::GrimTrigger,
            "pavlov" | "wsls" => StrategyKind::Pavlov,
            _ => {
                return Err(Error::Unknown {
                    what: "strategy",
                    name: s.into(),
                })
            }
        })
    }
}

/// Opening move used by the reactive catalog strategies.
pub const DEFAULT_OPENING: Action = Action::Cooperate;

pub fn fixed_strategy(kind: StrategyKind, slot: Slot) -> MemoryOnePolicy {
    fixed_strategy_with_opening(kind, slot, DEFAULT_OPENING)
}

/// Catalog strategy for `slot`. `opening` applies to tit-for-tat, grim and
/// Pavlov; the constant strategies ignore it.
///
/// Grim trigger is its memory-one projection: defect whenever the last
/// step contained any defection.
pub fn fixed_strategy_with_opening(kind: StrategyKind, slot: Slot, opening: Action) -> MemoryOnePolicy {
    let open = if opening == Action::Defect { 1.0 } else { 0.0 };
    // written for slot 1: the first letter of a state is our own last move
    let p = match kind {
        StrategyKind::AllC => [0.0; 5],
        StrategyKind::AllD => [1.0; 5],
        //                      start  CC   CD   DC   DD
        StrategyKind::TitForTat => [open, 0.0, 1.0, 0.0, 1.0],
        StrategyKind::GrimTrigger => [open, 0.0, 1.0, 1.0, 1.0],
        StrategyKind::Pavlov => [open, 0.0, 1.0, 1.0, 0.0],
    };
    let policy = MemoryOnePolicy { p_defect: p };
    match slot {
        Slot::One => policy,
        Slot::Two => policy.mirrored(),
    }
}

/// Tabular actor-critic parameters: logits `[state][action]` and critic values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub logits: [[f64; 2]; 5],
    pub values: [f64; 5],
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams::zeros()
    }
}

impl PolicyParams {
    pub fn zeros() -> Self {
        PolicyParams {
            logits: [[0.0; 2]; 5],
            values: [0.0; 5],
        }
    }

    /// Logits drawn from N(0, sigma^2); critic starts at zero.
    pub fn gaussian<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> Result<Self> {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(format!("gaussian init: {e}")))?;
        let mut params = PolicyParams::zeros();
        for row in params.logits.iter_mut() {
            for x in row.iter_mut() {
                *x = normal.sample(rng);
            }
        }
        Ok(params)
    }

    pub fn check_finite(&self) -> Result<()> {
        for s in GameState::ALL {
            if !self.logits[s.index()].iter().all(|x| x.is_finite()) {
                return Err(Error::NonFiniteLogits { state: s.label() });
            }
        }
        Ok(())
    }

    /// Softmax probabilities `[p_cooperate, p_defect]` in `state`.
    pub fn probs(&self, state: GameState) -> [f64; 2] {
        softmax2(self.logits[state.index()])
    }

    pub fn to_memory_one(&self) -> Result<MemoryOnePolicy> {
        self.check_finite()?;
        let mut p = [0.0; 5];
        for s in GameState::ALL {
            p[s.index()] = self.probs(s)[1];
        }
        Ok(MemoryOnePolicy { p_defect: p })
    }

    /// Parameters for the other seat, with states swapped accordingly.
    pub fn mirrored(&self) -> Self {
        let mut out = *self;
        for s in GameState::ALL {
            out.logits[s.mirrored().index()] = self.logits[s.index()];
            out.values[s.mirrored().index()] = self.values[s.index()];
        }
        out
    }
}

pub(crate) fn softmax2(z: [f64; 2]) -> [f64; 2] {
    // logistic of the difference; exact for large gaps
    let d = z[1] - z[0];
    let pd = if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        let e = d.exp();
        e / (1.0 + e)
    };
    [1.0 - pd, pd]
}
