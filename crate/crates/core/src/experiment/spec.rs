use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::{CoalitionAuditConfig, ImprovementThreshold};
use crate::commons::{AllocationPolicy, CommonsConfig};
use crate::error::{Error, Result};
use crate::game::{MatrixGame, Slot};
use crate::learner::TrainConfig;
use crate::strategies::{fixed_strategy, MemoryOnePolicy, StrategyKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    TrainVsFixed,
    SelfPlay,
    Curriculum,
    AuditExact,
    AuditRetrain,
    Coalition,
    BackwardInduction,
    CommonsTrain,
    CommonsProfile,
    GammaSweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::TrainVsFixed => "train_vs_fixed",
            ExperimentKind::SelfPlay => "self_play",
            ExperimentKind::Curriculum => "curriculum",
            ExperimentKind::AuditExact => "audit_exact",
            ExperimentKind::AuditRetrain => "audit_retrain",
            ExperimentKind::Coalition => "coalition",
            ExperimentKind::BackwardInduction => "backward_induction",
            ExperimentKind::CommonsTrain => "commons_train",
            ExperimentKind::CommonsProfile => "commons_profile",
            ExperimentKind::GammaSweep => "gamma_sweep",
        }
    }

    /// Kinds whose outputs depend on a seed; these need a non-empty `seeds`.
    pub fn is_stochastic(self) -> bool {
        !matches!(
            self,
            ExperimentKind::AuditExact | ExperimentKind::BackwardInduction | ExperimentKind::GammaSweep
        )
    }
}

/// Symmetric payoff labels; defaults to R=4, T=5, P=1, S=0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameSpec {
    pub reward: f64,
    pub temptation: f64,
    pub punishment: f64,
    pub sucker: f64,
}

impl Default for GameSpec {
    fn default() -> Self {
        GameSpec {
            reward: 4.0,
            temptation: 5.0,
            punishment: 1.0,
            sucker: 0.0,
        }
    }
}

impl GameSpec {
    pub fn game(&self) -> MatrixGame {
        MatrixGame::symmetric(self.reward, self.temptation, self.punishment, self.sucker)
    }
}

/// A memory-one strategy in a config file: a catalog name such as `"tft"`,
/// or five defect probabilities `[start, CC, CD, DC, DD]` written from the
/// owner's perspective (first letter = own last move).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicySpec {
    Named(String),
    Table([f64; 5]),
}

impl PolicySpec {
    pub fn is_self_play(&self) -> bool {
        matches!(self, PolicySpec::Named(n) if n == "self_play")
    }

    pub fn resolve(&self, slot: Slot) -> Result<MemoryOnePolicy> {
        match self {
            PolicySpec::Named(name) => Ok(fixed_strategy(name.parse::<StrategyKind>()?, slot)),
            PolicySpec::Table(p) => {
                let own = MemoryOnePolicy::new(*p)?;
                Ok(match slot {
                    Slot::One => own,
                    Slot::Two => own.mirrored(),
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    /// A strategy, or `"self_play"`.
    pub opponent: PolicySpec,
    #[serde(default)]
    pub train: TrainConfig,
}

/// One experiment file. Only `kind` is always required; see
/// [`ExperimentSpec::validate`] for the per-kind requirements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub name: Option<String>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
    /// Cap on parallel seed workers; defaults to the rayon pool size.
    pub workers: Option<usize>,
    #[serde(default)]
    pub game: GameSpec,
    pub train: Option<TrainConfig>,
    pub commons: Option<CommonsConfig>,
    pub opponent: Option<PolicySpec>,
    pub slot: Option<u8>,
    pub p1: Option<PolicySpec>,
    pub p2: Option<PolicySpec>,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    pub gammas: Option<Vec<f64>>,
    pub steps: Option<Vec<usize>>,
    pub stages: Option<Vec<StageSpec>>,
    pub profile: Option<Vec<AllocationPolicy>>,
    pub coalition: Option<CoalitionAuditConfig>,
    pub threshold: Option<ImprovementThreshold>,
    pub episodes: Option<usize>,
}

impl ExperimentSpec {
    pub fn minimal(kind: ExperimentKind) -> Self {
        ExperimentSpec {
            kind,
            name: None,
            seeds: Vec::new(),
            output_dir: None,
            workers: None,
            game: GameSpec::default(),
            train: None,
            commons: None,
            opponent: None,
            slot: None,
            p1: None,
            p2: None,
            gamma: None,
            epsilon: None,
            gammas: None,
            steps: None,
            stages: None,
            profile: None,
            coalition: None,
            threshold: None,
            episodes: None,
        }
    }

    pub fn from_toml_str(text: &str, source: &Path) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| Error::Schema {
            path: source.into(),
            detail: e.to_string().trim_end().to_string(),
        })?;
        spec.validate().map_err(|e| Error::Schema {
            path: source.into(),
            detail: e.to_string(),
        })?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.name().to_string())
    }

    /// Checks that the keys this kind needs are present and no key it
    /// ignores is set.
    pub fn validate(&self) -> Result<()> {
        use ExperimentKind::*;
        let kind = self.kind.name();
        let set: [(&str, bool); 15] = [
            ("train", self.train.is_some()),
            ("commons", self.commons.is_some()),
            ("opponent", self.opponent.is_some()),
            ("slot", self.slot.is_some()),
            ("p1", self.p1.is_some()),
            ("p2", self.p2.is_some()),
            ("gamma", self.gamma.is_some()),
            ("epsilon", self.epsilon.is_some()),
            ("gammas", self.gammas.is_some()),
            ("steps", self.steps.is_some()),
            ("stages", self.stages.is_some()),
            ("profile", self.profile.is_some()),
            ("coalition", self.coalition.is_some()),
            ("threshold", self.threshold.is_some()),
            ("episodes", self.episodes.is_some()),
        ];
        let (required, optional): (&[&str], &[&str]) = match self.kind {
            TrainVsFixed => (&["opponent"], &["train", "slot"]),
            SelfPlay => (&[], &["train"]),
            Curriculum => (&["stages"], &[]),
            AuditExact => (&["p1", "p2"], &["gamma", "epsilon"]),
            AuditRetrain => (&["p1", "p2"], &["train", "slot", "threshold"]),
            Coalition => (&["profile"], &["commons", "coalition", "train"]),
            BackwardInduction => (&["steps"], &[]),
            CommonsTrain => (&[], &["commons", "train"]),
            CommonsProfile => (&["profile"], &["commons", "episodes"]),
            GammaSweep => (&["p1", "p2"], &["gammas", "epsilon"]),
        };
        for (key, present) in set {
            if required.contains(&key) && !present {
                return Err(Error::InvalidConfig(format!("kind `{kind}` requires key `{key}`")));
            }
            if present && !required.contains(&key) && !optional.contains(&key) {
                return Err(Error::InvalidConfig(format!(
                    "key `{key}` is not used by kind `{kind}`"
                )));
            }
        }
        if self.kind.is_stochastic() && self.seeds.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "kind `{kind}` needs a non-empty `seeds` list"
            )));
        }
        if !self.kind.is_stochastic() && !self.seeds.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "kind `{kind}` is deterministic; remove `seeds`"
            )));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("`seeds` contains duplicates".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("`workers` must be at least 1".into()));
        }
        if let Some(s) = self.slot {
            Slot::from_number(s)?;
        }
        for p in [&self.opponent, &self.p1, &self.p2].into_iter().flatten() {
            p.resolve(Slot::One)?;
        }
        for st in self.stages.iter().flatten() {
            if !st.opponent.is_self_play() {
                st.opponent.resolve(Slot::Two)?;
            }
            st.train.validate()?;
        }
        if matches!(self.stages.as_deref(), Some([])) {
            return Err(Error::EmptyCurriculum);
        }
        if matches!(self.steps.as_deref(), Some([])) {
            return Err(Error::InvalidConfig("`steps` must not be empty".into()));
        }
        if let Some(t) = &self.train {
            t.validate()?;
        }
        if let Some(c) = &self.commons {
            c.validate()?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form: every default filled in and
    /// object keys sorted, so reordering keys in the file or spelling out a
    /// default does not change the hash.
    /// `output_dir` and `workers` are left out: they do not affect results.
    pub fn hash(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
            map.remove("workers");
        }
        Ok(canonical_hash(&value))
    }
}

/// Hex SHA-256 of a JSON value serialized with sorted keys.
pub fn canonical_hash(value: &serde_json::Value) -> String {
    // serde_json's default map is ordered by key
    let text = serde_json::to_string(value).expect("JSON values always serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}
