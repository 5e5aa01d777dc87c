use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::spec::{ExperimentKind, ExperimentSpec};
use super::{
    default_output_root, write_atomic, write_json, RunManifest, RunStatus, SeedRecord, MANIFEST_FILE, TOOL_NAME,
    TOOL_VERSION,
};
use crate::audit::{
    audit_by_retraining, backward_induction_fixed_horizon, coalition_audit, exploitability, gamma_sweep,
    write_sweep_csv, CoalitionAuditConfig,
};
use crate::commons::{
    compute_indices, evaluate_profile, run_policy_profile, train_commons, write_commons_curve_csv, IndexReferences,
    IndexReport, EVAL_EPISODES,
};
use crate::error::{Error, Result};
use crate::game::{exact_discounted_values, visited_states, GameState, MatrixGame, Slot};
use crate::learner::{
    policy_for_slot, train_curriculum, train_self_play, train_vs_fixed_in_slot, write_curves_csv, CurriculumStage,
    LearningCurve, StageOpponent, TrainConfig,
};
use crate::strategies::MemoryOnePolicy;

/// Parses the spec file and runs it. See [`run_spec`].
pub fn run(spec_path: &Path) -> Result<RunManifest> {
    let spec = ExperimentSpec::from_file(spec_path)?;
    run_spec(&spec, None)
}

/// Runs every seed of `spec` and writes artifacts plus `manifest.json` into
/// `run_dir` (default: the spec's `output_dir`, else
/// `<output root>/<name>`).
///
/// A failing seed does not stop the others; it is recorded in the manifest
/// and the status becomes `partial` (or `failed` if nothing succeeded).
pub fn run_spec(spec: &ExperimentSpec, run_dir: Option<&Path>) -> Result<RunManifest> {
    spec.validate()?;
    let started = Instant::now();
    let dir = match (run_dir, &spec.output_dir) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) => d.clone(),
        (None, None) => default_output_root().join(spec.display_name()),
    };
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let spec_hash = spec.hash()?;

    let mut outputs = vec![PathBuf::from("spec.json")];
    write_json(&dir.join("spec.json"), spec)?;

    let mut seeds = Vec::new();
    let mut run_error = None;
    if spec.kind.is_stochastic() {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers.unwrap_or(0))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
        let results: Vec<Result<(Vec<PathBuf>, Value)>> =
            pool.install(|| spec.seeds.par_iter().map(|&s| run_seed(spec, s, &dir)).collect());
        let mut summaries = Vec::new();
        for (&seed, res) in spec.seeds.iter().zip(results) {
            match res {
                Ok((files, summary)) => {
                    summaries.push(summary);
                    seeds.push(SeedRecord {
                        seed,
                        ok: true,
                        outputs: files,
                        error: None,
                    });
                }
                Err(e) => seeds.push(SeedRecord {
                    seed,
                    ok: false,
                    outputs: Vec::new(),
                    error: Some(e.to_string()),
                }),
            }
        }
        write_json(
            &dir.join("summary.json"),
            &json!({ "kind": spec.kind.name(), "seeds": summaries }),
        )?;
        outputs.push("summary.json".into());
    } else {
        match run_once(spec, &dir) {
            Ok(files) => outputs.extend(files),
            Err(e) => run_error = Some(e.to_string()),
        }
    }

    let ok = seeds.iter().filter(|s| s.ok).count();
    let status = if run_error.is_some() || (!seeds.is_empty() && ok == 0) {
        RunStatus::Failed
    } else if ok < seeds.len() {
        RunStatus::Partial
    } else {
        RunStatus::Complete
    };
    let manifest = RunManifest {
        tool: TOOL_NAME.into(),
        tool_version: TOOL_VERSION.into(),
        name: spec.display_name(),
        kind: spec.kind.name().into(),
        spec_hash,
        run_dir: dir.clone(),
        seeds,
        outputs,
        status,
        error: run_error,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

fn train_config(spec: &ExperimentSpec, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..spec.train.unwrap_or_default()
    }
}

fn slot(spec: &ExperimentSpec) -> Result<Slot> {
    Slot::from_number(spec.slot.unwrap_or(1))
}

fn write_csv_file(dir: &Path, name: String, fill: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<PathBuf> {
    let mut buf = Vec::new();
    fill(&mut buf)?;
    write_atomic(&dir.join(&name), &buf)?;
    Ok(PathBuf::from(name))
}

fn write_json_file<T: Serialize>(dir: &Path, name: String, value: &T) -> Result<PathBuf> {
    write_json(&dir.join(&name), value)?;
    Ok(PathBuf::from(name))
}

/// Final defect probabilities of a learner on the states the final pair
/// visits, keyed by global state label.
#[derive(Debug, Serialize)]
struct Endpoint {
    slot: u8,
    p_defect: [f64; 5],
    visited: BTreeMap<String, f64>,
    value: f64,
}

fn endpoint(game: &MatrixGame, p1: &MemoryOnePolicy, p2: &MemoryOnePolicy, slot: Slot, gamma: f64) -> Result<Endpoint> {
    let pol = match slot {
        Slot::One => p1,
        Slot::Two => p2,
    };
    let visited = visited_states(p1, p2, gamma)?
        .into_iter()
        .map(|s: GameState| (s.label().to_string(), pol.p_defect(s)))
        .collect();
    let (v1, v2) = exact_discounted_values(game, p1, p2, gamma)?;
    Ok(Endpoint {
        slot: slot.number(),
        p_defect: pol.as_array(),
        visited,
        value: if slot == Slot::One { v1 } else { v2 },
    })
}

fn curves_csv(dir: &Path, prefix: &str, seed: u64, curves: &[LearningCurve]) -> Result<PathBuf> {
    write_csv_file(dir, format!("{prefix}_seed{seed}.csv"), |b| write_curves_csv(curves, b))
}

fn run_seed(spec: &ExperimentSpec, seed: u64, dir: &Path) -> Result<(Vec<PathBuf>, Value)> {
    let game = spec.game.game();
    match spec.kind {
        ExperimentKind::TrainVsFixed => {
            let slot = slot(spec)?;
            let config = train_config(spec, seed);
            let opponent = spec.opponent.as_ref().expect("validated").resolve(slot.other())?;
            let (params, curve) = train_vs_fixed_in_slot(&game, &opponent, slot, &config)?;
            let learned = policy_for_slot(&params, slot)?;
            let (p1, p2) = match slot {
                Slot::One => (learned, opponent),
                Slot::Two => (opponent, learned),
            };
            let file = curves_csv(dir, "curve", seed, &[curve])?;
            let end = endpoint(&game, &p1, &p2, slot, config.gamma)?;
            Ok((vec![file], json!({ "seed": seed, "learner": end })))
        }
        ExperimentKind::SelfPlay => {
            let config = train_config(spec, seed);
            let res = train_self_play(&game, &config)?;
            let p1 = policy_for_slot(&res.params[0], Slot::One)?;
            let p2 = policy_for_slot(&res.params[1], Slot::Two)?;
            let file = curves_csv(dir, "curves", seed, &res.curves)?;
            let ends = Slot::BOTH
                .map(|s| endpoint(&game, &p1, &p2, s, config.gamma))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            Ok((vec![file], json!({ "seed": seed, "learners": ends })))
        }
        ExperimentKind::Curriculum => {
            let stages = spec
                .stages
                .as_ref()
                .expect("validated")
                .iter()
                .enumerate()
                .map(|(i, st)| {
                    let opponent = if st.opponent.is_self_play() {
                        StageOpponent::SelfPlay
                    } else {
                        StageOpponent::Fixed {
                            policy: st.opponent.resolve(Slot::Two)?,
                        }
                    };
                    Ok(CurriculumStage {
                        opponent,
                        config: TrainConfig {
                            seed: seed.wrapping_add(i as u64),
                            ..st.train
                        },
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let res = train_curriculum(&game, &stages)?;
            let file = curves_csv(dir, "curves", seed, &res.curves)?;
            let p1 = policy_for_slot(&res.params, Slot::One)?;
            let partner = res.partner.map(|p| policy_for_slot(&p, Slot::Two)).transpose()?;
            Ok((
                vec![file],
                json!({ "seed": seed, "final_p_defect": p1.as_array(), "partner_p_defect": partner.map(|p| p.as_array()) }),
            ))
        }
        ExperimentKind::AuditRetrain => {
            let p1 = spec.p1.as_ref().expect("validated").resolve(Slot::One)?;
            let p2 = spec.p2.as_ref().expect("validated").resolve(Slot::Two)?;
            let report = audit_by_retraining(
                &game,
                &p1,
                &p2,
                slot(spec)?,
                &train_config(spec, seed),
                spec.threshold.unwrap_or_default(),
            )?;
            let file = write_json_file(dir, format!("audit_seed{seed}.json"), &report)?;
            let d = report.retraining.as_ref().expect("retraining report");
            Ok((
                vec![file],
                json!({
                    "seed": seed,
                    "current_value": report.players[0].current_value,
                    "learned_value": d.learned_value,
                    "improvement": d.improvement,
                    "threshold": d.threshold,
                    "deviation_flagged": d.deviation_flagged,
                }),
            ))
        }
        ExperimentKind::Coalition => {
            let commons = spec.commons.clone().unwrap_or_default();
            let audit = CoalitionAuditConfig {
                seed,
                ..spec.coalition.unwrap_or_default()
            };
            let profile = spec.profile.as_ref().expect("validated");
            let report = coalition_audit(&commons, profile, &audit, &train_config(spec, seed))?;
            let file = write_json_file(dir, format!("coalition_seed{seed}.json"), &report)?;
            let flagged: Vec<_> = report
                .samples
                .iter()
                .filter(|s| s.every_member_improves)
                .map(|s| s.members.clone())
                .collect();
            Ok((
                vec![file],
                json!({ "seed": seed, "stable": report.stable, "samples": report.samples.len(), "profitable_coalitions": flagged }),
            ))
        }
        ExperimentKind::CommonsTrain => {
            let commons = spec.commons.clone().unwrap_or_default();
            let res = train_commons(&commons, &train_config(spec, seed))?;
            let curve = write_csv_file(dir, format!("commons_curve_seed{seed}.csv"), |b| {
                write_commons_curve_csv(&res.curve, seed, b)
            })?;
            let result = write_json_file(dir, format!("commons_result_seed{seed}.json"), &res)?;
            Ok((
                vec![curve, result],
                json!({
                    "seed": seed,
                    "mean_episode_reward_before": res.before.mean_episode_reward,
                    "mean_episode_reward_after": res.after.mean_episode_reward,
                    "indices_before": index_triple(&res.before_indices),
                    "indices_after": index_triple(&res.after_indices),
                }),
            ))
        }
        ExperimentKind::CommonsProfile => {
            let commons = spec.commons.clone().unwrap_or_default();
            let profile = spec.profile.as_ref().expect("validated");
            let episode = run_policy_profile(profile, &commons, seed)?;
            let file = write_csv_file(dir, format!("episode_seed{seed}.csv"), |b| episode.write_csv(b))?;
            let eval = evaluate_profile(&commons, profile, spec.episodes.unwrap_or(EVAL_EPISODES), seed)?;
            let refs = IndexReferences::from_masked_runs(&commons, seed)?;
            let indices = compute_indices(&eval.aggregates, &refs)?;
            Ok((
                vec![file],
                json!({ "seed": seed, "evaluation": eval, "indices": index_triple(&indices) }),
            ))
        }
        ExperimentKind::AuditExact | ExperimentKind::BackwardInduction | ExperimentKind::GammaSweep => {
            unreachable!("deterministic kinds run once")
        }
    }
}

fn index_triple(r: &IndexReport) -> Value {
    json!({ "economic": r.economic_index, "climate": r.climate_index, "utility": r.utility_index })
}

fn run_once(spec: &ExperimentSpec, dir: &Path) -> Result<Vec<PathBuf>> {
    let game = spec.game.game();
    match spec.kind {
        ExperimentKind::AuditExact => {
            let p1 = spec.p1.as_ref().expect("validated").resolve(Slot::One)?;
            let p2 = spec.p2.as_ref().expect("validated").resolve(Slot::Two)?;
            let report = exploitability(
                &game,
                &p1,
                &p2,
                spec.gamma.unwrap_or(0.96),
                spec.epsilon.unwrap_or(1e-6),
            )?;
            let json = write_json_file(dir, "audit.json".into(), &report)?;
            write_atomic(&dir.join("audit.txt"), report.summary().as_bytes())?;
            Ok(vec![json, "audit.txt".into()])
        }
        ExperimentKind::BackwardInduction => {
            let results = spec
                .steps
                .as_ref()
                .expect("validated")
                .iter()
                .map(|&n| backward_induction_fixed_horizon(&game, n))
                .collect::<Result<Vec<_>>>()?;
            Ok(vec![write_json_file(dir, "backward_induction.json".into(), &results)?])
        }
        ExperimentKind::GammaSweep => {
            let p1 = spec.p1.as_ref().expect("validated").resolve(Slot::One)?;
            let p2 = spec.p2.as_ref().expect("validated").resolve(Slot::Two)?;
            let gammas = spec.gammas.clone().unwrap_or_else(default_gammas);
            let rows = gamma_sweep(&game, &p1, &p2, &gammas, spec.epsilon.unwrap_or(1e-6))?;
            Ok(vec![write_csv_file(dir, "sweep.csv".into(), |b| {
                write_sweep_csv(&rows, b)
            })?])
        }
        _ => unreachable!("stochastic kinds run per seed"),
    }
}

/// 0.05, 0.10, ..., 0.95.
pub(crate) fn default_gammas() -> Vec<f64> {
    (1..20).map(|i| i as f64 / 20.0).collect()
}
