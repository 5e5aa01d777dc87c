//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the verdicts are printed even when everything passes.
//!
//! Values that can be derived by hand are checked against small oracles
//! written here, independent of the library's solvers: deterministic
//! memory-one play is rolled out directly and best responses are found by
//! enumerating all 32 deterministic memory-one replies.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use freerider::audit::{audit_by_retraining, backward_induction_fixed_horizon, exploitability, gamma_sweep};
use freerider::commons::{
    masked_policy, run_policy_profile, AllocationAction, AllocationPolicy, CommonsConfig, IndexReferences, MaskedKind,
    RawAggregates,
};
use freerider::experiment::{replicate, Suite};
use freerider::game::{
    exact_discounted_values, monte_carlo_values, sample_horizon, visited_states, Action, GameState, HorizonModel,
    MatrixGame, Slot,
};
use freerider::learner::{actor_gradient, policy_for_slot, train_self_play, train_vs_fixed, ActorSample, TrainConfig};
use freerider::strategies::{fixed_strategy, MemoryOnePolicy, PolicyParams, StrategyKind};

const R: f64 = 4.0;
const T: f64 = 5.0;
const P: f64 = 1.0;
const S: f64 = 0.0;
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

// ---- oracles ---------------------------------------------------------------

/// Payoffs to (row, column) for actions given as "defects?".
fn stage(d1: bool, d2: bool) -> (f64, f64) {
    match (d1, d2) {
        (false, false) => (R, R),
        (false, true) => (S, T),
        (true, false) => (T, S),
        (true, true) => (P, P),
    }
}

/// State index after a round, from player 1's point of view:
/// start 0, CC 1, CD 2, DC 3, DD 4.
fn next_state(d1: bool, d2: bool) -> usize {
    1 + 2 * d1 as usize + d2 as usize
}

fn mirror(state: usize) -> usize {
    [0, 1, 3, 2, 4][state]
}

/// A deterministic memory-one rule in its owner's perspective.
type Rule = [bool; 5];

fn catalog_rule(name: &str) -> Rule {
    // start, CC, CD, DC, DD (own action first); true = defect
    match name {
        "all_c" => [false; 5],
        "all_d" => [true; 5],
        "tit_for_tat" => [false, false, true, false, true],
        "grim_trigger" => [false, false, true, true, true],
        "pavlov" => [false, false, true, true, false],
        other => panic!("no oracle rule for {other}"),
    }
}

/// Discounted values of two deterministic rules, by direct rollout until the
/// tail is below 1e-13.
fn rollout_values(a: &Rule, b: &Rule, gamma: f64) -> (f64, f64) {
    let mut s = 0usize;
    let (mut v1, mut v2, mut w) = (0.0, 0.0, 1.0);
    while w * T / (1.0 - gamma) > 1e-13 {
        let d1 = a[s];
        let d2 = b[mirror(s)];
        let (r1, r2) = stage(d1, d2);
        v1 += w * r1;
        v2 += w * r2;
        w *= gamma;
        s = next_state(d1, d2);
    }
    (v1, v2)
}

/// Best value any memory-one reply can get against `opponent` (which sits in
/// the other seat). Against a memory-one opponent the best reply is itself
/// deterministic memory-one, so enumerating the 32 rules is exhaustive.
fn oracle_best_response(opponent: &Rule, gamma: f64) -> f64 {
    (0u32..32)
        .map(|bits| {
            let rule: Rule = std::array::from_fn(|i| bits >> i & 1 == 1);
            rollout_values(&rule, opponent, gamma).0
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Gap of the player using `own` against `other`.
fn oracle_gap(own: &Rule, other: &Rule, gamma: f64) -> f64 {
    oracle_best_response(other, gamma) - rollout_values(own, other, gamma).0
}

/// Normalised discounted state occupancy, propagated directly.
fn oracle_occupancy(p1: &MemoryOnePolicy, p2: &MemoryOnePolicy, gamma: f64) -> [f64; 5] {
    let mut dist = [1.0, 0.0, 0.0, 0.0, 0.0];
    let mut occ = [0.0; 5];
    let mut w = 1.0 - gamma;
    for _ in 0..5000 {
        let mut next = [0.0; 5];
        for s in GameState::ALL {
            let i = s.index();
            occ[i] += w * dist[i];
            let q1 = p1.p_defect(s);
            let q2 = p2.p_defect(s);
            for (d1, pa) in [(false, 1.0 - q1), (true, q1)] {
                for (d2, pb) in [(false, 1.0 - q2), (true, q2)] {
                    next[next_state(d1, d2)] += dist[i] * pa * pb;
                }
            }
        }
        dist = next;
        w *= gamma;
    }
    occ
}

fn oracle_visited(p1: &MemoryOnePolicy, p2: &MemoryOnePolicy, gamma: f64) -> Vec<GameState> {
    let occ = oracle_occupancy(p1, p2, gamma);
    GameState::ALL.into_iter().filter(|s| occ[s.index()] >= 0.01).collect()
}

/// The actor objective, written out in full for finite differences.
fn actor_objective(logits: &[[f64; 2]; 5], samples: &[ActorSample], c: f64) -> f64 {
    let mut counts = [0usize; 5];
    for smp in samples {
        counts[smp.state.index()] += 1;
    }
    samples
        .iter()
        .map(|smp| {
            let l = logits[smp.state.index()];
            let z = (l[0].exp() + l[1].exp()).ln();
            let logp = [l[0] - z, l[1] - z];
            let entropy = -(logp[0].exp() * logp[0] + logp[1].exp() * logp[1]);
            (smp.advantage * logp[smp.action.index()] + c * entropy) / counts[smp.state.index()] as f64
        })
        .sum()
}

// ---- criteria ----------------------------------------------------------------

fn game() -> MatrixGame {
    MatrixGame::classic()
}

fn tft(slot: Slot) -> MemoryOnePolicy {
    fixed_strategy(StrategyKind::TitForTat, slot)
}

fn c1_vs_tft() -> freerider::Result<Outcome> {
    let config = TrainConfig::default();
    let start = Instant::now();
    let mut good = 0;
    let mut notes = Vec::new();
    for seed in SEEDS {
        let (params, _) = train_vs_fixed(&game(), &tft(Slot::Two), &TrainConfig { seed, ..config })?;
        let learned = policy_for_slot(&params, Slot::One)?;
        let visited = oracle_visited(&learned, &tft(Slot::Two), config.gamma);
        assert_eq!(visited, visited_states(&learned, &tft(Slot::Two), config.gamma)?);
        let worst = visited.iter().map(|&s| learned.p_defect(s)).fold(0.0, f64::max);
        good += (worst < 0.1) as usize;
        notes.push(format!("{worst:.3}"));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(outcome(
        good >= 4 && config.total_updates <= 2000 && secs < 120.0,
        format!(
            "{good}/5 seeds cooperate; max visited p_defect per seed [{}]; {secs:.2} s",
            notes.join(", ")
        ),
    ))
}

fn c2_self_play() -> freerider::Result<Outcome> {
    let config = TrainConfig::default();
    let mut good = 0;
    let mut notes = Vec::new();
    for seed in SEEDS {
        let res = train_self_play(&game(), &TrainConfig { seed, ..config })?;
        let p1 = policy_for_slot(&res.params[0], Slot::One)?;
        let p2 = policy_for_slot(&res.params[1], Slot::Two)?;
        let visited = oracle_visited(&p1, &p2, config.gamma);
        let least = visited
            .iter()
            .map(|&s| p1.p_defect(s).min(p2.p_defect(s)))
            .fold(1.0, f64::min);
        good += (least > 0.9) as usize;
        notes.push(format!("{least:.3}"));
    }
    Ok(outcome(
        good >= 4,
        format!(
            "{good}/5 seeds defect; min visited p_defect per seed [{}]",
            notes.join(", ")
        ),
    ))
}

fn c3_exact_table() -> freerider::Result<Outcome> {
    let gamma = 0.96;
    let start = Instant::now();
    let mut reports = BTreeMap::new();
    for a in StrategyKind::CATALOG {
        for b in StrategyKind::CATALOG {
            let r = exploitability(
                &game(),
                &fixed_strategy(a, Slot::One),
                &fixed_strategy(b, Slot::Two),
                gamma,
                1e-6,
            )?;
            reports.insert((a.name(), b.name()), r);
        }
    }
    let secs = start.elapsed().as_secs_f64();

    // every entry against the enumeration oracle
    let mut worst: f64 = 0.0;
    for ((a, b), r) in &reports {
        let (ra, rb) = (catalog_rule(a), catalog_rule(b));
        worst = worst.max((r.players[0].gap - oracle_gap(&ra, &rb, gamma)).abs());
        worst = worst.max((r.players[1].gap - oracle_gap(&rb, &ra, gamma)).abs());
    }

    let pair = |a: &'static str, b: &'static str| &reports[&(a, b)];
    let alld = pair("all_d", "all_d");
    let tft = pair("tit_for_tat", "tit_for_tat");
    let allc = pair("all_c", "all_c");
    let exploiter = pair("tit_for_tat", "all_c").players[0].best_response_value;
    let oracle_exploiter = oracle_best_response(&catalog_rule("all_c"), gamma);
    let ok = alld.max_gap.abs() <= 1e-8
        && alld.is_epsilon_nash
        && tft.max_gap.abs() <= 1e-8
        && tft.is_epsilon_nash
        && allc.players.iter().all(|p| (p.gap - 25.0).abs() <= 1e-6)
        && !allc.is_epsilon_nash
        && (exploiter - 125.0).abs() <= 1e-6
        && (oracle_exploiter - 125.0).abs() <= 1e-6
        && worst <= 1e-8
        && secs < 1.0;
    Ok(outcome(
        ok,
        format!(
            "AllD {:.1e}, TFT {:.1e}, AllC {:.9}/{:.9}, exploiter of AllC {exploiter:.9}; \
             25 pairs vs oracle max err {worst:.1e}; {secs:.3} s",
            alld.max_gap, tft.max_gap, allc.players[0].gap, allc.players[1].gap
        ),
    ))
}

fn c4_gamma_threshold() -> freerider::Result<Outcome> {
    let threshold = (T - R) / (T - P);
    let gammas: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
    let rows = gamma_sweep(&game(), &tft(Slot::One), &tft(Slot::Two), &gammas, 1e-8)?;
    let rule = catalog_rule("tit_for_tat");
    let mut ok = true;
    let mut wrong = Vec::new();
    for row in &rows {
        let oracle = oracle_gap(&rule, &rule, row.gamma);
        let expect_zero = row.gamma >= threshold;
        let right = if expect_zero {
            row.gap_p1.abs() <= 1e-8 && row.gap_p2.abs() <= 1e-8 && row.is_nash
        } else {
            row.gap_p1 > 1e-8 && row.gap_p2 > 1e-8 && !row.is_nash
        };
        let agrees = (row.gap_p1 - oracle).abs() <= 1e-8;
        if !(right && agrees) {
            ok = false;
            wrong.push(format!("{:.2}", row.gamma));
        }
    }
    Ok(outcome(
        ok && threshold == 0.25,
        format!(
            "{} gammas 0.05..0.95, threshold {threshold}; gap at 0.20 = {:.4}, at 0.25 = {:.1e}; mismatches {:?}",
            rows.len(),
            rows[3].gap_p1,
            rows[4].gap_p1,
            wrong
        ),
    ))
}

fn c5_retraining() -> freerider::Result<Outcome> {
    let br = oracle_best_response(&catalog_rule("all_c"), 0.96);
    let mut counts = [0usize; 3];
    let mut notes = Vec::new();
    for (k, kind) in [StrategyKind::AllC, StrategyKind::TitForTat, StrategyKind::AllD]
        .into_iter()
        .enumerate()
    {
        let mut vals = Vec::new();
        for seed in SEEDS {
            let report = audit_by_retraining(
                &game(),
                &fixed_strategy(kind, Slot::One),
                &fixed_strategy(kind, Slot::Two),
                Slot::One,
                &TrainConfig {
                    seed,
                    ..Default::default()
                },
                Default::default(),
            )?;
            let d = report.retraining.as_ref().expect("retraining details");
            let hit = if kind == StrategyKind::AllC {
                d.learned_value >= 0.95 * br
            } else {
                !d.deviation_flagged && d.improvement < 0.01 * report.players[0].current_value.abs()
            };
            counts[k] += hit as usize;
            vals.push(if kind == StrategyKind::AllC {
                format!("{:.2}", d.learned_value)
            } else {
                format!("{:+.3}", d.improvement)
            });
        }
        notes.push(format!("{}: {}/5 [{}]", kind.name(), counts[k], vals.join(" ")));
    }
    Ok(outcome(counts.iter().all(|&c| c >= 4), notes.join("; ")))
}

fn c6_backward_induction() -> freerider::Result<Outcome> {
    let mut ok = true;
    let mut secs = 0.0;
    for n in [1, 10, 1000] {
        let start = Instant::now();
        let bi = backward_induction_fixed_horizon(&game(), n)?;
        if n == 1000 {
            secs = start.elapsed().as_secs_f64();
        }
        // one action covers every round and history, certified round by round
        ok &= bi.action == Action::Defect
            && bi.certificates.len() == n
            && bi.certificates.iter().all(|c| c.margin[0] > 0.0 && c.margin[1] > 0.0)
            && bi.unique
            && (bi.values[0] - n as f64 * P).abs() < 1e-9
            && (bi.values[1] - n as f64 * P).abs() < 1e-9;
    }
    // margins match the one-shot dominance gaps
    let bi = backward_induction_fixed_horizon(&game(), 10)?;
    let margin = (T - R).min(P - S);
    ok &= bi.certificates.iter().all(|c| c.margin == [margin, margin]);
    Ok(outcome(
        ok && secs < 0.1,
        format!(
            "all-defect for n in {{1, 10, 1000}}, margin {margin}; n=1000 in {:.2} ms",
            secs * 1e3
        ),
    ))
}

fn c7_horizon() -> freerider::Result<Outcome> {
    let model = HorizonModel::Geometric { p: 0.05, cap: 10_000 };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut sum = 0usize;
    let (mut lo, mut hi) = (usize::MAX, 0);
    for _ in 0..100_000 {
        let n = sample_horizon(&model, &mut rng)?;
        sum += n;
        lo = lo.min(n);
        hi = hi.max(n);
    }
    let mean = sum as f64 / 100_000.0;
    Ok(outcome(
        (mean - 20.0).abs() <= 0.5 && lo >= 1 && hi <= 10_000,
        format!("mean {mean:.4}, range [{lo}, {hi}]"),
    ))
}

fn c8_monte_carlo() -> freerider::Result<Outcome> {
    // deterministic pairs have zero spread; a tiny floor absorbs rounding
    const FLOOR: f64 = 1e-9;
    let mut worst: f64 = 0.0;
    let mut misses = Vec::new();
    let mut job = 0u64;
    for a in StrategyKind::CATALOG {
        for b in StrategyKind::CATALOG {
            for gamma in [0.2, 0.96] {
                let p1 = fixed_strategy(a, Slot::One);
                let p2 = fixed_strategy(b, Slot::Two);
                let (v1, v2) = exact_discounted_values(&game(), &p1, &p2, gamma)?;
                let (o1, o2) = rollout_values(&catalog_rule(a.name()), &catalog_rule(b.name()), gamma);
                assert!((v1 - o1).abs() < 1e-8 && (v2 - o2).abs() < 1e-8);
                let mc = monte_carlo_values(&game(), &p1, &p2, gamma, 20_000, 1000 + job)?;
                job += 1;
                for (exact, mean, se) in [(v1, mc.mean.0, mc.stderr.0), (v2, mc.mean.1, mc.stderr.1)] {
                    let z = (mean - exact).abs() / (se + FLOOR);
                    worst = worst.max(z);
                    if (mean - exact).abs() > 3.0 * se + FLOOR {
                        misses.push(format!("{a}/{b}@{gamma}"));
                    }
                }
            }
        }
    }
    Ok(outcome(
        misses.is_empty() && job == 50,
        format!("25 pairs x 2 gammas, 20000 episodes each; worst |z| {worst:.2}; misses {misses:?}"),
    ))
}

fn c9_gradient() -> freerider::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut params = PolicyParams::zeros();
        for row in params.logits.iter_mut() {
            for x in row.iter_mut() {
                *x = rng.random_range(-3.0..3.0);
            }
        }
        let n = rng.random_range(1..40);
        let samples: Vec<ActorSample> = (0..n)
            .map(|_| ActorSample {
                state: GameState::from_index(rng.random_range(0..5)),
                action: Action::from_index(rng.random_range(0..2)),
                advantage: rng.random_range(-10.0..10.0),
            })
            .collect();
        let c = rng.random_range(0.0..1.0);
        let grad = actor_gradient(&params, &samples, c);

        let mut num = 0.0;
        let mut den = 0.0;
        for s in 0..5 {
            for a in 0..2 {
                let mut plus = params.logits;
                let mut minus = params.logits;
                plus[s][a] += h;
                minus[s][a] -= h;
                let fd = (actor_objective(&plus, &samples, c) - actor_objective(&minus, &samples, c)) / (2.0 * h);
                num += (grad[s][a] - fd).powi(2);
                den += fd.powi(2).max(grad[s][a].powi(2));
            }
        }
        let rel = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
        worst = worst.max(rel);
    }
    Ok(outcome(
        worst <= 1e-4,
        format!("100 draws, worst relative error {worst:.2e}"),
    ))
}

fn c10_commons() -> freerider::Result<Outcome> {
    let start = Instant::now();
    let config = CommonsConfig::default();
    let n = config.num_agents;
    let refs = IndexReferences::from_masked_runs(&config, 0)?;
    let hoard = run_policy_profile(&vec![masked_policy(MaskedKind::NoConsumption); n], &config, 0)?;
    let spend = run_policy_profile(&vec![masked_policy(MaskedKind::FullConsumption); n], &config, 0)?;
    let (hi, si) = (hoard.indices(&config, &refs)?, spend.indices(&config, &refs)?);
    let (hr, sr) = (
        RawAggregates::from_episode(&hoard, &config),
        RawAggregates::from_episode(&spend, &config),
    );
    let direction = hi.economic_index > si.economic_index
        && hi.climate_index > si.climate_index
        && hi.utility_index < si.utility_index
        && hr.total_gross_output > sr.total_gross_output
        && hr.temperature_rise < sr.temperature_rise
        && hr.total_discounted_utility < sr.total_discounted_utility;

    let top = config.action_levels - 1;
    let all = vec![AllocationPolicy::Constant(AllocationAction::new(4, top)); n];
    let mut deviant = all.clone();
    deviant[0] = AllocationPolicy::Constant(AllocationAction::new(4, 0));
    let before = run_policy_profile(&all, &config, 0)?.discounted_utility(config.discount);
    let after = run_policy_profile(&deviant, &config, 0)?.discounted_utility(config.discount);
    let free_rider = after[0] > before[0] && (1..n).all(|i| after[i] < before[i]);
    let secs = start.elapsed().as_secs_f64();
    Ok(outcome(
        direction && free_rider && secs < 10.0,
        format!(
            "indices ({:.3}, {:.3}, {:.3}) vs ({:.3}, {:.3}, {:.3}); defector {:+.4}, others {:+.2e}; {secs:.3} s",
            hi.economic_index,
            hi.climate_index,
            hi.utility_index,
            si.economic_index,
            si.climate_index,
            si.utility_index,
            after[0] - before[0],
            (1..n).map(|i| after[i] - before[i]).fold(f64::NEG_INFINITY, f64::max),
        ),
    ))
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).expect("read run dir") {
        let path = entry.expect("dir entry").path();
        if path.extension().is_some_and(|e| e == "csv") {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            out.insert(name, std::fs::read(&path).expect("read csv"));
        }
    }
    out
}

fn c11_determinism() -> freerider::Result<Outcome> {
    let first = tempfile::tempdir().expect("tempdir");
    let second = tempfile::tempdir().expect("tempdir");
    let mut files = 0;
    let mut differ = Vec::new();
    for suite in Suite::ALL {
        let a = first.path().join(suite.name());
        let b = second.path().join(suite.name());
        replicate(suite, Some(&a))?;
        replicate(suite, Some(&b))?;
        let (ca, cb) = (csv_files(&a), csv_files(&b));
        if ca.is_empty() || ca.keys().ne(cb.keys()) {
            differ.push(format!("{suite}: file sets differ or empty"));
        }
        for (name, bytes) in &ca {
            files += 1;
            if cb.get(name) != Some(bytes) {
                differ.push(format!("{suite}/{name}"));
            }
        }
    }
    Ok(outcome(
        differ.is_empty(),
        format!(
            "{files} CSVs across {} suites compared; differing {differ:?}",
            Suite::ALL.len()
        ),
    ))
}

fn main() -> ExitCode {
    type Check = fn() -> freerider::Result<Outcome>;
    let checks: [(&str, Check); 11] = [
        ("1 learner vs tit-for-tat endpoint", c1_vs_tft),
        ("2 self-play endpoint", c2_self_play),
        ("3 exact audit table", c3_exact_table),
        ("4 gamma threshold sweep", c4_gamma_threshold),
        ("5 retraining audit consistency", c5_retraining),
        ("6 backward induction", c6_backward_induction),
        ("7 horizon statistics", c7_horizon),
        ("8 monte carlo vs exact", c8_monte_carlo),
        ("9 actor gradient check", c9_gradient),
        ("10 commons direction and free rider", c10_commons),
        ("11 replicate determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let (passed, detail) = match check() {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += !passed as usize;
        println!("[{}] criterion {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
