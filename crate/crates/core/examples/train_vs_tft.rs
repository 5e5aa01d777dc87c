//! Train a tabular actor-critic against tit-for-tat and print the policy
//! it ends with on the states the pair actually visits.
//!
//!     cargo run --release --example train_vs_tft -- [seed]

use freerider::game::{exact_discounted_values, visited_states, MatrixGame, Slot};
use freerider::learner::{policy_for_slot, train_vs_fixed, TrainConfig};
use freerider::strategies::{fixed_strategy, StrategyKind};

fn main() -> freerider::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let game = MatrixGame::classic();
    let tft = fixed_strategy(StrategyKind::TitForTat, Slot::Two);
    let config = TrainConfig {
        seed,
        ..Default::default()
    };

    let (params, curve) = train_vs_fixed(&game, &tft, &config)?;
    let learned = policy_for_slot(&params, Slot::One)?;
    for pt in curve.points.iter().step_by(250) {
        println!("update {:>4}: mean return {:>7.2}", pt.update, pt.mean_return);
    }
    println!("final policy: {learned}");
    for s in visited_states(&learned, &tft, config.gamma)? {
        println!("  visited {s:<5} p_defect {:.4}", learned.p_defect(s));
    }
    let (v, _) = exact_discounted_values(&game, &learned, &tft, config.gamma)?;
    println!("exact value {v:.3} (mutual cooperation pays 100)");
    Ok(())
}
