//! Learning-based audit: freeze one player, retrain the other from scratch
//! and see whether it finds a profitable deviation.
//!
//!     cargo run --release --example retraining_audit

use freerider::audit::audit_by_retraining;
use freerider::game::{MatrixGame, Slot};
use freerider::learner::TrainConfig;
use freerider::strategies::{fixed_strategy, StrategyKind};

fn main() -> freerider::Result<()> {
    let game = MatrixGame::classic();
    for kind in [StrategyKind::AllC, StrategyKind::TitForTat, StrategyKind::AllD] {
        let report = audit_by_retraining(
            &game,
            &fixed_strategy(kind, Slot::One),
            &fixed_strategy(kind, Slot::Two),
            Slot::One,
            &TrainConfig::default(),
            Default::default(),
        )?;
        println!("({kind}, {kind})");
        print!("{}", report.summary());
    }
    Ok(())
}
