//! Exploitability of every pair of catalog strategies at gamma = 0.96.
//!
//!     cargo run --example exact_audit

use freerider::audit::exploitability;
use freerider::game::{MatrixGame, Slot};
use freerider::strategies::{fixed_strategy, StrategyKind};

fn main() -> freerider::Result<()> {
    let game = MatrixGame::classic();
    println!("{:<14}{:<14}{:>10}{:>10}  nash", "p1", "p2", "gap p1", "gap p2");
    for a in StrategyKind::CATALOG {
        for b in StrategyKind::CATALOG {
            let r = exploitability(
                &game,
                &fixed_strategy(a, Slot::One),
                &fixed_strategy(b, Slot::Two),
                0.96,
                1e-6,
            )?;
            println!(
                "{:<14}{:<14}{:>10.4}{:>10.4}  {}",
                a.name(),
                b.name(),
                r.players[0].gap,
                r.players[1].gap,
                r.is_epsilon_nash
            );
        }
    }

    let r = exploitability(
        &game,
        &fixed_strategy(StrategyKind::AllC, Slot::One),
        &fixed_strategy(StrategyKind::AllC, Slot::Two),
        0.96,
        1e-6,
    )?;
    println!("\n{}", r.summary());
    Ok(())
}
