//! Play tit-for-tat against always-defect, print the trajectory as CSV and
//! compare the exact discounted values with a Monte Carlo estimate.
//!
//!     cargo run --example ipd_rollout

use freerider::game::{exact_discounted_values, monte_carlo_values, rollout, HorizonModel, MatrixGame, Slot};
use freerider::strategies::{fixed_strategy, StrategyKind};

fn main() -> freerider::Result<()> {
    let game = MatrixGame::classic();
    let tft = fixed_strategy(StrategyKind::TitForTat, Slot::One);
    let alld = fixed_strategy(StrategyKind::AllD, Slot::Two);

    let tr = rollout(&game, &tft, &alld, &HorizonModel::Fixed { n: 5 }, 7)?;
    print!("{}", tr.to_csv_string()?);

    let gamma = 0.96;
    let (v1, v2) = exact_discounted_values(&game, &tft, &alld, gamma)?;
    let mc = monte_carlo_values(&game, &tft, &alld, gamma, 20_000, 1)?;
    println!("\nexact  values: {v1:.4} {v2:.4}");
    println!(
        "monte carlo:   {:.4} ± {:.4}, {:.4} ± {:.4}",
        mc.mean.0, mc.stderr.0, mc.mean.1, mc.stderr.1
    );
    Ok(())
}
