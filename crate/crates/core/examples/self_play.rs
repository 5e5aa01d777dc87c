//! Two independent learners trained against each other drift to mutual
//! defection.
//!
//!     cargo run --release --example self_play -- [seed]

use freerider::game::{exact_discounted_values, visited_states, MatrixGame, Slot};
use freerider::learner::{policy_for_slot, train_self_play, TrainConfig};

fn main() -> freerider::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let game = MatrixGame::classic();
    let config = TrainConfig {
        seed,
        ..Default::default()
    };
    let res = train_self_play(&game, &config)?;

    let p1 = policy_for_slot(&res.params[0], Slot::One)?;
    let p2 = policy_for_slot(&res.params[1], Slot::Two)?;
    println!("player 1: {p1}");
    println!("player 2: {p2}");
    let visited = visited_states(&p1, &p2, config.gamma)?;
    println!("visited states: {visited:?}");
    let (v1, v2) = exact_discounted_values(&game, &p1, &p2, config.gamma)?;
    println!("values {v1:.2} / {v2:.2} (mutual defection pays 25)");
    Ok(())
}
