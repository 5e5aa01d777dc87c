//! Independent tabular learners in every seat of the commons.
//!
//!     cargo run --release --example commons_training

use freerider::commons::{train_commons, CommonsConfig};
use freerider::learner::TrainConfig;

fn main() -> freerider::Result<()> {
    let train = TrainConfig {
        actor_lr: 0.5,
        episodes_per_update: 8,
        total_updates: 150,
        ..Default::default()
    };
    let res = train_commons(&CommonsConfig::default(), &train)?;
    println!(
        "mean episode reward: {:.4} -> {:.4}",
        res.before.mean_episode_reward, res.after.mean_episode_reward
    );
    for (label, r) in [("before", &res.before_indices), ("after", &res.after_indices)] {
        println!(
            "{label:<7} economic {:.3}  climate {:.3}  utility {:.3}",
            r.economic_index, r.climate_index, r.utility_index
        );
    }
    Ok(())
}
