//! Sample coalitions of the commons, retrain them against everybody else
//! and report who gains.
//!
//!     cargo run --release --example coalition_audit

use freerider::audit::{coalition_audit, CoalitionAuditConfig, SubsetSizes};
use freerider::commons::{AllocationAction, AllocationPolicy, CommonsConfig};
use freerider::learner::TrainConfig;

fn main() -> freerider::Result<()> {
    let config = CommonsConfig {
        num_agents: 4,
        ..Default::default()
    };
    // everybody mitigates fully
    let profile = vec![AllocationPolicy::Constant(AllocationAction::new(4, 9)); 4];
    let audit = CoalitionAuditConfig {
        sizes: SubsetSizes::Uniform { min: 1, max: 3 },
        num_samples: 6,
        seed: 3,
        eval_episodes: 16,
        ..Default::default()
    };
    let train = TrainConfig {
        actor_lr: 0.5,
        episodes_per_update: 8,
        total_updates: 100,
        ..Default::default()
    };
    let report = coalition_audit(&config, &profile, &audit, &train)?;
    for s in &report.samples {
        println!(
            "{:?}: gains {:?} (sum {:+.4}) every member {} / sum {}",
            s.members,
            s.improvements.iter().map(|x| format!("{x:+.4}")).collect::<Vec<_>>(),
            s.summed_improvement,
            s.every_member_improves,
            s.sum_improves
        );
    }
    println!("stable against sampled coalitions: {}", report.stable);
    Ok(())
}
