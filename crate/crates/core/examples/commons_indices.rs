//! The climate commons under masked profiles, scored by the economic,
//! climate and utility indices, plus a single free rider.
//!
//!     cargo run --example commons_indices

use freerider::commons::{
    masked_policy, run_policy_profile, AllocationAction, AllocationPolicy, CommonsConfig, IndexReferences, MaskedKind,
};

fn main() -> freerider::Result<()> {
    let config = CommonsConfig::default();
    let n = config.num_agents;
    let refs = IndexReferences::from_masked_runs(&config, 0)?;

    println!("{:<18}{:>10}{:>10}{:>10}", "profile", "economic", "climate", "utility");
    for (label, kind) in [
        ("no_consumption", MaskedKind::NoConsumption),
        ("full_consumption", MaskedKind::FullConsumption),
        ("uniform_random", MaskedKind::UniformRandom),
    ] {
        let ep = run_policy_profile(&vec![masked_policy(kind); n], &config, 0)?;
        let r = ep.indices(&config, &refs)?;
        println!(
            "{label:<18}{:>10.3}{:>10.3}{:>10.3}",
            r.economic_index, r.climate_index, r.utility_index
        );
    }

    let top = config.action_levels - 1;
    let all = vec![AllocationPolicy::Constant(AllocationAction::new(4, top)); n];
    let mut deviant = all.clone();
    deviant[0] = AllocationPolicy::Constant(AllocationAction::new(4, 0));
    let before = run_policy_profile(&all, &config, 0)?.discounted_utility(config.discount);
    let after = run_policy_profile(&deviant, &config, 0)?.discounted_utility(config.discount);
    println!("\nagent 0 stops mitigating:");
    for i in 0..n {
        println!("  agent {i}: {:+.6} -> {:+.6}", before[i], after[i]);
    }
    Ok(())
}
