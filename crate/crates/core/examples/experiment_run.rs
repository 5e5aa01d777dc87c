//! Run a declarative experiment from TOML and list what it wrote.
//!
//!     cargo run --release --example experiment_run -- specs/self_play.toml

use std::path::PathBuf;

use freerider::experiment::{run, ExperimentSpec};

fn main() -> freerider::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("specs/self_play.toml"));
    let spec = ExperimentSpec::from_file(&path)?;
    println!(
        "{} ({}), spec hash {}",
        spec.display_name(),
        spec.kind.name(),
        spec.hash()?
    );
    let manifest = run(&path)?;
    println!("status {:?} in {:.2} s", manifest.status, manifest.wall_clock_seconds);
    for out in manifest.all_outputs() {
        println!("  {}", out.display());
    }
    Ok(())
}
