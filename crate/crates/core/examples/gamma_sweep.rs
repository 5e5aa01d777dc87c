//! Tit-for-tat self-play is an equilibrium only when gamma >= 0.25. Writes
//! the sweep as CSV and as an SVG plot into the given directory.
//!
//!     cargo run --example gamma_sweep -- out/

use std::path::PathBuf;

use freerider::audit::{gamma_sweep, write_sweep_csv};
use freerider::experiment::{render_sweep_svg, write_atomic};
use freerider::game::{MatrixGame, Slot};
use freerider::strategies::{fixed_strategy, StrategyKind};

fn main() -> freerider::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "gamma_sweep_out".into()));
    let gammas: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
    let rows = gamma_sweep(
        &MatrixGame::classic(),
        &fixed_strategy(StrategyKind::TitForTat, Slot::One),
        &fixed_strategy(StrategyKind::TitForTat, Slot::Two),
        &gammas,
        1e-8,
    )?;
    for r in &rows {
        println!("gamma {:.2}: gap {:.4}  nash {}", r.gamma, r.gap_p1, r.is_nash);
    }
    let mut csv = Vec::new();
    write_sweep_csv(&rows, &mut csv)?;
    write_atomic(&dir.join("sweep.csv"), &csv)?;
    write_atomic(
        &dir.join("sweep.svg"),
        render_sweep_svg("tit_for_tat self-play", &rows)?.as_bytes(),
    )?;
    println!("wrote {}", dir.display());
    Ok(())
}
