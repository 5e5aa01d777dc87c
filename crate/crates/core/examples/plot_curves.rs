//! Train two learners and render their curves side by side as SVG.
//!
//!     cargo run --release --example plot_curves -- curves.svg

use std::path::PathBuf;

use freerider::experiment::{render_curves_svg, write_atomic};
use freerider::game::{MatrixGame, Slot};
use freerider::learner::{train_self_play, train_vs_fixed, TrainConfig};
use freerider::strategies::{fixed_strategy, StrategyKind};

fn main() -> freerider::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "curves.svg".into()));
    let game = MatrixGame::classic();
    let config = TrainConfig::default();
    let (_, vs_tft) = train_vs_fixed(&game, &fixed_strategy(StrategyKind::TitForTat, Slot::Two), &config)?;
    let sp = train_self_play(&game, &config)?;
    let svg = render_curves_svg(&[
        ("vs tit_for_tat".into(), vec![vs_tft]),
        ("self-play".into(), vec![sp.curves[0].clone()]),
    ])?;
    write_atomic(&out, svg.as_bytes())?;
    println!("wrote {}", out.display());
    Ok(())
}
