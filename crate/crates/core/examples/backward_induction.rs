//! Unravelling of the finitely repeated dilemma.
//!
//!     cargo run --example backward_induction -- 10

use freerider::audit::backward_induction_fixed_horizon;
use freerider::game::MatrixGame;

fn main() -> freerider::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let bi = backward_induction_fixed_horizon(&MatrixGame::classic(), steps)?;
    print!("{}", bi.summary());
    for c in bi.certificates.iter().take(5) {
        println!(
            "  round {:>4}: defect wins by >= {:?}, continuation {:?}",
            c.round, c.margin, c.continuation
        );
    }

    // a stag hunt is not a dilemma and is refused
    let stag = MatrixGame::symmetric(5.0, 4.0, 1.0, 0.0);
    if let Err(e) = backward_induction_fixed_horizon(&stag, steps) {
        println!("stag hunt: {e}");
    }
    Ok(())
}
