//! Pretrain against tit-for-tat, then switch to self-play, and write the
//! concatenated learning curves to stdout as CSV.
//!
//!     cargo run --release --example curriculum > curriculum.csv

use freerider::game::{MatrixGame, Slot};
use freerider::learner::{train_curriculum, write_curves_csv, CurriculumStage, StageOpponent, TrainConfig};
use freerider::strategies::{fixed_strategy, StrategyKind};

fn main() -> freerider::Result<()> {
    let game = MatrixGame::classic();
    let stage = |opponent, seed| CurriculumStage {
        opponent,
        config: TrainConfig {
            total_updates: 1000,
            seed,
            ..Default::default()
        },
    };
    let stages = [
        stage(
            StageOpponent::Fixed {
                policy: fixed_strategy(StrategyKind::TitForTat, Slot::Two),
            },
            0,
        ),
        stage(StageOpponent::SelfPlay, 1),
    ];
    let res = train_curriculum(&game, &stages)?;
    eprintln!("after pretraining + self-play: {}", res.params.to_memory_one()?);
    if let Some(p) = res.partner {
        eprintln!("partner (own perspective):     {}", p.to_memory_one()?);
    }
    write_curves_csv(&res.curves, std::io::stdout().lock())
}
