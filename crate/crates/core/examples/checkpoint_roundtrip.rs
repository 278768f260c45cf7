//! Train briefly, save a checkpoint, reload it and confirm identical predictions.
//!
//! cargo run --release --example checkpoint_roundtrip

use rgnpp::checkpoint::Checkpoint;
use rgnpp::datagen::{split, Hawkes, Process};
use rgnpp::evaluation::{metrics, DEFAULT_QUADRATURE};
use rgnpp::model::{ModelConfig, Rgn};
use rgnpp::objectives::McConfig;
use rgnpp::training::{TrainConfig, Trainer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = Hawkes::new(vec![0.3, 0.2], vec![vec![0.4, 0.2], vec![0.1, 0.3]], 1.5)?;
    let seqs = Process::Hawkes(truth).sample_many(20.0, 100, 2)?;
    let data = split(seqs, [0.8, 0.1, 0.1], 2)?;

    let mut model = Rgn::new(ModelConfig::new(2, 16, 8, 2), 3)?;
    let trainer = Trainer::new(
        TrainConfig {
            epochs: 2,
            lr: 1e-3,
            ..TrainConfig::default()
        },
        McConfig::default(),
    );
    trainer.train(&mut model, &data.train, &data.val)?;

    let dir = std::env::temp_dir().join("rgnpp-checkpoint-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("checkpoint.json");
    Checkpoint::from_model(&model, &trainer.adam).save(&path)?;
    let (restored, _) = Checkpoint::load(&path)?.to_model()?;

    let before = metrics(&model, &data.val, DEFAULT_QUADRATURE)?;
    let after = metrics(&restored, &data.val, DEFAULT_QUADRATURE)?;
    println!("saved to {}", path.display());
    println!("val nll/event before {:.12}  after {:.12}", before.nll_per_event, after.nll_per_event);
    println!("identical metrics: {}", before == after);
    Ok(())
}
