//! Train on a Hawkes process with asymmetric excitation and look at who attends to whom.
//!
//! Writes the per-event weights to `attention.csv` in the system temp directory.
//!
//! cargo run --release --example attention_inspection -- [epochs]

use rgnpp::datagen::{split, Hawkes, Process};
use rgnpp::evaluation::attention_dump;
use rgnpp::model::{ModelConfig, Rgn};
use rgnpp::objectives::McConfig;
use rgnpp::training::{TrainConfig, Trainer};

fn main() -> rgnpp::Result<()> {
    let epochs = std::env::args().nth(1).map_or(5, |s| s.parse().expect("epochs"));
    // type 0 drives type 2; type 1 only excites itself
    let truth = Hawkes::new(
        vec![0.3, 0.3, 0.05],
        vec![vec![0.2, 0.0, 0.0], vec![0.0, 0.4, 0.0], vec![0.6, 0.0, 0.1]],
        1.0,
    )?;
    let seqs = Process::Hawkes(truth).sample_many(30.0, 300, 4)?;
    let data = split(seqs, [0.8, 0.1, 0.1], 4)?;

    let mut model = Rgn::new(ModelConfig::new(3, 16, 8, 2), 4)?;
    let trainer = Trainer::new(
        TrainConfig {
            epochs,
            lr: 1e-3,
            ..TrainConfig::default()
        },
        McConfig::default(),
    );
    trainer.train(&mut model, &data.train, &data.val)?;

    let y = model.num_types();
    let heads = model.config().num_heads;
    let mut mean = vec![vec![0.0; y * y]; heads];
    let mut steps = 0;
    for s in &data.test {
        for out in model.forward(s)? {
            for (h, m) in mean.iter_mut().enumerate() {
                // last layer
                let a = &out.attention[(model.config().num_gat_layers - 1) * heads + h];
                for (acc, w) in m.iter_mut().zip(a.data()) {
                    *acc += w;
                }
            }
            steps += 1;
        }
    }
    for (h, m) in mean.iter().enumerate() {
        println!("last layer, head {h}: mean weight (row = receiver, column = sender)");
        for r in 0..y {
            let row: Vec<String> = (0..y).map(|c| format!("{:.3}", m[r * y + c] / steps as f64)).collect();
            println!("  {r}: [{}]", row.join(", "));
        }
    }

    let path = std::env::temp_dir().join("attention.csv");
    let rows = attention_dump(&model, &data.test[0], &path)?;
    println!("wrote {rows} rows for sequence {} to {}", data.test[0].id, path.display());
    Ok(())
}
