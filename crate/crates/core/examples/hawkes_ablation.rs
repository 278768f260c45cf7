//! Fit a bivariate Hawkes process with and without graph attention.
//!
//! The exact log-likelihood of the generating process is the ceiling; the
//! attention-free model (zero heads) can only pass information between types
//! through the global state.
//!
//! cargo run --release --example hawkes_ablation -- [epochs] [num_seq]

use std::time::Instant;

use rgnpp::datagen::{oracle_loglik, split, EventSequence, Hawkes, Process};
use rgnpp::evaluation::{metrics, DEFAULT_QUADRATURE};
use rgnpp::model::{ModelConfig, Rgn};
use rgnpp::objectives::McConfig;
use rgnpp::training::{TrainConfig, Trainer};

fn fit(heads: usize, epochs: usize, train: &[EventSequence], val: &[EventSequence]) -> rgnpp::Result<Rgn> {
    let mut cfg = ModelConfig::new(2, 32, 16, heads);
    cfg.dropout = 0.0;
    let mut model = Rgn::new(cfg, 11)?;
    let trainer = Trainer::new(
        TrainConfig {
            epochs,
            lr: 1e-3,
            seed: 11,
            beta_time: 1.0,
            ..TrainConfig::default()
        },
        McConfig::default(),
    );
    let start = Instant::now();
    let report = trainer.train(&mut model, train, val)?;
    let best = report.best.nll.as_ref().map_or(f64::NAN, |b| b.value);
    println!(
        "heads={heads}: {} epochs in {:.0}s, best val nll/event {best:.4}",
        report.epochs_run,
        start.elapsed().as_secs_f64()
    );
    Ok(model)
}

fn main() -> rgnpp::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map_or(30, |s| s.parse().expect("epochs"));
    let n = args.next().map_or(1000, |s| s.parse().expect("num_seq"));

    let truth = Hawkes::new(vec![0.2, 0.2], vec![vec![0.5, 0.3], vec![0.3, 0.5]], 1.0)?;
    println!("branching ratio {:.2}, stationary rates {:?}", truth.branching_ratio(), truth.stationary_rates());
    let seqs = Process::Hawkes(truth.clone()).sample_many(50.0, n, 5)?;
    let data = split(seqs, [0.8, 0.1, 0.1], 5)?;

    let events: usize = data.test.iter().map(EventSequence::len).sum();
    let exact = data.test.iter().map(|s| oracle_loglik(&truth, s)).sum::<f64>() / events as f64;

    let with_gat = fit(4, epochs, &data.train, &data.val)?;
    let without = fit(0, epochs, &data.train, &data.val)?;
    let a = -metrics(&with_gat, &data.test, DEFAULT_QUADRATURE)?.nll_per_event;
    let b = -metrics(&without, &data.test, DEFAULT_QUADRATURE)?.nll_per_event;
    println!("test ll/event: exact {exact:.4}  attention {a:.4}  no attention {b:.4}");
    println!("gap to exact: attention {:.4}  no attention {:.4}", exact - a, exact - b);
    Ok(())
}
