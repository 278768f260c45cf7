//! Train on homogeneous Poisson(1) data and compare with the analytic likelihood.
//!
//! cargo run --release --example poisson_recovery -- [epochs]

use std::time::Instant;

use rgnpp::datagen::{oracle_loglik, split, Poisson, Process};
use rgnpp::evaluation::{goodness_of_fit, metrics, DEFAULT_QUADRATURE};
use rgnpp::model::{ModelConfig, Rgn};
use rgnpp::objectives::McConfig;
use rgnpp::training::{TrainConfig, Trainer};

fn main() -> rgnpp::Result<()> {
    let epochs = std::env::args().nth(1).map_or(50, |s| s.parse().expect("epochs"));
    let truth = Poisson::new(vec![1.0])?;
    let seqs = Process::Poisson(truth.clone()).sample_many(20.0, 1000, 7)?;
    let data = split(seqs, [0.8, 0.1, 0.1], 7)?;

    let mut model = Rgn::new(ModelConfig::new(1, 32, 16, 4), 7)?;
    let trainer = Trainer::new(
        TrainConfig {
            epochs,
            lr: 1e-3,
            seed: 7,
            ..TrainConfig::default()
        },
        McConfig::default(),
    );
    let start = Instant::now();
    let report = trainer.train(&mut model, &data.train, &data.val)?;
    for row in report.history.iter().filter(|r| r.split == "val") {
        println!("epoch {:>3}  val nll/event {:.4}", row.epoch, row.nll_per_event);
    }
    println!("trained {} epochs in {:.1}s", report.epochs_run, start.elapsed().as_secs_f64());

    let m = metrics(&model, &data.test, DEFAULT_QUADRATURE)?;
    let oracle: f64 = data.test.iter().map(|s| oracle_loglik(&truth, s)).sum::<f64>() / m.events as f64;
    let gof = goodness_of_fit(&model, &data.test, DEFAULT_QUADRATURE)?;
    println!("test ll/event {:.4}  oracle {:.4}", -m.nll_per_event, oracle);
    println!("KS D {:.4}  5% critical {:.4}", gof.ks_statistic, gof.critical_5);
    Ok(())
}
