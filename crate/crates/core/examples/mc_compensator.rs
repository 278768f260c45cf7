//! Monte Carlo compensator estimates against a fine trapezoid reference.
//!
//! cargo run --release --example mc_compensator

use rgnpp::datagen::{Event, EventSequence};
use rgnpp::model::{ModelConfig, Rgn};
use rgnpp::objectives::{mc_estimate, trapezoid_compensators};
use rgnpp::rng;

fn main() -> rgnpp::Result<()> {
    let mut cfg = ModelConfig::new(3, 8, 4, 2);
    // alpha is divided by max(anchor, epsilon_t), so the first interval needs a tiny value
    cfg.alpha = vec![3e-7, 2e-7, 1e-7];
    let model = Rgn::new(cfg, 5)?;
    let seq = EventSequence::new(
        "s",
        6.0,
        vec![Event::new(0.7, 0), Event::new(1.9, 2), Event::new(2.2, 1), Event::new(4.8, 0)],
    );
    let outputs = model.forward(&seq)?;
    let reference: f64 = trapezoid_compensators(&model, &outputs, &seq, 1000)?.iter().sum();
    println!("trapezoid (K = 1000) total compensator {reference:.6}");
    println!("{:>4} {:>12} {:>12} {:>12}", "N", "mean", "std", "std*sqrt(N)");
    for n in [1, 4, 16, 64] {
        let draws: Vec<f64> = (0..2000)
            .map(|r| mc_estimate(&model, &outputs, &seq, n, &mut rng::stream(r, &[n as u64])))
            .collect::<rgnpp::Result<_>>()?;
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        println!("{n:>4} {mean:>12.6} {:>12.6} {:>12.6}", var.sqrt(), (var * n as f64).sqrt());
    }
    Ok(())
}
