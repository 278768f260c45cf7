//! Statistical properties of the generators and the Monte Carlo compensator.

use rgnpp::datagen::{Event, EventSequence, Hawkes, Process, SineRate};
use rgnpp::evaluation::{ks_exp1, rescale_exact};
use rgnpp::model::{ModelConfig, Rgn};
use rgnpp::objectives::mc_estimate;
use rgnpp::rng;

fn ks_1pct_passes(p: &Process, horizon: f64) -> usize {
    (0..100u64)
        .filter(|&s| {
            let seq = p.sample(horizon, 500 + s).unwrap();
            let r = ks_exp1(&rescale_exact(p.as_ground_truth(), &seq).z).unwrap();
            r.pass_1
        })
        .count()
}

#[test]
fn thinned_sine_rescales_to_unit_exponential() {
    let passes = ks_1pct_passes(&Process::Sine(SineRate::default()), 100.0);
    assert!(passes >= 98, "{passes}/100");
}

#[test]
fn thinned_hawkes_rescales_to_unit_exponential() {
    let h = Hawkes::new(vec![0.2, 0.2], vec![vec![0.5, 0.3], vec![0.3, 0.5]], 1.0).unwrap();
    let passes = ks_1pct_passes(&Process::Hawkes(h), 50.0);
    assert!(passes >= 98, "{passes}/100");
}

#[test]
fn mc_variance_shrinks_with_samples() {
    let mut cfg = ModelConfig::new(2, 8, 4, 2);
    cfg.alpha = vec![2e-7, 1e-7];
    let model = Rgn::new(cfg, 2).unwrap();
    let seq = EventSequence::new(
        "s",
        5.0,
        vec![Event::new(0.5, 0), Event::new(1.4, 1), Event::new(3.0, 0)],
    );
    let out = model.forward(&seq).unwrap();
    let var = |n: usize| {
        let d: Vec<f64> = (0..4000u64)
            .map(|r| mc_estimate(&model, &out, &seq, n, &mut rng::stream(r, &[n as u64])).unwrap())
            .collect();
        let m = d.iter().sum::<f64>() / d.len() as f64;
        d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (d.len() - 1) as f64
    };
    let ratio = var(40) / var(10);
    assert!(ratio < 0.35, "variance ratio {ratio}");
}
