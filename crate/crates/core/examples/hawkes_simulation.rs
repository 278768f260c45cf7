//! Simulate Poisson, sinusoidal and Hawkes processes and score them with their exact likelihoods.
//!
//! cargo run --release --example hawkes_simulation

use rgnpp::datagen::{oracle_loglik, EventSequence, Hawkes, Poisson, Process, SineRate};

fn summary(name: &str, p: &Process, horizon: f64) -> rgnpp::Result<()> {
    let seqs = p.sample_many(horizon, 200, 42)?;
    let events: usize = seqs.iter().map(EventSequence::len).sum();
    let truth = p.as_ground_truth();
    let ll: f64 = seqs.iter().map(|s| oracle_loglik(truth, s)).sum();
    let mut per_type = vec![0usize; truth.num_types()];
    for e in seqs.iter().flat_map(|s| &s.events) {
        per_type[e.y] += 1;
    }
    let rates: Vec<String> = per_type
        .iter()
        .map(|&c| format!("{:.3}", c as f64 / (200.0 * horizon)))
        .collect();
    println!(
        "{name:<8} events/seq {:>6.1}  empirical rates [{}]  exact ll/event {:.4}",
        events as f64 / 200.0,
        rates.join(", "),
        ll / events as f64
    );
    Ok(())
}

fn main() -> rgnpp::Result<()> {
    let hawkes = Hawkes::new(vec![0.2, 0.2], vec![vec![0.5, 0.3], vec![0.3, 0.5]], 1.0)?;
    println!(
        "hawkes branching ratio {:.2}, stationary rates {:?}",
        hawkes.branching_ratio(),
        hawkes.stationary_rates()
    );
    summary("poisson", &Process::Poisson(Poisson::new(vec![1.0, 0.5])?), 50.0)?;
    summary("sine", &Process::Sine(SineRate::default()), 50.0)?;
    summary("hawkes", &Process::Hawkes(hawkes), 50.0)?;

    let one = Process::Hawkes(Hawkes::new(vec![0.5], vec![vec![0.6]], 2.0)?).sample(10.0, 1)?;
    println!("\none univariate hawkes sequence on [0, 10]:");
    for e in &one.events {
        println!("  t = {:.4}", e.t);
    }
    Ok(())
}
