//! Attention-score and FLOP counts as the number of event types grows.
//!
//! cargo run --release --example complexity_scaling

use rgnpp::evaluation::complexity_report;
use rgnpp::model::ModelConfig;

fn main() {
    println!("{:>6} {:>14} {:>16} {:>16}", "types", "scores/event", "flops/event", "flops (L=100)");
    for y in [1, 2, 5, 10, 50, 100, 1000] {
        let r = complexity_report(&ModelConfig::new(y, 32, 16, 4), 100);
        println!(
            "{y:>6} {:>14} {:>16} {:>16}",
            r.attention_scores_per_event, r.flops_per_event, r.flops
        );
    }
    let a = complexity_report(&ModelConfig::new(10, 32, 16, 4), 1).attention_scores_per_event;
    let b = complexity_report(&ModelConfig::new(1000, 32, 16, 4), 1).attention_scores_per_event;
    println!("\nscores per event grow {}x from 10 to 1000 types", b / a);
}
