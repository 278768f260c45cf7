//! Print sinusoidal time embeddings and show that nearby times embed close together.
//!
//! cargo run --release --example time_embedding

use rgnpp::embedding::{embed_time, EmbeddingConfig};

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn main() -> rgnpp::Result<()> {
    let cfg = EmbeddingConfig::new(8);
    for t in [0.0, 0.5, 1.0, 10.0, 1000.0] {
        let x = embed_time(t, &cfg)?;
        let row: Vec<String> = x.data().iter().map(|v| format!("{v:+.3}")).collect();
        println!("t = {t:>7}: [{}]", row.join(", "));
    }
    let wide = EmbeddingConfig::new(32);
    let base = embed_time(5.0, &wide)?;
    println!("\ndistance from t = 5 (d = 32):");
    for dt in [0.01, 0.1, 1.0, 10.0] {
        let other = embed_time(5.0 + dt, &wide)?;
        println!("  dt = {dt:>5}: {:.4}", dist(base.data(), other.data()));
    }
    let scaled = EmbeddingConfig {
        time_scale: 100.0,
        ..EmbeddingConfig::new(8)
    };
    println!("\nwith time_scale 100, t = 1000 embeds like t = 10: {}", embed_time(1000.0, &scaled)? == embed_time(10.0, &cfg)?);
    Ok(())
}
