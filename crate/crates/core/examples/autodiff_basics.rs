//! Build a small graph by hand, run backward, then finite-difference check a full model loss.
//!
//! cargo run --release --example autodiff_basics

use rgnpp::autodiff::{grad_check, GradCheckConfig, Graph, ParamStore, Tensor};
use rgnpp::datagen::{Event, EventSequence};
use rgnpp::model::{ModelConfig, Rgn};
use rgnpp::objectives::{chunk_loss, LossWeights};
use rgnpp::rng;

fn main() -> rgnpp::Result<()> {
    // loss = sum(softplus(x W)) for a 1x2 input and 2x2 weight
    let mut store = ParamStore::new();
    let w = store.register("W", Tensor::matrix(2, 2, vec![0.5, -1.0, 2.0, 0.25])?)?;
    let mut g = Graph::new(&store);
    let x = g.constant(Tensor::row(vec![1.0, -0.5]));
    let wv = g.param(w);
    let h = g.matmul(x, wv)?;
    let s = g.softplus(h);
    let loss = g.sum(s);
    println!("loss {:.6}", g.value(loss).item());
    let grads = g.backward(loss)?;
    println!("dloss/dW {:?}", grads.get(w).map(|t| t.data().to_vec()));

    let mut cfg = ModelConfig::new(3, 8, 4, 2);
    cfg.dropout = 0.0;
    let model = Rgn::new(cfg, 1)?;
    let seq = EventSequence::new(
        "demo",
        3.0,
        vec![Event::new(0.4, 0), Event::new(1.1, 2), Event::new(2.5, 1)],
    );
    let weights = LossWeights::default();
    let report = grad_check(
        model.store(),
        |g| {
            let state = model.init_state().attach(g);
            let out = chunk_loss(g, &model, &seq, 0..seq.len(), &state, &weights, 5, &mut rng::stream(3, &[]), false)?;
            Ok(out.total)
        },
        &GradCheckConfig {
            max_coords: Some(500),
            ..GradCheckConfig::default()
        },
    )?;
    println!(
        "model gradient check: {} coordinates over {} parameters, max relative error {:.2e} ({})",
        report.coords_checked,
        report.params.len(),
        report.max_rel_err,
        if report.passed() { "pass" } else { "FAIL" }
    );
    for p in report.params.iter().filter(|p| p.coords_checked > 0).take(6) {
        println!("  {:<28} {:>4} coords  {:.2e}", p.name, p.coords_checked, p.max_rel_err);
    }
    Ok(())
}
