//! Acceptance criteria, one test each, run one at a time.
//!
//! Each test writes a single `criterion N: PASS|FAIL ...` line to stderr
//! (bypassing the test harness capture) before asserting.

use std::io::Write;
use std::sync::Mutex;
use std::time::Instant;

use rgnpp::autodiff::{grad_check, GradCheckConfig, Graph};
use rgnpp::checkpoint::Checkpoint;
use rgnpp::datagen::{oracle_loglik, split, Event, EventSequence, Hawkes, Poisson, Process};
use rgnpp::evaluation::{goodness_of_fit, ks_exp1, metrics, rescale_exact, DEFAULT_QUADRATURE};
use rgnpp::model::{ModelConfig, Rgn};
use rgnpp::objectives::{chunk_loss, mc_estimate, trapezoid_compensators, LossWeights, McConfig};
use rgnpp::rng;
use rgnpp::training::{write_metrics_csv, TrainConfig, Trainer};
use rand::Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn report(n: u32, pass: bool, detail: String) {
    let line = format!("criterion {n}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} failed: {detail}");
}

fn lock() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn hawkes_truth() -> Hawkes {
    Hawkes::new(vec![0.2, 0.2], vec![vec![0.5, 0.3], vec![0.3, 0.5]], 1.0).unwrap()
}

fn per_event_oracle<P: rgnpp::datagen::GroundTruth>(truth: &P, seqs: &[EventSequence]) -> f64 {
    let events: usize = seqs.iter().map(EventSequence::len).sum();
    seqs.iter().map(|s| oracle_loglik(truth, s)).sum::<f64>() / events as f64
}

#[test]
fn criterion_1_gradient_fidelity() {
    let _g = lock();
    let start = Instant::now();
    let mut cfg = ModelConfig::new(3, 8, 4, 2);
    cfg.num_gat_layers = 2;
    cfg.dropout = 0.0;
    let mut model = Rgn::new(cfg, 21).unwrap();
    // move attention biases off the leaky-ReLU kink where the zero-initialized nodes sit
    let ids: Vec<_> = model.store().ids().filter(|&id| model.store().name(id).ends_with(".bias")).collect();
    for id in ids {
        model.store_mut().value_mut(id).data_mut().fill(0.1);
    }
    let seq = EventSequence::new("one", 1.5, vec![Event::new(0.8, 1)]);
    let w = LossWeights::default();
    let r = grad_check(
        model.store(),
        |g| {
            let st = model.init_state().attach(g);
            Ok(chunk_loss(g, &model, &seq, 0..1, &st, &w, 10, &mut rng::stream(5, &[]), true)?.total)
        },
        &GradCheckConfig {
            max_coords: Some(600),
            ..GradCheckConfig::default()
        },
    )
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        r.passed() && r.coords_checked >= 500 && secs < 30.0,
        format!(
            "max rel err {:.2e} (< 1e-5) over {} coords, {:.1}s (< 30s)",
            r.max_rel_err, r.coords_checked, secs
        ),
    );
}

#[test]
fn criterion_2_mc_unbiased() {
    let _g = lock();
    let start = Instant::now();
    let mut cfg = ModelConfig::new(3, 8, 4, 2);
    cfg.alpha = vec![3e-7, -2e-7, 1e-7];
    let model = Rgn::new(cfg, 8).unwrap();
    let mut r = rng::stream(8, &[1]);
    let mut t = 0.0;
    let events = (0..10)
        .map(|_| {
            t += r.random_range(0.1..1.5);
            Event::new(t, r.random_range(0..3))
        })
        .collect();
    let seq = EventSequence::new("ten", t + 0.7, events);
    let outputs = model.forward(&seq).unwrap();
    let reference: f64 = trapezoid_compensators(&model, &outputs, &seq, 1000).unwrap().iter().sum();
    let draws: Vec<f64> = (0..10_000u64)
        .map(|s| mc_estimate(&model, &outputs, &seq, 10, &mut rng::stream(s, &[2])).unwrap())
        .collect();
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let se = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    let z = (mean - reference).abs() / se;

    let flat = Rgn::zeroed(ModelConfig::new(3, 8, 4, 2)).unwrap();
    let out = flat.forward(&seq).unwrap();
    let exact = 3.0 * 2f64.ln() * seq.horizon;
    let mc = mc_estimate(&flat, &out, &seq, 10, &mut rng::stream(0, &[])).unwrap();
    let const_err = (mc - exact).abs() / exact;
    let secs = start.elapsed().as_secs_f64();
    report(
        2,
        z < 4.0 && const_err < 1e-12 && secs < 60.0,
        format!(
            "MC mean {mean:.6} vs trapezoid {reference:.6}: {z:.2} SE (< 4); constant rel err {const_err:.1e}; {secs:.1}s"
        ),
    );
}

#[test]
fn criterion_3_poisson_recovery() {
    let _g = lock();
    let start = Instant::now();
    let truth = Poisson::new(vec![1.0]).unwrap();
    let seqs = Process::Poisson(truth.clone()).sample_many(20.0, 1000, 7).unwrap();
    let data = split(seqs, [0.8, 0.1, 0.1], 7).unwrap();
    let mut model = Rgn::new(ModelConfig::new(1, 32, 16, 4), 7).unwrap();
    let trainer = Trainer::new(
        TrainConfig {
            epochs: 50,
            lr: 1e-3,
            seed: 7,
            threads: 1,
            ..TrainConfig::default()
        },
        McConfig::default(),
    );
    let rep = trainer.train(&mut model, &data.train, &data.val).unwrap();
    let ll = -metrics(&model, &data.test, DEFAULT_QUADRATURE).unwrap().nll_per_event;
    let oracle = per_event_oracle(&truth, &data.test);
    let gof = goodness_of_fit(&model, &data.test, DEFAULT_QUADRATURE).unwrap();
    let secs = start.elapsed().as_secs_f64();
    report(
        3,
        (ll - oracle).abs() < 0.1 && gof.pass_5 && secs < 600.0,
        format!(
            "test ll/event {ll:.4} vs oracle {oracle:.4} (|diff| < 0.1); KS {:.4} vs 5% critical {:.4}; {} epochs, {secs:.0}s",
            gof.ks_statistic, gof.critical_5, rep.epochs_run
        ),
    );
}

#[test]
fn criterion_4_hawkes_proximity() {
    let _g = lock();
    let start = Instant::now();
    let truth = hawkes_truth();
    let seqs = Process::Hawkes(truth.clone()).sample_many(50.0, 1000, 5).unwrap();
    let data = split(seqs, [0.8, 0.1, 0.1], 5).unwrap();
    let fit = |heads: usize| {
        let mut cfg = ModelConfig::new(2, 32, 16, heads);
        cfg.dropout = 0.0;
        let mut model = Rgn::new(cfg, 11).unwrap();
        let trainer = Trainer::new(
            TrainConfig {
                epochs: 30,
                lr: 1e-3,
                seed: 11,
                beta_time: 1.0,
                ..TrainConfig::default()
            },
            McConfig::default(),
        );
        trainer.train(&mut model, &data.train, &data.val).unwrap();
        -metrics(&model, &data.test, DEFAULT_QUADRATURE).unwrap().nll_per_event
    };
    let with_gat = fit(4);
    let without = fit(0);
    let exact = per_event_oracle(&truth, &data.test);
    let secs = start.elapsed().as_secs_f64();
    report(
        4,
        exact - with_gat < 0.15 && with_gat > without && secs < 1800.0,
        format!(
            "test ll/event {with_gat:.4} vs exact {exact:.4} (gap {:.4} < 0.15); 0-head {without:.4}; {secs:.0}s",
            exact - with_gat
        ),
    );
}

#[test]
fn criterion_5_time_rescaling_calibration() {
    let _g = lock();
    let truth = hawkes_truth();
    let passes = (0..100u64)
        .filter(|&s| {
            let seq = Process::Hawkes(truth.clone()).sample(50.0, 1000 + s).unwrap();
            ks_exp1(&rescale_exact(&truth, &seq).z).unwrap().pass_5
        })
        .count();

    let mu = 1.7;
    let poisson = Poisson::new(vec![mu]).unwrap();
    let seq = Process::Poisson(poisson.clone()).sample(100.0, 3).unwrap();
    let z = rescale_exact(&poisson, &seq).z;
    let mut prev = 0.0;
    let exact = seq.events.iter().zip(&z).all(|(e, &z)| {
        let ok = z == mu * (e.t - prev);
        prev = e.t;
        ok
    });
    report(
        5,
        passes >= 90 && exact && !z.is_empty(),
        format!("{passes}/100 runs pass KS at 5% (>= 90); constant-rate z equal mu*dt exactly: {exact}"),
    );
}

#[test]
fn criterion_6_complexity_invariant() {
    let _g = lock();
    let cfg = ModelConfig::new(3, 8, 4, 2);
    let expected = cfg.num_gat_layers * cfg.num_heads * 9;
    let model = Rgn::new(cfg, 1).unwrap();
    let counts = |n: usize| -> Vec<usize> {
        let events = (0..n).map(|i| Event::new(0.1 * (i + 1) as f64, i % 3)).collect();
        let seq = EventSequence::new("s", 0.1 * (n + 1) as f64, events);
        model.forward(&seq).unwrap().iter().map(|o| o.stored_attention_scores()).collect()
    };
    let (short, long) = (counts(10), counts(1000));
    let ok = short.iter().chain(&long).all(|&c| c == expected);
    report(
        6,
        ok,
        format!(
            "stored scores per event {} (L=10) and {} (L=1000), expected {expected}",
            short[0], long[999]
        ),
    );
}

#[test]
fn criterion_7_attention_and_routing() {
    let _g = lock();
    let y = 4;
    let model = Rgn::new(ModelConfig::new(y, 8, 4, 2), 3).unwrap();
    let mut r = rng::stream(3, &[7]);
    let mut worst: f64 = 0.0;
    let mut routing_ok = true;
    let mut steps = 0;
    let mut state = model.init_state();
    let mut t = 0.0;
    while steps < 1000 {
        let mut g = Graph::with_seed(model.store(), steps as u64);
        let vars = state.attach(&mut g);
        let prev = t;
        t += r.random_range(0.01..2.0);
        let ty = r.random_range(0..y);
        let (next, s) = model.step(&mut g, &vars, t, ty, prev, true).unwrap();
        for a in &s.attention {
            for row in g.value(*a).data().chunks(y) {
                worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
            }
        }
        let after = next.detach(&g);
        for k in (0..y).filter(|&k| k != ty) {
            let same = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, z)| x.to_bits() == z.to_bits());
            routing_ok &= same(after.v[k].data(), state.v[k].data()) && same(after.c[k].data(), state.c[k].data());
        }
        state = after;
        steps += 1;
    }
    report(
        7,
        worst <= 1e-9 && routing_ok,
        format!("max |row sum - 1| {worst:.1e} over {steps} steps; unobserved nodes bit-identical: {routing_ok}"),
    );
}

#[test]
fn criterion_8_determinism_and_persistence() {
    let _g = lock();
    let dir = tempfile::tempdir().unwrap();
    let truth = Hawkes::new(vec![0.3, 0.3], vec![vec![0.3, 0.1], vec![0.1, 0.3]], 1.0).unwrap();
    let seqs = Process::Hawkes(truth).sample_many(20.0, 60, 1).unwrap();
    let data = split(seqs, [0.8, 0.1, 0.1], 1).unwrap();
    let trainer = Trainer::new(
        TrainConfig {
            epochs: 3,
            lr: 1e-3,
            seed: 4,
            batch_size: 8,
            ..TrainConfig::default()
        },
        McConfig::default(),
    );
    let run = |name: &str| {
        let mut model = Rgn::new(ModelConfig::new(2, 16, 8, 2), 4).unwrap();
        let rep = trainer.train(&mut model, &data.train, &data.val).unwrap();
        let path = dir.path().join(name);
        write_metrics_csv(&rep.history, &path).unwrap();
        (std::fs::read(path).unwrap(), model)
    };
    let (a, model) = run("a.csv");
    let (b, _) = run("b.csv");

    let path = dir.path().join("ckpt.json");
    Checkpoint::from_model(&model, &trainer.adam).save(&path).unwrap();
    let (restored, _) = Checkpoint::load(&path).unwrap().to_model().unwrap();
    let m1 = metrics(&model, &data.val, DEFAULT_QUADRATURE).unwrap();
    let m2 = metrics(&restored, &data.val, DEFAULT_QUADRATURE).unwrap();
    let diff = (m1.nll_per_event - m2.nll_per_event)
        .abs()
        .max((m1.type_accuracy - m2.type_accuracy).abs())
        .max((m1.time_rmse - m2.time_rmse).abs());
    report(
        8,
        a == b && !a.is_empty() && diff <= 1e-12,
        format!("metrics CSV identical across runs: {}; checkpoint metric diff {diff:.1e} (<= 1e-12)", a == b),
    );
}
