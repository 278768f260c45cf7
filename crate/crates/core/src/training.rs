//! Truncated-BPTT training with ADAM, gradient clipping, early stopping and
//! best-per-metric checkpoints.
//!
//! A batch of sequences is consumed chunk by chunk: chunk `k` of every
//! sequence in the batch is run, the gradients are summed and divided by the
//! batch size, clipped, and applied in one optimizer step. Node states cross
//! chunk boundaries as plain values, so gradients stop there.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, Gradients, Graph};
use crate::checkpoint::Checkpoint;
use crate::datagen::EventSequence;
use crate::error::{Error, Result};
use crate::evaluation::{self, Metrics};
use crate::model::{argmax, NodeState, Rgn};
use crate::objectives::{chunk_loss, LossBreakdown, LossWeights, McConfig};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub tbptt_steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Global gradient-norm cap; 0 disables clipping.
    pub clip_norm: f64,
    pub beta_type: f64,
    pub beta_time: f64,
    /// Epochs without validation-NLL improvement before stopping; 0 disables.
    pub patience: usize,
    pub validate_every: usize,
    /// Trapezoid subintervals used by validation metrics.
    pub eval_quadrature: usize,
    /// Worker threads for per-sequence work; 0 uses all cores. Results do not depend on it.
    pub threads: usize,
    /// Record elapsed seconds in the metrics log (makes it run-dependent).
    pub log_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            lr: 1e-4,
            tbptt_steps: 20,
            batch_size: 16,
            seed: 0,
            clip_norm: 5.0,
            beta_type: 1.0,
            beta_time: 100.0,
            patience: 10,
            validate_every: 1,
            eval_quadrature: evaluation::DEFAULT_QUADRATURE,
            threads: 0,
            log_wall_time: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.tbptt_steps == 0 {
            return bad("tbptt_steps must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(self.clip_norm >= 0.0) {
            return bad("clip_norm must be >= 0");
        }
        if self.validate_every == 0 {
            return bad("validate_every must be >= 1");
        }
        if self.eval_quadrature == 0 {
            return bad("eval_quadrature must be >= 1");
        }
        Ok(())
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            beta_type: self.beta_type,
            beta_time: self.beta_time,
        }
    }
}

/// Number of TBPTT chunks for a sequence of `len` events; an empty sequence still has one.
pub fn num_chunks(len: usize, tbptt: usize) -> usize {
    len.div_ceil(tbptt).max(1)
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub split: String,
    pub nll_per_event: f64,
    pub type_acc: f64,
    pub time_rmse: f64,
    pub wall_seconds: Option<f64>,
}

pub fn write_metrics_csv(rows: &[MetricsRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "split", "nll_per_event", "type_acc", "time_rmse", "wall_seconds"])?;
    for r in rows {
        w.write_record([
            r.epoch.to_string(),
            r.split.clone(),
            r.nll_per_event.to_string(),
            r.type_acc.to_string(),
            r.time_rmse.to_string(),
            r.wall_seconds.map(|s| format!("{s:.3}")).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug)]
pub struct Best {
    pub epoch: usize,
    pub value: f64,
    pub checkpoint: Checkpoint,
}

#[derive(Clone, Debug, Default)]
pub struct BestCheckpoints {
    pub nll: Option<Best>,
    pub type_acc: Option<Best>,
    pub time_rmse: Option<Best>,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub history: Vec<MetricsRow>,
    pub epochs_run: usize,
    pub optimizer_steps: u64,
    pub stopped_early: bool,
    pub best: BestCheckpoints,
    /// Training loss summed per epoch.
    pub epoch_losses: Vec<LossBreakdown>,
    pub last_validation: Option<Metrics>,
}

/// Statistics of one pass over the training set.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpochStats {
    pub loss: LossBreakdown,
    pub correct: usize,
    pub optimizer_steps: u64,
    pub max_grad_norm: f64,
}

struct ChunkWork {
    grads: Gradients,
    parts: LossBreakdown,
    correct: usize,
    state: NodeState,
}

#[derive(Serialize)]
struct NanDump<'a> {
    epoch: usize,
    batch: usize,
    chunk: usize,
    sequence_ids: Vec<&'a str>,
    loss: LossBreakdown,
    grad_norm: f64,
    optimizer_steps: u64,
}

pub struct Trainer {
    pub cfg: TrainConfig,
    pub mc: McConfig,
    pub adam: AdamConfig,
    /// Directory for the diagnostic dump written on a non-finite loss.
    pub dump_dir: Option<PathBuf>,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, mc: McConfig) -> Self {
        Self {
            cfg,
            mc,
            adam: AdamConfig::default(),
            dump_dir: None,
        }
    }

    fn run_chunk(
        &self,
        model: &Rgn,
        seq: &EventSequence,
        state: &NodeState,
        path: [u64; 3],
    ) -> Result<ChunkWork> {
        let k = path[2] as usize;
        let s = self.cfg.tbptt_steps;
        let range = (k * s).min(seq.len())..((k + 1) * s).min(seq.len());
        let mut g = Graph::with_seed(model.store(), rng::derive_seed(self.cfg.seed, &[path[0], path[1], path[2], 0]));
        let mut r = rng::stream(self.cfg.seed, &[path[0], path[1], path[2], 1]);
        let vars = state.attach(&mut g);
        let w = self.cfg.weights();
        let cl = chunk_loss(&mut g, model, seq, range.clone(), &vars, &w, self.mc.samples, &mut r, true)?;
        let mut correct = 0;
        for (i, st) in range.zip(&cl.steps) {
            if let Some(next) = seq.events.get(i + 1) {
                correct += usize::from(argmax(g.value(st.logits).data()) == next.y);
            }
        }
        let state = cl.state.detach(&g);
        let grads = g.backward(cl.total)?;
        Ok(ChunkWork {
            grads,
            parts: cl.parts,
            correct,
            state,
        })
    }

    fn pool(&self) -> Result<Option<rayon::ThreadPool>> {
        if self.cfg.threads == 0 {
            return Ok(None);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.cfg.threads)
            .build()
            .map(Some)
            .map_err(|e| Error::Config(format!("thread pool: {e}")))
    }

    fn dump(&self, d: &NanDump<'_>) {
        if let Some(dir) = &self.dump_dir {
            if let Ok(text) = serde_json::to_string_pretty(d) {
                let _ = std::fs::write(dir.join("nan_dump.json"), text);
            }
        }
    }

    /// One pass over `train` in a seeded order. `epoch` starts at 1.
    pub fn train_epoch(&self, model: &mut Rgn, train: &[EventSequence], epoch: usize) -> Result<EpochStats> {
        let pool = self.pool()?;
        match &pool {
            Some(p) => p.install(|| self.train_epoch_inner(model, train, epoch)),
            None => self.train_epoch_inner(model, train, epoch),
        }
    }

    fn train_epoch_inner(&self, model: &mut Rgn, train: &[EventSequence], epoch: usize) -> Result<EpochStats> {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng::stream(self.cfg.seed, &[0xE90C, epoch as u64]));
        let mut stats = EpochStats::default();
        for (b, batch) in order.chunks(self.cfg.batch_size).enumerate() {
            let mut states: Vec<NodeState> = batch.iter().map(|_| model.init_state()).collect();
            let chunks = batch
                .iter()
                .map(|&i| num_chunks(train[i].len(), self.cfg.tbptt_steps))
                .max()
                .unwrap_or(0);
            let scale = 1.0 / batch.len() as f64;
            for k in 0..chunks {
                let active: Vec<usize> = (0..batch.len())
                    .filter(|&j| k < num_chunks(train[batch[j]].len(), self.cfg.tbptt_steps))
                    .collect();
                let m: &Rgn = model;
                let work: Vec<Result<ChunkWork>> = active
                    .par_iter()
                    .map(|&j| {
                        let i = batch[j];
                        self.run_chunk(m, &train[i], &states[j], [epoch as u64, i as u64, k as u64])
                    })
                    .collect();
                let mut parts = LossBreakdown::default();
                let store = model.store_mut();
                store.zero_grads();
                for (&j, w) in active.iter().zip(work) {
                    let w = w?;
                    store.accumulate(&w.grads, scale)?;
                    parts.merge(&w.parts);
                    stats.correct += w.correct;
                    states[j] = w.state;
                }
                let norm = if self.cfg.clip_norm > 0.0 {
                    store.clip_grad_norm(self.cfg.clip_norm)
                } else {
                    store.grad_norm()
                };
                if !parts.is_finite() || !norm.is_finite() {
                    let ids = active.iter().map(|&j| train[batch[j]].id.as_str()).collect();
                    self.dump(&NanDump {
                        epoch,
                        batch: b,
                        chunk: k,
                        sequence_ids: ids,
                        loss: parts,
                        grad_norm: norm,
                        optimizer_steps: stats.optimizer_steps,
                    });
                    return Err(Error::NonFinite(format!(
                        "loss {} / gradient norm {norm} at epoch {epoch}, batch {b}, chunk {k}",
                        parts.total
                    )));
                }
                store.adam_step(self.cfg.lr, &self.adam)?;
                stats.optimizer_steps += 1;
                stats.max_grad_norm = stats.max_grad_norm.max(norm);
                stats.loss.merge(&parts);
            }
        }
        Ok(stats)
    }

    pub fn validate_metrics(&self, model: &Rgn, val: &[EventSequence]) -> Result<Metrics> {
        let pool = self.pool()?;
        match &pool {
            Some(p) => p.install(|| evaluation::metrics(model, val, self.cfg.eval_quadrature)),
            None => evaluation::metrics(model, val, self.cfg.eval_quadrature),
        }
    }

    /// Train for up to `epochs`, validating every `validate_every` epochs.
    /// On return the model holds the parameters with the best validation NLL.
    pub fn train(&self, model: &mut Rgn, train: &[EventSequence], val: &[EventSequence]) -> Result<TrainReport> {
        self.cfg.validate()?;
        self.mc.validate()?;
        if train.is_empty() {
            return Err(Error::InvalidArgument("training set is empty".into()));
        }
        if val.is_empty() {
            return Err(Error::InvalidArgument("validation set is empty".into()));
        }
        crate::datagen::check_all(train, Some(model.num_types()))?;
        crate::datagen::check_all(val, Some(model.num_types()))?;

        let start = Instant::now();
        let wall = |s: &Instant| self.cfg.log_wall_time.then(|| s.elapsed().as_secs_f64());
        let mut report = TrainReport {
            history: Vec::new(),
            epochs_run: 0,
            optimizer_steps: 0,
            stopped_early: false,
            best: BestCheckpoints::default(),
            epoch_losses: Vec::new(),
            last_validation: None,
        };
        let mut since_best = 0;
        for epoch in 1..=self.cfg.epochs {
            let st = self.train_epoch(model, train, epoch)?;
            report.epochs_run = epoch;
            report.optimizer_steps += st.optimizer_steps;
            let ratio = |a: f64, b: usize| if b == 0 { f64::NAN } else { a / b as f64 };
            report.history.push(MetricsRow {
                epoch,
                split: "train".into(),
                nll_per_event: ratio(st.loss.nll, st.loss.events),
                type_acc: ratio(st.correct as f64, st.loss.pairs),
                time_rmse: ratio(st.loss.time_loss, st.loss.pairs).sqrt(),
                wall_seconds: wall(&start),
            });
            report.epoch_losses.push(st.loss);

            if epoch % self.cfg.validate_every != 0 && epoch != self.cfg.epochs {
                continue;
            }
            let m = self.validate_metrics(model, val)?;
            if !m.nll_per_event.is_finite() {
                return Err(Error::NonFinite(format!("validation NLL at epoch {epoch}")));
            }
            report.history.push(MetricsRow {
                epoch,
                split: "val".into(),
                nll_per_event: m.nll_per_event,
                type_acc: m.type_accuracy,
                time_rmse: m.time_rmse,
                wall_seconds: wall(&start),
            });
            let snapshot = || Checkpoint::from_model(model, &self.adam);
            let improved = report.best.nll.as_ref().is_none_or(|b| m.nll_per_event < b.value);
            if improved {
                report.best.nll = Some(Best {
                    epoch,
                    value: m.nll_per_event,
                    checkpoint: snapshot(),
                });
                since_best = 0;
            } else {
                since_best += self.cfg.validate_every;
            }
            if m.type_accuracy.is_finite() && report.best.type_acc.as_ref().is_none_or(|b| m.type_accuracy > b.value) {
                report.best.type_acc = Some(Best {
                    epoch,
                    value: m.type_accuracy,
                    checkpoint: snapshot(),
                });
            }
            if m.time_rmse.is_finite() && report.best.time_rmse.as_ref().is_none_or(|b| m.time_rmse < b.value) {
                report.best.time_rmse = Some(Best {
                    epoch,
                    value: m.time_rmse,
                    checkpoint: snapshot(),
                });
            }
            report.last_validation = Some(m);
            if self.cfg.patience > 0 && since_best >= self.cfg.patience {
                report.stopped_early = true;
                break;
            }
        }
        if let Some(b) = &report.best.nll {
            *model = b.checkpoint.to_model()?.0;
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{Event, Poisson, Process};
    use crate::model::ModelConfig;

    fn small_cfg() -> ModelConfig {
        let mut c = ModelConfig::new(2, 4, 2, 1);
        c.dropout = 0.0;
        c
    }

    fn seq_of(n: usize, id: &str) -> EventSequence {
        EventSequence::new(id, n as f64 + 1.0, (0..n).map(|i| Event::new(i as f64 + 0.5, i % 2)).collect())
    }

    #[test]
    fn chunk_counts() {
        assert_eq!(num_chunks(45, 20), 3);
        assert_eq!(num_chunks(40, 20), 2);
        assert_eq!(num_chunks(0, 20), 1);
    }

    #[test]
    fn forty_five_events_take_three_steps() {
        let mut m = Rgn::new(small_cfg(), 0).unwrap();
        let t = Trainer::new(
            TrainConfig {
                epochs: 1,
                ..TrainConfig::default()
            },
            McConfig::default(),
        );
        let st = t.train_epoch(&mut m, &[seq_of(45, "a")], 1).unwrap();
        assert_eq!(st.optimizer_steps, 3);
        assert_eq!(st.loss.events, 45);
        assert_eq!(st.loss.pairs, 44);
    }

    fn grads_for(m: &Rgn, seq: &EventSequence, tbptt: usize) -> (Vec<Gradients>, f64) {
        let t = Trainer::new(
            TrainConfig {
                tbptt_steps: tbptt,
                ..TrainConfig::default()
            },
            McConfig::default(),
        );
        let mut state = m.init_state();
        let mut out = Vec::new();
        let mut total = 0.0;
        for k in 0..num_chunks(seq.len(), tbptt) {
            let w = t.run_chunk(m, seq, &state, [1, 0, k as u64]).unwrap();
            total += w.parts.total;
            state = w.state;
            out.push(w.grads);
        }
        (out, total)
    }

    #[test]
    fn long_truncation_equals_full_bptt() {
        let m = Rgn::new(small_cfg(), 3).unwrap();
        let s = seq_of(7, "a");
        let (a, la) = grads_for(&m, &s, 7);
        let (b, lb) = grads_for(&m, &s, 50);
        assert_eq!(la, lb);
        assert_eq!(a.len(), 1);
        for ((_, x), (_, y)) in a[0].iter().zip(b[0].iter()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn truncation_cuts_gradient_to_earlier_types() {
        // Type 1 occurs only in the first chunk; its LSTM gets no gradient from the second.
        let m = Rgn::new(small_cfg(), 3).unwrap();
        let s = EventSequence::new(
            "a",
            6.0,
            vec![Event::new(0.5, 1), Event::new(1.0, 0), Event::new(2.0, 0), Event::new(3.0, 0)],
        );
        let (g, _) = grads_for(&m, &s, 2);
        let w1 = m.store().id("lstm.1.W").unwrap();
        assert!(g[0].get(w1).is_some_and(|t| t.data().iter().any(|&x| x != 0.0)));
        assert!(g[1].get(w1).is_none_or(|t| t.data().iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn same_seed_same_epoch_loss() {
        let data = Process::Poisson(Poisson::new(vec![0.6, 0.4]).unwrap()).sample_many(10.0, 12, 1).unwrap();
        let run = |threads| {
            let mut m = Rgn::new(ModelConfig::new(2, 4, 2, 2), 0).unwrap();
            let t = Trainer::new(
                TrainConfig {
                    batch_size: 4,
                    threads,
                    ..TrainConfig::default()
                },
                McConfig::default(),
            );
            t.train_epoch(&mut m, &data, 1).unwrap().loss.total
        };
        let a = run(1);
        assert_eq!(a, run(1));
        assert_eq!(a, run(3));
    }

    #[test]
    fn empty_sets_rejected() {
        let mut m = Rgn::new(small_cfg(), 0).unwrap();
        let t = Trainer::new(TrainConfig::default(), McConfig::default());
        assert!(t.train(&mut m, &[], &[seq_of(3, "v")]).is_err());
        assert!(t.train(&mut m, &[seq_of(3, "t")], &[]).is_err());
    }

    #[test]
    fn non_finite_loss_aborts_with_dump() {
        let mut m = Rgn::new(small_cfg(), 0).unwrap();
        let id = m.beta_id();
        m.store_mut().value_mut(id).data_mut()[0] = f64::NAN;
        let dir = tempfile::tempdir().unwrap();
        let mut t = Trainer::new(
            TrainConfig {
                epochs: 1,
                ..TrainConfig::default()
            },
            McConfig::default(),
        );
        t.dump_dir = Some(dir.path().to_path_buf());
        let err = t.train(&mut m, &[seq_of(4, "x")], &[seq_of(3, "v")]).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        let dump = std::fs::read_to_string(dir.path().join("nan_dump.json")).unwrap();
        assert!(dump.contains("\"x\""));
    }

    #[test]
    fn early_stopping_and_best_checkpoint() {
        let data = Process::Poisson(Poisson::new(vec![1.0]).unwrap()).sample_many(5.0, 8, 2).unwrap();
        let mut m = Rgn::new(ModelConfig::new(1, 4, 2, 1), 0).unwrap();
        let t = Trainer::new(
            TrainConfig {
                epochs: 6,
                lr: 1e-3,
                patience: 1,
                batch_size: 4,
                ..TrainConfig::default()
            },
            McConfig::default(),
        );
        let r = t.train(&mut m, &data[..6], &data[6..]).unwrap();
        assert!(r.epochs_run <= 6);
        let best = r.best.nll.as_ref().unwrap();
        let again = t.validate_metrics(&m, &data[6..]).unwrap();
        assert_eq!(again.nll_per_event, best.value);
        assert_eq!(r.history.iter().filter(|h| h.split == "val").count(), r.epochs_run);
    }
}
