//! Log-likelihood with a Monte-Carlo compensator, next-type cross-entropy
//! and next-time squared error.
//!
//! Interval `j` of a sequence is `(t_{j-1}, t_j]` with `t_0 = 0`, plus the
//! trailing `(t_L, T]`. Interval `j` and the event term of event `j` use the
//! state anchored at `t_{j-1}`; the first uses the initial state, whose
//! intensity pre-activations are zero.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor, Var, LOG_FLOOR};
use crate::datagen::EventSequence;
use crate::error::{Error, Result};
use crate::model::{NodeVars, Rgn, StepOutput, StepVars};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    /// Uniform draws per inter-event interval.
    pub samples: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { samples: 10 }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("mc samples must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub beta_type: f64,
    pub beta_time: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            beta_type: 1.0,
            beta_time: 100.0,
        }
    }
}

/// Loss parts, summed over whatever span they were computed on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Negative log-likelihood.
    pub nll: f64,
    pub type_loss: f64,
    pub time_loss: f64,
    pub total: f64,
    /// Events whose log-intensity term is included.
    pub events: usize,
    /// Next-event prediction pairs included in the type and time terms.
    pub pairs: usize,
}

impl LossBreakdown {
    pub fn new(nll: f64, type_loss: f64, time_loss: f64, events: usize, pairs: usize, w: &LossWeights) -> Self {
        Self {
            nll,
            type_loss,
            time_loss,
            total: combined_loss(nll, type_loss, time_loss, w),
            events,
            pairs,
        }
    }

    pub fn merge(&mut self, other: &LossBreakdown) {
        self.nll += other.nll;
        self.type_loss += other.type_loss;
        self.time_loss += other.time_loss;
        self.total += other.total;
        self.events += other.events;
        self.pairs += other.pairs;
    }

    pub fn is_finite(&self) -> bool {
        self.nll.is_finite() && self.type_loss.is_finite() && self.time_loss.is_finite() && self.total.is_finite()
    }
}

pub fn combined_loss(nll: f64, type_loss: f64, time_loss: f64, w: &LossWeights) -> f64 {
    nll + w.beta_type * type_loss + w.beta_time * time_loss
}

pub fn draw_taus<R: Rng>(rng: &mut R, a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|_| a + (b - a) * rng.random::<f64>()).collect()
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if !(b >= a) {
        return Err(Error::InvalidArgument(format!("interval ({a}, {b}] is decreasing")));
    }
    Ok(())
}

fn check_outputs(outputs: &[StepOutput], seq: &EventSequence) -> Result<()> {
    if outputs.len() != seq.len() {
        return Err(Error::InvalidArgument(format!(
            "{} step outputs for a sequence of {} events",
            outputs.len(),
            seq.len()
        )));
    }
    Ok(())
}

/// `(pre-activations, anchor time)` for each interval of the sequence.
fn anchors<'a>(model: &Rgn, outputs: &'a [StepOutput]) -> Vec<(std::borrow::Cow<'a, [f64]>, f64)> {
    let mut v = Vec::with_capacity(outputs.len() + 1);
    v.push((std::borrow::Cow::Owned(vec![0.0; model.num_types()]), 0.0));
    v.extend(outputs.iter().map(|o| (std::borrow::Cow::Borrowed(o.pre.as_slice()), o.anchor())));
    v
}

/// Composite trapezoid rule with `k` subintervals.
pub fn trapezoid<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64, k: usize) -> Result<f64> {
    check_interval(a, b)?;
    if b == a {
        return Ok(0.0);
    }
    let k = k.max(1);
    let h = (b - a) / k as f64;
    let mut s = 0.5 * (f(a)? + f(b)?);
    for i in 1..k {
        s += f(a + i as f64 * h)?;
    }
    Ok(s * h)
}

/// Per-interval compensators by the trapezoid rule (`L + 1` values).
pub fn trapezoid_compensators(model: &Rgn, outputs: &[StepOutput], seq: &EventSequence, k: usize) -> Result<Vec<f64>> {
    check_outputs(outputs, seq)?;
    anchors(model, outputs)
        .iter()
        .zip(seq.intervals())
        .map(|((pre, anchor), (a, b))| trapezoid(|t| model.total_intensity(pre, *anchor, t), a, b, k))
        .collect()
}

/// `Λ̂ = Σ_j (b_j - a_j) / N Σ_k λ(τ_k)`, `τ_k ~ U(a_j, b_j)`, evaluated on plain values.
/// Draws intervals in order, matching [`mc_compensator`].
pub fn mc_estimate<R: Rng>(model: &Rgn, outputs: &[StepOutput], seq: &EventSequence, samples: usize, rng: &mut R) -> Result<f64> {
    check_outputs(outputs, seq)?;
    let mut total = 0.0;
    for ((pre, anchor), (a, b)) in anchors(model, outputs).iter().zip(seq.intervals()) {
        check_interval(a, b)?;
        let mut s = 0.0;
        for tau in draw_taus(rng, a, b, samples) {
            s += model.total_intensity(pre, *anchor, tau)?;
        }
        total += (b - a) * s / samples as f64;
    }
    Ok(total)
}

pub enum Compensator {
    Trapezoid(usize),
    MonteCarlo { samples: usize, seed: u64 },
}

/// `ℓ = Σ_j log λ_{y_j}(t_j) - Λ` on plain values; log terms are clamped at [`LOG_FLOOR`].
pub fn log_likelihood(model: &Rgn, outputs: &[StepOutput], seq: &EventSequence, comp: &Compensator) -> Result<f64> {
    check_outputs(outputs, seq)?;
    let an = anchors(model, outputs);
    let mut ll = 0.0;
    for (e, (pre, anchor)) in seq.events.iter().zip(&an) {
        ll += model.intensity(pre, *anchor, e.t)?[e.y].ln().max(LOG_FLOOR);
    }
    let lambda = match comp {
        Compensator::Trapezoid(k) => trapezoid_compensators(model, outputs, seq, *k)?.iter().sum(),
        Compensator::MonteCarlo { samples, seed } => {
            mc_estimate(model, outputs, seq, *samples, &mut crate::rng::stream(*seed, &[]))?
        }
    };
    Ok(ll - lambda)
}

fn log_softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

/// `-Σ_{j>=2} log softmax(logits_{j-1})[y_j]`.
pub fn type_loss(outputs: &[StepOutput], seq: &EventSequence) -> f64 {
    outputs
        .iter()
        .zip(seq.events.iter().skip(1))
        .map(|(o, e)| -log_softmax(&o.logits)[e.y])
        .sum()
}

/// `Σ_{j>=2} (t_j - t̂_j)^2` with `t̂_j` from step `j - 1`.
pub fn time_loss(outputs: &[StepOutput], seq: &EventSequence) -> f64 {
    outputs
        .iter()
        .zip(seq.events.iter().skip(1))
        .map(|(o, e)| (e.t - o.t_hat).powi(2))
        .sum()
}

/// Compensator of one interval and, optionally, `log λ_y(t)` at its right end,
/// from a single `[N (+1), Y]` intensity evaluation.
pub fn interval_terms<R: Rng>(
    g: &mut Graph<'_>,
    model: &Rgn,
    pre: Var,
    anchor: f64,
    (a, b): (f64, f64),
    event_type: Option<usize>,
    samples: usize,
    rng: &mut R,
) -> Result<(Var, Option<Var>)> {
    check_interval(a, b)?;
    let mut times = draw_taus(rng, a, b, samples);
    if event_type.is_some() {
        times.push(b);
    }
    let lam = model.intensity_var(g, pre, anchor, &times)?;
    let draws = if event_type.is_some() {
        g.slice(lam, 0, 0, samples)?
    } else {
        lam
    };
    let s = g.sum(draws);
    let comp = g.scale(s, (b - a) / samples as f64);
    let log_term = match event_type {
        Some(y) => {
            let row = g.slice(lam, 0, samples, 1)?;
            let cell = g.slice(row, 1, y, 1)?;
            let l = g.log(cell);
            Some(g.reshape(l, &[])?)
        }
        None => None,
    };
    Ok((comp, log_term))
}

/// Differentiable `Λ̂_MC` over a whole sequence. `pres[j]` and `anchors[j]` belong to
/// step `j`; the initial interval uses zero pre-activations.
pub fn mc_compensator<R: Rng>(
    g: &mut Graph<'_>,
    model: &Rgn,
    steps: &[StepVars],
    seq: &EventSequence,
    samples: usize,
    rng: &mut R,
) -> Result<Var> {
    if steps.len() != seq.len() {
        return Err(Error::InvalidArgument(format!(
            "{} steps for a sequence of {} events",
            steps.len(),
            seq.len()
        )));
    }
    let init = g.constant(Tensor::zeros(&[1, model.num_types()]));
    let mut total: Option<Var> = None;
    let intervals = seq.intervals();
    for (j, iv) in intervals.into_iter().enumerate() {
        let (pre, anchor) = if j == 0 { (init, 0.0) } else { (steps[j - 1].pre, steps[j - 1].anchor) };
        let (c, _) = interval_terms(g, model, pre, anchor, iv, None, samples, rng)?;
        total = Some(match total {
            Some(t) => g.add(t, c)?,
            None => c,
        });
    }
    Ok(total.expect("at least one interval"))
}

/// Graph result of [`chunk_loss`].
pub struct ChunkLoss {
    pub total: Var,
    pub parts: LossBreakdown,
    pub state: NodeVars,
    pub steps: Vec<StepVars>,
}

fn add_opt(g: &mut Graph<'_>, acc: Option<Var>, x: Var) -> Result<Option<Var>> {
    Ok(Some(match acc {
        Some(a) => g.add(a, x)?,
        None => x,
    }))
}

/// Loss terms owned by events `range` of `seq`, stepping from `state`.
///
/// Event `i` owns the interval after it, the log-intensity of event `i + 1`
/// and the next-type / next-time terms for event `i + 1`. The chunk starting
/// at 0 also owns the first interval and the first event's log-intensity.
/// Running one chunk over the whole sequence gives the full loss.
#[allow(clippy::too_many_arguments)]
pub fn chunk_loss<R: Rng>(
    g: &mut Graph<'_>,
    model: &Rgn,
    seq: &EventSequence,
    range: Range<usize>,
    state: &NodeVars,
    weights: &LossWeights,
    samples: usize,
    rng: &mut R,
    train: bool,
) -> Result<ChunkLoss> {
    let ev = &seq.events;
    let interval = |i: usize| -> (f64, f64) {
        let a = if i == 0 { 0.0 } else { ev[i - 1].t };
        let b = if i < ev.len() { ev[i].t } else { seq.horizon };
        (a, b)
    };
    let mut nll: Option<Var> = None;
    let mut ty: Option<Var> = None;
    let mut tm: Option<Var> = None;
    let mut events = 0;
    let mut pairs = 0;

    if range.start == 0 {
        let init = g.constant(Tensor::zeros(&[1, model.num_types()]));
        let (c, l) = interval_terms(g, model, init, 0.0, interval(0), ev.first().map(|e| e.y), samples, rng)?;
        nll = add_opt(g, nll, c)?;
        if let Some(l) = l {
            let neg = g.scale(l, -1.0);
            nll = add_opt(g, nll, neg)?;
            events += 1;
        }
    }

    let mut vars = state.clone();
    let mut steps = Vec::with_capacity(range.len());
    for i in range {
        let e = ev[i];
        let prev = if i == 0 { 0.0 } else { ev[i - 1].t };
        let (next, s) = model.step(g, &vars, e.t, e.y, prev, train)?;
        vars = next;
        let following = ev.get(i + 1);
        let (c, l) = interval_terms(g, model, s.pre, s.anchor, interval(i + 1), following.map(|f| f.y), samples, rng)?;
        nll = add_opt(g, nll, c)?;
        if let (Some(l), Some(f)) = (l, following) {
            let neg = g.scale(l, -1.0);
            nll = add_opt(g, nll, neg)?;
            events += 1;

            let ls = g.log_softmax(s.logits, 1)?;
            let pick = g.slice(ls, 1, f.y, 1)?;
            let pick = g.reshape(pick, &[])?;
            let ce = g.scale(pick, -1.0);
            ty = add_opt(g, ty, ce)?;

            let target = g.constant(Tensor::full(&[1, 1], f.t));
            let se = g.l2_diff(s.t_hat, target)?;
            tm = add_opt(g, tm, se)?;
            pairs += 1;
        }
        steps.push(s);
    }

    let zero = |g: &mut Graph<'_>| g.constant(Tensor::scalar(0.0));
    let nll = nll.unwrap_or_else(|| zero(g));
    let ty = ty.unwrap_or_else(|| zero(g));
    let tm = tm.unwrap_or_else(|| zero(g));
    let wty = g.scale(ty, weights.beta_type);
    let wtm = g.scale(tm, weights.beta_time);
    let total = g.add(nll, wty)?;
    let total = g.add(total, wtm)?;
    let parts = LossBreakdown {
        nll: g.value(nll).item(),
        type_loss: g.value(ty).item(),
        time_loss: g.value(tm).item(),
        total: g.value(total).item(),
        events,
        pairs,
    };
    Ok(ChunkLoss {
        total,
        parts,
        state: vars,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check, GradCheckConfig, ParamStore};
    use crate::datagen::Event;
    use crate::model::ModelConfig;
    use crate::rng;

    fn constant_model(num_types: usize, rate: f64) -> Rgn {
        // Zero weights make every pre-activation zero, so λ_y = softplus(β_y).
        let mut m = Rgn::zeroed(ModelConfig::new(num_types, 4, 2, 1)).unwrap();
        let b = (rate.exp() - 1.0).ln();
        let id = m.beta_id();
        m.store_mut().value_mut(id).data_mut().iter_mut().for_each(|x| *x = b);
        m
    }

    fn seq(events: &[(f64, usize)], horizon: f64) -> EventSequence {
        EventSequence::new("s", horizon, events.iter().map(|&(t, y)| Event::new(t, y)).collect())
    }

    #[test]
    fn constant_intensity_compensator_is_exact() {
        let m = constant_model(2, 0.7);
        let s = seq(&[(0.3, 0), (1.1, 1), (2.0, 0)], 3.5);
        let out = m.forward(&s).unwrap();
        for seed in 0..5 {
            let v = mc_estimate(&m, &out, &s, 10, &mut rng::stream(seed, &[])).unwrap();
            assert!((v - 1.4 * 3.5).abs() < 1e-12, "{v}");
        }
        let empty = seq(&[], 2.0);
        let v = mc_estimate(&m, &[], &empty, 3, &mut rng::stream(1, &[])).unwrap();
        assert!((v - 1.4 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn mc_mean_of_linear_integrand() {
        // Mean of N=10 draws of a U(0,1) has sd 1/sqrt(120); over 1e5 seeds the
        // standard error is ~9e-4, so 0.005 is more than 5 se.
        let n = 100_000;
        let mut r = rng::stream(5, &[]);
        let mut total = 0.0;
        for _ in 0..n {
            let taus = draw_taus(&mut r, 0.0, 1.0, 10);
            total += taus.iter().sum::<f64>() / 10.0;
        }
        assert!((total / n as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn poisson_likelihood_values() {
        let m = constant_model(1, 1.0);
        let s = seq(&[(1.0, 0)], 2.0);
        let out = m.forward(&s).unwrap();
        let ll = log_likelihood(&m, &out, &s, &Compensator::Trapezoid(10)).unwrap();
        assert!((ll + 2.0).abs() < 1e-12);

        let mu = 2.5;
        let m = constant_model(1, mu);
        let s = seq(&[(0.2, 0), (0.9, 0), (1.4, 0), (3.0, 0)], 4.0);
        let out = m.forward(&s).unwrap();
        let ll = log_likelihood(&m, &out, &s, &Compensator::MonteCarlo { samples: 4, seed: 1 }).unwrap();
        assert!((ll - (4.0 * mu.ln() - mu * 4.0)).abs() < 1e-10);
    }

    #[test]
    fn extending_horizon_never_increases_loglik() {
        let m = Rgn::new(ModelConfig::new(2, 4, 2, 1), 3).unwrap();
        let base = seq(&[(0.5, 0), (1.0, 1)], 1.5);
        let out = m.forward(&base).unwrap();
        let mut last = f64::INFINITY;
        for h in [1.5, 2.0, 3.0, 10.0] {
            let mut s = base.clone();
            s.horizon = h;
            let ll = log_likelihood(&m, &out, &s, &Compensator::Trapezoid(100)).unwrap();
            assert!(ll <= last);
            last = ll;
        }
    }

    fn outputs_with_logits(logits: Vec<Vec<f64>>, t_hats: Vec<f64>) -> Vec<StepOutput> {
        logits
            .into_iter()
            .zip(t_hats)
            .map(|(l, t)| StepOutput {
                global: crate::model::GlobalState {
                    u: vec![],
                    anchor_time: 0.0,
                    anchor_index: 0,
                },
                pre: vec![0.0; l.len()],
                logits: l,
                t_hat: t,
                attention: vec![],
            })
            .collect()
    }

    #[test]
    fn type_loss_values() {
        let s = seq(&[(1.0, 0), (2.0, 1), (3.0, 0), (4.0, 1)], 5.0);
        let out = outputs_with_logits(vec![vec![0.0, 0.0]; 4], vec![0.0; 4]);
        assert!((type_loss(&out, &s) - 3.0 * 2f64.ln()).abs() < 1e-12);

        let s3 = seq(&[(1.0, 0), (2.0, 2)], 3.0);
        let out = outputs_with_logits(vec![vec![1.0, 1.0, 1.0]; 2], vec![0.0; 2]);
        assert!((type_loss(&out, &s3) - 3f64.ln()).abs() < 1e-12);

        let out = outputs_with_logits(vec![vec![0.0, 0.0, 50.0]; 2], vec![0.0; 2]);
        assert!(type_loss(&out, &s3) < 1e-20);

        let single = seq(&[(1.0, 0)], 2.0);
        assert_eq!(type_loss(&out[..1], &single), 0.0);
    }

    #[test]
    fn time_loss_values() {
        let s = seq(&[(1.0, 0), (2.0, 0), (3.5, 0)], 4.0);
        let perfect = outputs_with_logits(vec![vec![0.0]; 3], vec![2.0, 3.5, 9.0]);
        assert_eq!(time_loss(&perfect, &s), 0.0);
        let off = outputs_with_logits(vec![vec![0.0]; 3], vec![2.3, 3.8, 0.0]);
        assert!((time_loss(&off, &s) - 2.0 * 0.09).abs() < 1e-12);
    }

    #[test]
    fn combined_loss_values() {
        let w = LossWeights::default();
        assert_eq!(combined_loss(2.0, 1.0, 0.01, &w), 4.0);
        let no_time = LossWeights {
            beta_time: 0.0,
            ..w
        };
        assert_eq!(combined_loss(2.0, 1.0, 123.0, &no_time), 3.0);
        let b = LossBreakdown::new(2.0, 1.0, 0.01, 1, 0, &w);
        assert!((b.total - (b.nll + b.type_loss + 100.0 * b.time_loss)).abs() < 1e-12);
    }

    #[test]
    fn graph_loss_matches_value_loss() {
        let m = Rgn::new(ModelConfig::new(3, 8, 4, 2), 1).unwrap();
        let s = seq(&[(0.4, 2), (0.9, 0), (1.7, 1), (2.2, 2), (3.0, 0)], 4.0);
        let out = m.forward(&s).unwrap();
        let w = LossWeights::default();

        let mut g = Graph::new(m.store());
        let st = m.init_state().attach(&mut g);
        let mut r = rng::stream(9, &[]);
        let cl = chunk_loss(&mut g, &m, &s, 0..s.len(), &st, &w, 6, &mut r, false).unwrap();

        let ll = log_likelihood(&m, &out, &s, &Compensator::MonteCarlo { samples: 6, seed: 0 }).unwrap();
        let comp_mc = mc_estimate(&m, &out, &s, 6, &mut rng::stream(0, &[])).unwrap();
        let log_terms = ll + comp_mc;
        // Re-draw with the same stream to isolate the compensator used by the graph.
        let mut r2 = rng::stream(9, &[]);
        let comp_graph = {
            let mut total = 0.0;
            let pres: Vec<(Vec<f64>, f64)> = std::iter::once((vec![0.0; 3], 0.0))
                .chain(out.iter().map(|o| (o.pre.clone(), o.anchor())))
                .collect();
            for ((pre, anchor), (a, b)) in pres.iter().zip(s.intervals()) {
                let taus = draw_taus(&mut r2, a, b, 6);
                let sum: f64 = taus.iter().map(|&t| m.total_intensity(pre, *anchor, t).unwrap()).sum();
                total += (b - a) * sum / 6.0;
            }
            total
        };
        assert!((cl.parts.nll - (comp_graph - log_terms)).abs() < 1e-10);
        assert!((cl.parts.type_loss - type_loss(&out, &s)).abs() < 1e-10);
        assert!((cl.parts.time_loss - time_loss(&out, &s)).abs() < 1e-10);
        assert_eq!(cl.parts.events, 5);
        assert_eq!(cl.parts.pairs, 4);
    }

    #[test]
    fn chunks_partition_the_full_loss() {
        let m = Rgn::new(ModelConfig::new(2, 4, 2, 2), 4).unwrap();
        let s = seq(&[(0.4, 1), (0.9, 0), (1.7, 1), (2.2, 1), (3.0, 0)], 4.0);
        let w = LossWeights::default();
        // One stream shared across the chunks draws the same τ as the full pass.
        let mut g = Graph::new(m.store());
        let st = m.init_state().attach(&mut g);
        let full = chunk_loss(&mut g, &m, &s, 0..5, &st, &w, 3, &mut rng::stream(1, &[]), false).unwrap();

        let mut parts = LossBreakdown::default();
        let mut state = m.init_state();
        let mut r = rng::stream(1, &[]);
        for range in [0..2, 2..4, 4..5] {
            let mut g = Graph::new(m.store());
            let st = state.attach(&mut g);
            let c = chunk_loss(&mut g, &m, &s, range, &st, &w, 3, &mut r, false).unwrap();
            parts.merge(&c.parts);
            state = c.state.detach(&g);
        }
        assert!((parts.total - full.parts.total).abs() < 1e-10);
        assert_eq!((parts.events, parts.pairs), (full.parts.events, full.parts.pairs));
    }

    #[test]
    fn mc_gradient_matches_finite_differences() {
        let mut m = Rgn::new(ModelConfig::new(2, 4, 2, 1), 2).unwrap();
        // Unvisited nodes are exactly zero, which puts their scores on the
        // leaky-ReLU kink unless the score bias is moved off zero.
        for l in 0..2 {
            let id = m.store().id(&format!("gat.{l}.head.0.bias")).unwrap();
            m.store_mut().value_mut(id).data_mut()[0] = 0.1;
        }
        let s = seq(&[(0.5, 0), (1.2, 1), (2.0, 0)], 2.5);
        let store: &ParamStore = m.store();
        let report = grad_check(
            store,
            |g| {
                let mut vars = m.init_state().attach(g);
                let mut steps = Vec::new();
                let mut prev = 0.0;
                for e in &s.events {
                    let (n, st) = m.step(g, &vars, e.t, e.y, prev, false)?;
                    vars = n;
                    prev = e.t;
                    steps.push(st);
                }
                mc_compensator(g, &m, &steps, &s, 5, &mut rng::stream(3, &[]))
            },
            &GradCheckConfig {
                tol: 1e-5,
                ..GradCheckConfig::default()
            },
        )
        .unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn decreasing_interval_rejected() {
        assert!(trapezoid(|t| Ok(t), 1.0, 0.5, 10).is_err());
        assert_eq!(trapezoid(|t| Ok(t), 1.0, 1.0, 10).unwrap(), 0.0);
    }
}
