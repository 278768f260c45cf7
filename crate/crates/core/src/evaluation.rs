//! Metrics, time-rescaling goodness of fit, attention export and complexity counts.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{EventSequence, GroundTruth};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Rgn};
use crate::objectives::{self, trapezoid, Compensator};

pub const DEFAULT_QUADRATURE: usize = 100;

/// Rescaled inter-arrival times `z_j = ∫_{t_{j-1}}^{t_j} λ(t) dt`, one per event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaledInterarrivals {
    pub z: Vec<f64>,
    /// Trapezoid subintervals per interval; `None` for a closed-form compensator.
    pub quadrature_steps: Option<usize>,
}

/// Rescale with the model's own intensity (trapezoid, `k` subintervals).
pub fn rescale(model: &Rgn, seq: &EventSequence, k: usize) -> Result<RescaledInterarrivals> {
    let out = model.forward(seq)?;
    let mut z = objectives::trapezoid_compensators(model, &out, seq, k)?;
    z.truncate(seq.len());
    Ok(RescaledInterarrivals {
        z,
        quadrature_steps: Some(k),
    })
}

/// Rescale with a known intensity by the trapezoid rule.
pub fn rescale_truth(process: &dyn GroundTruth, seq: &EventSequence, k: usize) -> Result<RescaledInterarrivals> {
    let mut prev = 0.0;
    let mut z = Vec::with_capacity(seq.len());
    for (i, e) in seq.events.iter().enumerate() {
        let hist = &seq.events[..i];
        z.push(trapezoid(|t| Ok(process.total_intensity(hist, t)), prev, e.t, k)?);
        prev = e.t;
    }
    Ok(RescaledInterarrivals {
        z,
        quadrature_steps: Some(k),
    })
}

/// Rescale with a known process's closed-form compensator.
pub fn rescale_exact(process: &dyn GroundTruth, seq: &EventSequence) -> RescaledInterarrivals {
    let mut prev = 0.0;
    let z = seq
        .events
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let z = process.compensator(&seq.events[..i], prev, e.t);
            prev = e.t;
            z
        })
        .collect();
    RescaledInterarrivals {
        z,
        quadrature_steps: None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub n: usize,
    /// `sup |F̂(z) - (1 - e^{-z})|`.
    pub ks_statistic: f64,
    pub critical_5: f64,
    pub critical_1: f64,
    pub pass_5: bool,
    pub pass_1: bool,
    /// Quantiles (min, 25%, median, 75%, max) of per-sequence statistics, when computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_sequence_quantiles: Option<[f64; 5]>,
    /// `(model_cdf, empirical_cdf)` sorted by model CDF.
    #[serde(skip)]
    pub pp: Vec<(f64, f64)>,
}

/// One-sample Kolmogorov-Smirnov test of `z` against Exp(1).
pub fn ks_exp1(z: &[f64]) -> Result<GofReport> {
    if z.is_empty() {
        return Err(Error::InvalidArgument("KS test needs at least one value".into()));
    }
    if z.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidArgument("rescaled values must be finite and >= 0".into()));
    }
    let mut s = z.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    let mut pp = Vec::with_capacity(n);
    for (i, &x) in s.iter().enumerate() {
        let f = -(-x).exp_m1();
        let hi = (i + 1) as f64 / nf;
        let lo = i as f64 / nf;
        d = d.max(hi - f).max(f - lo);
        pp.push((f, hi));
    }
    let critical_5 = 1.358 / nf.sqrt();
    let critical_1 = 1.628 / nf.sqrt();
    Ok(GofReport {
        n,
        ks_statistic: d,
        critical_5,
        critical_1,
        pass_5: d < critical_5,
        pass_1: d < critical_1,
        per_sequence_quantiles: None,
        pp,
    })
}

fn quantiles(mut v: Vec<f64>) -> Option<[f64; 5]> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
    Some([q(0.0), q(0.25), q(0.5), q(0.75), q(1.0)])
}

/// Pooled KS test over all sequences, plus per-sequence statistic quantiles.
pub fn goodness_of_fit(model: &Rgn, seqs: &[EventSequence], k: usize) -> Result<GofReport> {
    let per: Vec<Vec<f64>> = seqs
        .par_iter()
        .map(|s| rescale(model, s, k).map(|r| r.z))
        .collect::<Result<_>>()?;
    let pooled: Vec<f64> = per.iter().flatten().copied().collect();
    let mut report = ks_exp1(&pooled)?;
    let per_d: Vec<f64> = per
        .iter()
        .filter(|z| !z.is_empty())
        .map(|z| ks_exp1(z).map(|r| r.ks_statistic))
        .collect::<Result<_>>()?;
    report.per_sequence_quantiles = quantiles(per_d);
    Ok(report)
}

pub fn write_pp_csv(report: &GofReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["model_cdf", "empirical_cdf"])?;
    for (m, e) in &report.pp {
        w.write_record([m.to_string(), e.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sequences: usize,
    pub events: usize,
    /// Next-event prediction pairs (`Σ (L_i - 1)`).
    pub pairs: usize,
    pub log_likelihood: f64,
    pub nll_per_event: f64,
    pub ll_per_sequence: f64,
    pub type_accuracy: f64,
    pub time_rmse: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct SeqStats {
    ll: f64,
    events: usize,
    pairs: usize,
    correct: usize,
    sq_err: f64,
}

fn seq_stats(model: &Rgn, seq: &EventSequence, k: usize) -> Result<SeqStats> {
    let out = model.forward(seq)?;
    let ll = objectives::log_likelihood(model, &out, seq, &Compensator::Trapezoid(k))?;
    let mut st = SeqStats {
        ll,
        events: seq.len(),
        ..SeqStats::default()
    };
    for (o, e) in out.iter().zip(seq.events.iter().skip(1)) {
        st.pairs += 1;
        st.correct += usize::from(o.predicted_type() == e.y);
        st.sq_err += (e.t - o.t_hat).powi(2);
    }
    Ok(st)
}

/// Per-event NLL (trapezoid compensator), next-type accuracy and next-time RMSE, in eval mode.
/// Sequences are reduced in sorted-id order so the result does not depend on file order.
pub fn metrics(model: &Rgn, seqs: &[EventSequence], k: usize) -> Result<Metrics> {
    let stats: Vec<(String, SeqStats)> = seqs
        .par_iter()
        .map(|s| seq_stats(model, s, k).map(|st| (s.id.clone(), st)))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..stats.len()).collect();
    order.sort_by(|&a, &b| {
        stats[a]
            .0
            .cmp(&stats[b].0)
            .then(stats[a].1.ll.total_cmp(&stats[b].1.ll))
    });
    let mut t = SeqStats::default();
    for i in order {
        let s = &stats[i].1;
        t.ll += s.ll;
        t.events += s.events;
        t.pairs += s.pairs;
        t.correct += s.correct;
        t.sq_err += s.sq_err;
    }
    let ratio = |a: f64, b: usize| if b == 0 { f64::NAN } else { a / b as f64 };
    Ok(Metrics {
        sequences: seqs.len(),
        events: t.events,
        pairs: t.pairs,
        log_likelihood: t.ll,
        nll_per_event: ratio(-t.ll, t.events),
        ll_per_sequence: ratio(t.ll, seqs.len()),
        type_accuracy: ratio(t.correct as f64, t.pairs),
        time_rmse: ratio(t.sq_err, t.pairs).sqrt(),
    })
}

/// Write `event_index, layer, head, receiver, sender, weight` rows; returns the row count.
pub fn attention_dump(model: &Rgn, seq: &EventSequence, path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    let out = model.forward(seq)?;
    let heads = model.config().num_heads;
    let y = model.num_types();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["event_index", "layer", "head", "receiver", "sender", "weight"])?;
    let mut rows = 0;
    for (i, o) in out.iter().enumerate() {
        for (lh, a) in o.attention.iter().enumerate() {
            for r in 0..y {
                for s in 0..y {
                    w.write_record([
                        i.to_string(),
                        (lh / heads).to_string(),
                        (lh % heads).to_string(),
                        r.to_string(),
                        s.to_string(),
                        a.data()[r * y + s].to_string(),
                    ])?;
                    rows += 1;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(rows)
}

/// Operation counts for a sequence of `seq_len` events.
///
/// Attention scores: one stored score per directed edge (self-loops included),
/// head and layer, per event. FLOPs count a multiply-add as 2 and elementwise
/// ops as 1 per element:
///
/// * LSTM: `2·d·4d·2 + 14·d`
/// * per layer: layer norm `5·Y·d`; per head projection `2·Y·d·d_e` (twice if untied),
///   scores `4·Y·d_e + 4·Y²`, softmax `3·Y²`, aggregation `2·Y²·d_e`;
///   node update `2·Y·N_h·d_e·d + 2·Y·d`
/// * global update `2·Y·d·d + 2·d`; heads `2·d·(2Y + 1) + Y + 2`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub num_types: usize,
    pub num_heads: usize,
    pub num_gat_layers: usize,
    pub seq_len: usize,
    pub attention_scores_per_event: usize,
    pub attention_scores: usize,
    pub flops_per_event: u64,
    pub flops: u64,
}

pub fn complexity_report(cfg: &ModelConfig, seq_len: usize) -> ComplexityReport {
    let y = cfg.num_types as u64;
    let d = cfg.d_in as u64;
    let de = cfg.d_e as u64;
    let h = cfg.num_heads as u64;
    let lstm = 2 * d * 4 * d * 2 + 14 * d;
    let proj = if cfg.tie_edge_projections { 1 } else { 2 };
    let head = proj * 2 * y * d * de + 4 * y * de + 4 * y * y + 3 * y * y + 2 * y * y * de;
    let layer = if h == 0 { 0 } else { 5 * y * d + h * head + 2 * y * h * de * d + 2 * y * d };
    let layers = if h == 0 { 0 } else { cfg.num_gat_layers as u64 * layer };
    let global = 2 * y * d * d + 2 * d;
    let heads = 2 * d * (2 * y + 1) + y + 2;
    let per_event = lstm + layers + global + heads;
    let scores = cfg.attention_scores_per_event();
    ComplexityReport {
        num_types: cfg.num_types,
        num_heads: cfg.num_heads,
        num_gat_layers: cfg.num_gat_layers,
        seq_len,
        attention_scores_per_event: scores,
        attention_scores: scores * seq_len,
        flops_per_event: per_event,
        flops: per_event * seq_len as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{sample_poisson, Event, Poisson, SineRate};

    #[test]
    fn ks_hand_values() {
        let r = ks_exp1(&[2f64.ln()]).unwrap();
        assert!((r.ks_statistic - 0.5).abs() < 1e-15);
        let r = ks_exp1(&[0.0; 7]).unwrap();
        assert_eq!(r.ks_statistic, 1.0);
        let n = 1000;
        let z: Vec<f64> = (1..=n).map(|i| -(1.0 - (i as f64 - 0.5) / n as f64).ln()).collect();
        let r = ks_exp1(&z).unwrap();
        assert!(r.ks_statistic <= 0.5 / n as f64 + 1e-12);
        assert!(r.pp.windows(2).all(|w| w[0].0 <= w[1].0));
        assert!((r.critical_5 - 1.358 / (n as f64).sqrt()).abs() < 1e-15);
        assert!(ks_exp1(&[]).is_err());
    }

    #[test]
    fn constant_rate_rescaling() {
        let p = Poisson::new(vec![0.7]).unwrap();
        let s = sample_poisson(&p, 30.0, 3);
        let exact = rescale_exact(&p, &s);
        let quad = rescale_truth(&p, &s, DEFAULT_QUADRATURE).unwrap();
        let mut prev = 0.0;
        for ((e, ze), zq) in s.events.iter().zip(&exact.z).zip(&quad.z) {
            assert_eq!(*ze, 0.7 * (e.t - prev));
            assert!((zq - ze).abs() <= 1e-12 * ze.max(1.0));
            prev = e.t;
        }
    }

    #[test]
    fn linear_rate_quadrature() {
        let z = trapezoid(|t| Ok(t), 0.0, 1.0, 100).unwrap();
        assert!((z - 0.5).abs() < 1e-12);
        let q = trapezoid(|t| Ok(t * t), 0.0, 1.0, 100).unwrap();
        assert!((q - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn true_poisson_rescaling_has_unit_mean() {
        let p = Poisson::new(vec![1.3]).unwrap();
        let s = sample_poisson(&p, 2000.0, 8);
        let z = rescale_truth(&p, &s, DEFAULT_QUADRATURE).unwrap().z;
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        assert!((mean - 1.0).abs() < 4.0 / (z.len() as f64).sqrt());
        let sine = SineRate::default();
        let s = crate::datagen::Process::Sine(sine.clone()).sample(500.0, 2).unwrap();
        let r = ks_exp1(&rescale_truth(&sine, &s, DEFAULT_QUADRATURE).unwrap().z).unwrap();
        assert!(r.pass_1);
    }

    #[test]
    fn complexity_counts() {
        let mut c = ModelConfig::new(22, 32, 16, 16);
        c.num_gat_layers = 2;
        let r = complexity_report(&c, 72);
        assert_eq!(r.attention_scores, 1_115_136);
        let r2 = complexity_report(&c, 144);
        assert_eq!(r2.attention_scores / 144, r.attention_scores / 72);
        assert_eq!(r2.flops, 2 * r.flops);
        let one = complexity_report(&ModelConfig::new(1, 8, 4, 3), 10);
        assert_eq!(one.attention_scores, 3 * 2 * 10);
    }

    #[test]
    fn metrics_perfect_and_order_invariant() {
        let m = Rgn::new(ModelConfig::new(2, 4, 2, 1), 0).unwrap();
        let seqs: Vec<EventSequence> = (0..6)
            .map(|i| {
                EventSequence::new(
                    i.to_string(),
                    5.0,
                    (0..4).map(|j| Event::new(0.5 + j as f64 + 0.1 * i as f64, (i + j) % 2)).collect(),
                )
            })
            .collect();
        let a = metrics(&m, &seqs, 50).unwrap();
        let mut rev = seqs.clone();
        rev.reverse();
        let b = metrics(&m, &rev, 50).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.pairs, 18);
        assert!(a.type_accuracy >= 0.0 && a.type_accuracy <= 1.0);
    }

    #[test]
    fn attention_dump_rows() {
        let m = Rgn::new(ModelConfig::new(3, 4, 2, 2), 0).unwrap();
        let s = EventSequence::new("a", 4.0, vec![Event::new(1.0, 0), Event::new(2.0, 2), Event::new(3.0, 1)]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("att.csv");
        let rows = attention_dump(&m, &s, &p).unwrap();
        assert_eq!(rows, 3 * 2 * 2 * 9);
        let mut r = csv::Reader::from_path(&p).unwrap();
        let mut sums = std::collections::BTreeMap::new();
        for rec in r.records() {
            let rec = rec.unwrap();
            let key: Vec<usize> = (0..4).map(|i| rec[i].parse().unwrap()).collect();
            *sums.entry(key).or_insert(0.0) += rec[5].parse::<f64>().unwrap();
        }
        assert!(sums.values().all(|s| (s - 1.0).abs() < 1e-9));
    }
}
