//! Ground-truth point processes: samplers and closed-form intensities/compensators.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sequence::{Event, EventSequence};
use crate::error::{Error, Result};
use crate::rng;

/// A process whose conditional intensity is known in closed form.
pub trait GroundTruth {
    fn num_types(&self) -> usize;

    /// Per-type intensity at `t`, given the events of `history` (all strictly before `t`).
    fn intensities(&self, history: &[Event], t: f64) -> Vec<f64>;

    /// `∫_a^b λ(s) ds`, given `history` (all at or before `a`) and no events in `(a, b)`.
    fn compensator(&self, history: &[Event], a: f64, b: f64) -> f64;

    fn total_intensity(&self, history: &[Event], t: f64) -> f64 {
        self.intensities(history, t).iter().sum()
    }
}

/// Exact log-likelihood `Σ log λ_{y_j}(t_j) - ∫_0^T λ(t) dt` under a known process.
pub fn oracle_loglik<P: GroundTruth + ?Sized>(process: &P, seq: &EventSequence) -> f64 {
    let mut ll = 0.0;
    let mut prev = 0.0;
    for (j, e) in seq.events.iter().enumerate() {
        let hist = &seq.events[..j];
        ll += process.intensities(hist, e.t)[e.y].ln();
        ll -= process.compensator(hist, prev, e.t);
        prev = e.t;
    }
    ll - process.compensator(&seq.events, prev, seq.horizon)
}

/// Homogeneous Poisson with one rate per type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poisson {
    pub rates: Vec<f64>,
}

impl Poisson {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() || rates.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidArgument(format!("Poisson rates must be positive, got {rates:?}")));
        }
        Ok(Self { rates })
    }

    pub fn total(&self) -> f64 {
        self.rates.iter().sum()
    }
}

impl GroundTruth for Poisson {
    fn num_types(&self) -> usize {
        self.rates.len()
    }

    fn intensities(&self, _: &[Event], _: f64) -> Vec<f64> {
        self.rates.clone()
    }

    fn compensator(&self, _: &[Event], a: f64, b: f64) -> f64 {
        self.total() * (b - a)
    }
}

/// Single-type rate `base + amplitude * sin(freq * t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineRate {
    pub base: f64,
    pub amplitude: f64,
    pub freq: f64,
}

impl Default for SineRate {
    fn default() -> Self {
        Self {
            base: 1.0,
            amplitude: 0.5,
            freq: 1.0,
        }
    }
}

impl SineRate {
    pub fn rate(&self, t: f64) -> f64 {
        self.base + self.amplitude * (self.freq * t).sin()
    }

    pub fn bound(&self) -> f64 {
        self.base + self.amplitude.abs()
    }
}

impl GroundTruth for SineRate {
    fn num_types(&self) -> usize {
        1
    }

    fn intensities(&self, _: &[Event], t: f64) -> Vec<f64> {
        vec![self.rate(t)]
    }

    fn compensator(&self, _: &[Event], a: f64, b: f64) -> f64 {
        let w = self.freq;
        self.base * (b - a) + self.amplitude / w * ((w * a).cos() - (w * b).cos())
    }
}

/// Multivariate Hawkes process with exponential kernel:
/// `λ_y(t) = μ_y + Σ_{t_j < t} A[y][y_j] exp(-β (t - t_j))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hawkes {
    pub mu: Vec<f64>,
    /// `excitation[y][k]`: jump in type-`y` intensity caused by a type-`k` event.
    pub excitation: Vec<Vec<f64>>,
    pub decay: f64,
}

impl Hawkes {
    pub fn new(mu: Vec<f64>, excitation: Vec<Vec<f64>>, decay: f64) -> Result<Self> {
        let h = Self {
            mu,
            excitation,
            decay,
        };
        h.validate()?;
        Ok(h)
    }

    /// Spectral radius of `A / β`.
    pub fn branching_ratio(&self) -> f64 {
        let n = self.mu.len();
        let flat: Vec<f64> = self.excitation.iter().flatten().map(|a| a / self.decay).collect();
        DMatrix::from_row_slice(n, n, &flat)
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.mu.len();
        if n == 0 || self.mu.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::InvalidArgument("Hawkes base rates must be positive".into()));
        }
        if self.excitation.len() != n || self.excitation.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument(format!("excitation matrix must be {n}x{n}")));
        }
        if self.excitation.iter().flatten().any(|a| !(*a >= 0.0)) {
            return Err(Error::InvalidArgument("excitation entries must be >= 0".into()));
        }
        if !(self.decay > 0.0) {
            return Err(Error::InvalidArgument("decay must be positive".into()));
        }
        let rho = self.branching_ratio();
        if rho >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "non-stationary Hawkes process: spectral radius of A/decay is {rho:.4}"
            )));
        }
        Ok(())
    }

    /// Long-run per-type rates `(I - A/β)^{-1} μ`.
    pub fn stationary_rates(&self) -> Vec<f64> {
        let n = self.mu.len();
        let flat: Vec<f64> = self.excitation.iter().flatten().map(|a| a / self.decay).collect();
        let m = DMatrix::identity(n, n) - DMatrix::from_row_slice(n, n, &flat);
        let mu = nalgebra::DVector::from_column_slice(&self.mu);
        let x = m.lu().solve(&mu).expect("stationary Hawkes matrix is invertible");
        x.iter().copied().collect()
    }

    fn excitation_at(&self, history: &[Event], t: f64) -> Vec<f64> {
        let mut ex = vec![0.0; self.mu.len()];
        for e in history {
            let k = (-self.decay * (t - e.t)).exp();
            for (y, x) in ex.iter_mut().enumerate() {
                *x += self.excitation[y][e.y] * k;
            }
        }
        ex
    }
}

impl GroundTruth for Hawkes {
    fn num_types(&self) -> usize {
        self.mu.len()
    }

    fn intensities(&self, history: &[Event], t: f64) -> Vec<f64> {
        self.excitation_at(history, t)
            .into_iter()
            .zip(&self.mu)
            .map(|(x, m)| m + x)
            .collect()
    }

    fn compensator(&self, history: &[Event], a: f64, b: f64) -> f64 {
        let base: f64 = self.mu.iter().sum::<f64>() * (b - a);
        let ex: f64 = self.excitation_at(history, a).iter().sum();
        base + ex / self.decay * (1.0 - (-self.decay * (b - a)).exp())
    }
}

fn exp_gap<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    // 1 - U lies in (0, 1], so the log is finite.
    -(1.0 - rng.random::<f64>()).ln() / rate
}

fn pick<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Homogeneous marked Poisson via exponential gaps; marks drawn proportional to rates.
pub fn sample_poisson(process: &Poisson, horizon: f64, seed: u64) -> EventSequence {
    let mut r = rng::stream(seed, &[]);
    let total = process.total();
    let mut t = 0.0;
    let mut events = Vec::new();
    loop {
        t += exp_gap(&mut r, total);
        if t > horizon {
            break;
        }
        events.push(Event::new(t, pick(&mut r, &process.rates)));
    }
    EventSequence::new(format!("poisson-{seed}"), horizon, events)
}

/// Single-type inhomogeneous Poisson by thinning against the constant bound `bound`.
pub fn sample_inhomogeneous<F: Fn(f64) -> f64>(
    rate: F,
    bound: f64,
    horizon: f64,
    seed: u64,
) -> Result<EventSequence> {
    if !(bound > 0.0) {
        return Err(Error::InvalidArgument(format!("thinning bound must be positive, got {bound}")));
    }
    let mut r = rng::stream(seed, &[]);
    let mut t = 0.0;
    let mut events = Vec::new();
    loop {
        t += exp_gap(&mut r, bound);
        if t > horizon {
            break;
        }
        let lam = rate(t);
        if lam > bound || lam < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "rate {lam} at t = {t} outside thinning bound [0, {bound}]"
            )));
        }
        if r.random::<f64>() * bound < lam {
            events.push(Event::new(t, 0));
        }
    }
    Ok(EventSequence::new(format!("inhomogeneous-{seed}"), horizon, events))
}

/// Ogata thinning for the exponential-kernel Hawkes process.
///
/// Between events the intensity only decays, so its value right after the
/// current time bounds it until the next accepted event; the bound is reset
/// after each event and each rejection.
pub fn sample_hawkes(process: &Hawkes, horizon: f64, seed: u64) -> Result<EventSequence> {
    process.validate()?;
    let mut r = rng::stream(seed, &[]);
    let n = process.mu.len();
    let mut ex = vec![0.0; n];
    let mut t = 0.0;
    let mut events = Vec::new();
    loop {
        let bound: f64 = process.mu.iter().sum::<f64>() + ex.iter().sum::<f64>();
        let w = exp_gap(&mut r, bound);
        t += w;
        if t > horizon {
            break;
        }
        let k = (-process.decay * w).exp();
        ex.iter_mut().for_each(|x| *x *= k);
        let lam: Vec<f64> = process.mu.iter().zip(&ex).map(|(m, x)| m + x).collect();
        let total: f64 = lam.iter().sum();
        if r.random::<f64>() * bound <= total {
            let y = pick(&mut r, &lam);
            events.push(Event::new(t, y));
            for (row, x) in process.excitation.iter().zip(ex.iter_mut()) {
                *x += row[y];
            }
        }
    }
    Ok(EventSequence::new(format!("hawkes-{seed}"), horizon, events))
}

/// Generator choice, serializable so datasets can echo how they were made.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process", rename_all = "lowercase")]
pub enum Process {
    Poisson(Poisson),
    Sine(SineRate),
    Hawkes(Hawkes),
}

impl Process {
    pub fn sample(&self, horizon: f64, seed: u64) -> Result<EventSequence> {
        match self {
            Process::Poisson(p) => Ok(sample_poisson(p, horizon, seed)),
            Process::Sine(s) => {
                let mut seq = sample_inhomogeneous(|t| s.rate(t), s.bound(), horizon, seed)?;
                seq.id = format!("sine-{seed}");
                Ok(seq)
            }
            Process::Hawkes(h) => sample_hawkes(h, horizon, seed),
        }
    }

    /// `count` sequences with seeds derived from `seed` by splitmix; ids are `0..count`.
    pub fn sample_many(&self, horizon: f64, count: usize, seed: u64) -> Result<Vec<EventSequence>> {
        (0..count)
            .map(|i| {
                let mut s = self.sample(horizon, rng::derive_seed(seed, &[i as u64]))?;
                s.id = i.to_string();
                Ok(s)
            })
            .collect()
    }

    pub fn as_ground_truth(&self) -> &dyn GroundTruth {
        match self {
            Process::Poisson(p) => p,
            Process::Sine(s) => s,
            Process::Hawkes(h) => h,
        }
    }
}
