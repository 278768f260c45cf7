//! Central finite-difference check of backward against perturbed forwards.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Var};
use super::params::{ParamId, ParamStore};
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub h: f64,
    pub tol: f64,
    /// Upper bound on checked coordinates; `None` checks all of them.
    pub max_coords: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            h: 1e-6,
            tol: 1e-5,
            max_coords: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParamCheck {
    pub name: String,
    pub coords_checked: usize,
    pub max_rel_err: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub max_rel_err: f64,
    pub tol: f64,
    pub coords_checked: usize,
    /// Two evaluations at the unperturbed point disagreed (e.g. dropout left on).
    pub nondeterministic: bool,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        !self.nondeterministic && self.max_rel_err < self.tol
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Compare backward gradients of `loss_fn` with central differences.
///
/// Every evaluation runs on a fresh graph with a distinct dropout seed, so a
/// closure that samples dropout masks shows up as non-deterministic.
pub fn grad_check<F>(store: &ParamStore, loss_fn: F, cfg: &GradCheckConfig) -> Result<GradCheckReport>
where
    F: for<'a> Fn(&mut Graph<'a>) -> Result<Var>,
{
    let mut seed = 0u64;
    let mut eval = |s: &ParamStore| -> Result<f64> {
        seed += 1;
        let mut g = Graph::with_seed(s, seed);
        let l = loss_fn(&mut g)?;
        Ok(g.value(l).item())
    };

    let mut g = Graph::with_seed(store, 0);
    let loss = loss_fn(&mut g)?;
    let base = g.value(loss).item();
    let grads = g.backward(loss)?;
    drop(g);

    let again = eval(store)?;
    let nondeterministic = again.to_bits() != base.to_bits();

    let mut coords: Vec<(ParamId, usize)> = store
        .ids()
        .flat_map(|id| (0..store.value(id).numel()).map(move |i| (id, i)))
        .collect();
    if let Some(max) = cfg.max_coords {
        if max < coords.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut picked: Vec<usize> = sample(&mut rng, coords.len(), max).into_vec();
            picked.sort_unstable();
            coords = picked.into_iter().map(|i| coords[i]).collect();
        }
    }

    let mut work = store.clone();
    let mut per_param: Vec<Option<ParamCheck>> = vec![None; store.len()];
    let mut max_rel_err: f64 = 0.0;
    for &(id, i) in &coords {
        let x0 = work.value(id).data()[i];
        work.value_mut(id).data_mut()[i] = x0 + cfg.h;
        let fp = eval(&work)?;
        work.value_mut(id).data_mut()[i] = x0 - cfg.h;
        let fm = eval(&work)?;
        work.value_mut(id).data_mut()[i] = x0;
        let numeric = (fp - fm) / (2.0 * cfg.h);
        let analytic = grads.get(id).map_or(0.0, |t| t.data()[i]);
        let err = rel_err(numeric, analytic);
        max_rel_err = max_rel_err.max(err);
        let entry = per_param[id.index()].get_or_insert_with(|| ParamCheck {
            name: store.name(id).to_string(),
            coords_checked: 0,
            max_rel_err: 0.0,
        });
        entry.coords_checked += 1;
        entry.max_rel_err = entry.max_rel_err.max(err);
    }

    Ok(GradCheckReport {
        params: per_param.into_iter().flatten().collect(),
        max_rel_err,
        tol: cfg.tol,
        coords_checked: coords.len(),
        nondeterministic,
    })
}
