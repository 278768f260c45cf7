//! The recurrent graph network: one LSTM node per event type, stacked
//! multi-head graph attention with residuals, a global readout and three heads.
//!
//! Node states `(v, c)` are written only by the LSTM of the observed type.
//! Attention outputs feed the global readout of the current step and are not
//! carried to the next event.

mod config;

pub use config::ModelConfig;

use rand::Rng;

use crate::autodiff::{softplus, Graph, ParamId, ParamStore, Tensor, Var};
use crate::embedding::embed_time;
use crate::error::{Error, Result};
use crate::rng;

/// Per-type LSTM hidden and cell states, each a `[1, d]` row.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeState {
    pub v: Vec<Tensor>,
    pub c: Vec<Tensor>,
}

impl NodeState {
    pub fn zeros(num_types: usize, d: usize) -> Self {
        Self {
            v: vec![Tensor::zeros(&[1, d]); num_types],
            c: vec![Tensor::zeros(&[1, d]); num_types],
        }
    }

    pub fn num_types(&self) -> usize {
        self.v.len()
    }

    /// Place the state on `g` as constants.
    pub fn attach(&self, g: &mut Graph<'_>) -> NodeVars {
        NodeVars {
            v: self.v.iter().map(|t| g.constant(t.clone())).collect(),
            c: self.c.iter().map(|t| g.constant(t.clone())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().chain(&self.c).all(Tensor::is_finite)
    }
}

/// Node state living on a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeVars {
    pub v: Vec<Var>,
    pub c: Vec<Var>,
}

impl NodeVars {
    /// Copy the values out, severing gradient flow to everything before.
    pub fn detach(&self, g: &Graph<'_>) -> NodeState {
        NodeState {
            v: self.v.iter().map(|&x| g.value(x).clone()).collect(),
            c: self.c.iter().map(|&x| g.value(x).clone()).collect(),
        }
    }
}

/// History embedding after event `anchor_index` at time `anchor_time`.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalState {
    pub u: Vec<f64>,
    pub anchor_time: f64,
    pub anchor_index: usize,
}

/// Graph handles produced by one step.
#[derive(Clone, Debug)]
pub struct StepVars {
    pub anchor: f64,
    pub u: Var,
    /// `[1, Y]` next-type logits.
    pub logits: Var,
    /// `[1, 1]` absolute next-time prediction.
    pub t_hat: Var,
    /// `[1, Y]` intensity pre-activations, without the per-type offset.
    pub pre: Var,
    /// `[Y, Y]` per layer then head; rows are receivers.
    pub attention: Vec<Var>,
}

/// Plain values of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub global: GlobalState,
    pub logits: Vec<f64>,
    pub t_hat: f64,
    pub pre: Vec<f64>,
    /// `[Y, Y]` per layer then head.
    pub attention: Vec<Tensor>,
}

impl StepOutput {
    pub fn anchor(&self) -> f64 {
        self.global.anchor_time
    }

    pub fn predicted_type(&self) -> usize {
        argmax(&self.logits)
    }

    /// Number of attention scores held by this output.
    pub fn stored_attention_scores(&self) -> usize {
        self.attention.iter().map(Tensor::numel).sum()
    }
}

pub(crate) fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if *v > x[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug)]
struct Lstm {
    w: ParamId,
    u: ParamId,
    b: ParamId,
}

#[derive(Clone, Debug)]
struct Head {
    w_alpha: ParamId,
    w_beta: Option<ParamId>,
    a_recv: ParamId,
    a_send: ParamId,
    bias: ParamId,
}

#[derive(Clone, Debug)]
struct Layer {
    heads: Vec<Head>,
    w_v: ParamId,
    b_v: ParamId,
}

#[derive(Clone, Debug)]
struct Ids {
    lstm: Vec<Lstm>,
    layers: Vec<Layer>,
    w_u: ParamId,
    b_u: ParamId,
    w_y: ParamId,
    b_y: ParamId,
    w_t: ParamId,
    b_t: ParamId,
    w_lambda: ParamId,
    beta: ParamId,
}

#[derive(Clone, Debug)]
pub struct Rgn {
    cfg: ModelConfig,
    store: ParamStore,
    ids: Ids,
}

impl Rgn {
    /// Weights `~ U(±1/sqrt(fan_in))`, biases zero, forget-gate bias one.
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        let mut r = rng::stream(seed, &[0x1417]);
        Self::build(cfg, |rows, _| 1.0 / (rows as f64).sqrt(), &mut r)
    }

    /// Every parameter zero, including the forget-gate bias.
    pub fn zeroed(cfg: ModelConfig) -> Result<Self> {
        let mut m = Self::build(cfg, |_, _| 0.0, &mut rng::stream(0, &[]))?;
        for id in m.store.ids().collect::<Vec<_>>() {
            m.store.value_mut(id).data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
        Ok(m)
    }

    fn build<R: Rng>(cfg: ModelConfig, bound: impl Fn(usize, usize) -> f64, r: &mut R) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.d_in;
        let de = cfg.d_e;
        let y = cfg.num_types;
        let mut store = ParamStore::new();
        let mut weight = |store: &mut ParamStore, name: String, rows: usize, cols: usize, fan_in: usize| {
            let b = bound(fan_in, cols);
            let data = (0..rows * cols)
                .map(|_| if b > 0.0 { r.random_range(-b..b) } else { 0.0 })
                .collect();
            store.register(name, Tensor::matrix(rows, cols, data)?)
        };
        let zeros = |store: &mut ParamStore, name: String, rows: usize, cols: usize| {
            store.register(name, Tensor::zeros(&[rows, cols]))
        };

        let lstm_names: Vec<String> = if cfg.shared_lstm {
            vec!["shared".into()]
        } else {
            (0..y).map(|k| k.to_string()).collect()
        };
        let mut lstm = Vec::new();
        for n in &lstm_names {
            let w = weight(&mut store, format!("lstm.{n}.W"), d, 4 * d, d)?;
            let u = weight(&mut store, format!("lstm.{n}.U"), d, 4 * d, d)?;
            let mut bias = vec![0.0; 4 * d];
            bias[..d].iter_mut().for_each(|x| *x = 1.0);
            let b = store.register(format!("lstm.{n}.b"), Tensor::row(bias))?;
            lstm.push(Lstm { w, u, b });
        }

        let mut layers = Vec::new();
        if cfg.num_heads > 0 {
            for l in 0..cfg.num_gat_layers {
                let mut heads = Vec::new();
                for h in 0..cfg.num_heads {
                    let p = format!("gat.{l}.head.{h}");
                    let w_alpha = weight(&mut store, format!("{p}.W_alpha"), d, de, d)?;
                    let w_beta = if cfg.tie_edge_projections {
                        None
                    } else {
                        Some(weight(&mut store, format!("{p}.W_beta"), d, de, d)?)
                    };
                    let a_recv = weight(&mut store, format!("{p}.a_recv"), de, 1, 2 * de)?;
                    let a_send = weight(&mut store, format!("{p}.a_send"), de, 1, 2 * de)?;
                    let bias = zeros(&mut store, format!("{p}.bias"), 1, 1)?;
                    heads.push(Head {
                        w_alpha,
                        w_beta,
                        a_recv,
                        a_send,
                        bias,
                    });
                }
                let hd = cfg.num_heads * de;
                let w_v = weight(&mut store, format!("gat.{l}.W_v"), hd, d, hd)?;
                let b_v = zeros(&mut store, format!("gat.{l}.b_v"), 1, d)?;
                layers.push(Layer { heads, w_v, b_v });
            }
        }

        let w_u = weight(&mut store, "global.W_u".into(), y * d, d, y * d)?;
        let b_u = zeros(&mut store, "global.b_u".into(), 1, d)?;
        let w_y = weight(&mut store, "head.W_y".into(), d, y, d)?;
        let b_y = zeros(&mut store, "head.b_y".into(), 1, y)?;
        let w_t = weight(&mut store, "head.W_t".into(), d, 1, d)?;
        let b_t = zeros(&mut store, "head.b_t".into(), 1, 1)?;
        let w_lambda = weight(&mut store, "head.W_lambda".into(), d, y, d)?;
        let beta = zeros(&mut store, "head.beta".into(), 1, y)?;

        Ok(Self {
            cfg,
            store,
            ids: Ids {
                lstm,
                layers,
                w_u,
                b_u,
                w_y,
                b_y,
                w_t,
                b_t,
                w_lambda,
                beta,
            },
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn num_types(&self) -> usize {
        self.cfg.num_types
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn init_state(&self) -> NodeState {
        NodeState::zeros(self.cfg.num_types, self.cfg.d_in)
    }

    /// Learnable per-type intensity offsets.
    pub fn beta(&self) -> &[f64] {
        self.store.value(self.ids.beta).data()
    }

    pub fn beta_id(&self) -> ParamId {
        self.ids.beta
    }

    fn lstm_for(&self, y: usize) -> &Lstm {
        if self.cfg.shared_lstm {
            &self.ids.lstm[0]
        } else {
            &self.ids.lstm[y]
        }
    }

    /// One LSTM cell update for type `y`, followed by layer norm on the hidden output.
    /// Returns `(v, c)`.
    pub fn node_lstm_step(&self, g: &mut Graph<'_>, x: Var, v_prev: Var, c_prev: Var, y: usize) -> Result<(Var, Var)> {
        let (h, c) = self.lstm_cell(g, x, v_prev, c_prev, y)?;
        Ok((g.layer_norm(h)?, c))
    }

    /// The bare LSTM cell, gate order `[f, i, o, g]`. Returns `(o * tanh(c), c)`.
    pub fn lstm_cell(&self, g: &mut Graph<'_>, x: Var, v_prev: Var, c_prev: Var, y: usize) -> Result<(Var, Var)> {
        self.check_type(y)?;
        let d = self.cfg.d_in;
        let p = self.lstm_for(y).clone();
        let (w, u, b) = (g.param(p.w), g.param(p.u), g.param(p.b));
        let xw = g.matmul(x, w)?;
        let vu = g.matmul(v_prev, u)?;
        let z = g.add(xw, vu)?;
        let z = g.add(z, b)?;
        let gates = g.slice(z, 1, 0, 3 * d)?;
        let gates = g.sigmoid(gates);
        let f = g.slice(gates, 1, 0, d)?;
        let i = g.slice(gates, 1, d, d)?;
        let o = g.slice(gates, 1, 2 * d, d)?;
        let cand = g.slice(z, 1, 3 * d, d)?;
        let cand = g.tanh(cand);
        let fc = g.mul(f, c_prev)?;
        let ig = g.mul(i, cand)?;
        let c = g.add(fc, ig)?;
        let tc = g.tanh(c);
        Ok((g.mul(o, tc)?, c))
    }

    /// One attention layer over stacked node vectors `[Y, d]`.
    /// Returns the residual output and one `[Y, Y]` attention matrix per head.
    pub fn gat_layer(&self, g: &mut Graph<'_>, nodes: Var, layer: usize, train: bool) -> Result<(Var, Vec<Var>)> {
        let p = self.ids.layers[layer].clone();
        let y = self.cfg.num_types;
        let normed = g.layer_norm(nodes)?;
        let mut aggs = Vec::with_capacity(p.heads.len());
        let mut atts = Vec::with_capacity(p.heads.len());
        for h in &p.heads {
            let wa = g.param(h.w_alpha);
            let proj = g.matmul(normed, wa)?;
            let payload = match h.w_beta {
                Some(wb) => {
                    let wb = g.param(wb);
                    g.matmul(normed, wb)?
                }
                None => proj,
            };
            let ar = g.param(h.a_recv);
            let asend = g.param(h.a_send);
            let bias = g.param(h.bias);
            let recv = g.matmul(proj, ar)?;
            let recv = g.add_row(recv, bias)?;
            let send = g.matmul(proj, asend)?;
            let send = g.reshape(send, &[1, y])?;
            let scores = g.outer_add(recv, send)?;
            let scores = g.leaky_relu(scores, self.cfg.leaky_slope);
            let att = g.softmax(scores, 1)?;
            atts.push(att);
            let att_d = g.dropout(att, self.cfg.dropout, train)?;
            aggs.push(g.matmul(att_d, payload)?);
        }
        let cat = g.concat(&aggs, 1)?;
        let wv = g.param(p.w_v);
        let bv = g.param(p.b_v);
        let out = g.matmul(cat, wv)?;
        let out = g.add_row(out, bv)?;
        let out = g.dropout(out, self.cfg.dropout, train)?;
        Ok((g.add(nodes, out)?, atts))
    }

    /// Concatenate node vectors and apply one ReLU layer.
    pub fn global_update(&self, g: &mut Graph<'_>, nodes: Var) -> Result<Var> {
        let flat = g.reshape(nodes, &[1, self.cfg.num_types * self.cfg.d_in])?;
        let w = g.param(self.ids.w_u);
        let b = g.param(self.ids.b_u);
        let z = g.matmul(flat, w)?;
        let z = g.add_row(z, b)?;
        Ok(g.relu(z))
    }

    /// `(logits, t_hat, pre)` from the global state; `t_hat = anchor + softplus(raw)`.
    pub fn heads(&self, g: &mut Graph<'_>, u: Var, anchor: f64) -> Result<(Var, Var, Var)> {
        let (wy, by) = (g.param(self.ids.w_y), g.param(self.ids.b_y));
        let logits = g.matmul(u, wy)?;
        let logits = g.add_row(logits, by)?;
        let (wt, bt) = (g.param(self.ids.w_t), g.param(self.ids.b_t));
        let raw = g.matmul(u, wt)?;
        let raw = g.add_row(raw, bt)?;
        let t_hat = g.softplus(raw);
        let t_hat = g.add_scalar(t_hat, anchor);
        let wl = g.param(self.ids.w_lambda);
        let pre = g.matmul(u, wl)?;
        Ok((logits, t_hat, pre))
    }

    fn check_type(&self, y: usize) -> Result<()> {
        if y >= self.cfg.num_types {
            return Err(Error::UnknownType {
                y,
                num_types: self.cfg.num_types,
            });
        }
        Ok(())
    }

    /// Process event `(t, y)`: embed, update node `y`, attend, read out.
    /// `prev_anchor` is the time of the previous event (0 before the first).
    pub fn step(
        &self,
        g: &mut Graph<'_>,
        state: &NodeVars,
        t: f64,
        y: usize,
        prev_anchor: f64,
        train: bool,
    ) -> Result<(NodeVars, StepVars)> {
        self.check_type(y)?;
        if !(t >= prev_anchor) {
            return Err(Error::OutOfOrder { t, anchor: prev_anchor });
        }
        let x = g.constant(embed_time(t, &self.cfg.embedding())?);
        let (v, c) = self.node_lstm_step(g, x, state.v[y], state.c[y], y)?;
        let mut next = state.clone();
        next.v[y] = v;
        next.c[y] = c;

        let mut nodes = g.concat(&next.v, 0)?;
        let mut attention = Vec::with_capacity(self.cfg.attention_scores_per_event());
        for l in 0..self.ids.layers.len() {
            let (out, atts) = self.gat_layer(g, nodes, l, train)?;
            nodes = out;
            attention.extend(atts);
        }
        let u = self.global_update(g, nodes)?;
        let (logits, t_hat, pre) = self.heads(g, u, t)?;
        Ok((
            next,
            StepVars {
                anchor: t,
                u,
                logits,
                t_hat,
                pre,
                attention,
            },
        ))
    }

    pub fn step_output(&self, g: &Graph<'_>, s: &StepVars, index: usize) -> StepOutput {
        StepOutput {
            global: GlobalState {
                u: g.value(s.u).data().to_vec(),
                anchor_time: s.anchor,
                anchor_index: index,
            },
            logits: g.value(s.logits).data().to_vec(),
            t_hat: g.value(s.t_hat).item(),
            pre: g.value(s.pre).data().to_vec(),
            attention: s.attention.iter().map(|&a| g.value(a).clone()).collect(),
        }
    }

    /// Time term `α_y (t - anchor) / max(anchor, ε_t)` for every type.
    pub fn time_term(&self, anchor: f64, t: f64) -> Result<Vec<f64>> {
        if !(t >= anchor) {
            return Err(Error::OutOfOrder { t, anchor });
        }
        let s = (t - anchor) / anchor.max(self.cfg.epsilon_t);
        Ok((0..self.cfg.num_types).map(|y| self.cfg.alpha_for(y) * s).collect())
    }

    /// `λ_y(t) = softplus(α_y (t - anchor) / max(anchor, ε_t) + pre_y + β_y)`.
    pub fn intensity(&self, pre: &[f64], anchor: f64, t: f64) -> Result<Vec<f64>> {
        let tt = self.time_term(anchor, t)?;
        Ok(tt
            .iter()
            .zip(pre)
            .zip(self.beta())
            .map(|((a, p), b)| softplus(a + p + b))
            .collect())
    }

    pub fn total_intensity(&self, pre: &[f64], anchor: f64, t: f64) -> Result<f64> {
        Ok(self.intensity(pre, anchor, t)?.iter().sum())
    }

    /// Differentiable intensities `[n, Y]` at `times`, anchored at `anchor` with pre-activations `pre` (`[1, Y]`).
    pub fn intensity_var(&self, g: &mut Graph<'_>, pre: Var, anchor: f64, times: &[f64]) -> Result<Var> {
        let y = self.cfg.num_types;
        let mut tm = Vec::with_capacity(times.len() * y);
        for &t in times {
            tm.extend(self.time_term(anchor, t)?);
        }
        let tm = g.constant(Tensor::matrix(times.len(), y, tm)?);
        let beta = g.param(self.ids.beta);
        let base = g.add(pre, beta)?;
        let z = g.add_row(tm, base)?;
        Ok(g.softplus(z))
    }

    /// Run a sequence in evaluation mode and return every step's values.
    pub fn forward(&self, seq: &crate::datagen::EventSequence) -> Result<Vec<StepOutput>> {
        self.forward_with(seq, false, 0)
    }

    /// Like [`Rgn::forward`], optionally with dropout active (masks seeded by `seed`).
    pub fn forward_with(&self, seq: &crate::datagen::EventSequence, train: bool, seed: u64) -> Result<Vec<StepOutput>> {
        const BLOCK: usize = 64;
        let mut state = self.init_state();
        let mut out = Vec::with_capacity(seq.len());
        let mut prev = 0.0;
        for (b, block) in seq.events.chunks(BLOCK).enumerate() {
            let mut g = Graph::with_seed(&self.store, rng::derive_seed(seed, &[b as u64]));
            let mut vars = state.attach(&mut g);
            for e in block {
                let (next, s) = self.step(&mut g, &vars, e.t, e.y, prev, train)?;
                out.push(self.step_output(&g, &s, out.len()));
                vars = next;
                prev = e.t;
            }
            state = vars.detach(&g);
        }
        Ok(out)
    }
}
