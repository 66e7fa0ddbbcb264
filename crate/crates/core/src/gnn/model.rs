use std::ops::Range;

use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CircuitGraph, NormStats, D_GLOBAL, D_NODE};
use crate::seed::stream_rng;

use super::loss::{huber_grad, huber_loss};

/// Which edges feed the neighbor mean of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Neighborhood {
    /// Predecessors and successors along the wires.
    Symmetrized,
    /// Predecessors only.
    Incoming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_node_in: usize,
    pub d_hidden: usize,
    pub d_global_in: usize,
    pub d_global_hidden: usize,
    pub d_head_hidden: usize,
    pub layers_mp: usize,
    pub layers_global: usize,
    pub neighborhood: Neighborhood,
    pub huber_delta: f64,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_node_in: D_NODE,
            d_hidden: 64,
            d_global_in: D_GLOBAL,
            d_global_hidden: 32,
            d_head_hidden: 32,
            layers_mp: 3,
            layers_global: 3,
            neighborhood: Neighborhood::Symmetrized,
            huber_delta: 1.0,
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    /// Width of the concatenated pooled-node and global representation.
    pub fn d_fused(&self) -> usize {
        self.d_hidden + self.d_global_hidden
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.d_node_in,
            self.d_hidden,
            self.d_global_in,
            self.d_global_hidden,
            self.d_head_hidden,
            self.layers_mp,
            self.layers_global,
        ];
        if dims.contains(&0) {
            return Err(Error::Config("model dimensions and layer counts must be positive".into()));
        }
        if self.huber_delta.is_nan() || self.huber_delta <= 0.0 {
            return Err(Error::Config("huber_delta must be positive".into()));
        }
        Ok(())
    }
}

/// Affine map `x W + b` with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    fn zeros(d_in: usize, d_out: usize) -> Self {
        Dense {
            w: Array2::zeros((d_in, d_out)),
            b: Array1::zeros(d_out),
        }
    }

    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }
}

/// GraphSAGE mean layer: `h' = relu(h W_root + mean_{N(v)} h W_neigh + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SageLayer {
    pub root: Array2<f64>,
    pub neigh: Array2<f64>,
    pub bias: Array1<f64>,
}

impl SageLayer {
    fn zeros(d_in: usize, d_out: usize) -> Self {
        SageLayer {
            root: Array2::zeros((d_in, d_out)),
            neigh: Array2::zeros((d_in, d_out)),
            bias: Array1::zeros(d_out),
        }
    }
}

/// All trainable tensors. Also used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub mp: Vec<SageLayer>,
    pub global: Vec<Dense>,
    pub head_hidden: Dense,
    pub head_out: Dense,
}

impl Weights {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let mp = (0..cfg.layers_mp)
            .map(|l| {
                let d_in = if l == 0 { cfg.d_node_in } else { cfg.d_hidden };
                SageLayer::zeros(d_in, cfg.d_hidden)
            })
            .collect();
        let global = (0..cfg.layers_global)
            .map(|l| {
                let d_in = if l == 0 { cfg.d_global_in } else { cfg.d_global_hidden };
                Dense::zeros(d_in, cfg.d_global_hidden)
            })
            .collect();
        Weights {
            mp,
            global,
            head_hidden: Dense::zeros(cfg.d_fused(), cfg.d_head_hidden),
            head_out: Dense::zeros(cfg.d_head_hidden, 1),
        }
    }

    /// Glorot-uniform matrices, zero biases.
    pub fn glorot(cfg: &ModelConfig) -> Self {
        let mut w = Weights::zeros(cfg);
        let mut rng = stream_rng(cfg.init_seed, 0);
        for (name, mut t) in w.tensors_mut() {
            if t.ndim() == 2 {
                let (fan_in, fan_out) = (t.shape()[0], t.shape()[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                t.iter_mut().for_each(|x| *x = rng.random_range(-limit..limit));
            } else {
                debug_assert!(name.ends_with('b') || name.ends_with("bias"));
            }
        }
        w
    }

    /// Named views of every tensor in a fixed order.
    pub fn tensors(&self) -> Vec<(String, ndarray::ArrayViewD<'_, f64>)> {
        let mut out = Vec::new();
        for (l, layer) in self.mp.iter().enumerate() {
            out.push((format!("mp{l}.root"), layer.root.view().into_dyn()));
            out.push((format!("mp{l}.neigh"), layer.neigh.view().into_dyn()));
            out.push((format!("mp{l}.bias"), layer.bias.view().into_dyn()));
        }
        for (l, d) in self.global.iter().enumerate() {
            out.push((format!("global{l}.w"), d.w.view().into_dyn()));
            out.push((format!("global{l}.b"), d.b.view().into_dyn()));
        }
        for (name, d) in [("head_hidden", &self.head_hidden), ("head_out", &self.head_out)] {
            out.push((format!("{name}.w"), d.w.view().into_dyn()));
            out.push((format!("{name}.b"), d.b.view().into_dyn()));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ndarray::ArrayViewMutD<'_, f64>)> {
        let mut out = Vec::new();
        for (l, layer) in self.mp.iter_mut().enumerate() {
            out.push((format!("mp{l}.root"), layer.root.view_mut().into_dyn()));
            out.push((format!("mp{l}.neigh"), layer.neigh.view_mut().into_dyn()));
            out.push((format!("mp{l}.bias"), layer.bias.view_mut().into_dyn()));
        }
        for (l, d) in self.global.iter_mut().enumerate() {
            out.push((format!("global{l}.w"), d.w.view_mut().into_dyn()));
            out.push((format!("global{l}.b"), d.b.view_mut().into_dyn()));
        }
        let (hh, ho) = (&mut self.head_hidden, &mut self.head_out);
        out.push(("head_hidden.w".into(), hh.w.view_mut().into_dyn()));
        out.push(("head_hidden.b".into(), hh.b.view_mut().into_dyn()));
        out.push(("head_out.w".into(), ho.w.view_mut().into_dyn()));
        out.push(("head_out.b".into(), ho.b.view_mut().into_dyn()));
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|(_, t)| t.iter().map(|x| x * x).sum::<f64>())
            .sum()
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Weights, scale: f64) {
        let src = other.tensors();
        for ((_, mut dst), (_, src)) in self.tensors_mut().into_iter().zip(src) {
            dst.scaled_add(scale, &src);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    pub fn same_shapes(&self, other: &Weights) -> bool {
        let a = self.tensors();
        let b = other.tensors();
        a.len() == b.len() && a.iter().zip(&b).all(|((n1, t1), (n2, t2))| n1 == n2 && t1.shape() == t2.shape())
    }
}

/// Disjoint union of normalized graphs with CSR neighbor lists.
#[derive(Debug, Clone)]
pub struct Batch {
    pub x: Array2<f64>,
    pub globals: Array2<f64>,
    pub targets: Vec<f64>,
    pub node_ranges: Vec<Range<usize>>,
    nbr_offsets: Vec<usize>,
    nbr_index: Vec<usize>,
}

impl Batch {
    pub fn new(graphs: &[&CircuitGraph], neighborhood: Neighborhood) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::Shape("empty batch".into()));
        }
        let total: usize = graphs.iter().map(|g| g.num_nodes()).sum();
        let d = graphs[0].node_features.ncols();
        let dg = graphs[0].global_features.len();
        let mut x = Array2::zeros((total, d));
        let mut globals = Array2::zeros((graphs.len(), dg));
        let mut node_ranges = Vec::with_capacity(graphs.len());
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); total];
        let mut start = 0;
        for (i, g) in graphs.iter().enumerate() {
            let n = g.num_nodes();
            if g.node_features.ncols() != d || g.global_features.len() != dg {
                return Err(Error::Shape(format!("graph {} has inconsistent feature widths", g.circuit_id)));
            }
            x.slice_mut(s![start..start + n, ..]).assign(&g.node_features);
            globals.row_mut(i).assign(&g.global_features);
            for &(src, dst) in &g.edges {
                if src >= n || dst >= n {
                    return Err(Error::Shape(format!("edge ({src}, {dst}) out of range in {}", g.circuit_id)));
                }
                adj[start + dst].push(start + src);
                if neighborhood == Neighborhood::Symmetrized {
                    adj[start + src].push(start + dst);
                }
            }
            node_ranges.push(start..start + n);
            start += n;
        }
        let mut nbr_offsets = Vec::with_capacity(total + 1);
        let mut nbr_index = Vec::new();
        nbr_offsets.push(0);
        for a in adj {
            nbr_index.extend(a);
            nbr_offsets.push(nbr_index.len());
        }
        Ok(Batch {
            x,
            globals,
            targets: graphs.iter().map(|g| g.label.unwrap_or(f64::NAN)).collect(),
            node_ranges,
            nbr_offsets,
            nbr_index,
        })
    }

    pub fn num_graphs(&self) -> usize {
        self.node_ranges.len()
    }

    fn neighbors(&self, v: usize) -> &[usize] {
        &self.nbr_index[self.nbr_offsets[v]..self.nbr_offsets[v + 1]]
    }

    /// Row `v` of the result is the mean of `h` over the neighbors of `v`,
    /// or zero when `v` has none.
    pub fn aggregate(&self, h: &Array2<f64>) -> Array2<f64> {
        let d = h.ncols();
        let h = h.as_standard_layout();
        let src = h.as_slice().expect("standard layout");
        let mut out = Array2::zeros(h.raw_dim());
        let dst = out.as_slice_mut().expect("fresh array");
        for (v, row) in dst.chunks_exact_mut(d.max(1)).enumerate().take(h.nrows()) {
            let nb = self.neighbors(v);
            if nb.is_empty() {
                continue;
            }
            for &u in nb {
                row.iter_mut().zip(&src[u * d..(u + 1) * d]).for_each(|(o, x)| *o += x);
            }
            let n = nb.len() as f64;
            row.iter_mut().for_each(|o| *o /= n);
        }
        out
    }

    /// Adjoint of [`Batch::aggregate`].
    fn aggregate_transpose(&self, g: &Array2<f64>) -> Array2<f64> {
        let d = g.ncols();
        let g = g.as_standard_layout();
        let src = g.as_slice().expect("standard layout");
        let mut out = Array2::zeros(g.raw_dim());
        let dst = out.as_slice_mut().expect("fresh array");
        for v in 0..g.nrows() {
            let nb = self.neighbors(v);
            if nb.is_empty() {
                continue;
            }
            let n = nb.len() as f64;
            let share = &src[v * d..(v + 1) * d];
            for &u in nb {
                dst[u * d..(u + 1) * d].iter_mut().zip(share).for_each(|(o, x)| *o += x / n);
            }
        }
        out
    }

    fn mean_pool(&self, h: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.num_graphs(), h.ncols()));
        for (i, r) in self.node_ranges.iter().enumerate() {
            let rows = h.slice(s![r.clone(), ..]);
            out.row_mut(i).assign(&rows.mean_axis(Axis(0)).expect("graphs have nodes"));
        }
        out
    }
}

fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

fn relu_backward(grad: &Array2<f64>, pre: &Array2<f64>) -> Array2<f64> {
    let mut g = grad.clone();
    g.zip_mut_with(pre, |g, &p| {
        if p <= 0.0 {
            *g = 0.0;
        }
    });
    g
}

fn ensure_finite(a: &Array2<f64>, what: &str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Intermediate values kept for the backward pass.
pub struct ForwardCache {
    mp_in: Vec<Array2<f64>>,
    mp_agg: Vec<Array2<f64>>,
    mp_pre: Vec<Array2<f64>>,
    global_in: Vec<Array2<f64>>,
    global_pre: Vec<Array2<f64>>,
    fused: Array2<f64>,
    head_pre: Array2<f64>,
    head_act: Array2<f64>,
    pub predictions: Vec<f64>,
}

/// Trained surrogate: weights, architecture and the normalization it was
/// trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    pub config: ModelConfig,
    pub weights: Weights,
    pub norm_stats: NormStats,
    pub train_config: Option<super::TrainConfig>,
}

impl GnnModel {
    pub fn new(config: ModelConfig, norm_stats: NormStats) -> Result<Self> {
        config.validate()?;
        Ok(GnnModel {
            weights: Weights::glorot(&config),
            config,
            norm_stats,
            train_config: None,
        })
    }

    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(GnnModel {
            weights: Weights::zeros(&config),
            config,
            norm_stats: NormStats::identity(),
            train_config: None,
        })
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.x.ncols() != self.config.d_node_in || batch.globals.ncols() != self.config.d_global_in {
            return Err(Error::Schema(format!(
                "batch feature widths ({}, {}) do not match model ({}, {})",
                batch.x.ncols(),
                batch.globals.ncols(),
                self.config.d_node_in,
                self.config.d_global_in
            )));
        }
        Ok(())
    }

    /// One message-passing layer on a batch.
    pub fn mp_layer_forward(layer: &SageLayer, batch: &Batch, h: &Array2<f64>) -> Result<Array2<f64>> {
        if h.nrows() != batch.x.nrows() || h.ncols() != layer.root.nrows() {
            return Err(Error::Shape(format!(
                "node matrix {:?} does not fit layer input {}",
                h.shape(),
                layer.root.nrows()
            )));
        }
        let agg = batch.aggregate(h);
        Ok(relu(&(h.dot(&layer.root) + agg.dot(&layer.neigh) + &layer.bias)))
    }

    pub fn forward_cached(&self, batch: &Batch) -> Result<ForwardCache> {
        self.check_batch(batch)?;
        let w = &self.weights;
        let mut h = batch.x.clone();
        let (mut mp_in, mut mp_agg, mut mp_pre) = (Vec::new(), Vec::new(), Vec::new());
        for (l, layer) in w.mp.iter().enumerate() {
            let agg = batch.aggregate(&h);
            let pre = h.dot(&layer.root) + agg.dot(&layer.neigh) + &layer.bias;
            ensure_finite(&pre, &format!("message-passing layer {l}"))?;
            let next = relu(&pre);
            mp_in.push(h);
            mp_agg.push(agg);
            mp_pre.push(pre);
            h = next;
        }
        let pooled = batch.mean_pool(&h);

        let mut g = batch.globals.clone();
        let (mut global_in, mut global_pre) = (Vec::new(), Vec::new());
        for (l, d) in w.global.iter().enumerate() {
            let pre = d.forward(&g);
            ensure_finite(&pre, &format!("global layer {l}"))?;
            let next = relu(&pre);
            global_in.push(g);
            global_pre.push(pre);
            g = next;
        }

        let fused = concatenate(Axis(1), &[pooled.view(), g.view()]).expect("matching row counts");
        let head_pre = w.head_hidden.forward(&fused);
        ensure_finite(&head_pre, "head hidden layer")?;
        let head_act = relu(&head_pre);
        let out = w.head_out.forward(&head_act);
        ensure_finite(&out, "regression output")?;
        Ok(ForwardCache {
            mp_in,
            mp_agg,
            mp_pre,
            global_in,
            global_pre,
            fused,
            head_pre,
            head_act,
            predictions: out.column(0).to_vec(),
        })
    }

    pub fn forward(&self, batch: &Batch) -> Result<Vec<f64>> {
        Ok(self.forward_cached(batch)?.predictions)
    }

    /// Gradients of `d loss / d prediction = output_grad` back to every
    /// weight.
    pub fn backward(&self, batch: &Batch, cache: &ForwardCache, output_grad: &[f64]) -> Result<Weights> {
        let w = &self.weights;
        let mut grads = Weights::zeros(&self.config);
        let d_out = Array2::from_shape_vec((output_grad.len(), 1), output_grad.to_vec())
            .map_err(|e| Error::Shape(e.to_string()))?;

        grads.head_out.w = cache.head_act.t().dot(&d_out);
        grads.head_out.b = d_out.sum_axis(Axis(0));
        let d_head_act = d_out.dot(&w.head_out.w.t());
        let d_head_pre = relu_backward(&d_head_act, &cache.head_pre);
        grads.head_hidden.w = cache.fused.t().dot(&d_head_pre);
        grads.head_hidden.b = d_head_pre.sum_axis(Axis(0));
        let d_fused = d_head_pre.dot(&w.head_hidden.w.t());

        let d_hidden = self.config.d_hidden;
        let d_pooled = d_fused.slice(s![.., ..d_hidden]).to_owned();
        let mut d_g = d_fused.slice(s![.., d_hidden..]).to_owned();

        for l in (0..w.global.len()).rev() {
            let d_pre = relu_backward(&d_g, &cache.global_pre[l]);
            grads.global[l].w = cache.global_in[l].t().dot(&d_pre);
            grads.global[l].b = d_pre.sum_axis(Axis(0));
            d_g = d_pre.dot(&w.global[l].w.t());
        }

        // mean pooling adjoint
        let mut d_h = Array2::zeros((batch.x.nrows(), d_hidden));
        for (i, r) in batch.node_ranges.iter().enumerate() {
            let share = &d_pooled.row(i) / r.len() as f64;
            for v in r.clone() {
                d_h.row_mut(v).assign(&share);
            }
        }

        for l in (0..w.mp.len()).rev() {
            let layer = &w.mp[l];
            let d_pre = relu_backward(&d_h, &cache.mp_pre[l]);
            grads.mp[l].root = cache.mp_in[l].t().dot(&d_pre);
            grads.mp[l].neigh = cache.mp_agg[l].t().dot(&d_pre);
            grads.mp[l].bias = d_pre.sum_axis(Axis(0));
            let d_agg = d_pre.dot(&layer.neigh.t());
            d_h = d_pre.dot(&layer.root.t()) + batch.aggregate_transpose(&d_agg);
            ensure_finite(&d_h, &format!("gradient of message-passing layer {l}"))?;
        }
        if !grads.all_finite() {
            return Err(Error::NonFinite("weight gradients".into()));
        }
        Ok(grads)
    }

    /// Mean Huber loss over the batch plus `weight_decay / 2 * |w|^2`.
    pub fn objective(&self, batch: &Batch, weight_decay: f64) -> Result<f64> {
        let pred = self.forward(batch)?;
        Ok(huber_loss(&pred, &batch.targets, self.config.huber_delta)? + 0.5 * weight_decay * self.weights.squared_norm())
    }

    /// Loss and exact gradients of [`GnnModel::objective`].
    pub fn loss_and_gradients(&self, batch: &Batch, weight_decay: f64) -> Result<(f64, Weights)> {
        let cache = self.forward_cached(batch)?;
        let loss = huber_loss(&cache.predictions, &batch.targets, self.config.huber_delta)?;
        let d_pred = huber_grad(&cache.predictions, &batch.targets, self.config.huber_delta)?;
        let mut grads = self.backward(batch, &cache, &d_pred)?;
        if weight_decay != 0.0 {
            grads.add_scaled(&self.weights, weight_decay);
        }
        Ok((loss, grads))
    }

    /// Normalizes raw graphs with the model's statistics and predicts them in
    /// chunks of `chunk` graphs.
    pub fn predict_graphs(&self, graphs: &[CircuitGraph], chunk: usize) -> Result<Vec<f64>> {
        let normalized = graphs
            .iter()
            .map(|g| crate::graph::apply_normalizer(g, &self.norm_stats))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(graphs.len());
        for part in normalized.chunks(chunk.max(1)) {
            let refs: Vec<&CircuitGraph> = part.iter().collect();
            out.extend(self.forward(&Batch::new(&refs, self.config.neighborhood)?)?);
        }
        Ok(out)
    }
}
