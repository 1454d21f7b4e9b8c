//! Residual mean-aggregation message passing encoder.
//!
//! Layer `l` computes `relu(P · H · W_l + b_l)`, where `P` averages every node
//! with its neighbours (self included, so isolated nodes are well defined).
//! From the second layer on the previous representation is added back.
//! Graph and subgraph embeddings are means over node rows.

use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::diffnum::{SparseRows, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::GraphBatch;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub layers: usize,
    pub hidden_dim: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            layers: 3,
            hidden_dim: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    /// `F x D` for the first layer, `D x D` afterwards.
    pub weights: Vec<Tensor>,
    /// `1 x D` per layer.
    pub biases: Vec<Tensor>,
}

impl EncoderParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(input_dim: usize, config: EncoderConfig, seed: u64) -> Result<Self> {
        if config.layers == 0 || config.hidden_dim == 0 || input_dim == 0 {
            return Err(Error::Config(format!(
                "encoder needs layers, hidden_dim and input dim >= 1 (got {}, {}, {input_dim})",
                config.layers, config.hidden_dim
            )));
        }
        let mut rng = seed::rng(seed, &[0xE4C0]);
        let d = config.hidden_dim;
        let mut weights = Vec::with_capacity(config.layers);
        let mut biases = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let fan_in = if l == 0 { input_dim } else { d };
            let bound = (6.0 / (fan_in + d) as f64).sqrt();
            let data = (0..fan_in * d)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            weights.push(Tensor::new(fan_in, d, data)?);
            biases.push(Tensor::zeros(1, d));
        }
        Ok(Self { weights, biases })
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.weights[0].cols()
    }

    /// Parameters in a fixed order: all weights, then all biases.
    pub fn tensors(&self) -> Vec<&Tensor> {
        self.weights.iter().chain(&self.biases).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.weights.iter_mut().chain(self.biases.iter_mut()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() || self.weights.len() != self.biases.len() {
            return Err(Error::Config("encoder: layer count mismatch".into()));
        }
        let d = self.hidden_dim();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let rows_ok = l == 0 || w.rows() == d;
            if !rows_ok || w.cols() != d || b.shape() != [1, d] {
                return Err(Error::Config(format!("encoder: layer {l} shapes do not chain")));
            }
            if !w.is_finite() || !b.is_finite() {
                return Err(Error::NonFinite(format!("encoder layer {l}")));
            }
        }
        Ok(())
    }

    /// Records every parameter as a trainable leaf.
    pub fn on_tape(&self, tape: &mut Tape) -> EncoderVars {
        EncoderVars {
            weights: self.weights.iter().map(|w| tape.leaf(w.clone())).collect(),
            biases: self.biases.iter().map(|b| tape.leaf(b.clone())).collect(),
        }
    }

    /// Records every parameter as a constant.
    pub fn on_tape_frozen(&self, tape: &mut Tape) -> EncoderVars {
        EncoderVars {
            weights: self.weights.iter().map(|w| tape.constant(w.clone())).collect(),
            biases: self.biases.iter().map(|b| tape.constant(b.clone())).collect(),
        }
    }
}

/// Tape handles of the encoder parameters.
#[derive(Debug, Clone)]
pub struct EncoderVars {
    pub weights: Vec<Var>,
    pub biases: Vec<Var>,
}

impl EncoderVars {
    /// Same order as [`EncoderParams::tensors`].
    pub fn all(&self) -> Vec<Var> {
        self.weights.iter().chain(&self.biases).copied().collect()
    }
}

/// Packed node features and the neighbourhood-mean operator of a batch.
#[derive(Debug, Clone)]
pub struct BatchInput {
    pub features: Tensor,
    pub propagate: Arc<SparseRows>,
    pub offsets: Vec<usize>,
}

impl BatchInput {
    pub fn new(batch: &GraphBatch<'_>) -> Result<Self> {
        let total = batch.num_nodes();
        let f = batch.num_features();
        let mut feats = Vec::with_capacity(total * f);
        let mut rows = Vec::with_capacity(total);
        for (gi, g) in batch.graphs().iter().enumerate() {
            feats.extend_from_slice(g.features());
            let off = batch.offsets()[gi];
            for v in 0..g.num_nodes() {
                let w = 1.0 / (g.degree(v) + 1) as f64;
                let mut row: Vec<(usize, f64)> = Vec::with_capacity(g.degree(v) + 1);
                row.push((off + v, w));
                row.extend(g.neighbors(v).iter().map(|&u| (off + u, w)));
                rows.push(row);
            }
        }
        Ok(Self {
            features: Tensor::new(total, f, feats)?,
            propagate: Arc::new(SparseRows::new(total, rows)?),
            offsets: batch.offsets().to_vec(),
        })
    }

    pub fn num_graphs(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Packed row indices of every graph's nodes.
    pub fn graph_groups(&self) -> Vec<Vec<usize>> {
        self.offsets.windows(2).map(|w| (w[0]..w[1]).collect()).collect()
    }
}

/// Node embeddings of the whole batch as one packed `nodes x D` value.
pub fn encode_nodes(tape: &mut Tape, input: &BatchInput, params: &EncoderVars) -> Result<Var> {
    let f = tape.value(params.weights[0]).rows();
    if input.features.cols() != f {
        return Err(Error::shape(
            "encode_nodes",
            format!("batch has F = {}, encoder expects {f}", input.features.cols()),
        ));
    }
    let mut h = tape.constant(input.features.clone());
    for (l, (&w, &b)) in params.weights.iter().zip(&params.biases).enumerate() {
        let mixed = tape.propagate(h, input.propagate.clone())?;
        let lin = tape.matmul(mixed, w)?;
        let pre = tape.add_row(lin, b)?;
        let act = tape.relu(pre)?;
        h = if l == 0 { act } else { tape.add(h, act)? };
    }
    Ok(h)
}

/// Gradient-free forward pass. Produces exactly the values [`encode_nodes`]
/// would.
pub fn embed_nodes(input: &BatchInput, params: &EncoderParams) -> Result<Tensor> {
    let mut tape = Tape::new();
    let vars = params.on_tape_frozen(&mut tape);
    let h = encode_nodes(&mut tape, input, &vars)?;
    Ok(tape.value(h).clone())
}

/// Mean of the selected node rows, one output row per index set.
pub fn aggregate(tape: &mut Tape, nodes: Var, index_sets: Vec<Vec<usize>>) -> Result<Var> {
    tape.mean_rows(nodes, Arc::new(index_sets))
}

/// Whole-graph embeddings (`graphs x D`) for every graph of a batch.
pub fn embed_graphs(input: &BatchInput, params: &EncoderParams) -> Result<Tensor> {
    embed_nodes(input, params)?.mean_rows(&input.graph_groups())
}
