//! Motif-guided subgraph segmentation.
//!
//! Node embeddings of one graph are turned into a row-stochastic affinity
//! matrix (cosine similarities, row softmax at temperature `tau_n`), the
//! affinity graph is split by spectral clustering, and every connected
//! component with at least four nodes inside a segment becomes a subgraph.
//! The segmenter loss rewards intra-subgraph affinity for subgraphs that
//! sit close to some motif.

mod samplers;
mod spectral;

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diffnum::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::{Graph, Subgraph, MIN_SUBGRAPH_NODES};

pub use samplers::{k_hop, k_hop_sample, random_walk, random_walk_sample, walk_length, WALK_LENGTH};
pub use spectral::{kmeans, normalized_laplacian, spectral_segment, symmetric_eigen};

/// Subgraph sampling strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    /// Spectral segmentation of the learned affinity matrix.
    #[default]
    Motif,
    /// Random-walk visited sets.
    Rw,
    /// K-hop neighbourhoods.
    Khop,
}

impl Sampler {
    pub fn as_str(self) -> &'static str {
        match self {
            Sampler::Motif => "motif",
            Sampler::Rw => "rw",
            Sampler::Khop => "khop",
        }
    }
}

impl FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "motif" => Ok(Sampler::Motif),
            "rw" => Ok(Sampler::Rw),
            "khop" => Ok(Sampler::Khop),
            other => Err(Error::Config(format!(
                "unknown sampler {other:?} (expected motif, rw or khop)"
            ))),
        }
    }
}

impl std::fmt::Display for Sampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Row-softmaxed cosine similarity of the node embeddings (`n x D` value
/// on the tape) at temperature `tau_n`.
pub fn affinity(tape: &mut Tape, nodes: Var, tau_n: f64) -> Result<Var> {
    let unit = tape.l2_normalize_rows(nodes)?;
    let cos = tape.matmul_t(unit, unit)?;
    tape.row_softmax(cos, tau_n)
}

/// Gradient-free [`affinity`].
pub fn affinity_values(nodes: &Tensor, tau_n: f64) -> Result<Tensor> {
    let (unit, _) = nodes.l2_normalize_rows();
    unit.matmul_t(&unit)?.row_softmax(tau_n)
}

/// Number of spectral segments for an `n`-node graph: `ceil(n / 6)` clamped
/// to `[2, max_segments]`, and never more than `n`.
pub fn num_segments(n: usize, max_segments: usize) -> usize {
    n.div_ceil(6).clamp(2, max_segments.max(2)).min(n).max(1)
}

/// Node labels plus the subgraphs extracted from them.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub labels: Vec<usize>,
    pub subgraphs: Vec<Subgraph>,
}

/// Connected components of at least four nodes within each label group,
/// ordered by smallest node index. `segment_id` is the group label.
pub fn extract_subgraphs(graph: &Graph, labels: &[usize]) -> Result<Vec<Subgraph>> {
    if labels.len() != graph.num_nodes() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for a {}-node graph",
            labels.len(),
            graph.num_nodes()
        )));
    }
    let groups = labels.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); groups];
    for (v, &l) in labels.iter().enumerate() {
        members[l].push(v);
    }
    let mut out = Vec::new();
    for (label, nodes) in members.iter().enumerate() {
        for comp in graph.induced_components(nodes) {
            if comp.len() >= MIN_SUBGRAPH_NODES {
                out.push(Subgraph::new(graph, comp, label)?);
            }
        }
    }
    out.sort_by_key(|s| s.nodes()[0]);
    Ok(out)
}

/// Affinity → spectral segmentation → subgraphs for one graph.
pub fn segment_graph(
    graph: &Graph,
    node_embeddings: &Tensor,
    tau_n: f64,
    max_segments: usize,
    seed: u64,
) -> Result<Segmentation> {
    if node_embeddings.rows() != graph.num_nodes() {
        return Err(Error::shape(
            "segment_graph",
            format!("{} embeddings for {} nodes", node_embeddings.rows(), graph.num_nodes()),
        ));
    }
    let a = affinity_values(node_embeddings, tau_n)?;
    let k = num_segments(graph.num_nodes(), max_segments);
    let labels = spectral_segment(&a, k, seed)?;
    let subgraphs = extract_subgraphs(graph, &labels)?;
    Ok(Segmentation { labels, subgraphs })
}

/// Per-motif thresholds: `eta_k` is the similarity of the
/// `ceil(top_fraction * N)`-th most similar subgraph to motif `k`.
pub fn motif_thresholds(similarity: &Tensor, top_fraction: f64) -> Result<Vec<f64>> {
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "top_fraction must be in (0, 1], got {top_fraction}"
        )));
    }
    let n = similarity.cols();
    if n == 0 {
        return Ok(vec![f64::INFINITY; similarity.rows()]);
    }
    let rank = ((top_fraction * n as f64).ceil() as usize).clamp(1, n);
    Ok((0..similarity.rows())
        .map(|k| {
            let mut row = similarity.row(k).to_vec();
            row.sort_unstable_by(|a, b| b.total_cmp(a));
            row[rank - 1]
        })
        .collect())
}

/// Subgraph `j` passes when `S[k, j] > eta_k` for some motif `k`.
pub fn passing_subgraphs(similarity: &Tensor, thresholds: &[f64]) -> Vec<bool> {
    (0..similarity.cols())
        .map(|j| (0..similarity.rows()).any(|k| similarity.get(k, j) > thresholds[k]))
        .collect()
}

/// Segmenter loss
/// `-(1/N) Σ_{passing j} Σ_{s≠t ∈ g_j} A^{(parent j)}[s, t]`.
///
/// `affinities[i]` is the affinity matrix of batch graph `i`; `subgraphs`
/// pairs each subgraph with its batch graph index; `similarity` is the
/// `K x N` motif-to-subgraph cosine matrix. Thresholds and the pass test are
/// evaluated on plain values and never enter the tape. Returns a constant
/// zero when no subgraph passes.
pub fn segmenter_loss(
    tape: &mut Tape,
    affinities: &[Var],
    subgraphs: &[(usize, &[usize])],
    similarity: &Tensor,
    top_fraction: f64,
) -> Result<Var> {
    let n = subgraphs.len();
    if similarity.cols() != n {
        return Err(Error::shape(
            "segmenter_loss",
            format!("{} similarity columns for {n} subgraphs", similarity.cols()),
        ));
    }
    if n == 0 {
        log::warn!("segmenter loss over zero subgraphs; using 0");
        return Ok(tape.constant(Tensor::scalar(0.0)));
    }
    let eta = motif_thresholds(similarity, top_fraction)?;
    let pass = passing_subgraphs(similarity, &eta);

    let mut masks: Vec<Option<Tensor>> = vec![None; affinities.len()];
    for (&(graph, nodes), _) in subgraphs.iter().zip(&pass).filter(|(_, &p)| p) {
        let a = affinities.get(graph).ok_or_else(|| {
            Error::InvalidArgument(format!("subgraph parent {graph} outside the batch"))
        })?;
        let size = tape.value(*a).rows();
        let mask = masks[graph].get_or_insert_with(|| Tensor::zeros(size, size));
        let data = mask.data_mut();
        for &s in nodes {
            for &t in nodes {
                if s != t {
                    data[s * size + t] += 1.0;
                }
            }
        }
    }

    let mut total: Option<Var> = None;
    for (graph, mask) in masks.into_iter().enumerate() {
        let Some(mask) = mask else { continue };
        let m = tape.constant(mask);
        let term = tape.trace_product(affinities[graph], m)?;
        total = Some(match total {
            None => term,
            Some(acc) => tape.add(acc, term)?,
        });
    }
    match total {
        None => Ok(tape.constant(Tensor::scalar(0.0))),
        Some(t) => tape.scale(t, -1.0 / n as f64),
    }
}
