//! Similarity and cluster-size diagnostics written as CSV.
//!
//! | file | content |
//! |------|---------|
//! | `graph_subgraph_cosine.csv` | cosine of each selected graph to every subgraph |
//! | `elementwise_products.csv` | per-dimension products of unit embeddings for (graph, own subgraph) and (graph, foreign subgraph) pairs |
//! | `subgraph_similarity.csv` | pairwise cosine between the selected graphs' subgraphs |
//! | `assignment_cosine.csv` | pairwise cosine of per-graph motif assignment vectors |
//! | `cluster_sizes.csv` | argmax motif histogram over all subgraphs |
//! | `s_tilde.csv` | normalized motif-to-subgraph similarities |

use std::fmt::Write as _;
use std::path::Path;

use crate::diffnum::Tensor;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::motif::{argmax_motifs, graph_motif_assignment};
use crate::segmenter::Sampler;
use crate::trainer::{extract_features, segment_and_embed, TrainConfig, TrainState};

/// Number of leading graphs covered by the pairwise files.
pub const DEFAULT_MAX_GRAPHS: usize = 50;

/// All diagnostic tables, keyed by file name, in a fixed order.
pub fn diagnostics(
    dataset: &[Graph],
    state: &TrainState,
    config: &TrainConfig,
    max_graphs: usize,
) -> Result<Vec<(&'static str, String)>> {
    let seg = segment_and_embed(dataset, &state.encoder, config, Sampler::Motif, 1.0, config.seed)?;
    if seg.is_empty() {
        return Err(Error::Empty("no subgraphs to diagnose".into()));
    }
    let h = extract_features(dataset, &state.encoder)?;
    let (hu, _) = h.l2_normalize_rows();
    let (eu, _) = seg.embeddings.l2_normalize_rows();
    let selected = max_graphs.min(dataset.len());
    let id = |i: usize| dataset[i].id();

    let cos = hu.matmul_t(&eu)?;
    let mut a = String::from("graph_id,subgraph,parent_id,is_parent,cosine\n");
    for i in 0..selected {
        for (j, &p) in seg.parents.iter().enumerate() {
            let _ = writeln!(a, "{},{j},{},{},{}", id(i), id(p), u8::from(p == i), cos.get(i, j));
        }
    }

    let mut b = String::from("graph_id,pair,subgraph,parent_id,dim,product\n");
    for i in 0..selected {
        let own = seg.parents.iter().position(|&p| p == i);
        let foreign = seg.parents.iter().position(|&p| p != i);
        for (kind, j) in [("own", own), ("foreign", foreign)] {
            let Some(j) = j else { continue };
            for (d, (x, y)) in hu.row(i).iter().zip(eu.row(j)).enumerate() {
                let _ = writeln!(b, "{},{kind},{j},{},{d},{}", id(i), id(seg.parents[j]), x * y);
            }
        }
    }

    let chosen: Vec<usize> = (0..seg.len()).filter(|&j| seg.parents[j] < selected).collect();
    let sub_cos = seg.embeddings.gather_rows(&chosen)?;
    let sub_cos = sub_cos.cosine(&sub_cos)?;
    let mut c = String::from("subgraph_i,subgraph_j,parent_i,parent_j,cosine\n");
    for (x, &si) in chosen.iter().enumerate() {
        for (y, &sj) in chosen.iter().enumerate() {
            let _ = writeln!(c, "{si},{sj},{},{},{}", id(seg.parents[si]), id(seg.parents[sj]), sub_cos.get(x, y));
        }
    }

    let s = seg.similarity(&state.motifs)?;
    let s_tilde = s.col_softmax(config.tau_g)?;
    let assign = graph_motif_assignment(&s_tilde, &seg.parents, dataset.len())?;
    let top = Tensor::new(selected, assign.cols(), assign.data()[..selected * assign.cols()].to_vec())?;
    let acos = top.cosine(&top)?;
    let mut d = String::from("graph_i,graph_j,cosine\n");
    for i in 0..selected {
        for j in i + 1..selected {
            let _ = writeln!(d, "{},{},{}", id(i), id(j), acos.get(i, j));
        }
    }

    let mut sizes = vec![0usize; s.rows()];
    for k in argmax_motifs(&s_tilde) {
        sizes[k] += 1;
    }
    let mut e = String::from("motif,count\n");
    for (k, n) in sizes.iter().enumerate() {
        let _ = writeln!(e, "{k},{n}");
    }

    let mut st = String::from("motif,subgraph,parent_id,value\n");
    for k in 0..s_tilde.rows() {
        for j in 0..s_tilde.cols() {
            let _ = writeln!(st, "{k},{j},{},{}", id(seg.parents[j]), s_tilde.get(k, j));
        }
    }

    Ok(vec![
        ("graph_subgraph_cosine.csv", a),
        ("elementwise_products.csv", b),
        ("subgraph_similarity.csv", c),
        ("assignment_cosine.csv", d),
        ("cluster_sizes.csv", e),
        ("s_tilde.csv", st),
    ])
}

/// Writes every table of [`diagnostics`] into `dir`.
pub fn write_diagnostics(dir: &Path, tables: &[(&'static str, String)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, text) in tables {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
