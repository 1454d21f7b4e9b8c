//! Motif recovery and linear-probe evaluation.

use rand::seq::SliceRandom;

use super::GraphTruth;
use crate::diffnum::Tensor;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::motif::{argmax_motifs, MotifTable};
use crate::segmenter::Sampler;
use crate::seed;
use crate::trainer::{segment_and_embed, TrainConfig, TrainState};

pub const PROBE_EPOCHS: usize = 200;
pub const PROBE_LR: f64 = 0.1;

/// Most frequent originating template among `nodes`; ties go to the lower
/// template id. `None` when noise nodes outnumber every template.
pub fn majority_template(nodes: &[usize], node_templates: &[i64]) -> Option<usize> {
    let mut counts: std::collections::BTreeMap<i64, usize> = std::collections::BTreeMap::new();
    for &v in nodes {
        *counts.entry(node_templates[v]).or_default() += 1;
    }
    let noise = counts.remove(&-1).unwrap_or(0);
    let (best, count) = counts
        .iter()
        .fold(None, |acc: Option<(i64, usize)>, (&t, &c)| match acc {
            Some((_, bc)) if bc >= c => acc,
            _ => Some((t, c)),
        })?;
    (count >= noise).then_some(best as usize)
}

/// Size-weighted mean over slots of the dominant label fraction, i.e.
/// `Σ_slot max_label count / Σ count`. `table[slot][label]` holds counts.
pub fn purity(table: &[Vec<usize>]) -> Result<f64> {
    let total: usize = table.iter().flatten().sum();
    if total == 0 {
        return Err(Error::Empty("purity of zero labelled subgraphs".into()));
    }
    let dominant: usize = table.iter().map(|row| row.iter().copied().max().unwrap_or(0)).sum();
    Ok(dominant as f64 / total as f64)
}

/// Motif recovery of a trained state.
#[derive(Debug, Clone, PartialEq)]
pub struct PurityReport {
    pub purity: f64,
    pub num_subgraphs: usize,
    /// Subgraphs with a template majority (the ones scored).
    pub num_labelled: usize,
    /// `slot x template` counts.
    pub table: Vec<Vec<usize>>,
    /// Argmax slot counts over all subgraphs.
    pub slot_sizes: Vec<usize>,
}

/// Segments every graph with the motif-guided sampler, assigns each
/// subgraph to its most similar motif and scores slots against the planted
/// templates.
pub fn motif_purity(
    dataset: &[Graph],
    truth: &[GraphTruth],
    state: &TrainState,
    config: &TrainConfig,
    num_templates: usize,
) -> Result<PurityReport> {
    super::check_truth(dataset, truth)?;
    let seg = segment_and_embed(dataset, &state.encoder, config, Sampler::Motif, 1.0, config.seed)?;
    if seg.is_empty() {
        return Err(Error::Empty("no subgraphs to score".into()));
    }
    slot_purity(&seg.parents, &seg.subgraphs, &seg.similarity(&state.motifs)?, truth, &state.motifs, num_templates)
}

fn slot_purity(
    parents: &[usize],
    subgraphs: &[crate::graph::Subgraph],
    similarity: &Tensor,
    truth: &[GraphTruth],
    motifs: &MotifTable,
    num_templates: usize,
) -> Result<PurityReport> {
    let slots = argmax_motifs(similarity);
    let k = motifs.num_motifs();
    let mut table = vec![vec![0usize; num_templates]; k];
    let mut slot_sizes = vec![0usize; k];
    let mut labelled = 0;
    for ((&p, s), &slot) in parents.iter().zip(subgraphs).zip(&slots) {
        slot_sizes[slot] += 1;
        if let Some(t) = majority_template(s.nodes(), &truth[p].node_templates) {
            if t >= num_templates {
                return Err(Error::InvalidArgument(format!("template id {t} out of range")));
            }
            table[slot][t] += 1;
            labelled += 1;
        }
    }
    Ok(PurityReport {
        purity: purity(&table)?,
        num_subgraphs: subgraphs.len(),
        num_labelled: labelled,
        table,
        slot_sizes,
    })
}

/// Per-graph mean of the raw node features (`M x F`), the no-learning
/// probe baseline.
pub fn raw_mean_features(graphs: &[Graph]) -> Result<Tensor> {
    let f = graphs.first().ok_or_else(|| Error::Empty("dataset".into()))?.num_features();
    let mut data = Vec::with_capacity(graphs.len() * f);
    for g in graphs {
        let groups = [(0..g.num_nodes()).collect::<Vec<_>>()];
        data.extend(Tensor::new(g.num_nodes(), f, g.features().to_vec())?.mean_rows(&groups)?.into_data());
    }
    Tensor::new(graphs.len(), f, data)
}

/// Held-out accuracy of a linear classifier on frozen features.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub mean: f64,
    /// Sample standard deviation over folds.
    pub std: f64,
    pub fold_accuracies: Vec<f64>,
}

/// Seeded stratified `folds`-fold multinomial logistic regression.
///
/// Features are standardized with training-fold statistics; weights start
/// at zero and take [`PROBE_EPOCHS`] full-batch gradient steps of size
/// [`PROBE_LR`] on the mean cross-entropy.
pub fn linear_probe(features: &Tensor, labels: &[i64], folds: usize, seed: u64) -> Result<ProbeResult> {
    let m = features.rows();
    if labels.len() != m {
        return Err(Error::shape("linear_probe", format!("{} labels for {m} rows", labels.len())));
    }
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    let mut classes: Vec<i64> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 classes".into()));
    }
    let y: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label is a class"))
        .collect();

    let mut rng = seed::rng(seed, &[0x9B0E]);
    let mut fold_of = vec![0usize; m];
    let mut next = 0;
    for c in 0..classes.len() {
        let mut members: Vec<usize> = (0..m).filter(|&i| y[i] == c).collect();
        if members.len() < folds {
            return Err(Error::InvalidArgument(format!(
                "class {} has {} members, fewer than {folds} folds",
                classes[c],
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for i in members {
            fold_of[i] = next % folds;
            next += 1;
        }
    }

    let fold_accuracies: Vec<f64> = (0..folds)
        .map(|f| {
            let train: Vec<usize> = (0..m).filter(|&i| fold_of[i] != f).collect();
            let test: Vec<usize> = (0..m).filter(|&i| fold_of[i] == f).collect();
            fit_and_score(features, &y, classes.len(), &train, &test)
        })
        .collect();
    let mean = fold_accuracies.iter().sum::<f64>() / folds as f64;
    let var = fold_accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (folds - 1) as f64;
    Ok(ProbeResult {
        mean,
        std: var.sqrt(),
        fold_accuracies,
    })
}

fn fit_and_score(x: &Tensor, y: &[usize], c: usize, train: &[usize], test: &[usize]) -> f64 {
    let d = x.cols();
    let n = train.len() as f64;
    let mut mean = vec![0.0; d];
    let mut sd = vec![0.0; d];
    for &i in train {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v / n;
        }
    }
    for &i in train {
        for ((s, v), m) in sd.iter_mut().zip(x.row(i)).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    let sd: Vec<f64> = sd.iter().map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 }).collect();
    let z = |i: usize| -> Vec<f64> {
        x.row(i).iter().zip(&mean).zip(&sd).map(|((v, m), s)| (v - m) / s).collect()
    };
    let ztrain: Vec<Vec<f64>> = train.iter().map(|&i| z(i)).collect();

    let mut w = vec![0.0; d * c];
    let mut b = vec![0.0; c];
    let mut probs = vec![0.0; c];
    for _ in 0..PROBE_EPOCHS {
        let mut gw = vec![0.0; d * c];
        let mut gb = vec![0.0; c];
        for (row, &i) in ztrain.iter().zip(train) {
            softmax_logits(row, &w, &b, &mut probs);
            probs[y[i]] -= 1.0;
            for (k, &p) in probs.iter().enumerate() {
                gb[k] += p;
                for (j, &v) in row.iter().enumerate() {
                    gw[j * c + k] += v * p;
                }
            }
        }
        for (wv, g) in w.iter_mut().zip(&gw) {
            *wv -= PROBE_LR * g / n;
        }
        for (bv, g) in b.iter_mut().zip(&gb) {
            *bv -= PROBE_LR * g / n;
        }
    }
    let correct = test
        .iter()
        .filter(|&&i| {
            softmax_logits(&z(i), &w, &b, &mut probs);
            let pred = (0..c).max_by(|&a, &bb| probs[a].total_cmp(&probs[bb]).then(bb.cmp(&a))).unwrap_or(0);
            pred == y[i]
        })
        .count();
    correct as f64 / test.len() as f64
}

fn softmax_logits(row: &[f64], w: &[f64], b: &[f64], out: &mut [f64]) {
    let c = b.len();
    for k in 0..c {
        out[k] = b[k] + row.iter().enumerate().map(|(j, v)| v * w[j * c + k]).sum::<f64>();
    }
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}
