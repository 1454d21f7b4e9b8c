//! Joint training loop.
//!
//! Each step segments the batch (no gradient), re-encodes it on a fresh
//! tape, computes the motif, segmenter and contrastive losses, and applies
//! one Adam update to the encoder and the motif table together.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use config::TrainConfig;

use crate::contrastive::{contrast_matrix, contrastive_loss};
use crate::diffnum::{adam_step, AdamState, Tape, Tensor, Var};
use crate::encoder::{embed_graphs, embed_nodes, encode_nodes, BatchInput, EncoderParams, EncoderVars};
use crate::error::{Error, Result};
use crate::graph::{make_batches, Graph, GraphBatch, Subgraph};
use crate::motif::{argmax_motifs, motif_loss, motif_similarity, sinkhorn_assign, AssignmentMatrix, MotifTable};
use crate::segmenter::{self, affinity, segmenter_loss, Sampler};
use crate::{par, seed};

const CHECKPOINT_VERSION: u32 = 1;
const STREAM_EPOCH: u64 = 0xE90C;
const STREAM_SEGMENT: u64 = 0x5E6;
const EVAL_CHUNK: usize = 256;

/// Losses of one applied update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub step: u64,
    pub epoch: usize,
    pub total: f64,
    pub motif: f64,
    pub segmenter: f64,
    pub contrastive: f64,
    pub num_subgraphs: usize,
}

/// Everything needed to continue training.
///
/// Random streams are derived from `(config.seed, epoch, batch, graph)`,
/// so no generator state is stored: `epoch` and `step` fully position a
/// resumed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub encoder: EncoderParams,
    pub motifs: MotifTable,
    pub adam: AdamState,
    /// Completed epochs.
    pub epoch: usize,
    /// Applied updates.
    pub step: u64,
    /// Mean subgraphs per graph the heuristic samplers aim for.
    pub heuristic_rate: Option<f64>,
    pub history: Vec<StepLosses>,
    /// Per completed epoch: argmax motif counts over all training subgraphs.
    pub cluster_sizes: Vec<Vec<usize>>,
}

impl TrainState {
    pub fn init(input_dim: usize, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let encoder = EncoderParams::init(input_dim, config.encoder(), config.seed)?;
        let motifs = MotifTable::init(config.num_motifs, config.hidden_dim, config.seed)?;
        let adam = AdamState::new(&param_list(&encoder, &motifs), config.lr);
        Ok(Self {
            encoder,
            motifs,
            adam,
            epoch: 0,
            step: 0,
            heuristic_rate: None,
            history: Vec::new(),
            cluster_sizes: Vec::new(),
        })
    }

    pub fn validate(&self, config: &TrainConfig) -> Result<()> {
        self.encoder.validate()?;
        self.motifs.validate()?;
        if self.motifs.dim() != self.encoder.hidden_dim() {
            return Err(Error::Config("motif and encoder widths differ".into()));
        }
        if self.motifs.num_motifs() != config.num_motifs
            || self.encoder.num_layers() != config.layers
            || self.encoder.hidden_dim() != config.hidden_dim
        {
            return Err(Error::Config("checkpoint shapes disagree with its config".into()));
        }
        if self.adam.first_moment.len() != self.encoder.tensors().len() + 1 {
            return Err(Error::Config("optimizer state does not match parameters".into()));
        }
        if self.history.iter().any(|h| !(h.total.is_finite() && h.motif.is_finite())) {
            return Err(Error::NonFinite("loss history".into()));
        }
        Ok(())
    }
}

fn param_list(encoder: &EncoderParams, motifs: &MotifTable) -> Vec<Tensor> {
    let mut v: Vec<Tensor> = encoder.tensors().into_iter().cloned().collect();
    v.push(motifs.motifs.clone());
    v
}

/// Serialized training state plus the config that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: TrainConfig,
    pub state: TrainState,
}

impl Checkpoint {
    pub fn new(config: TrainConfig, state: TrainState) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            config,
            state,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "{}: checkpoint version {} (expected {CHECKPOINT_VERSION})",
                path.display(),
                ckpt.version
            )));
        }
        ckpt.config.validate()?;
        ckpt.state.validate(&ckpt.config)?;
        Ok(ckpt)
    }
}

/// `ckpt_epoch_<e>.json` inside `dir`.
pub fn checkpoint_path(dir: impl AsRef<Path>, epoch: usize) -> PathBuf {
    dir.as_ref().join(format!("ckpt_epoch_{epoch}.json"))
}

/// Subgraphs of one graph under `sampler`. `node_embeddings` is only read
/// by the motif-guided sampler; `rate` only by the heuristic ones.
pub fn sample_subgraphs(
    graph: &Graph,
    node_embeddings: &Tensor,
    config: &TrainConfig,
    sampler: Sampler,
    rate: f64,
    seed: u64,
) -> Result<Vec<Subgraph>> {
    match sampler {
        Sampler::Motif => Ok(segmenter::segment_graph(
            graph,
            node_embeddings,
            config.tau_n,
            config.max_segments,
            seed,
        )?
        .subgraphs),
        Sampler::Rw | Sampler::Khop => {
            let mut rng = seed::rng(seed, &[0xC0]);
            let whole = rate.max(0.0).floor();
            let count = whole as usize + usize::from(rng.random::<f64>() < rate - whole);
            Ok(if sampler == Sampler::Rw {
                segmenter::random_walk_sample(graph, count, seed)
            } else {
                segmenter::k_hop_sample(graph, count, seed)
            })
        }
    }
}

fn graph_rows(nodes: &Tensor, range: std::ops::Range<usize>) -> Tensor {
    let d = nodes.cols();
    Tensor::new(range.len(), d, nodes.data()[range.start * d..range.end * d].to_vec())
        .expect("rows of a finite tensor")
}

/// Segments every graph of a batch with the current encoder; returns
/// `(batch index, subgraph)` pairs in batch order.
pub fn segment_batch(
    batch: &GraphBatch<'_>,
    input: &BatchInput,
    state: &TrainState,
    config: &TrainConfig,
    stream: &[u64],
) -> Result<Vec<(usize, Subgraph)>> {
    let nodes = match config.sampler {
        Sampler::Motif => embed_nodes(input, &state.encoder)?,
        _ => Tensor::zeros(0, 0),
    };
    let rate = state.heuristic_rate.unwrap_or(1.0);
    let per_graph = par::map_range(batch.len(), |i| {
        let g = batch.graphs()[i];
        let emb = if config.sampler == Sampler::Motif {
            graph_rows(&nodes, batch.node_range(i))
        } else {
            Tensor::zeros(0, 0)
        };
        let mut path = stream.to_vec();
        path.push(i as u64);
        let s = seed::derive(config.seed, &path);
        sample_subgraphs(g, &emb, config, config.sampler, rate, s)
    });
    let mut out = Vec::new();
    for (i, subs) in per_graph.into_iter().enumerate() {
        out.extend(subs?.into_iter().map(|s| (i, s)));
    }
    Ok(out)
}

/// Handles of one step's loss graph.
#[derive(Debug)]
pub struct LossGraph {
    pub total: Var,
    pub motif: Var,
    pub segmenter: Var,
    pub contrastive: Var,
    pub encoder: EncoderVars,
    pub motifs: Var,
    pub s_tilde: Var,
    pub assignment: AssignmentMatrix,
}

/// Records the joint loss `lambda_m L_m + lambda_s L_s + lambda_c L_c` for
/// a segmented batch.
pub fn build_losses(
    tape: &mut Tape,
    input: &BatchInput,
    subgraphs: &[(usize, Subgraph)],
    encoder: &EncoderParams,
    motifs: &MotifTable,
    config: &TrainConfig,
    lambda_s: f64,
) -> Result<LossGraph> {
    if subgraphs.is_empty() {
        return Err(Error::Empty("batch produced no subgraphs".into()));
    }
    let enc = encoder.on_tape(tape);
    let motif_var = tape.leaf(motifs.motifs.clone());
    let nodes = encode_nodes(tape, input, &enc)?;
    let h = tape.mean_rows(nodes, std::sync::Arc::new(input.graph_groups()))?;
    let packed: Vec<Vec<usize>> = subgraphs
        .iter()
        .map(|(g, s)| s.nodes().iter().map(|v| input.offsets[*g] + v).collect())
        .collect();
    let e = tape.mean_rows(nodes, std::sync::Arc::new(packed))?;

    let (s, s_tilde) = motif_similarity(tape, motif_var, e, config.tau_g)?;
    let s_val = tape.value(s).clone();
    let assignment = sinkhorn_assign(&s_val, config.sinkhorn_lambda, config.sinkhorn_iters, config.sinkhorn_tol)?;
    let lm = motif_loss(tape, &assignment.q, s_tilde)?;

    let mut affinities = Vec::with_capacity(input.num_graphs());
    for i in 0..input.num_graphs() {
        let rows = tape.gather_rows(nodes, (input.offsets[i]..input.offsets[i + 1]).collect())?;
        affinities.push(affinity(tape, rows, config.tau_n)?);
    }
    let refs: Vec<(usize, &[usize])> = subgraphs.iter().map(|(g, s)| (*g, s.nodes())).collect();
    let ls = segmenter_loss(tape, &affinities, &refs, &s_val, config.top_fraction)?;

    let parents: Vec<usize> = subgraphs.iter().map(|(g, _)| *g).collect();
    let cm = contrast_matrix(tape, h, e, &parents, config.tau_g, config.normalize)?;
    let lc = contrastive_loss(tape, &cm)?;

    let wm = tape.scale(lm, config.lambda_m)?;
    let ws = tape.scale(ls, lambda_s)?;
    let wc = tape.scale(lc, config.lambda_c)?;
    let partial = tape.add(wm, ws)?;
    let total = tape.add(partial, wc)?;

    let (vm, vs, vc) = (tape.value(lm).item(), tape.value(ls).item(), tape.value(lc).item());
    let expected = vm * config.lambda_m + vs * lambda_s + vc * config.lambda_c;
    assert_eq!(
        tape.value(total).item().to_bits(),
        expected.to_bits(),
        "joint loss must equal the weighted sum of its parts"
    );
    Ok(LossGraph {
        total,
        motif: lm,
        segmenter: ls,
        contrastive: lc,
        encoder: enc,
        motifs: motif_var,
        s_tilde,
        assignment,
    })
}

/// Outcome of [`train_step`] on a batch that produced subgraphs.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub losses: StepLosses,
    /// Argmax motif of each subgraph, before the update.
    pub assignments: Vec<usize>,
}

/// One segmentation + update on `batch`. Returns `None` (and leaves
/// `state` untouched) when the batch yields no subgraph.
pub fn train_step(
    batch: &GraphBatch<'_>,
    state: &mut TrainState,
    config: &TrainConfig,
    epoch: usize,
    batch_index: usize,
) -> Result<Option<StepReport>> {
    let input = BatchInput::new(batch)?;
    let stream = [STREAM_SEGMENT, epoch as u64, batch_index as u64];
    let subgraphs = segment_batch(batch, &input, state, config, &stream)?;
    if subgraphs.is_empty() {
        log::warn!("epoch {epoch} batch {batch_index}: no subgraphs, step skipped");
        return Ok(None);
    }
    let lambda_s = config.lambda_s_at(epoch);
    let mut tape = Tape::new();
    let lg = build_losses(&mut tape, &input, &subgraphs, &state.encoder, &state.motifs, config, lambda_s)?;
    let total = tape.value(lg.total).item();
    if !total.is_finite() {
        return Err(Error::NonFinite(format!(
            "epoch {epoch} batch {batch_index}: loss {total} (L_m {}, L_s {}, L_c {})",
            tape.value(lg.motif).item(),
            tape.value(lg.segmenter).item(),
            tape.value(lg.contrastive).item()
        )));
    }
    let losses = StepLosses {
        step: state.step + 1,
        epoch,
        total,
        motif: tape.value(lg.motif).item(),
        segmenter: tape.value(lg.segmenter).item(),
        contrastive: tape.value(lg.contrastive).item(),
        num_subgraphs: subgraphs.len(),
    };
    let assignments = argmax_motifs(tape.value(lg.s_tilde));

    let mut grads = tape.backward(lg.total)?;
    let mut vars = lg.encoder.all();
    vars.push(lg.motifs);
    let grads: Vec<Tensor> = vars
        .iter()
        .map(|&v| grads.take(v).expect("parameters are leaves"))
        .collect();
    let mut params = param_list(&state.encoder, &state.motifs);
    adam_step(&mut params, &grads, &mut state.adam)?;
    state.motifs.motifs = params.pop().expect("motif table");
    for (dst, src) in state.encoder.tensors_mut().into_iter().zip(params) {
        *dst = src;
    }
    state.step += 1;
    state.history.push(losses);
    Ok(Some(StepReport { losses, assignments }))
}

/// Mean subgraph count per graph of the motif-guided sampler under the
/// current encoder.
pub fn motif_subgraph_rate(dataset: &[Graph], state: &TrainState, config: &TrainConfig) -> Result<f64> {
    let mut cfg = config.clone();
    cfg.sampler = Sampler::Motif;
    let subs = segment_dataset(dataset, &state.encoder, &cfg, Sampler::Motif, 1.0, cfg.seed)?;
    Ok(subs.iter().map(Vec::len).sum::<usize>() as f64 / dataset.len().max(1) as f64)
}

/// Subgraphs of a whole dataset with their frozen-encoder embeddings.
#[derive(Debug, Clone)]
pub struct SegmentedDataset {
    /// Dataset index of each subgraph's parent.
    pub parents: Vec<usize>,
    pub subgraphs: Vec<Subgraph>,
    /// `N x D` mean node embeddings.
    pub embeddings: Tensor,
}

impl SegmentedDataset {
    pub fn len(&self) -> usize {
        self.subgraphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subgraphs.is_empty()
    }

    /// `K x N` cosine similarity of each motif to each subgraph.
    pub fn similarity(&self, motifs: &MotifTable) -> Result<Tensor> {
        motifs.motifs.cosine(&self.embeddings)
    }
}

/// Segments every graph with `sampler` and embeds the subgraphs. Graph `i`
/// uses the seed derived from `(seed, i)`, so the result does not depend on
/// chunking or thread count.
pub fn segment_and_embed(
    dataset: &[Graph],
    encoder: &EncoderParams,
    config: &TrainConfig,
    sampler: Sampler,
    rate: f64,
    seed: u64,
) -> Result<SegmentedDataset> {
    let d = encoder.hidden_dim();
    let mut parents = Vec::new();
    let mut subgraphs = Vec::new();
    let mut emb = Vec::new();
    for (c, chunk) in dataset.chunks(EVAL_CHUNK).enumerate() {
        let batch = GraphBatch::new(chunk.iter().collect())?;
        let input = BatchInput::new(&batch)?;
        let nodes = embed_nodes(&input, encoder)?;
        let subs = par::map_range(chunk.len(), |i| {
            let s = seed::derive(seed, &[STREAM_SEGMENT, (c * EVAL_CHUNK + i) as u64]);
            sample_subgraphs(&chunk[i], &graph_rows(&nodes, batch.node_range(i)), config, sampler, rate, s)
        });
        let mut groups = Vec::new();
        for (i, s) in subs.into_iter().enumerate() {
            for sg in s? {
                groups.push(sg.nodes().iter().map(|v| input.offsets[i] + v).collect::<Vec<_>>());
                parents.push(c * EVAL_CHUNK + i);
                subgraphs.push(sg);
            }
        }
        emb.extend(nodes.mean_rows(&groups)?.into_data());
    }
    Ok(SegmentedDataset {
        parents,
        embeddings: Tensor::new(subgraphs.len(), d, emb)?,
        subgraphs,
    })
}

/// Subgraphs of every graph, in dataset order (see [`segment_and_embed`]).
pub fn segment_dataset(
    dataset: &[Graph],
    encoder: &EncoderParams,
    config: &TrainConfig,
    sampler: Sampler,
    rate: f64,
    seed: u64,
) -> Result<Vec<Vec<Subgraph>>> {
    let seg = segment_and_embed(dataset, encoder, config, sampler, rate, seed)?;
    let mut out = vec![Vec::new(); dataset.len()];
    for (p, s) in seg.parents.into_iter().zip(seg.subgraphs) {
        out[p].push(s);
    }
    Ok(out)
}

/// Frozen-encoder whole-graph embeddings (`M x D`) in dataset order.
pub fn extract_features(dataset: &[Graph], encoder: &EncoderParams) -> Result<Tensor> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset".into()));
    }
    let f = dataset[0].num_features();
    if f != encoder.input_dim() {
        return Err(Error::shape(
            "extract_features",
            format!("dataset has F = {f}, checkpoint expects {}", encoder.input_dim()),
        ));
    }
    let d = encoder.hidden_dim();
    let mut data = Vec::with_capacity(dataset.len() * d);
    for chunk in dataset.chunks(EVAL_CHUNK) {
        let batch = GraphBatch::new(chunk.iter().collect())?;
        data.extend(embed_graphs(&BatchInput::new(&batch)?, encoder)?.into_data());
    }
    Tensor::new(dataset.len(), d, data)
}

/// `step,L,L_m,L_s,L_c` rows for the whole history.
pub fn metrics_csv(history: &[StepLosses]) -> String {
    let mut s = String::from("step,L,L_m,L_s,L_c\n");
    for h in history {
        let _ = writeln!(s, "{},{},{},{},{}", h.step, h.total, h.motif, h.segmenter, h.contrastive);
    }
    s
}

pub fn clusters_csv(sizes: &[usize]) -> String {
    let mut s = String::from("motif,count\n");
    for (k, c) in sizes.iter().enumerate() {
        let _ = writeln!(s, "{k},{c}");
    }
    s
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs epochs `state.epoch + 1 ..= config.epochs`. With `out`, writes a
/// checkpoint, `metrics.csv` and `clusters_epoch_<e>.csv` after every
/// epoch.
pub fn train_epochs(dataset: &[Graph], config: &TrainConfig, state: &mut TrainState, out: Option<&Path>) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset".into()));
    }
    config.validate()?;
    state.validate(config)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    if config.sampler != Sampler::Motif && state.heuristic_rate.is_none() {
        let rate = motif_subgraph_rate(dataset, state, config)?;
        log::info!("heuristic sampler target: {rate:.3} subgraphs per graph");
        state.heuristic_rate = Some(rate);
    }
    for epoch in state.epoch + 1..=config.epochs {
        let batches = make_batches(dataset, config.batch_size, seed::derive(config.seed, &[STREAM_EPOCH, epoch as u64]))?;
        let mut sizes = vec![0usize; config.num_motifs];
        let mut skipped = 0;
        let first = state.history.len();
        for (b, batch) in batches.iter().enumerate() {
            match train_step(batch, state, config, epoch, b)? {
                Some(report) => {
                    for k in report.assignments {
                        sizes[k] += 1;
                    }
                }
                None => skipped += 1,
            }
        }
        state.epoch = epoch;
        state.cluster_sizes.push(sizes.clone());
        let done = &state.history[first..];
        if !done.is_empty() {
            let n = done.len() as f64;
            log::info!(
                "epoch {epoch}: L {:.5} L_m {:.5} L_s {:.5} L_c {:.5} ({} steps, {skipped} skipped)",
                done.iter().map(|h| h.total).sum::<f64>() / n,
                done.iter().map(|h| h.motif).sum::<f64>() / n,
                done.iter().map(|h| h.segmenter).sum::<f64>() / n,
                done.iter().map(|h| h.contrastive).sum::<f64>() / n,
                done.len()
            );
        }
        if let Some(dir) = out {
            Checkpoint::new(config.clone(), state.clone()).save(checkpoint_path(dir, epoch))?;
            write_file(&dir.join("metrics.csv"), &metrics_csv(&state.history))?;
            write_file(&dir.join(format!("clusters_epoch_{epoch}.csv")), &clusters_csv(&sizes))?;
        }
    }
    Ok(())
}

/// Fresh training run over `dataset`.
pub fn pretrain(dataset: &[Graph], config: &TrainConfig, out: Option<&Path>) -> Result<TrainState> {
    let first = dataset.first().ok_or_else(|| Error::Empty("dataset".into()))?;
    let mut state = TrainState::init(first.num_features(), config)?;
    train_epochs(dataset, config, &mut state, out)?;
    Ok(state)
}

/// Continues a checkpointed run up to `epochs` total epochs.
pub fn resume(dataset: &[Graph], checkpoint: Checkpoint, epochs: usize, out: Option<&Path>) -> Result<TrainState> {
    let mut config = checkpoint.config;
    config.epochs = epochs;
    let mut state = checkpoint.state;
    if let Some(g) = dataset.first() {
        if g.num_features() != state.encoder.input_dim() {
            return Err(Error::shape(
                "resume",
                format!("dataset has F = {}, checkpoint expects {}", g.num_features(), state.encoder.input_dim()),
            ));
        }
    }
    train_epochs(dataset, &config, &mut state, out)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Vec<Graph> {
        (0..6)
            .map(|i| {
                let n = 8 + i % 3;
                let feats: Vec<f64> = (0..n * 2).map(|k| ((k * 7 + i) % 5) as f64 / 4.0).collect();
                let mut edges: Vec<(usize, usize)> = (0..n - 1).map(|v| (v, v + 1)).collect();
                edges.push((0, n - 1));
                edges.push((1, 4));
                Graph::new(i as i64, 2, feats, edges, Some((i % 2) as i64)).unwrap()
            })
            .collect()
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            epochs: 2,
            batch_size: 4,
            hidden_dim: 8,
            layers: 2,
            num_motifs: 3,
            warmup_epochs: 0,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn step_updates_parameters() {
        let data = toy();
        let cfg = small_config();
        let mut state = TrainState::init(2, &cfg).unwrap();
        let before = state.clone();
        let batch = GraphBatch::new(data.iter().collect()).unwrap();
        let report = train_step(&batch, &mut state, &cfg, 1, 0).unwrap().unwrap();
        assert!(report.losses.total.is_finite());
        assert_eq!(state.step, 1);
        assert_ne!(state.encoder, before.encoder);
        assert_ne!(state.motifs, before.motifs);
    }

    #[test]
    fn checkpoint_round_trip() {
        let data = toy();
        let cfg = small_config();
        let dir = tempfile::tempdir().unwrap();
        let state = pretrain(&data, &cfg, Some(dir.path())).unwrap();
        let loaded = Checkpoint::load(checkpoint_path(dir.path(), 2)).unwrap();
        assert_eq!(loaded.state, state);
        assert_eq!(loaded.config, cfg);
        let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(metrics.lines().count(), state.history.len() + 1);
        assert!(dir.path().join("clusters_epoch_1.csv").exists());
    }

    #[test]
    fn features_match_direct_encoding() {
        let data = toy();
        let params = EncoderParams::init(2, small_config().encoder(), 4).unwrap();
        let f = extract_features(&data, &params).unwrap();
        let batch = GraphBatch::new(vec![&data[3]]).unwrap();
        let direct = embed_graphs(&BatchInput::new(&batch).unwrap(), &params).unwrap();
        assert_eq!(f.row(3), direct.row(0));
    }
}
