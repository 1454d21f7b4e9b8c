#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng as _;

use micrograph::contrastive::{contrast_matrix, contrastive_loss, Normalize};
use micrograph::diffnum::{Tape, Tensor, Var};
use micrograph::encoder::{encode_nodes, BatchInput, EncoderVars};
use micrograph::graph::{Graph, GraphBatch};
use micrograph::motif::{motif_loss, motif_similarity, sinkhorn_assign};
use micrograph::segmenter::{affinity, segmenter_loss};
use micrograph::seed;
use micrograph::synth::{default_templates, SynthSpec};
use micrograph::Result;

pub const FD_STEP: f64 = 1e-4;

pub fn uniform(rng: &mut seed::Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::new(rows, cols, data).unwrap()
}

fn evaluate<F>(inputs: &[Tensor], f: &F) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars).unwrap();
    tape.value(out).item()
}

/// Largest per-input relative error `|g - g_fd| / max(|g|, |g_fd|)` (vector
/// norms) between the tape gradient and central differences of step
/// [`FD_STEP`].
pub fn gradcheck<F>(inputs: &[Tensor], f: F) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars).unwrap();
    let grads = tape.backward(out).unwrap();

    let mut worst: f64 = 0.0;
    for (i, x) in inputs.iter().enumerate() {
        let analytic: Vec<f64> = match grads.get(vars[i]) {
            Some(g) => g.data().to_vec(),
            None => vec![0.0; x.data().len()],
        };
        let mut numeric = Vec::with_capacity(analytic.len());
        for k in 0..x.data().len() {
            let mut shifted = inputs.to_vec();
            let mut data = x.data().to_vec();
            data[k] = x.data()[k] + FD_STEP;
            shifted[i] = Tensor::new(x.rows(), x.cols(), data.clone()).unwrap();
            let plus = evaluate(&shifted, &f);
            data[k] = x.data()[k] - FD_STEP;
            shifted[i] = Tensor::new(x.rows(), x.cols(), data).unwrap();
            let minus = evaluate(&shifted, &f);
            numeric.push((plus - minus) / (2.0 * FD_STEP));
        }
        let diff = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let scale = norm(&analytic).max(norm(&numeric));
        if scale > 1e-12 {
            worst = worst.max(diff / scale);
        }
    }
    worst
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Three small connected graphs with 3 features each.
pub fn toy_graphs() -> Vec<Graph> {
    let mut rng = seed::rng(11, &[]);
    let shapes: [(usize, Vec<(usize, usize)>); 3] = [
        (6, vec![(0, 1), (1, 2), (2, 3), (3, 0), (3, 4), (4, 5)]),
        (7, vec![(0, 1), (0, 2), (0, 3), (3, 4), (4, 5), (5, 6), (6, 3)]),
        (5, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)]),
    ];
    shapes
        .into_iter()
        .enumerate()
        .map(|(i, (n, edges))| {
            let feats = (0..n * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
            Graph::new(i as i64, 3, feats, edges, Some(i as i64)).unwrap()
        })
        .collect()
}

/// Normalized cut of a labelling under `W = (A + Aᵀ) / 2`.
pub fn normalized_cut(a: &Tensor, labels: &[usize]) -> f64 {
    let n = a.rows();
    let w = |i: usize, j: usize| 0.5 * (a.get(i, j) + a.get(j, i));
    let k = labels.iter().max().map_or(0, |m| m + 1);
    (0..k)
        .map(|c| {
            let mut cut = 0.0;
            let mut vol = 0.0;
            for i in (0..n).filter(|&i| labels[i] == c) {
                for j in 0..n {
                    vol += w(i, j);
                    if labels[j] != c {
                        cut += w(i, j);
                    }
                }
            }
            if vol > 0.0 {
                cut / vol
            } else {
                0.0
            }
        })
        .sum()
}

/// Minimum normalized cut over every bipartition into two non-empty sides.
pub fn best_bipartition(a: &Tensor) -> f64 {
    let n = a.rows();
    (1..(1u32 << (n - 1)))
        .map(|mask| {
            let labels: Vec<usize> = (0..n).map(|i| if i > 0 && mask >> (i - 1) & 1 == 1 { 1 } else { 0 }).collect();
            normalized_cut(a, &labels)
        })
        .fold(f64::INFINITY, f64::min)
}

fn logsumexp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Entropic transport plan with uniform marginals `1/K`, `1/N`, computed
/// with log-domain dual updates until the potentials move less than `tol`.
pub fn log_sinkhorn(s: &Tensor, lambda: f64, tol: f64) -> Tensor {
    let (k, n) = (s.rows(), s.cols());
    let (lr, lc) = (-(k as f64).ln(), -(n as f64).ln());
    let mut f = vec![0.0; k];
    let mut g = vec![0.0; n];
    for _ in 0..1_000_000 {
        let mut delta: f64 = 0.0;
        for r in 0..k {
            let new = lr - logsumexp((0..n).map(|c| lambda * s.get(r, c) + g[c]));
            delta = delta.max((new - f[r]).abs());
            f[r] = new;
        }
        for c in 0..n {
            let new = lc - logsumexp((0..k).map(|r| lambda * s.get(r, c) + f[r]));
            delta = delta.max((new - g[c]).abs());
            g[c] = new;
        }
        if delta < tol {
            break;
        }
    }
    let q = (0..k * n).map(|i| (lambda * s.get(i / n, i % n) + f[i / n] + g[i % n]).exp()).collect();
    Tensor::new(k, n, q).unwrap()
}

/// Three templates, three combinations, `per` graphs each.
pub fn small_spec(per: usize, seed: u64) -> SynthSpec {
    let templates = default_templates();
    SynthSpec {
        templates: vec![templates[0].clone(), templates[3].clone(), templates[4].clone()],
        combinations: vec![vec![0, 1], vec![1, 2], vec![0, 2]],
        graphs_per_combination: per,
        seed,
        ..SynthSpec::default()
    }
}

pub const TOY_HIDDEN: usize = 6;
pub const TOY_MOTIFS: usize = 3;

/// A fixed segmentation of [`toy_graphs`] as `(graph, local nodes)`.
pub fn toy_subgraphs() -> Vec<(usize, Vec<usize>)> {
    vec![
        (0, vec![0, 1, 2, 3]),
        (0, vec![2, 3, 4, 5]),
        (1, vec![0, 1, 2, 3]),
        (1, vec![3, 4, 5, 6]),
        (2, vec![0, 1, 2, 3, 4]),
    ]
}

/// Two-layer encoder parameters followed by the motif table.
pub fn toy_params(seed: u64) -> Vec<Tensor> {
    let mut rng = seed::rng(seed, &[0x70]);
    vec![
        uniform(&mut rng, 3, TOY_HIDDEN),
        uniform(&mut rng, 1, TOY_HIDDEN),
        uniform(&mut rng, TOY_HIDDEN, TOY_HIDDEN),
        uniform(&mut rng, 1, TOY_HIDDEN),
        uniform(&mut rng, TOY_MOTIFS, TOY_HIDDEN),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Motif,
    Segmenter,
    Contrastive,
}

pub const TOY_TAU: f64 = 0.5;
pub const TOY_TOP_FRACTION: f64 = 0.5;

/// Graph and subgraph embeddings plus `(S, S̃)` of the toy batch.
fn toy_forward(tape: &mut Tape, vars: &[Var], input: &BatchInput) -> Result<(Var, Var, Var, Var, Var)> {
    let enc = EncoderVars {
        weights: vec![vars[0], vars[2]],
        biases: vec![vars[1], vars[3]],
    };
    let nodes = encode_nodes(tape, input, &enc)?;
    let h = tape.mean_rows(nodes, Arc::new(input.graph_groups()))?;
    let packed: Vec<Vec<usize>> = toy_subgraphs()
        .iter()
        .map(|(g, s)| s.iter().map(|v| input.offsets[*g] + v).collect())
        .collect();
    let e = tape.mean_rows(nodes, Arc::new(packed))?;
    let (s, s_tilde) = motif_similarity(tape, vars[4], e, TOY_TAU)?;
    Ok((nodes, h, e, s, s_tilde))
}

/// Records one loss of the toy batch. `frozen` holds the assignment `Q` and
/// the similarity used for the segmenter thresholds, both treated as
/// constants exactly as during training.
pub fn toy_loss(tape: &mut Tape, vars: &[Var], input: &BatchInput, part: Part, frozen: &(Tensor, Tensor)) -> Result<Var> {
    let (nodes, h, e, _, s_tilde) = toy_forward(tape, vars, input)?;
    match part {
        Part::Motif => motif_loss(tape, &frozen.0, s_tilde),
        Part::Segmenter => {
            let mut affinities = Vec::new();
            for i in 0..input.num_graphs() {
                let rows = tape.gather_rows(nodes, (input.offsets[i]..input.offsets[i + 1]).collect())?;
                affinities.push(affinity(tape, rows, TOY_TAU)?);
            }
            let subs = toy_subgraphs();
            let refs: Vec<(usize, &[usize])> = subs.iter().map(|(g, s)| (*g, s.as_slice())).collect();
            segmenter_loss(tape, &affinities, &refs, &frozen.1, TOY_TOP_FRACTION)
        }
        Part::Contrastive => {
            let parents: Vec<usize> = toy_subgraphs().iter().map(|(g, _)| *g).collect();
            let cm = contrast_matrix(tape, h, e, &parents, TOY_TAU, Normalize::Graphs)?;
            contrastive_loss(tape, &cm)
        }
    }
}

/// `Q` and `S` of the toy batch at `params`.
pub fn toy_frozen(params: &[Tensor], input: &BatchInput) -> (Tensor, Tensor) {
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|t| tape.leaf(t.clone())).collect();
    let (_, _, _, s, _) = toy_forward(&mut tape, &vars, input).unwrap();
    let s = tape.value(s).clone();
    let q = sinkhorn_assign(&s, 20.0, 1000, 1e-12).unwrap().q;
    (q, s)
}

pub fn toy_input(graphs: &[Graph]) -> BatchInput {
    BatchInput::new(&GraphBatch::new(graphs.iter().collect()).unwrap()).unwrap()
}

/// Finite-difference error of each composed loss on the toy batch.
pub fn composed_gradcheck(seed: u64) -> Vec<(Part, f64)> {
    let graphs = toy_graphs();
    let input = toy_input(&graphs);
    let params = toy_params(seed);
    let frozen = toy_frozen(&params, &input);
    [Part::Motif, Part::Segmenter, Part::Contrastive]
        .into_iter()
        .map(|part| {
            let err = gradcheck(&params, |tape, vars| toy_loss(tape, vars, &input, part, &frozen));
            (part, err)
        })
        .collect()
}

/// Outcome of [`sinkhorn_sweep`].
#[derive(Debug, Clone, Copy)]
pub struct SinkhornSweep {
    pub marginal: f64,
    pub entry: f64,
    pub unconverged: usize,
    /// Time spent inside `sinkhorn_assign` only.
    pub solver_time: std::time::Duration,
}

/// Worst marginal violation and worst entry gap to [`log_sinkhorn`] over
/// `count` random instances with `K, N` in `1..=8` and `lambda` cycling
/// through 1, 10, 50.
pub fn sinkhorn_sweep(count: usize, max_iters: usize, tol: f64) -> SinkhornSweep {
    let mut rng = seed::rng(2024, &[0x51]);
    let mut out = SinkhornSweep {
        marginal: 0.0,
        entry: 0.0,
        unconverged: 0,
        solver_time: std::time::Duration::ZERO,
    };
    for i in 0..count {
        let lambda = [1.0, 10.0, 50.0][i % 3];
        let k = rng.random_range(1..=8);
        let n = rng.random_range(1..=8);
        let s = uniform(&mut rng, k, n);
        let start = std::time::Instant::now();
        let a = sinkhorn_assign(&s, lambda, max_iters, tol).unwrap();
        out.solver_time += start.elapsed();
        out.unconverged += usize::from(!a.converged);
        for r in 0..k {
            out.marginal = out.marginal.max((a.q.row(r).iter().sum::<f64>() - 1.0 / k as f64).abs());
        }
        for c in 0..n {
            out.marginal = out.marginal.max(((0..k).map(|r| a.q.get(r, c)).sum::<f64>() - 1.0 / n as f64).abs());
        }
        let oracle = log_sinkhorn(&s, lambda, 1e-12);
        for (x, y) in a.q.data().iter().zip(oracle.data()) {
            out.entry = out.entry.max((x - y).abs());
        }
    }
    out
}

/// Random 6-node affinities from random embeddings; returns how many of
/// `count` two-way spectral splits come within 10% of the best
/// bipartition's normalized cut.
pub fn spectral_sweep(count: usize) -> usize {
    let mut rng = seed::rng(77, &[0x5C]);
    (0..count)
        .filter(|&i| {
            let emb = uniform(&mut rng, 6, 4);
            let a = micrograph::segmenter::affinity_values(&emb, 0.2).unwrap();
            let labels = micrograph::segmenter::spectral_segment(&a, 2, i as u64).unwrap();
            normalized_cut(&a, &labels) <= 1.1 * best_bipartition(&a)
        })
        .count()
}

type LossFn = Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var>>;

/// `sum(x ⊙ r)` with fixed random `r`, giving every entry of `x` its own
/// upstream gradient.
pub fn weighted_sum(tape: &mut Tape, x: Var, salt: u64) -> Result<Var> {
    let shape = tape.value(x).shape();
    let r = tape.constant(uniform(&mut seed::rng(99, &[salt]), shape[0], shape[1]));
    let p = tape.mul(x, r)?;
    tape.sum(p)
}

/// Finite-difference error of every tape op on random inputs in [-1, 1]
/// (shifted where the op needs it), over `repeats` draws.
pub fn op_gradcheck_suite(repeats: u64) -> Vec<(&'static str, f64)> {
    let prop = Arc::new(
        micrograph::diffnum::SparseRows::new(
            4,
            vec![
                vec![(0, 0.5), (1, 0.5)],
                vec![(0, 0.25), (1, 0.25), (2, 0.5)],
                vec![(1, 0.5), (3, 0.5)],
                vec![(3, 1.0)],
            ],
        )
        .unwrap(),
    );
    let cases: Vec<(&'static str, Vec<(usize, usize)>, LossFn)> = vec![
        ("matmul", vec![(3, 4), (4, 2)], Box::new(|t, v| { let y = t.matmul(v[0], v[1])?; weighted_sum(t, y, 1) })),
        ("matmul_t", vec![(3, 4), (5, 4)], Box::new(|t, v| { let y = t.matmul_t(v[0], v[1])?; weighted_sum(t, y, 2) })),
        ("add", vec![(3, 4), (3, 4)], Box::new(|t, v| { let y = t.add(v[0], v[1])?; weighted_sum(t, y, 3) })),
        ("add_row", vec![(3, 4), (1, 4)], Box::new(|t, v| { let y = t.add_row(v[0], v[1])?; weighted_sum(t, y, 4) })),
        ("scale", vec![(3, 2)], Box::new(|t, v| { let y = t.scale(v[0], 1.3)?; weighted_sum(t, y, 5) })),
        ("mul", vec![(3, 3), (3, 3)], Box::new(|t, v| { let y = t.mul(v[0], v[1])?; weighted_sum(t, y, 6) })),
        ("row_softmax", vec![(3, 5)], Box::new(|t, v| { let y = t.row_softmax(v[0], 0.2)?; weighted_sum(t, y, 7) })),
        ("col_softmax", vec![(5, 3)], Box::new(|t, v| { let y = t.col_softmax(v[0], 0.2)?; weighted_sum(t, y, 8) })),
        ("l2_normalize_rows", vec![(4, 3)], Box::new(|t, v| { let y = t.l2_normalize_rows(v[0])?; weighted_sum(t, y, 9) })),
        ("mean_rows", vec![(5, 3)], Box::new(|t, v| {
            let y = t.mean_rows(v[0], Arc::new(vec![vec![0, 2, 4], vec![1, 3], vec![2]]))?;
            weighted_sum(t, y, 10)
        })),
        ("gather_rows", vec![(5, 3)], Box::new(|t, v| { let y = t.gather_rows(v[0], vec![4, 1, 1])?; weighted_sum(t, y, 11) })),
        ("propagate", vec![(4, 3)], Box::new(move |t, v| { let y = t.propagate(v[0], prop.clone())?; weighted_sum(t, y, 12) })),
        ("log", vec![(3, 3)], Box::new(|t, v| {
            let sq = t.mul(v[0], v[0])?;
            let half = t.constant(Tensor::full(3, 3, 0.5));
            let shifted = t.add(sq, half)?;
            let y = t.log(shifted)?;
            weighted_sum(t, y, 13)
        })),
        ("relu", vec![(4, 4)], Box::new(|t, v| { let y = t.relu(v[0])?; weighted_sum(t, y, 14) })),
        ("sum", vec![(2, 3)], Box::new(|t, v| t.sum(v[0]))),
        ("trace_product", vec![(3, 3), (3, 3)], Box::new(|t, v| t.trace_product(v[0], v[1]))),
    ];
    cases
        .into_iter()
        .map(|(name, shapes, f)| {
            let worst = (0..repeats)
                .map(|r| {
                    let mut rng = seed::rng(r, &[0xF0]);
                    let inputs: Vec<Tensor> = shapes
                        .iter()
                        .map(|&(a, b)| {
                            let x = uniform(&mut rng, a, b);
                            if name == "relu" {
                                x.map(|v| if v.abs() < 0.05 { v + 0.1 } else { v })
                            } else {
                                x
                            }
                        })
                        .collect();
                    gradcheck(&inputs, &f)
                })
                .fold(0.0, f64::max);
            (name, worst)
        })
        .collect()
}
