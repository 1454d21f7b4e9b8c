//! Heuristic subgraph samplers used as ablation baselines.

use std::collections::VecDeque;
use std::ops::RangeInclusive;

use rand::Rng as _;

use crate::graph::{Graph, Subgraph, MIN_SUBGRAPH_NODES};
use crate::seed::{self, Rng};

/// Inclusive range of random-walk step counts.
pub const WALK_LENGTH: RangeInclusive<usize> = 10..=40;

/// Attempts per requested sample before giving up on a graph.
const ATTEMPTS_PER_SAMPLE: usize = 3;

pub fn walk_length(rng: &mut Rng) -> usize {
    rng.random_range(WALK_LENGTH)
}

/// Sorted set of nodes visited by a `steps`-step uniform random walk from
/// `start`. The walk stops early at an isolated node.
pub fn random_walk(graph: &Graph, start: usize, steps: usize, rng: &mut Rng) -> Vec<usize> {
    let mut seen = vec![false; graph.num_nodes()];
    seen[start] = true;
    let mut at = start;
    for _ in 0..steps {
        let nbrs = graph.neighbors(at);
        if nbrs.is_empty() {
            break;
        }
        at = nbrs[rng.random_range(0..nbrs.len())];
        seen[at] = true;
    }
    (0..seen.len()).filter(|&v| seen[v]).collect()
}

/// Sorted set of nodes within `k` hops of `start`.
pub fn k_hop(graph: &Graph, start: usize, k: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; graph.num_nodes()];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        if dist[v] == k {
            continue;
        }
        for &u in graph.neighbors(v) {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    (0..dist.len()).filter(|&v| dist[v] != usize::MAX).collect()
}

fn sample_with(
    graph: &Graph,
    count: usize,
    seed: u64,
    stream: u64,
    mut draw: impl FnMut(&Graph, usize, &mut Rng) -> Vec<usize>,
) -> Vec<Subgraph> {
    let n = graph.num_nodes();
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut rng = seed::rng(seed, &[stream, graph.id() as u64]);
    for _ in 0..count * ATTEMPTS_PER_SAMPLE {
        if out.len() == count {
            break;
        }
        let start = rng.random_range(0..n);
        let nodes = draw(graph, start, &mut rng);
        if nodes.len() >= MIN_SUBGRAPH_NODES {
            let id = out.len();
            out.push(Subgraph::new(graph, nodes, id).expect("walks and balls are connected"));
        }
    }
    out
}

/// Up to `count` random-walk subgraphs (each from a seeded start node and a
/// walk length drawn from [`WALK_LENGTH`]). Candidates under four nodes are
/// discarded; at most `3 * count` candidates are drawn.
pub fn random_walk_sample(graph: &Graph, count: usize, seed: u64) -> Vec<Subgraph> {
    sample_with(graph, count, seed, 0x5257, |g, start, rng| {
        let steps = walk_length(rng);
        random_walk(g, start, steps, rng)
    })
}

/// Up to `count` k-hop neighbourhoods, `k` drawn from {1, 2} with equal
/// probability.
pub fn k_hop_sample(graph: &Graph, count: usize, seed: u64) -> Vec<Subgraph> {
    sample_with(graph, count, seed, 0x4B48, |g, start, rng| {
        let k = if rng.random::<bool>() { 2 } else { 1 };
        k_hop(g, start, k)
    })
}
