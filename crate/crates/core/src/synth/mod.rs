//! Planted-motif synthetic benchmark.
//!
//! Graphs are built by chaining instances of small colored template graphs
//! with one bridge edge between consecutive instances, then perturbed by
//! random node/edge insertions and deletions. Every node remembers the
//! template it came from, which makes motif recovery measurable.

mod eval;
mod templates;

use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use eval::{
    linear_probe, majority_template, motif_purity, purity, raw_mean_features, ProbeResult, PurityReport, PROBE_EPOCHS,
    PROBE_LR,
};
pub use templates::{default_templates, MotifTemplate};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::{par, seed};

/// Retries for a noise operation that would disconnect the graph.
const NOISE_RETRIES: usize = 10;
const MAX_NOISE_RATE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub templates: Vec<MotifTemplate>,
    /// Template ids chained into each graph, one list per class.
    pub combinations: Vec<Vec<usize>>,
    pub graphs_per_combination: usize,
    pub node_add: f64,
    pub node_delete: f64,
    pub edge_add: f64,
    pub edge_delete: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            templates: default_templates(),
            combinations: vec![
                vec![2, 4, 7],
                vec![0, 1, 5],
                vec![3, 6, 0],
                vec![1, 2, 3],
                vec![4, 5],
                vec![6, 7],
                vec![0, 4],
                vec![1, 6],
                vec![2, 5],
                vec![3, 7],
            ],
            graphs_per_combination: 50,
            node_add: 0.05,
            node_delete: 0.05,
            edge_add: 0.05,
            edge_delete: 0.05,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn num_colors(&self) -> usize {
        self.templates
            .iter()
            .flat_map(|t| t.colors.iter())
            .max()
            .map_or(1, |m| m + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.templates.is_empty() {
            return Err(Error::Config("synth spec has no templates".into()));
        }
        for (i, t) in self.templates.iter().enumerate() {
            t.validate().map_err(|e| Error::Config(format!("template {i}: {e}")))?;
        }
        if self.combinations.is_empty() {
            return Err(Error::Config("synth spec has no combinations".into()));
        }
        for (c, combo) in self.combinations.iter().enumerate() {
            if combo.is_empty() {
                return Err(Error::Config(format!("combination {c} is empty")));
            }
            if let Some(t) = combo.iter().find(|&&t| t >= self.templates.len()) {
                return Err(Error::Config(format!("combination {c} names unknown template {t}")));
            }
        }
        for (name, r) in [
            ("node_add", self.node_add),
            ("node_delete", self.node_delete),
            ("edge_add", self.edge_add),
            ("edge_delete", self.edge_delete),
        ] {
            if !(0.0..=MAX_NOISE_RATE).contains(&r) {
                return Err(Error::Config(format!("{name} must be in [0, {MAX_NOISE_RATE}], got {r}")));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: SynthSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Per-graph ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphTruth {
    pub id: i64,
    /// Combination index.
    pub label: i64,
    /// Originating template of every node; `-1` for noise nodes.
    pub node_templates: Vec<i64>,
}

/// Counts of applied noise operations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NoiseStats {
    pub template_nodes: usize,
    pub nodes_deleted: usize,
    pub nodes_added: usize,
    pub edges_deleted: usize,
    pub edges_added: usize,
}

impl std::ops::AddAssign for NoiseStats {
    fn add_assign(&mut self, o: Self) {
        self.template_nodes += o.template_nodes;
        self.nodes_deleted += o.nodes_deleted;
        self.nodes_added += o.nodes_added;
        self.edges_deleted += o.edges_deleted;
        self.edges_added += o.edges_added;
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub graphs: Vec<Graph>,
    pub truth: Vec<GraphTruth>,
    pub stats: NoiseStats,
}

/// Mutable working graph used during generation.
struct Draft {
    colors: Vec<usize>,
    origin: Vec<i64>,
    alive: Vec<bool>,
    adj: Vec<Vec<usize>>,
}

impl Draft {
    fn add_node(&mut self, color: usize, origin: i64) -> usize {
        self.colors.push(color);
        self.origin.push(origin);
        self.alive.push(true);
        self.adj.push(Vec::new());
        self.colors.len() - 1
    }

    fn add_edge(&mut self, s: usize, t: usize) {
        self.adj[s].push(t);
        self.adj[t].push(s);
    }

    fn remove_edge(&mut self, s: usize, t: usize) {
        self.adj[s].retain(|&v| v != t);
        self.adj[t].retain(|&v| v != s);
    }

    fn remove_node(&mut self, v: usize) {
        for u in std::mem::take(&mut self.adj[v]) {
            self.adj[u].retain(|&x| x != v);
        }
        self.alive[v] = false;
    }

    fn has_edge(&self, s: usize, t: usize) -> bool {
        self.adj[s].contains(&t)
    }

    fn live(&self) -> Vec<usize> {
        (0..self.alive.len()).filter(|&v| self.alive[v]).collect()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = (0..self.adj.len())
            .filter(|&v| self.alive[v])
            .flat_map(|s| self.adj[s].iter().filter(move |&&t| t > s).map(move |&t| (s, t)))
            .collect();
        e.sort_unstable();
        e
    }

    /// Connected over live nodes, ignoring `skip_node` and `skip_edge`.
    fn connected_without(&self, skip_node: Option<usize>, skip_edge: Option<(usize, usize)>) -> bool {
        let live: Vec<usize> = self.live().into_iter().filter(|&v| Some(v) != skip_node).collect();
        let Some(&start) = live.first() else { return true };
        let mut seen = vec![false; self.alive.len()];
        seen[start] = true;
        let mut stack = vec![start];
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &u in &self.adj[v] {
                if seen[u] || !self.alive[u] || Some(u) == skip_node {
                    continue;
                }
                if let Some((a, b)) = skip_edge {
                    if (v, u) == (a, b) || (u, v) == (a, b) {
                        continue;
                    }
                }
                seen[u] = true;
                count += 1;
                stack.push(u);
            }
        }
        count == live.len()
    }
}

fn build_graph(spec: &SynthSpec, combo: &[usize], label: usize, id: i64, seed: u64) -> Result<(Graph, GraphTruth, NoiseStats)> {
    let mut rng = seed::rng(seed, &[0x5147, id as u64]);
    let mut d = Draft {
        colors: Vec::new(),
        origin: Vec::new(),
        alive: Vec::new(),
        adj: Vec::new(),
    };
    let mut stats = NoiseStats::default();
    let mut prev: Option<Vec<usize>> = None;
    for &t in combo {
        let tpl = &spec.templates[t];
        let ids: Vec<usize> = tpl.colors.iter().map(|&c| d.add_node(c, t as i64)).collect();
        for &(s, u) in &tpl.edges {
            d.add_edge(ids[s], ids[u]);
        }
        if let Some(p) = prev {
            let a = *p.choose(&mut rng).expect("templates are nonempty");
            let b = *ids.choose(&mut rng).expect("templates are nonempty");
            d.add_edge(a, b);
        }
        stats.template_nodes += ids.len();
        prev = Some(ids);
    }
    let num_colors = spec.num_colors();

    // node deletion: each template node independently
    for v in 0..d.alive.len() {
        if !rng.random_bool(spec.node_delete) {
            continue;
        }
        for attempt in 0..NOISE_RETRIES {
            let target = if attempt == 0 && d.alive[v] {
                v
            } else {
                *d.live().choose(&mut rng).expect("graph is nonempty")
            };
            if d.live().len() > 1 && d.connected_without(Some(target), None) {
                d.remove_node(target);
                stats.nodes_deleted += 1;
                break;
            }
        }
    }
    // edge deletion
    for (s, t) in d.edges() {
        if !rng.random_bool(spec.edge_delete) {
            continue;
        }
        if d.connected_without(None, Some((s, t))) {
            d.remove_edge(s, t);
            stats.edges_deleted += 1;
        }
    }
    // node insertion: attached to one random live node
    let base = d.live().len();
    for _ in 0..base {
        if !rng.random_bool(spec.node_add) {
            continue;
        }
        let anchor = *d.live().choose(&mut rng).expect("graph is nonempty");
        let v = d.add_node(rng.random_range(0..num_colors), -1);
        d.add_edge(anchor, v);
        stats.nodes_added += 1;
    }
    // edge insertion: one random non-edge per selected edge
    for _ in 0..d.edges().len() {
        if !rng.random_bool(spec.edge_add) {
            continue;
        }
        let live = d.live();
        for _ in 0..NOISE_RETRIES {
            let s = *live.choose(&mut rng).expect("graph is nonempty");
            let t = *live.choose(&mut rng).expect("graph is nonempty");
            if s != t && !d.has_edge(s, t) {
                d.add_edge(s, t);
                stats.edges_added += 1;
                break;
            }
        }
    }

    let live = d.live();
    let mut index = vec![usize::MAX; d.alive.len()];
    for (i, &v) in live.iter().enumerate() {
        index[v] = i;
    }
    let mut feats = vec![0.0; live.len() * num_colors];
    for (i, &v) in live.iter().enumerate() {
        feats[i * num_colors + d.colors[v]] = 1.0;
    }
    let edges = d.edges().into_iter().map(|(s, t)| (index[s], index[t]));
    let graph = Graph::new(id, num_colors, feats, edges, Some(label as i64))?;
    debug_assert!(graph.is_connected());
    let truth = GraphTruth {
        id,
        label: label as i64,
        node_templates: live.iter().map(|&v| d.origin[v]).collect(),
    };
    Ok((graph, truth, stats))
}

/// Builds the dataset described by `spec`: graph ids run from 0 in
/// combination-major order.
pub fn generate(spec: &SynthSpec) -> Result<Generated> {
    spec.validate()?;
    let per = spec.graphs_per_combination;
    let total = spec.combinations.len() * per;
    let built = par::map_range(total, |i| {
        let c = i / per;
        build_graph(spec, &spec.combinations[c], c, i as i64, spec.seed)
    });
    let mut out = Generated {
        graphs: Vec::with_capacity(total),
        truth: Vec::with_capacity(total),
        stats: NoiseStats::default(),
    };
    for r in built {
        let (g, t, s) = r?;
        out.graphs.push(g);
        out.truth.push(t);
        out.stats += s;
    }
    Ok(out)
}

pub fn write_truth_to(mut w: impl Write, truth: &[GraphTruth]) -> std::io::Result<()> {
    for t in truth {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_truth(path: impl AsRef<Path>, truth: &[GraphTruth]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_truth_to(&mut w, truth).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_truth(reader: impl BufRead) -> Result<Vec<GraphTruth>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::MalformedRecord {
            line: i + 1,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn load_truth(path: impl AsRef<Path>) -> Result<Vec<GraphTruth>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_truth(std::io::BufReader::new(file))
}

/// Checks that `truth` lines up with `graphs` (same ids, one template tag
/// per node).
pub fn check_truth(graphs: &[Graph], truth: &[GraphTruth]) -> Result<()> {
    if graphs.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "{} graphs but {} truth records",
            graphs.len(),
            truth.len()
        )));
    }
    for (g, t) in graphs.iter().zip(truth) {
        if g.id() != t.id || g.num_nodes() != t.node_templates.len() {
            return Err(Error::InvalidArgument(format!(
                "truth record {} does not match graph {}",
                t.id,
                g.id()
            )));
        }
    }
    Ok(())
}
