//! Graph data model, the line-delimited dataset format, and batching.
//!
//! A dataset file holds one JSON object per line:
//!
//! ```text
//! {"id": 0, "x": [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], "edges": [[0, 1], [1, 2], [0, 2]], "y": 3}
//! ```
//!
//! `x` is the dense node feature matrix. A record may instead carry
//! `"x_cat": [c0, c1, ...]`, one integer category per node; the loader one-hot
//! encodes those with width `max category + 1` over the whole file. An
//! optional `"edge_attr"` field is accepted and ignored. Edges are undirected.

use std::collections::{BTreeSet, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// An undirected attributed graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    id: i64,
    num_features: usize,
    features: Vec<f64>,
    edges: Vec<(usize, usize)>,
    label: Option<i64>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from row-major features (`n * num_features` values).
    ///
    /// Edges are canonicalised to `(min, max)` and sorted. Self-loops,
    /// duplicate edges and out-of-range endpoints are rejected.
    pub fn new(
        id: i64,
        num_features: usize,
        features: Vec<f64>,
        edges: impl IntoIterator<Item = (usize, usize)>,
        label: Option<i64>,
    ) -> Result<Self> {
        if num_features == 0 {
            return Err(Error::InvalidGraph(format!("graph {id}: zero feature dimension")));
        }
        if features.is_empty() || !features.len().is_multiple_of(num_features) {
            return Err(Error::InvalidGraph(format!(
                "graph {id}: {} feature values is not a positive multiple of F = {num_features}",
                features.len()
            )));
        }
        if let Some(v) = features.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("graph {id}: node feature {v}")));
        }
        let n = features.len() / num_features;
        let mut canon: Vec<(usize, usize)> = Vec::new();
        for (s, t) in edges {
            if s >= n || t >= n {
                return Err(Error::DanglingEdge { graph: id, s, t, n });
            }
            if s == t {
                return Err(Error::InvalidGraph(format!("graph {id}: self-loop on node {s}")));
            }
            canon.push((s.min(t), s.max(t)));
        }
        canon.sort_unstable();
        if let Some(w) = canon.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph(format!(
                "graph {id}: duplicate edge ({}, {})",
                w[0].0, w[0].1
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(s, t) in &canon {
            adjacency[s].push(t);
            adjacency[t].push(s);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Self {
            id,
            num_features,
            features,
            edges: canon,
            label,
            adjacency,
        })
    }

    pub fn id(&self) -> i64 {
        self.id
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    /// Row-major `n x F` node features.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn node_feature(&self, node: usize) -> &[f64] {
        &self.features[node * self.num_features..(node + 1) * self.num_features]
    }

    /// Canonical edge list, `(min, max)` sorted lexicographically.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn label(&self) -> Option<i64> {
        self.label
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn with_id(mut self, id: i64) -> Self {
        self.id = id;
        self
    }

    pub fn has_edge(&self, s: usize, t: usize) -> bool {
        self.adjacency
            .get(s)
            .is_some_and(|nbrs| nbrs.binary_search(&t).is_ok())
    }

    /// Connected components of the subgraph induced by `nodes`, each sorted,
    /// ordered by smallest member.
    pub fn induced_components(&self, nodes: &[usize]) -> Vec<Vec<usize>> {
        let n = self.num_nodes();
        let mut inside = vec![false; n];
        for &v in nodes {
            inside[v] = true;
        }
        let mut seen = vec![false; n];
        let mut sorted: Vec<usize> = nodes.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut components = Vec::new();
        for &start in &sorted {
            if seen[start] {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(v) = queue.pop_front() {
                comp.push(v);
                for &w in &self.adjacency[v] {
                    if inside[w] && !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        components
    }

    /// Whether the subgraph induced by `nodes` is connected (and nonempty).
    pub fn is_connected_subset(&self, nodes: &[usize]) -> bool {
        !nodes.is_empty() && self.induced_components(nodes).len() == 1
    }

    pub fn is_connected(&self) -> bool {
        let all: Vec<usize> = (0..self.num_nodes()).collect();
        self.is_connected_subset(&all)
    }
}

/// Minimum node count of an emitted subgraph.
pub const MIN_SUBGRAPH_NODES: usize = 4;

/// A connected node subset of a parent graph with at least
/// [`MIN_SUBGRAPH_NODES`] nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgraph {
    parent_id: i64,
    node_indices: Vec<usize>,
    segment_id: usize,
}

impl Subgraph {
    pub fn new(parent: &Graph, nodes: impl IntoIterator<Item = usize>, segment_id: usize) -> Result<Self> {
        let set: BTreeSet<usize> = nodes.into_iter().collect();
        let node_indices: Vec<usize> = set.into_iter().collect();
        if node_indices.len() < MIN_SUBGRAPH_NODES {
            return Err(Error::InvalidArgument(format!(
                "subgraph of graph {} has {} nodes, need at least {MIN_SUBGRAPH_NODES}",
                parent.id(),
                node_indices.len()
            )));
        }
        if let Some(&bad) = node_indices.iter().find(|&&v| v >= parent.num_nodes()) {
            return Err(Error::InvalidArgument(format!(
                "subgraph node {bad} out of range for graph {}",
                parent.id()
            )));
        }
        if !parent.is_connected_subset(&node_indices) {
            return Err(Error::InvalidArgument(format!(
                "subgraph of graph {} is not connected",
                parent.id()
            )));
        }
        Ok(Self {
            parent_id: parent.id(),
            node_indices,
            segment_id,
        })
    }

    pub fn parent_id(&self) -> i64 {
        self.parent_id
    }

    pub fn nodes(&self) -> &[usize] {
        &self.node_indices
    }

    pub fn segment_id(&self) -> usize {
        self.segment_id
    }

    pub fn len(&self) -> usize {
        self.node_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_indices.is_empty()
    }
}

/// A group of graphs whose nodes are packed into one node table.
#[derive(Debug, Clone)]
pub struct GraphBatch<'a> {
    graphs: Vec<&'a Graph>,
    offsets: Vec<usize>,
}

impl<'a> GraphBatch<'a> {
    pub fn new(graphs: Vec<&'a Graph>) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::Empty("batch has no graphs".into()));
        }
        let f = graphs[0].num_features();
        let mut offsets = Vec::with_capacity(graphs.len() + 1);
        offsets.push(0);
        for g in &graphs {
            if g.num_features() != f {
                return Err(Error::shape(
                    "batch",
                    format!("graph {} has F = {}, batch has F = {f}", g.id(), g.num_features()),
                ));
            }
            offsets.push(offsets.last().unwrap() + g.num_nodes());
        }
        Ok(Self { graphs, offsets })
    }

    pub fn graphs(&self) -> &[&'a Graph] {
        &self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Start offset of every graph in the packed node table, plus a final
    /// entry equal to the packed node count.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn num_nodes(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn num_features(&self) -> usize {
        self.graphs[0].num_features()
    }

    pub fn node_range(&self, graph: usize) -> std::ops::Range<usize> {
        self.offsets[graph]..self.offsets[graph + 1]
    }
}

/// Seeded shuffle of the dataset partitioned into batches of `batch_size`
/// (the last batch may be smaller).
pub fn make_batches(dataset: &[Graph], batch_size: usize, seed: u64) -> Result<Vec<GraphBatch<'_>>> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset has no graphs".into()));
    }
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut seed::rng(seed, &[0xBA7C]));
    order
        .chunks(batch_size)
        .map(|chunk| GraphBatch::new(chunk.iter().map(|&i| &dataset[i]).collect()))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x_cat: Option<Vec<usize>>,
    edges: Vec<[usize; 2]>,
    #[serde(default)]
    y: Option<i64>,
    #[serde(default, skip_serializing)]
    #[allow(dead_code)]
    edge_attr: Option<serde_json::Value>,
}

/// Parses a dataset from any buffered reader (see module docs for the format).
pub fn read_dataset(reader: impl BufRead) -> Result<Vec<Graph>> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::MalformedRecord {
            line: lineno,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: lineno,
            msg: e.to_string(),
        })?;
        records.push((lineno, rec));
    }

    let cat_width = records
        .iter()
        .filter_map(|(_, r)| r.x_cat.as_ref())
        .flat_map(|c| c.iter().copied())
        .max()
        .map(|m| m + 1);

    let mut graphs = Vec::with_capacity(records.len());
    let mut dim: Option<usize> = None;
    for (lineno, rec) in records {
        let (f, features) = match (&rec.x, &rec.x_cat) {
            (Some(_), Some(_)) => {
                return Err(Error::MalformedRecord {
                    line: lineno,
                    msg: "both x and x_cat given".into(),
                })
            }
            (None, None) => {
                return Err(Error::MalformedRecord {
                    line: lineno,
                    msg: "missing node features x".into(),
                })
            }
            (Some(x), None) => {
                let f = x.first().map_or(0, Vec::len);
                if x.is_empty() || f == 0 {
                    return Err(Error::MalformedRecord {
                        line: lineno,
                        msg: "empty node feature matrix".into(),
                    });
                }
                if let Some(row) = x.iter().find(|r| r.len() != f) {
                    return Err(Error::InconsistentFeatureDim {
                        line: lineno,
                        expected: f,
                        found: row.len(),
                    });
                }
                (f, x.iter().flatten().copied().collect::<Vec<_>>())
            }
            (None, Some(cats)) => {
                if cats.is_empty() {
                    return Err(Error::MalformedRecord {
                        line: lineno,
                        msg: "empty x_cat".into(),
                    });
                }
                let width = cat_width.unwrap_or(1);
                let mut feats = vec![0.0; cats.len() * width];
                for (v, &c) in cats.iter().enumerate() {
                    feats[v * width + c] = 1.0;
                }
                (width, feats)
            }
        };
        match dim {
            None => dim = Some(f),
            Some(d) if d != f => {
                return Err(Error::InconsistentFeatureDim {
                    line: lineno,
                    expected: d,
                    found: f,
                })
            }
            _ => {}
        }
        let edges = rec.edges.iter().map(|e| (e[0], e[1]));
        let g = Graph::new(rec.id, f, features, edges, rec.y).map_err(|e| match e {
            Error::DanglingEdge { .. } => e,
            other => Error::MalformedRecord {
                line: lineno,
                msg: other.to_string(),
            },
        })?;
        graphs.push(g);
    }
    Ok(graphs)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<Graph>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(BufReader::new(file))
}

/// Canonical single-line JSON encoding of a graph.
pub fn graph_to_json(g: &Graph) -> String {
    let rec = Record {
        id: g.id(),
        x: Some(
            g.features()
                .chunks(g.num_features())
                .map(<[f64]>::to_vec)
                .collect(),
        ),
        x_cat: None,
        edges: g.edges().iter().map(|&(s, t)| [s, t]).collect(),
        y: g.label(),
        edge_attr: None,
    };
    serde_json::to_string(&rec).expect("graph records always serialize")
}

pub fn write_dataset_to(mut writer: impl Write, graphs: &[Graph]) -> std::io::Result<()> {
    for g in graphs {
        writeln!(writer, "{}", graph_to_json(g))?;
    }
    writer.flush()
}

pub fn write_dataset(path: impl AsRef<Path>, graphs: &[Graph]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset_to(BufWriter::new(file), graphs).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::new(0, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0], [(0, 1), (1, 2), (2, 0)], Some(1)).unwrap()
    }

    #[test]
    fn loads_triangle() {
        let src = r#"{"id": 0, "x": [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], "edges": [[0, 1], [1, 2], [2, 0]], "y": 1}"#;
        let gs = read_dataset(src.as_bytes()).unwrap();
        assert_eq!(gs.len(), 1);
        assert_eq!(gs[0].num_nodes(), 3);
        assert_eq!(gs[0], triangle());
        assert_eq!(gs[0].edges(), &[(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn dangling_edge_is_rejected() {
        let src = r#"{"id": 4, "x": [[1.0], [1.0], [1.0]], "edges": [[0, 5]], "y": null}"#;
        let err = read_dataset(src.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::DanglingEdge { graph: 4, s: 0, t: 5, n: 3 }));
        assert!(err.to_string().contains("dangling edge index"));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let src = "{\"id\": 0, \"x\": [[1.0]], \"edges\": [], \"y\": null}\n{\"id\": 1, \"x\": oops}\n";
        match read_dataset(src.as_bytes()).unwrap_err() {
            Error::MalformedRecord { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn inconsistent_feature_dim_across_graphs() {
        let src = "{\"id\": 0, \"x\": [[1.0]], \"edges\": [], \"y\": null}\n{\"id\": 1, \"x\": [[1.0, 2.0]], \"edges\": [], \"y\": null}\n";
        assert!(matches!(
            read_dataset(src.as_bytes()).unwrap_err(),
            Error::InconsistentFeatureDim { line: 2, expected: 1, found: 2 }
        ));
    }

    #[test]
    fn categorical_features_are_one_hot() {
        let src = "{\"id\": 0, \"x_cat\": [0, 2], \"edges\": [[0, 1]], \"y\": null, \"edge_attr\": [[1]]}\n{\"id\": 1, \"x_cat\": [1], \"edges\": [], \"y\": null}\n";
        let gs = read_dataset(src.as_bytes()).unwrap();
        assert_eq!(gs[0].num_features(), 3);
        assert_eq!(gs[0].features(), &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(gs[1].features(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn self_loops_and_duplicates_rejected() {
        assert!(Graph::new(0, 1, vec![1.0, 1.0], [(1, 1)], None).is_err());
        assert!(Graph::new(0, 1, vec![1.0, 1.0], [(0, 1), (1, 0)], None).is_err());
    }

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let src = "{\"id\": 3, \"x\": [[0.1], [0.2], [0.30000000000000004]], \"edges\": [[2, 1], [0, 1]], \"y\": null}\n";
        let gs = read_dataset(src.as_bytes()).unwrap();
        let mut first = Vec::new();
        write_dataset_to(&mut first, &gs).unwrap();
        let again = read_dataset(first.as_slice()).unwrap();
        let mut second = Vec::new();
        write_dataset_to(&mut second, &again).unwrap();
        assert_eq!(first, second);
        assert_eq!(gs, again);
    }

    fn many(n: usize) -> Vec<Graph> {
        (0..n)
            .map(|i| Graph::new(i as i64, 1, vec![1.0], [], None).unwrap())
            .collect()
    }

    #[test]
    fn batch_sizes_follow_arithmetic() {
        let ds = many(10);
        let sizes: Vec<usize> = make_batches(&ds, 4, 0).unwrap().iter().map(|b| b.len()).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
    }

    #[test]
    fn batches_are_deterministic_and_seed_dependent() {
        let ds = many(100);
        let ids = |seed| -> Vec<i64> {
            make_batches(&ds, 7, seed)
                .unwrap()
                .iter()
                .flat_map(|b| b.graphs().iter().map(|g| g.id()).collect::<Vec<_>>())
                .collect()
        };
        assert_eq!(ids(1), ids(1));
        let (a, b) = (ids(1), ids(2));
        assert_ne!(a, b);
        let mut sa = a.clone();
        let mut sb = b.clone();
        sa.sort_unstable();
        sb.sort_unstable();
        assert_eq!(sa, sb);
        assert_eq!(sa, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn empty_dataset_and_zero_batch_rejected() {
        assert!(make_batches(&[], 4, 0).is_err());
        assert!(make_batches(&many(3), 0, 0).is_err());
    }

    #[test]
    fn offsets_are_prefix_sums() {
        let g3 = triangle();
        let g1 = Graph::new(1, 2, vec![0.0, 1.0], [], None).unwrap();
        let b = GraphBatch::new(vec![&g3, &g1, &g3]).unwrap();
        assert_eq!(b.offsets(), &[0, 3, 4, 7]);
        assert_eq!(b.num_nodes(), 7);
        assert_eq!(b.node_range(1), 3..4);
    }

    #[test]
    fn subgraph_requires_connected_four_nodes() {
        // path 0-1-2-3-4
        let g = Graph::new(0, 1, vec![1.0; 5], [(0, 1), (1, 2), (2, 3), (3, 4)], None).unwrap();
        assert!(Subgraph::new(&g, [0, 1, 2, 3], 0).is_ok());
        assert!(Subgraph::new(&g, [0, 1, 2], 0).is_err());
        assert!(Subgraph::new(&g, [0, 1, 3, 4], 0).is_err());
    }
}
