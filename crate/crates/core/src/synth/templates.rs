use serde::{Deserialize, Serialize};

use crate::graph::MIN_SUBGRAPH_NODES;

/// Small colored graph planted into synthetic samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotifTemplate {
    pub name: String,
    /// Color (feature index) of each node.
    pub colors: Vec<usize>,
    /// Undirected edges as `(s, t)` with `s < t`, sorted.
    pub edges: Vec<(usize, usize)>,
}

impl MotifTemplate {
    pub fn new(name: &str, colors: Vec<usize>, edges: &[(usize, usize)]) -> Self {
        let mut edges: Vec<(usize, usize)> = edges.iter().map(|&(s, t)| (s.min(t), s.max(t))).collect();
        edges.sort_unstable();
        Self {
            name: name.to_string(),
            colors,
            edges,
        }
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let n = self.len();
        if n < MIN_SUBGRAPH_NODES {
            return Err(format!("{} has {n} nodes (need >= {MIN_SUBGRAPH_NODES})", self.name));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &(s, t) in &self.edges {
            if s >= n || t >= n || s == t || !seen.insert((s.min(t), s.max(t))) {
                return Err(format!("{}: bad edge ({s}, {t})", self.name));
            }
        }
        let mut adj = vec![Vec::new(); n];
        for &(s, t) in &self.edges {
            adj[s].push(t);
            adj[t].push(s);
        }
        let mut reached = vec![false; n];
        let mut stack = vec![0];
        reached[0] = true;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !reached[u] {
                    reached[u] = true;
                    stack.push(u);
                }
            }
        }
        if reached.iter().any(|r| !r) {
            return Err(format!("{} is not connected", self.name));
        }
        Ok(())
    }
}

fn cycle(n: usize) -> Vec<(usize, usize)> {
    (0..n).map(|v| (v, (v + 1) % n)).collect()
}

/// Eight templates over three colors.
pub fn default_templates() -> Vec<MotifTemplate> {
    vec![
        MotifTemplate::new("cycle-4", vec![0; 4], &cycle(4)),
        MotifTemplate::new("cycle-5", vec![1; 5], &cycle(5)),
        MotifTemplate::new("cycle-6", vec![0, 2, 0, 2, 0, 2], &cycle(6)),
        MotifTemplate::new(
            "star-5",
            vec![2, 0, 0, 0, 0, 0],
            &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)],
        ),
        MotifTemplate::new(
            "path-6",
            vec![1, 2, 1, 2, 1, 2],
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)],
        ),
        MotifTemplate::new(
            "clique-4",
            vec![2; 4],
            &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        ),
        MotifTemplate::new(
            "house",
            vec![0, 1, 1, 1, 1],
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 4)],
        ),
        MotifTemplate::new(
            "binary-tree-7",
            vec![1, 0, 0, 2, 2, 2, 2],
            &[(0, 1), (0, 2), (1, 3), (1, 4), (2, 5), (2, 6)],
        ),
    ]
}
