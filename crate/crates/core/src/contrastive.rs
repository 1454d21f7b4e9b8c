//! Graph-to-subgraph contrastive objective.
//!
//! Each subgraph's parent graph is its positive; every other graph in the
//! batch is a negative.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diffnum::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Softmax axis of the contrast matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalize {
    /// Each column (subgraph) is a distribution over graphs.
    #[default]
    Graphs,
    /// Each row (graph) is a distribution over subgraphs.
    Subgraphs,
}

impl FromStr for Normalize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "graphs" => Ok(Normalize::Graphs),
            "subgraphs" => Ok(Normalize::Subgraphs),
            other => Err(Error::Config(format!(
                "unknown contrastive normalization {other:?} (expected graphs or subgraphs)"
            ))),
        }
    }
}

impl std::fmt::Display for Normalize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Normalize::Graphs => "graphs",
            Normalize::Subgraphs => "subgraphs",
        })
    }
}

/// Normalized `M x N` graph-to-subgraph similarities on the tape, plus the
/// parent indicator.
#[derive(Debug, Clone)]
pub struct ContrastMatrix {
    pub w: Var,
    /// `mask[i, j] = 1` iff subgraph `j` was cut from graph `i`.
    pub mask: Tensor,
}

/// Builds `W` from graph embeddings `h` (`M x D`), subgraph embeddings `e`
/// (`N x D`) and each subgraph's parent index.
pub fn contrast_matrix(
    tape: &mut Tape,
    h: Var,
    e: Var,
    parents: &[usize],
    tau_g: f64,
    normalize: Normalize,
) -> Result<ContrastMatrix> {
    let (m, n) = (tape.value(h).rows(), tape.value(e).rows());
    if m == 0 || n == 0 {
        return Err(Error::Empty(format!("contrast matrix of {m} graphs x {n} subgraphs")));
    }
    if parents.len() != n {
        return Err(Error::shape(
            "contrast_matrix",
            format!("{} parents for {n} subgraphs", parents.len()),
        ));
    }
    let mut mask = vec![0.0; m * n];
    for (j, &p) in parents.iter().enumerate() {
        if p >= m {
            return Err(Error::InvalidArgument(format!("parent {p} outside {m} graphs")));
        }
        mask[p * n + j] = 1.0;
    }
    let hu = tape.l2_normalize_rows(h)?;
    let eu = tape.l2_normalize_rows(e)?;
    let cos = tape.matmul_t(hu, eu)?;
    let w = match normalize {
        Normalize::Graphs => tape.col_softmax(cos, tau_g)?,
        Normalize::Subgraphs => tape.row_softmax(cos, tau_g)?,
    };
    Ok(ContrastMatrix {
        w,
        mask: Tensor::new(m, n, mask)?,
    })
}

/// `L_c = -(1/M) Σ_{i,j} mask[i, j] log W[i, j]`.
pub fn contrastive_loss(tape: &mut Tape, c: &ContrastMatrix) -> Result<Var> {
    let m = c.mask.rows();
    let lonely = (0..m).filter(|&i| c.mask.row(i).iter().all(|&v| v == 0.0)).count();
    if lonely > 0 {
        log::debug!("{lonely} graph(s) without subgraphs contribute nothing to the contrastive loss");
    }
    let log_w = tape.log(c.w)?;
    let mask = tape.constant(c.mask.clone());
    let total = tape.trace_product(log_w, mask)?;
    tape.scale(total, -1.0 / m as f64)
}
