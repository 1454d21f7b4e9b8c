//! Motif-driven contrastive self-supervised learning of graph
//! representations.
//!
//! The crate jointly trains a message-passing [`encoder`], a K-slot motif
//! table clustered with balanced entropic optimal transport ([`motif`]), a
//! motif-guided spectral subgraph [`segmenter`], and a graph-to-subgraph
//! [`contrastive`] objective, all driven by the [`trainer`]. The [`synth`]
//! module generates a planted-motif benchmark and evaluates motif recovery
//! and linear-probe accuracy.

pub mod contrastive;
pub mod diagnostics;
pub mod diffnum;
pub mod encoder;
mod error;
pub mod graph;
pub mod motif;
pub mod par;
pub mod seed;
pub mod segmenter;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
