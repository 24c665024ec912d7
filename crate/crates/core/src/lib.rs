//! Heterogeneous bibliographic network embedding toolkit.
//!
//! Builds author/paper/venue networks from publication records, trains
//! meta-path walk, node2vec and VERSE embeddings on them, and scores the
//! embeddings on co-authorship prediction and research-area classification
//! with repeated random train/test splits.

pub mod corpus;
pub mod embed_sgns;
pub mod embed_verse;
pub mod embedding;
pub mod error;
pub mod evalkit;
pub mod hetgraph;
pub mod pipeline;
pub mod report;
pub mod seed;
mod sgd;
pub mod walks;

pub use error::{Error, Result};
pub use sgd::{sigmoid, softplus};
