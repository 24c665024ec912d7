//! Walk corpora: uniform first-order walks, node2vec second-order biased
//! walks and meta-path constrained walks.
//!
//! Every walk draws from its own stream seeded by `(seed, walk_index,
//! start_node)`, so generation can be spread over threads without changing
//! the output.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hetgraph::{
    decode_token, encode_token, split_label, MetaPathSchema, NodeId, TypedGraph,
};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    /// Number of nodes per walk.
    pub walk_length: usize,
    /// Return parameter.
    pub p: f64,
    /// In-out parameter.
    pub q: f64,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walks_per_node: 10,
            walk_length: 80,
            p: 1.0,
            q: 1.0,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walks_per_node < 1 {
            return Err(Error::Config("walks_per_node must be at least 1".into()));
        }
        if self.walk_length < 2 {
            return Err(Error::Config("walk_length must be at least 2".into()));
        }
        for (name, v) in [("p", self.p), ("q", self.q)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite")));
            }
        }
        Ok(())
    }
}

/// Walks over dense node ids of one graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<NodeId>>,
    /// Fingerprint of the graph the walks were drawn from.
    pub graph_fingerprint: String,
}

impl WalkCorpus {
    pub fn token_count(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }

    /// Write one walk per line as space-separated `TYPE:name` tokens.
    pub fn write(&self, g: &TypedGraph, mut w: impl Write) -> std::io::Result<()> {
        let mut line = String::new();
        for walk in &self.walks {
            line.clear();
            for (i, &v) in walk.iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                line.push_str(&encode_token(&g.label(v)));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Read a walk file against the graph it was generated from.
    pub fn read(g: &TypedGraph, reader: impl BufRead) -> Result<Self> {
        let mut walks = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let at = |message: String| Error::Parse {
                line: i + 1,
                message,
            };
            let line = line.map_err(|e| at(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let walk = line
                .split_whitespace()
                .map(|tok| {
                    let label = decode_token(tok);
                    let (t, name) = split_label(&label).map_err(|e| at(e.to_string()))?;
                    g.lookup(&t, name)
                        .ok_or_else(|| at(format!("node {label:?} not in graph")))
                })
                .collect::<Result<Vec<_>>>()?;
            walks.push(walk);
        }
        Ok(WalkCorpus {
            walks,
            graph_fingerprint: g.fingerprint().to_string(),
        })
    }

    /// Check that every consecutive pair is an edge of `g`.
    pub fn validate_against(&self, g: &TypedGraph) -> Result<()> {
        if self.graph_fingerprint != g.fingerprint() {
            return Err(Error::InvalidInput(
                "walk corpus was drawn from a different graph".into(),
            ));
        }
        for walk in &self.walks {
            for w in walk.windows(2) {
                if !g.has_edge(w[0], w[1]) {
                    return Err(Error::InvalidInput(format!(
                        "walk step {} -> {} is not an edge",
                        g.label(w[0]),
                        g.label(w[1])
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Unnormalized second-order weight of stepping to `next` having arrived from `prev`.
#[inline]
pub fn transition_weight(g: &TypedGraph, prev: NodeId, next: NodeId, p: f64, q: f64) -> f64 {
    if next == prev {
        1.0 / p
    } else if g.neighbors(prev).binary_search(&next).is_ok() {
        1.0
    } else {
        1.0 / q
    }
}

/// Normalized node2vec transition distribution over `adj(cur)`, in neighbor order.
pub fn node2vec_step_distribution(
    g: &TypedGraph,
    prev: NodeId,
    cur: NodeId,
    p: f64,
    q: f64,
) -> Result<Vec<(NodeId, f64)>> {
    g.node(prev)?;
    g.node(cur)?;
    if !g.has_edge(prev, cur) {
        return Err(Error::InvalidInput(format!(
            "{} -> {} is not an edge",
            g.label(prev),
            g.label(cur)
        )));
    }
    if !(p > 0.0 && q > 0.0) {
        return Err(Error::Config("p and q must be positive".into()));
    }
    let weights: Vec<(NodeId, f64)> = g
        .neighbors(cur)
        .iter()
        .map(|&x| (x, transition_weight(g, prev, x, p, q)))
        .collect();
    let total: f64 = weights.iter().map(|&(_, w)| w).sum();
    Ok(weights.into_iter().map(|(x, w)| (x, w / total)).collect())
}

#[inline]
fn uniform_pick(rng: &mut ChaCha8Rng, options: &[NodeId]) -> NodeId {
    options[rng.random_range(0..options.len())]
}

/// Sample the next node of a node2vec walk.
fn node2vec_next(
    g: &TypedGraph,
    prev: NodeId,
    cur: NodeId,
    p: f64,
    q: f64,
    rng: &mut ChaCha8Rng,
) -> NodeId {
    let options = g.neighbors(cur);
    let (inv_p, inv_q) = (1.0 / p, 1.0 / q);
    let hi = inv_p.max(1.0).max(inv_q);
    let lo = inv_p.min(1.0).min(inv_q);
    if hi == lo {
        return uniform_pick(rng, options);
    }
    if hi / lo <= 16.0 {
        // Rejection sampling against the largest weight.
        loop {
            let x = uniform_pick(rng, options);
            if rng.random::<f64>() * hi < transition_weight(g, prev, x, p, q) {
                return x;
            }
        }
    }
    let total: f64 = options
        .iter()
        .map(|&x| transition_weight(g, prev, x, p, q))
        .sum();
    let mut target = rng.random::<f64>() * total;
    for &x in options {
        target -= transition_weight(g, prev, x, p, q);
        if target < 0.0 {
            return x;
        }
    }
    *options.last().expect("cur has at least one neighbor")
}

fn run_walks<F>(starts: &[NodeId], cfg: &WalkConfig, g: &TypedGraph, walk: F) -> WalkCorpus
where
    F: Fn(NodeId, &mut ChaCha8Rng) -> Vec<NodeId> + Sync,
{
    let jobs: Vec<(usize, NodeId)> = (0..cfg.walks_per_node)
        .flat_map(|pass| starts.iter().map(move |&s| (pass, s)))
        .collect();
    let walks = jobs
        .par_iter()
        .map(|&(pass, start)| {
            let mut rng = seed::rng(cfg.seed, &[pass as u64, start.0 as u64]);
            walk(start, &mut rng)
        })
        .filter(|w| w.len() >= 2)
        .collect();
    WalkCorpus {
        walks,
        graph_fingerprint: g.fingerprint().to_string(),
    }
}

fn non_isolated(g: &TypedGraph) -> Vec<NodeId> {
    g.node_ids().filter(|&v| g.degree(v) > 0).collect()
}

/// First-order uniform walks from every non-isolated node.
pub fn uniform_walks(g: &TypedGraph, cfg: &WalkConfig) -> Result<WalkCorpus> {
    cfg.validate()?;
    let starts = non_isolated(g);
    Ok(run_walks(&starts, cfg, g, |start, rng| {
        let mut walk = Vec::with_capacity(cfg.walk_length);
        walk.push(start);
        while walk.len() < cfg.walk_length {
            let cur = *walk.last().expect("non-empty");
            walk.push(uniform_pick(rng, g.neighbors(cur)));
        }
        walk
    }))
}

/// node2vec walks: a uniform first step, then second-order biased steps.
pub fn node2vec_walks(g: &TypedGraph, cfg: &WalkConfig) -> Result<WalkCorpus> {
    cfg.validate()?;
    let starts = non_isolated(g);
    Ok(run_walks(&starts, cfg, g, |start, rng| {
        let mut walk = Vec::with_capacity(cfg.walk_length);
        walk.push(start);
        walk.push(uniform_pick(rng, g.neighbors(start)));
        while walk.len() < cfg.walk_length {
            let n = walk.len();
            let next = node2vec_next(g, walk[n - 2], walk[n - 1], cfg.p, cfg.q, rng);
            walk.push(next);
        }
        walk
    }))
}

/// Walks that follow `schema` cyclically, starting at every node of its first type.
///
/// A walk stops early when the current node has no neighbor of the next
/// required type; walks shorter than two nodes are dropped.
pub fn metapath_walks(
    g: &TypedGraph,
    schema: &MetaPathSchema,
    cfg: &WalkConfig,
) -> Result<WalkCorpus> {
    cfg.validate()?;
    let cycle = schema.resolve(g)?;
    let starts = g.nodes_of_type(&schema.types()[0]);
    Ok(run_walks(&starts, cfg, g, |start, rng| {
        let mut walk = Vec::with_capacity(cfg.walk_length);
        walk.push(start);
        while walk.len() < cfg.walk_length {
            let cur = *walk.last().expect("non-empty");
            let next_type = cycle[walk.len() % cycle.len()];
            let options = g.neighbors_of_type_index(cur, next_type);
            if options.is_empty() {
                break;
            }
            walk.push(uniform_pick(rng, options));
        }
        walk
    }))
}
