//! VERSE-style embeddings: a single embedding table trained so that the
//! dot product of two node vectors reflects personalized-PageRank
//! similarity.
//!
//! Each update draws a source uniformly, a positive from the source's PPR
//! distribution (by simulating a walk that continues with probability
//! `alpha` and emitting the node where it stops) and `negatives` nodes
//! uniformly, then takes a negative-sampling gradient step on the shared
//! table.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embed_sgns::rng_uniform;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::hetgraph::{NodeId, TypedGraph};
use crate::seed;
use crate::sgd::{
    decayed_lr, shared_table_step, sigmoid, softplus, DenseTable, Scratch, SharedTable,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerseConfig {
    pub dim: usize,
    /// Probability of continuing the walk (damping).
    pub alpha: f64,
    pub negatives: usize,
    /// Total updates; `None` means `steps_per_node * |trained nodes|`.
    pub steps: Option<u64>,
    pub steps_per_node: u64,
    pub lr: f64,
    pub seed: u64,
    /// 1 = deterministic single worker; more = lock-free parallel updates.
    pub workers: usize,
}

impl Default for VerseConfig {
    fn default() -> Self {
        VerseConfig {
            dim: 100,
            alpha: 0.85,
            negatives: 3,
            steps: None,
            steps_per_node: 100,
            lr: 0.0025,
            seed: 0,
            workers: 1,
        }
    }
}

impl VerseConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.dim < 1 || self.workers < 1 {
            return Err(Error::Config(
                "verse dim and workers must be at least 1".into(),
            ));
        }
        if self.steps == Some(0) || (self.steps.is_none() && self.steps_per_node == 0) {
            return Err(Error::Config("verse needs at least one step".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("verse lr must be positive".into()));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Personalized PageRank vector of `source` by power iteration on
/// `π = α·πP + (1−α)·e_source`, stopped once the L1 distance to the fixed
/// point is provably at most `tolerance`.
pub fn ppr_distribution(
    g: &TypedGraph,
    source: NodeId,
    alpha: f64,
    tolerance: f64,
) -> Result<Vec<f64>> {
    g.node(source)?;
    check_alpha(alpha)?;
    if g.degree(source) == 0 {
        return Err(Error::InvalidInput(format!(
            "{} is isolated",
            g.label(source)
        )));
    }
    if !(tolerance > 0.0) {
        return Err(Error::Config("tolerance must be positive".into()));
    }
    let n = g.node_count();
    let mut pi = vec![0.0; n];
    pi[source.index()] = 1.0;
    let mut next = vec![0.0; n];
    loop {
        next.iter_mut().for_each(|x| *x = 0.0);
        for u in g.node_ids() {
            let mass = pi[u.index()];
            if mass == 0.0 {
                continue;
            }
            let share = alpha * mass / g.degree(u) as f64;
            for &v in g.neighbors(u) {
                next[v.index()] += share;
            }
        }
        next[source.index()] += 1.0 - alpha;
        let diff: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        // The map is an α-contraction in L1, so ‖π_k − π*‖ ≤ α/(1−α)·‖π_k − π_{k−1}‖.
        if diff * alpha / (1.0 - alpha) <= tolerance {
            break;
        }
    }
    let total: f64 = pi.iter().sum();
    Ok(pi.into_iter().map(|x| x / total).collect())
}

/// Draw one node from the PPR distribution of `source` by simulation.
/// `source` must have at least one neighbor.
pub fn sample_ppr(g: &TypedGraph, source: NodeId, alpha: f64, rng: &mut impl Rng) -> NodeId {
    let mut cur = source;
    while rng.random::<f64>() < alpha {
        let nb = g.neighbors(cur);
        cur = nb[rng.random_range(0..nb.len())];
    }
    cur
}

/// Loss and gradients for one update on a single shared table.
#[derive(Debug, Clone, PartialEq)]
pub struct VerseGradient {
    pub loss: f64,
    /// Gradient per table row; rows in several roles accumulate.
    pub rows: BTreeMap<usize, Vec<f64>>,
}

/// `-log σ(u·v) - Σ_k log σ(-u·n_k)` with `u = table[source]`,
/// `v = table[positive]`, `n_k = table[negatives[k]]`.
pub fn verse_objective(
    table: &[Vec<f64>],
    source: usize,
    positive: usize,
    negatives: &[usize],
) -> Result<VerseGradient> {
    let row = |i: usize| -> Result<&Vec<f64>> {
        table
            .get(i)
            .ok_or_else(|| Error::InvalidInput(format!("row {i} out of range")))
    };
    let u = row(source)?;
    let dim = u.len();
    for &i in std::iter::once(&positive).chain(negatives) {
        let found = row(i)?.len();
        if found != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found,
            });
        }
    }
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let mut rows: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut add = |i: usize, scale: f64, v: &[f64]| {
        let g = rows.entry(i).or_insert_with(|| vec![0.0; dim]);
        for (a, &b) in g.iter_mut().zip(v) {
            *a += scale * b;
        }
    };
    let mut loss = 0.0;
    for (k, &t) in std::iter::once(&positive).chain(negatives).enumerate() {
        let v = &table[t];
        let x = dot(u, v);
        // dL/dx: -(1-σ(x)) for the positive, σ(x) for negatives.
        let gx = if k == 0 {
            loss += softplus(-x);
            -(1.0 - sigmoid(x))
        } else {
            loss += softplus(x);
            sigmoid(x)
        };
        add(source, gx, v);
        add(t, gx, u);
    }
    Ok(VerseGradient { loss, rows })
}

fn run_steps<S: crate::sgd::RowStore>(
    table: &mut S,
    g: &TypedGraph,
    trained: &[NodeId],
    row_of: &[u32],
    cfg: &VerseConfig,
    steps: std::ops::Range<u64>,
    total: u64,
    rng: &mut ChaCha8Rng,
) {
    let mut scratch = Scratch::new(cfg.dim);
    let mut negs = Vec::with_capacity(cfg.negatives);
    for step in steps {
        let lr = decayed_lr(cfg.lr, step, total);
        let src = trained[rng.random_range(0..trained.len())];
        let pos = sample_ppr(g, src, cfg.alpha, rng);
        negs.clear();
        for _ in 0..cfg.negatives {
            negs.push(rng.random_range(0..trained.len()));
        }
        shared_table_step(
            table,
            row_of[src.index()] as usize,
            row_of[pos.index()] as usize,
            &negs,
            lr,
            &mut scratch,
        );
    }
}

/// Train VERSE embeddings for every non-isolated node of `g`.
pub fn train_verse(g: &TypedGraph, cfg: &VerseConfig) -> Result<EmbeddingMatrix> {
    cfg.validate()?;
    if g.edge_count() == 0 {
        return Err(Error::InvalidInput(
            "cannot train VERSE on a graph without edges".into(),
        ));
    }
    let trained: Vec<NodeId> = g.node_ids().filter(|&v| g.degree(v) > 0).collect();
    let mut row_of = vec![u32::MAX; g.node_count()];
    for (r, v) in trained.iter().enumerate() {
        row_of[v.index()] = r as u32;
    }
    let dim = cfg.dim;
    let bound = 0.5 / dim as f32;
    let mut init = seed::rng(cfg.seed, &[0]);
    let mut table = DenseTable {
        dim,
        data: (0..trained.len() * dim)
            .map(|_| rng_uniform(&mut init, bound))
            .collect(),
    };
    let total = cfg
        .steps
        .unwrap_or(cfg.steps_per_node * trained.len() as u64);
    if cfg.workers == 1 {
        let mut rng = seed::rng(cfg.seed, &[1]);
        run_steps(
            &mut table,
            g,
            &trained,
            &row_of,
            cfg,
            0..total,
            total,
            &mut rng,
        );
    } else {
        let shared = SharedTable::from_dense(table);
        let per = total.div_ceil(cfg.workers as u64);
        std::thread::scope(|scope| {
            for w in 0..cfg.workers as u64 {
                let range = (w * per).min(total)..((w + 1) * per).min(total);
                let (shared, trained, row_of) = (&shared, &trained, &row_of);
                scope.spawn(move || {
                    let mut rng = seed::rng(cfg.seed, &[1, w]);
                    let mut handle = shared;
                    run_steps(&mut handle, g, trained, row_of, cfg, range, total, &mut rng);
                });
            }
        });
        table = shared.into_dense();
    }
    let labels = trained.iter().map(|&v| g.label(v)).collect();
    EmbeddingMatrix::new(labels, dim, table.data)
}
