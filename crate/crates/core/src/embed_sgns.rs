//! Skip-gram with negative sampling over walk corpora.
//!
//! This is the learner behind the DeepWalk-style, node2vec and
//! metapath2vec pipelines: every walk position is a center node, every
//! node within `window` positions is a context, and each (center, context)
//! pair is contrasted against `negatives` nodes drawn from the corpus
//! unigram distribution raised to the 3/4 power.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::distr::Distribution;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::hetgraph::{NodeId, TypedGraph};
use crate::seed;
use crate::sgd::{
    decayed_lr, negative_sampling_step, sigmoid, softplus, DenseTable, Scratch, SharedTable,
};
use crate::walks::WalkCorpus;

const NONE: u32 = u32::MAX;

/// Corpus vocabulary with occurrence counts and the negative-sampling distribution.
#[derive(Debug, Clone)]
pub struct Vocab {
    nodes: Vec<NodeId>,
    counts: Vec<u64>,
    noise: Vec<f64>,
    slot_of: Vec<u32>,
}

impl Vocab {
    /// Vocabulary nodes in ascending id order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Noise probabilities, proportional to `count^0.75`.
    pub fn noise(&self) -> &[f64] {
        &self.noise
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn slot(&self, node: NodeId) -> Option<usize> {
        match self.slot_of.get(node.index()) {
            Some(&s) if s != NONE => Some(s as usize),
            _ => None,
        }
    }

    pub fn count(&self, node: NodeId) -> u64 {
        self.slot(node).map_or(0, |s| self.counts[s])
    }
}

pub fn build_vocab(corpus: &WalkCorpus) -> Result<Vocab> {
    let max_id = corpus
        .walks
        .iter()
        .flatten()
        .map(|v| v.index())
        .max()
        .ok_or_else(|| Error::InvalidInput("empty walk corpus".into()))?;
    let mut by_id = vec![0u64; max_id + 1];
    for &v in corpus.walks.iter().flatten() {
        by_id[v.index()] += 1;
    }
    let mut nodes = Vec::new();
    let mut counts = Vec::new();
    let mut slot_of = vec![NONE; max_id + 1];
    for (i, &c) in by_id.iter().enumerate() {
        if c > 0 {
            slot_of[i] = nodes.len() as u32;
            nodes.push(NodeId(i as u32));
            counts.push(c);
        }
    }
    let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
    let total: f64 = weights.iter().sum();
    let noise = weights.into_iter().map(|w| w / total).collect();
    Ok(Vocab {
        nodes,
        counts,
        noise,
        slot_of,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    /// Frequent-node subsampling threshold (word2vec `sample`); off when `None`.
    pub subsample: Option<f64>,
    pub seed: u64,
    /// 1 = deterministic single worker; more = lock-free parallel updates.
    pub workers: usize,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.025,
            subsample: None,
            seed: 0,
            workers: 1,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("window", self.window),
            ("negatives", self.negatives),
            ("epochs", self.epochs),
            ("workers", self.workers),
        ];
        for (name, v) in positive {
            if v < 1 {
                return Err(Error::Config(format!("sgns {name} must be at least 1")));
            }
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::Config("sgns initial_lr must be positive".into()));
        }
        if let Some(t) = self.subsample {
            if !(t > 0.0) {
                return Err(Error::Config(
                    "sgns subsample threshold must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Loss and exact gradients of `-log σ(u·v) - Σ_k log σ(-u·n_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradient {
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn sgns_objective(
    center: &[f64],
    context: &[f64],
    negatives: &[&[f64]],
) -> Result<SgnsGradient> {
    let dim = center.len();
    for v in std::iter::once(context).chain(negatives.iter().copied()) {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
    }
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let pos = dot(center, context);
    let mut loss = softplus(-pos);
    // d/dx softplus(-x) = -(1 - σ(x))
    let gp = -(1.0 - sigmoid(pos));
    let mut g_center: Vec<f64> = context.iter().map(|&c| gp * c).collect();
    let g_context: Vec<f64> = center.iter().map(|&u| gp * u).collect();
    let mut g_neg = Vec::with_capacity(negatives.len());
    for &n in negatives {
        let x = dot(center, n);
        loss += softplus(x);
        let gn = sigmoid(x);
        for (gc, &nv) in g_center.iter_mut().zip(n) {
            *gc += gn * nv;
        }
        g_neg.push(center.iter().map(|&u| gn * u).collect());
    }
    Ok(SgnsGradient {
        loss,
        center: g_center,
        context: g_context,
        negatives: g_neg,
    })
}

/// Number of (center, context) pairs a corpus yields at a given window.
pub fn count_pairs(corpus: &WalkCorpus, window: usize) -> u64 {
    corpus
        .walks
        .iter()
        .map(|w| {
            let n = w.len();
            (0..n)
                .map(|i| (i.min(window) + (n - 1 - i).min(window)) as u64)
                .sum::<u64>()
        })
        .sum()
}

/// Trained skip-gram model.
#[derive(Debug, Clone)]
pub struct SgnsModel {
    /// Center ("input") vectors: the node embedding.
    pub embedding: EmbeddingMatrix,
    /// Context ("output") vectors.
    pub context: EmbeddingMatrix,
    /// Mean per-pair loss of each epoch, measured before each update.
    pub epoch_losses: Vec<f64>,
}

struct Schedule {
    initial_lr: f64,
    total: u64,
}

fn train_walks<C: crate::sgd::RowStore, T: crate::sgd::RowStore>(
    walks: &[Vec<u32>],
    input: &mut C,
    output: &mut T,
    cfg: &SgnsConfig,
    keep: Option<&[f64]>,
    noise: &WeightedAliasIndex<f64>,
    rng: &mut rand_chacha::ChaCha8Rng,
    schedule: &Schedule,
    progress: &AtomicU64,
) -> (f64, u64) {
    let mut scratch = Scratch::new(cfg.dim);
    let mut negs = Vec::with_capacity(cfg.negatives);
    let mut kept = Vec::new();
    let (mut loss, mut pairs) = (0.0, 0u64);
    for walk in walks {
        let walk: &[u32] = match keep {
            Some(k) => {
                kept.clear();
                kept.extend(
                    walk.iter()
                        .copied()
                        .filter(|&s| rng.random::<f64>() < k[s as usize]),
                );
                &kept
            }
            None => walk,
        };
        let n = walk.len();
        let mut local = 0u64;
        let lr = decayed_lr(
            schedule.initial_lr,
            progress.load(Ordering::Relaxed),
            schedule.total,
        );
        for i in 0..n {
            let center = walk[i] as usize;
            let lo = i.saturating_sub(cfg.window);
            let hi = (i + cfg.window).min(n - 1);
            for j in lo..=hi {
                if j == i {
                    continue;
                }
                let ctx = walk[j] as usize;
                negs.clear();
                for _ in 0..cfg.negatives {
                    let s = noise.sample(rng);
                    if s != ctx {
                        negs.push(s);
                    }
                }
                loss += negative_sampling_step(input, output, center, ctx, &negs, lr, &mut scratch);
                local += 1;
            }
        }
        pairs += local;
        progress.fetch_add(local, Ordering::Relaxed);
    }
    (loss, pairs)
}

/// Train skip-gram embeddings for every node occurring in `corpus`.
pub fn train_sgns(corpus: &WalkCorpus, g: &TypedGraph, cfg: &SgnsConfig) -> Result<SgnsModel> {
    cfg.validate()?;
    if corpus.graph_fingerprint != g.fingerprint() {
        return Err(Error::InvalidInput(
            "walk corpus does not belong to the supplied graph".into(),
        ));
    }
    let vocab = build_vocab(corpus)?;
    if let Some(&v) = vocab.nodes().last() {
        if !g.contains(v) {
            return Err(Error::UnknownNode(v.0));
        }
    }
    let walks: Vec<Vec<u32>> = corpus
        .walks
        .iter()
        .map(|w| w.iter().map(|&v| vocab.slot_of[v.index()]).collect())
        .collect();
    let dim = cfg.dim;
    let mut init_rng = seed::rng(cfg.seed, &[0]);
    let bound = 0.5 / dim as f32;
    let mut input = DenseTable {
        dim,
        data: (0..vocab.len() * dim)
            .map(|_| rng_uniform(&mut init_rng, bound))
            .collect(),
    };
    let mut output = DenseTable {
        dim,
        data: vec![0.0; vocab.len() * dim],
    };
    let noise = WeightedAliasIndex::new(vocab.noise().to_vec())
        .map_err(|e| Error::InvalidInput(format!("noise distribution: {e}")))?;
    let keep: Option<Vec<f64>> = cfg.subsample.map(|t| {
        let total = vocab.counts().iter().sum::<u64>() as f64;
        vocab
            .counts()
            .iter()
            .map(|&c| {
                let f = c as f64 / (t * total);
                ((f.sqrt() + 1.0) / f).min(1.0)
            })
            .collect()
    });
    let schedule = Schedule {
        initial_lr: cfg.initial_lr,
        total: count_pairs(corpus, cfg.window) * cfg.epochs as u64,
    };
    let progress = AtomicU64::new(0);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, pairs) = if cfg.workers == 1 {
            let mut rng = seed::rng(cfg.seed, &[epoch as u64 + 1]);
            train_walks(
                &walks,
                &mut input,
                &mut output,
                cfg,
                keep.as_deref(),
                &noise,
                &mut rng,
                &schedule,
                &progress,
            )
        } else {
            let shared_in = SharedTable::from_dense(std::mem::replace(
                &mut input,
                DenseTable {
                    dim,
                    data: Vec::new(),
                },
            ));
            let shared_out = SharedTable::from_dense(std::mem::replace(
                &mut output,
                DenseTable {
                    dim,
                    data: Vec::new(),
                },
            ));
            let chunk = walks.len().div_ceil(cfg.workers).max(1);
            let totals: Vec<(f64, u64)> = std::thread::scope(|scope| {
                let handles: Vec<_> = walks
                    .chunks(chunk)
                    .enumerate()
                    .map(|(w, part)| {
                        let (si, so) = (&shared_in, &shared_out);
                        let (noise, keep, schedule, progress) =
                            (&noise, keep.as_deref(), &schedule, &progress);
                        scope.spawn(move || {
                            let mut rng = seed::rng(cfg.seed, &[epoch as u64 + 1, w as u64]);
                            let (mut a, mut b) = (si, so);
                            train_walks(
                                part, &mut a, &mut b, cfg, keep, noise, &mut rng, schedule,
                                progress,
                            )
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("worker panicked"))
                    .collect()
            });
            input = shared_in.into_dense();
            output = shared_out.into_dense();
            totals
                .into_iter()
                .fold((0.0, 0), |(l, p), (a, b)| (l + a, p + b))
        };
        epoch_losses.push(if pairs == 0 { 0.0 } else { loss / pairs as f64 });
    }
    let labels: Vec<String> = vocab.nodes().iter().map(|&v| g.label(v)).collect();
    Ok(SgnsModel {
        embedding: EmbeddingMatrix::new(labels.clone(), dim, input.data)?,
        context: EmbeddingMatrix::new(labels, dim, output.data)?,
        epoch_losses,
    })
}

#[inline]
pub(crate) fn rng_uniform(rng: &mut impl Rng, bound: f32) -> f32 {
    rng.random_range(-bound..bound)
}
