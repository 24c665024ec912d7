//! CART decision trees (Gini impurity, axis-aligned threshold splits) and
//! bagged random forests.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::LabeledDataset;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features examined per split; all when `None`.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
enum TreeNode {
    Leaf(usize),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTreeModel {
    nodes: Vec<TreeNode>,
}

struct Builder<'a> {
    data: &'a LabeledDataset,
    params: TreeParams,
    nodes: Vec<TreeNode>,
    rng: Option<ChaCha8Rng>,
    pairs: Vec<(f64, usize)>,
}

fn majority(counts: &[usize]) -> usize {
    // First maximum wins, so ties go to the smallest class id.
    counts
        .iter()
        .enumerate()
        .fold(
            (0, 0),
            |best, (c, &n)| if n > best.1 { (c, n) } else { best },
        )
        .0
}

impl Builder<'_> {
    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.data.n_features();
        match (self.params.max_features, self.rng.as_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut f = sample(rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    /// Best (feature, threshold, left indices, right indices) by weighted Gini.
    fn best_split(&mut self, idx: &[usize], counts: &[usize]) -> Option<(usize, f64)> {
        let k = counts.len();
        let n = idx.len();
        let min_leaf = self.params.min_samples_leaf.max(1);
        let total_sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut left = vec![0usize; k];
        let mut right = vec![0usize; k];
        for f in self.candidate_features() {
            self.pairs.clear();
            self.pairs.extend(
                idx.iter()
                    .map(|&i| (self.data.row(i)[f], self.data.labels()[i])),
            );
            self.pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            if self.pairs[0].0 == self.pairs[n - 1].0 {
                continue;
            }
            left.iter_mut().for_each(|c| *c = 0);
            right.copy_from_slice(counts);
            let (mut lsq, mut rsq) = (0.0f64, total_sq);
            for pos in 0..n - 1 {
                let y = self.pairs[pos].1;
                lsq += (2 * left[y] + 1) as f64;
                rsq -= (2 * right[y] - 1) as f64;
                left[y] += 1;
                right[y] -= 1;
                let (a, b) = (self.pairs[pos].0, self.pairs[pos + 1].0);
                if a == b {
                    continue;
                }
                let (nl, nr) = (pos + 1, n - pos - 1);
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let score = (nl as f64 - lsq / nl as f64) + (nr as f64 - rsq / nr as f64);
                if best.is_none_or(|(s, _, _)| score < s) {
                    let mut thr = a + (b - a) / 2.0;
                    if thr >= b {
                        thr = a;
                    }
                    best = Some((score, f, thr));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let mut counts = vec![0usize; self.data.class_count()];
        for &i in &idx {
            counts[self.data.labels()[i]] += 1;
        }
        let slot = self.nodes.len();
        self.nodes.push(TreeNode::Leaf(majority(&counts)));
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.params.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_capped || idx.len() < 2 * self.params.min_samples_leaf.max(1) {
            return slot;
        }
        let Some((feature, threshold)) = self.best_split(&idx, &counts) else {
            return slot;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.data.row(i)[feature] <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[slot] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }
}

impl DecisionTreeModel {
    pub fn fit(data: &LabeledDataset, params: TreeParams) -> Self {
        Self::fit_rows(data, (0..data.len()).collect(), params, None)
    }

    fn fit_rows(
        data: &LabeledDataset,
        rows: Vec<usize>,
        params: TreeParams,
        rng: Option<ChaCha8Rng>,
    ) -> Self {
        let mut b = Builder {
            data,
            params,
            nodes: Vec::new(),
            rng,
            pairs: Vec::with_capacity(rows.len()),
        };
        b.grow(rows, 0);
        DecisionTreeModel { nodes: b.nodes }
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf(c) => return c,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[feature] <= threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForestModel {
    trees: Vec<DecisionTreeModel>,
    classes: usize,
}

impl RandomForestModel {
    pub fn fit(
        data: &LabeledDataset,
        trees: usize,
        params: TreeParams,
        bootstrap: bool,
        seed: u64,
    ) -> Self {
        let n = data.len();
        let trees = (0..trees as u64)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed, &[t]);
                let rows: Vec<usize> = if bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTreeModel::fit_rows(data, rows, params, Some(rng))
            })
            .collect();
        RandomForestModel {
            trees,
            classes: data.class_count(),
        }
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        let mut votes = vec![0usize; self.classes];
        for t in &self.trees {
            votes[t.predict(row)] += 1;
        }
        majority(&votes)
    }
}
