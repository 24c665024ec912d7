//! Independent oracles and fixtures shared by the integration and
//! acceptance tests. Nothing here calls into the code under test except to
//! build inputs.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet, VecDeque};

use hetembed::embedding::{cosine, EmbeddingMatrix};
use hetembed::hetgraph::{GraphBuilder, NodeId, TypedGraph};
use hetembed::seed;
use rand::Rng;

/// Random simple graph on `n` nodes of type "A" in which every node has at
/// least one neighbor.
pub fn random_graph(n: usize, extra_edges: usize, seed_: u64) -> TypedGraph {
    assert!(n >= 2);
    let mut rng = seed::rng(seed_, &[]);
    let mut b = GraphBuilder::new();
    let ids: Vec<NodeId> = (0..n).map(|i| b.add_node_str("A", &format!("n{i}")).unwrap()).collect();
    // A random tree keeps every node non-isolated.
    for i in 1..n {
        let j = rng.random_range(0..i);
        b.add_edge(ids[i], ids[j]).unwrap();
    }
    for _ in 0..extra_edges {
        let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
        if u != v {
            b.add_edge(ids[u], ids[v]).unwrap();
        }
    }
    b.freeze()
}

/// Unnormalized node2vec weight by shortest-path distance from `prev`,
/// found by breadth-first search.
pub fn brute_step_distribution(g: &TypedGraph, prev: NodeId, cur: NodeId, p: f64, q: f64) -> HashMap<NodeId, f64> {
    let mut dist: HashMap<NodeId, usize> = HashMap::from([(prev, 0)]);
    let mut queue = VecDeque::from([prev]);
    while let Some(x) = queue.pop_front() {
        let d = dist[&x];
        if d >= 2 {
            continue;
        }
        for &y in g.neighbors(x) {
            dist.entry(y).or_insert_with(|| {
                queue.push_back(y);
                d + 1
            });
        }
    }
    let weights: Vec<(NodeId, f64)> = g
        .neighbors(cur)
        .iter()
        .map(|&x| {
            let w = match dist.get(&x).copied().unwrap_or(usize::MAX) {
                0 => 1.0 / p,
                1 => 1.0,
                _ => 1.0 / q,
            };
            (x, w)
        })
        .collect();
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    weights.into_iter().map(|(x, w)| (x, w / total)).collect()
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Exact personalized PageRank: solve `(I - αPᵀ) π = (1 - α) e_s`.
pub fn dense_ppr(g: &TypedGraph, source: NodeId, alpha: f64) -> Vec<f64> {
    let n = g.node_count();
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for u in g.node_ids() {
        let d = g.degree(u) as f64;
        for &v in g.neighbors(u) {
            // π_v gets α π_u / deg(u)
            a[v.index()][u.index()] -= alpha / d;
        }
    }
    let mut b = vec![0.0; n];
    b[source.index()] = 1.0 - alpha;
    solve_dense(a, b)
}

/// Central finite-difference gradient of `f` at `x`.
pub fn numeric_gradient(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|, floor)` in the Euclidean norm.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-8)
}

/// Two disjoint `k`-cliques; node names are `c0_i` and `c1_i`.
pub fn two_cliques(k: usize) -> TypedGraph {
    let mut b = GraphBuilder::new();
    for c in 0..2 {
        let ids: Vec<NodeId> = (0..k)
            .map(|i| b.add_node_str("A", &format!("c{c}_{i}")).unwrap())
            .collect();
        for i in 0..k {
            for j in i + 1..k {
                b.add_edge(ids[i], ids[j]).unwrap();
            }
        }
    }
    b.freeze()
}

/// Mean cosine within cliques minus mean cosine across them.
pub fn clique_separation(emb: &EmbeddingMatrix) -> f64 {
    let group = |l: &str| l.starts_with("A:c0_");
    let labels = emb.labels();
    let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            let c = cosine(emb.row(i), emb.row(j));
            if group(&labels[i]) == group(&labels[j]) {
                intra += c;
                ni += 1;
            } else {
                inter += c;
                nx += 1;
            }
        }
    }
    intra / ni as f64 - inter / nx as f64
}

/// Newman modularity of the partition `community` on an unweighted graph.
pub fn modularity(g: &TypedGraph, community: impl Fn(NodeId) -> usize) -> f64 {
    let m = g.edge_count() as f64;
    let mut internal: HashMap<usize, f64> = HashMap::new();
    let mut degree: HashMap<usize, f64> = HashMap::new();
    for &(u, v) in g.edges() {
        if community(u) == community(v) {
            *internal.entry(community(u)).or_default() += 1.0;
        }
    }
    for u in g.node_ids() {
        *degree.entry(community(u)).or_default() += g.degree(u) as f64;
    }
    degree
        .iter()
        .map(|(c, d)| internal.get(c).copied().unwrap_or(0.0) / m - (d / (2.0 * m)).powi(2))
        .sum()
}

/// Edge set as unordered label pairs.
pub fn edge_labels(g: &TypedGraph) -> HashSet<(String, String)> {
    g.edges()
        .iter()
        .map(|&(u, v)| {
            let (a, b) = (g.label(u), g.label(v));
            if a < b {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect()
}

/// Small pipeline configuration that trains every method on the planted
/// 500-author corpus in well under a minute with optimizations on.
pub fn desk_config(seed_: u64, out: &std::path::Path) -> hetembed::pipeline::PipelineConfig {
    use hetembed::corpus::SynthConfig;
    use hetembed::pipeline::PipelineConfig;
    let mut cfg = PipelineConfig {
        synth: Some(SynthConfig {
            num_authors: 500,
            num_areas: 5,
            seed: seed_,
            ..SynthConfig::default()
        }),
        output_dir: out.to_path_buf(),
        seed: seed_,
        deterministic: true,
        ..PipelineConfig::default()
    };
    cfg.walk.walks_per_node = 10;
    cfg.walk.walk_length = 40;
    cfg.sgns.dim = 32;
    cfg.sgns.epochs = 2;
    cfg.verse.dim = 32;
    // At 100 updates per node and lr 0.0025 the vectors barely leave their
    // initialization on a graph this small.
    cfg.verse.lr = 0.025;
    cfg.verse.steps_per_node = 1000;
    cfg
}
