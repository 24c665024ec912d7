mod common;

use std::collections::HashMap;

use common::{brute_step_distribution, random_graph, two_cliques};
use hetembed::embed_sgns::{train_sgns, SgnsConfig};
use hetembed::embed_verse::{ppr_distribution, sample_ppr, train_verse, VerseConfig};
use hetembed::hetgraph::NodeId;
use hetembed::seed;
use hetembed::walks::{node2vec_walks, uniform_walks, WalkConfig};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sampled second steps from (prev, cur) against the exact distribution.
fn chi_square_pvalue(p: f64, q: f64) -> (f64, f64) {
    let g = random_graph(12, 20, 21);
    let (prev, cur) = g.edges()[0];
    let cfg = WalkConfig {
        walks_per_node: 60_000,
        walk_length: 3,
        p,
        q,
        seed: 22,
    };
    let corpus = node2vec_walks(&g, &cfg).unwrap();
    let mut counts: HashMap<NodeId, f64> = HashMap::new();
    for w in corpus.walks.iter().filter(|w| w[0] == prev && w[1] == cur) {
        *counts.entry(w[2]).or_default() += 1.0;
    }
    let total: f64 = counts.values().sum();
    let want = brute_step_distribution(&g, prev, cur, p, q);
    let stat: f64 = want
        .iter()
        .map(|(x, pr)| {
            let e = pr * total;
            let o = counts.get(x).copied().unwrap_or(0.0);
            (o - e) * (o - e) / e
        })
        .sum();
    let df = (want.len() - 1) as f64;
    (ChiSquared::new(df).unwrap().sf(stat), total)
}

#[test]
fn node2vec_sampling_with_extreme_bias() {
    // Weight ratios far above the rejection threshold use the CDF path.
    for (p, q) in [(1e-3, 100.0), (100.0, 1e-3), (0.5, 2.0)] {
        let (pv, total) = chi_square_pvalue(p, q);
        assert!(total > 1000.0);
        assert!(pv > 0.001, "p={p} q={q}: chi-square p-value {pv}");
    }
}

#[test]
fn monte_carlo_ppr_matches_power_iteration() {
    let g = random_graph(30, 40, 31);
    let source = NodeId(3);
    let alpha = 0.85;
    let exact = ppr_distribution(&g, source, alpha, 1e-10).unwrap();
    let mut rng = seed::rng(32, &[]);
    let n = 100_000;
    let mut hist = vec![0.0; g.node_count()];
    for _ in 0..n {
        hist[sample_ppr(&g, source, alpha, &mut rng).index()] += 1.0 / n as f64;
    }
    let l1: f64 = hist.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum();
    assert!(l1 < 0.02, "L1 {l1}");
}

#[test]
fn sgns_loss_falls() {
    let g = two_cliques(8);
    let walks = uniform_walks(
        &g,
        &WalkConfig {
            walks_per_node: 10,
            walk_length: 20,
            seed: 41,
            ..WalkConfig::default()
        },
    )
    .unwrap();
    let model = train_sgns(
        &walks,
        &g,
        &SgnsConfig {
            dim: 8,
            epochs: 5,
            seed: 41,
            ..SgnsConfig::default()
        },
    )
    .unwrap();
    let l = &model.epoch_losses;
    assert_eq!(l.len(), 5);
    assert!(l[4] < l[0], "losses {l:?}");
}

#[test]
fn single_worker_training_is_reproducible() {
    let g = two_cliques(6);
    let walks = uniform_walks(&g, &WalkConfig { seed: 51, ..WalkConfig::default() }).unwrap();
    let cfg = SgnsConfig {
        dim: 8,
        epochs: 2,
        seed: 52,
        workers: 1,
        ..SgnsConfig::default()
    };
    let a = train_sgns(&walks, &g, &cfg).unwrap();
    let b = train_sgns(&walks, &g, &cfg).unwrap();
    assert_eq!(a.embedding, b.embedding);
    let vcfg = VerseConfig {
        dim: 8,
        seed: 53,
        workers: 1,
        ..VerseConfig::default()
    };
    assert_eq!(train_verse(&g, &vcfg).unwrap(), train_verse(&g, &vcfg).unwrap());
}
