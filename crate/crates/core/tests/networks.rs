mod common;

use std::collections::{BTreeMap, HashSet};

use common::{edge_labels, modularity};
use hetembed::corpus::{
    build_network, derive_author_labels, parse_records, synth_generate, temporal_split, write_records, BibRecord,
    NetworkKind, SynthConfig,
};
use hetembed::hetgraph::{read_edge_list, write_edge_list};
use proptest::prelude::*;

fn pair(a: String, b: String) -> (String, String) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Edge sets built straight from the records, one per network.
fn brute_edges(records: &[BibRecord], kind: NetworkKind) -> HashSet<(String, String)> {
    let mut out = HashSet::new();
    for r in records {
        let authors: Vec<String> = r.authors.iter().map(|a| format!("A:{a}")).collect();
        let paper = format!("P:{}", r.paper_id);
        let venue = format!("V:{}", r.venue);
        for (i, a) in authors.iter().enumerate() {
            match kind {
                NetworkKind::AA => {
                    for b in &authors[i + 1..] {
                        out.insert(pair(a.clone(), b.clone()));
                    }
                }
                NetworkKind::APA => {
                    out.insert(pair(a.clone(), paper.clone()));
                }
                NetworkKind::AVA => {
                    out.insert(pair(a.clone(), venue.clone()));
                }
                NetworkKind::All => {
                    out.insert(pair(a.clone(), paper.clone()));
                    out.insert(pair(a.clone(), venue.clone()));
                }
            }
        }
        if kind == NetworkKind::All {
            out.insert(pair(paper, venue));
        }
    }
    out
}

fn small_synth(seed: u64) -> Vec<BibRecord> {
    synth_generate(&SynthConfig {
        num_authors: 120,
        papers_per_author: 2.0,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

#[test]
fn networks_match_records() {
    let records = small_synth(3);
    for kind in NetworkKind::ALL_KINDS {
        let g = build_network(&records, kind).unwrap();
        assert_eq!(edge_labels(&g), brute_edges(&records, kind), "{kind}");
    }
}

#[test]
fn all_is_union_of_incidence_networks_plus_paper_venue() {
    let records = small_synth(4);
    let all = edge_labels(&build_network(&records, NetworkKind::All).unwrap());
    let apa = edge_labels(&build_network(&records, NetworkKind::APA).unwrap());
    let ava = edge_labels(&build_network(&records, NetworkKind::AVA).unwrap());
    let pv: HashSet<_> = records
        .iter()
        .map(|r| pair(format!("P:{}", r.paper_id), format!("V:{}", r.venue)))
        .collect();
    let union: HashSet<_> = apa.union(&ava).cloned().chain(pv).collect();
    assert_eq!(all, union);
}

#[test]
fn type_purity() {
    let records = small_synth(5);
    let allowed: [(NetworkKind, &[(&str, &str)]); 4] = [
        (NetworkKind::AA, &[("A", "A")]),
        (NetworkKind::APA, &[("A", "P")]),
        (NetworkKind::AVA, &[("A", "V")]),
        (NetworkKind::All, &[("A", "P"), ("A", "V"), ("P", "V")]),
    ];
    for (kind, pairs) in allowed {
        let g = build_network(&records, kind).unwrap();
        for &(u, v) in g.edges() {
            let (a, b) = (g.node_type(u).as_str(), g.node_type(v).as_str());
            let key = if a <= b { (a, b) } else { (b, a) };
            assert!(pairs.contains(&key), "{kind}: edge {a}-{b}");
        }
        assert!(g.node_ids().all(|n| g.degree(n) > 0 || kind == NetworkKind::AA));
    }
}

#[test]
fn edge_list_round_trip() {
    let g = build_network(&small_synth(6), NetworkKind::All).unwrap();
    let mut buf = Vec::new();
    write_edge_list(&g, &mut buf).unwrap();
    let back = read_edge_list(buf.as_slice()).unwrap();
    assert_eq!(back.node_count(), g.node_count());
    assert_eq!(edge_labels(&back), edge_labels(&g));
    // Node ids follow first appearance in the file, so only a second pass is
    // byte-stable.
    let mut again = Vec::new();
    write_edge_list(&back, &mut again).unwrap();
    assert_eq!(again, buf);
    assert_eq!(read_edge_list(again.as_slice()).unwrap().fingerprint(), back.fingerprint());
}

#[test]
fn record_file_round_trip() {
    let records = small_synth(7);
    let mut buf = Vec::new();
    write_records(&records, &mut buf).unwrap();
    let parsed = parse_records(buf.as_slice()).unwrap();
    assert!(parsed.errors.is_empty());
    assert_eq!(parsed.records, records);
}

#[test]
fn planted_areas_give_modular_coauthor_graph() {
    let cfg = SynthConfig {
        num_authors: 500,
        num_areas: 5,
        cross_area_probability: 0.1,
        seed: 7,
        ..SynthConfig::default()
    };
    let records = synth_generate(&cfg).unwrap();
    let g = build_network(&records, NetworkKind::AA).unwrap();
    let q = modularity(&g, |n| {
        let name = g.node_name(n);
        cfg.home_area(name.trim_start_matches("author").parse().unwrap())
    });
    assert!(q >= 0.5, "modularity {q}");
}

#[test]
fn synth_is_seeded() {
    assert_eq!(small_synth(9), small_synth(9));
    assert_ne!(small_synth(9), small_synth(10));
}

#[test]
fn labels_are_majority_field() {
    let records = small_synth(8);
    let labels = derive_author_labels(&records);
    let mut counts: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    for r in &records {
        for a in &r.authors {
            *counts.entry(a).or_default().entry(&r.field).or_default() += 1;
        }
    }
    assert_eq!(labels.len(), counts.len());
    for (a, fields) in counts {
        let top = fields.values().max().unwrap();
        let want = fields.iter().find(|(_, c)| *c == top).unwrap().0;
        assert_eq!(labels[a], *want);
    }
}

proptest! {
    #[test]
    fn temporal_split_partitions(years in prop::collection::vec(1990u32..2015, 0..40), cutoff in 1990u32..2015) {
        let records: Vec<BibRecord> = years
            .iter()
            .enumerate()
            .map(|(i, &y)| BibRecord::new(&format!("p{i}"), y, "V", "F", ["a"]).unwrap())
            .collect();
        let (train, eval) = temporal_split(&records, cutoff);
        prop_assert_eq!(train.len() + eval.len(), records.len());
        prop_assert!(train.iter().all(|r| r.year <= cutoff));
        prop_assert!(eval.iter().all(|r| r.year > cutoff));
    }
}
