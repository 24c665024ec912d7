//! Bibliographic records: ingestion, temporal splitting, network
//! construction, research-area labels and a planted-area synthetic corpus.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hetgraph::{GraphBuilder, NodeType, TypedGraph};
use crate::seed;

pub const AUTHOR: &str = "A";
pub const PAPER: &str = "P";
pub const VENUE: &str = "V";

pub fn author_type() -> NodeType {
    NodeType::new(AUTHOR).expect("static label")
}

pub fn paper_type() -> NodeType {
    NodeType::new(PAPER).expect("static label")
}

pub fn venue_type() -> NodeType {
    NodeType::new(VENUE).expect("static label")
}

/// `A:name` label of an author node.
pub fn author_label(name: &str) -> String {
    format!("{AUTHOR}:{}", name.trim())
}

/// One publication.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BibRecord {
    pub paper_id: String,
    pub year: u32,
    pub venue: String,
    pub field: String,
    pub authors: Vec<String>,
}

impl BibRecord {
    /// Validate and normalize (trim, drop repeated authors).
    pub fn new(
        paper_id: &str,
        year: u32,
        venue: &str,
        field: &str,
        authors: impl IntoIterator<Item = impl AsRef<str>>,
    ) -> Result<Self> {
        let nonempty = |what: &str, s: &str| -> Result<String> {
            let s = s.trim();
            if s.is_empty() {
                Err(Error::InvalidInput(format!("empty {what}")))
            } else if s.contains(['\t', '\n', '\r']) {
                Err(Error::InvalidInput(format!(
                    "{what} {s:?} contains a tab or line break"
                )))
            } else {
                Ok(s.to_string())
            }
        };
        if year == 0 {
            return Err(Error::InvalidInput("year must be positive".into()));
        }
        let mut list: Vec<String> = Vec::new();
        for a in authors {
            let a = a.as_ref().trim();
            if a.is_empty() {
                continue;
            }
            if a.contains('|') {
                return Err(Error::InvalidInput(format!("author {a:?} contains '|'")));
            }
            if !list.iter().any(|x| x == a) {
                list.push(nonempty("author", a)?);
            }
        }
        if list.is_empty() {
            return Err(Error::InvalidInput("empty author list".into()));
        }
        Ok(BibRecord {
            paper_id: nonempty("paper id", paper_id)?,
            year,
            venue: nonempty("venue", venue)?,
            field: nonempty("field", field)?,
            authors: list,
        })
    }

    pub fn to_tsv_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.paper_id,
            self.year,
            self.venue,
            self.field,
            self.authors.join("|")
        )
    }
}

/// A rejected input line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsedRecords {
    pub records: Vec<BibRecord>,
    pub errors: Vec<LineError>,
}

fn parse_line(line: &str) -> std::result::Result<BibRecord, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 5 {
        return Err(format!(
            "expected 5 tab-separated columns, got {}",
            cols.len()
        ));
    }
    let year: u32 = cols[1]
        .trim()
        .parse()
        .map_err(|_| format!("year {:?} is not a positive integer", cols[1]))?;
    BibRecord::new(cols[0], year, cols[2], cols[3], cols[4].split('|')).map_err(|e| e.to_string())
}

/// Parse the record TSV. Malformed lines are collected, not fatal.
pub fn parse_records(reader: impl BufRead) -> Result<ParsedRecords> {
    let mut out = ParsedRecords::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_line(line) {
            Ok(r) => out.records.push(r),
            Err(message) => out.errors.push(LineError {
                line: i + 1,
                message,
            }),
        }
    }
    Ok(out)
}

pub fn write_records(records: &[BibRecord], mut w: impl Write) -> std::io::Result<()> {
    for r in records {
        writeln!(w, "{}", r.to_tsv_line())?;
    }
    Ok(())
}

/// Split into (year <= cutoff, year > cutoff), preserving order.
pub fn temporal_split(records: &[BibRecord], cutoff_year: u32) -> (Vec<BibRecord>, Vec<BibRecord>) {
    records.iter().cloned().partition(|r| r.year <= cutoff_year)
}

/// The four experimental networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NetworkKind {
    #[serde(rename = "AA")]
    AA,
    #[serde(rename = "APA")]
    APA,
    #[serde(rename = "AVA")]
    AVA,
    #[serde(rename = "All", alias = "ALL")]
    All,
}

impl NetworkKind {
    pub const ALL_KINDS: [NetworkKind; 4] = [
        NetworkKind::AA,
        NetworkKind::APA,
        NetworkKind::AVA,
        NetworkKind::All,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NetworkKind::AA => "AA",
            NetworkKind::APA => "APA",
            NetworkKind::AVA => "AVA",
            NetworkKind::All => "All",
        }
    }
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NetworkKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AA" => Ok(NetworkKind::AA),
            "APA" => Ok(NetworkKind::APA),
            "AVA" => Ok(NetworkKind::AVA),
            "ALL" => Ok(NetworkKind::All),
            other => Err(Error::InvalidInput(format!(
                "unknown network variant {other:?}"
            ))),
        }
    }
}

/// Build one of the experimental networks from a record list.
///
/// * `AA`: authors, joined when they share a paper.
/// * `APA`: author–paper incidence.
/// * `AVA`: author–venue, joined when the author published there.
/// * `All`: author–paper, paper–venue and author–venue edges; no author–author edges.
pub fn build_network(records: &[BibRecord], kind: NetworkKind) -> Result<TypedGraph> {
    if records.is_empty() {
        return Err(Error::InvalidInput(
            "cannot build a network from zero records".into(),
        ));
    }
    let (a_t, p_t, v_t) = (author_type(), paper_type(), venue_type());
    let mut b = GraphBuilder::new();
    for r in records {
        let authors = r
            .authors
            .iter()
            .map(|a| b.add_node(&a_t, a))
            .collect::<Result<Vec<_>>>()?;
        let paper = match kind {
            NetworkKind::APA | NetworkKind::All => Some(b.add_node(&p_t, &r.paper_id)?),
            _ => None,
        };
        let venue = match kind {
            NetworkKind::AVA | NetworkKind::All => Some(b.add_node(&v_t, &r.venue)?),
            _ => None,
        };
        if kind == NetworkKind::AA {
            for (i, &u) in authors.iter().enumerate() {
                for &v in &authors[i + 1..] {
                    b.add_edge(u, v)?;
                }
            }
        }
        for &a in &authors {
            if let Some(p) = paper {
                b.add_edge(a, p)?;
            }
            if let Some(v) = venue {
                b.add_edge(a, v)?;
            }
        }
        if let (Some(p), Some(v)) = (paper, venue) {
            b.add_edge(p, v)?;
        }
    }
    Ok(b.freeze())
}

/// Research-area label per author: the field with the most publications,
/// ties going to the lexicographically smallest field name.
pub fn derive_author_labels(records: &[BibRecord]) -> BTreeMap<String, String> {
    let mut counts: HashMap<&str, BTreeMap<&str, usize>> = HashMap::new();
    for r in records {
        for a in &r.authors {
            *counts
                .entry(a.as_str())
                .or_default()
                .entry(r.field.as_str())
                .or_insert(0) += 1;
        }
    }
    counts
        .into_iter()
        .map(|(author, fields)| {
            // BTreeMap iterates fields in ascending order; keep the first maximum.
            let mut best: Option<(&str, usize)> = None;
            for (f, c) in fields {
                if best.is_none_or(|(_, bc)| c > bc) {
                    best = Some((f, c));
                }
            }
            (author.to_string(), best.expect("non-empty").0.to_string())
        })
        .collect()
}

pub fn write_labels(labels: &BTreeMap<String, String>, mut w: impl Write) -> std::io::Result<()> {
    for (a, f) in labels {
        writeln!(w, "{a}\t{f}")?;
    }
    Ok(())
}

pub fn read_labels(reader: impl BufRead) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (a, f) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: "expected author<TAB>field".into(),
        })?;
        out.insert(a.trim().to_string(), f.trim().to_string());
    }
    Ok(out)
}

/// Inclusive integer range sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

/// Parameters of the planted-area synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub num_authors: usize,
    pub num_areas: usize,
    pub num_venues_per_area: usize,
    /// Mean (Poisson) number of papers each author leads; at least one.
    pub papers_per_author: f64,
    /// Co-authors added to the lead author of each paper.
    pub coauthors_per_paper: CountRange,
    /// Chance that a co-author is drawn from all authors instead of the lead's area.
    pub cross_area_probability: f64,
    /// Fraction of papers dated after `cutoff_year`.
    pub eval_fraction: f64,
    pub first_year: u32,
    pub cutoff_year: u32,
    pub last_year: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_authors: 500,
            num_areas: 5,
            num_venues_per_area: 4,
            papers_per_author: 4.0,
            coauthors_per_paper: CountRange { min: 1, max: 3 },
            cross_area_probability: 0.1,
            eval_fraction: 0.2,
            first_year: 1968,
            cutoff_year: 2008,
            last_year: 2011,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Infeasible(m));
        if self.num_authors == 0 || self.num_areas == 0 || self.num_venues_per_area == 0 {
            return bad("author, area and venue counts must be positive".into());
        }
        if self.num_areas > self.num_authors {
            return bad("more areas than authors".into());
        }
        if !(self.papers_per_author > 0.0 && self.papers_per_author.is_finite()) {
            return bad("papers_per_author must be positive".into());
        }
        let CountRange { min, max } = self.coauthors_per_paper;
        if min > max {
            return bad("coauthors_per_paper.min exceeds max".into());
        }
        let smallest_area = self.num_authors / self.num_areas;
        if max + 1 > smallest_area {
            return bad(format!(
                "{} co-authors plus the lead do not fit in an area of {smallest_area} authors",
                max
            ));
        }
        for (name, p) in [
            ("cross_area_probability", self.cross_area_probability),
            ("eval_fraction", self.eval_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.first_year > 0
            && self.first_year <= self.cutoff_year
            && self.cutoff_year < self.last_year)
        {
            return bad("years must satisfy 0 < first <= cutoff < last".into());
        }
        Ok(())
    }

    pub fn author_name(&self, i: usize) -> String {
        format!("author{i:05}")
    }

    pub fn area_name(a: usize) -> String {
        format!("area{a}")
    }

    /// Planted home area of author `i`.
    pub fn home_area(&self, i: usize) -> usize {
        i % self.num_areas
    }
}

/// Generate a planted-area corpus. Deterministic in `config.seed`.
pub fn synth_generate(config: &SynthConfig) -> Result<Vec<BibRecord>> {
    config.validate()?;
    let mut rng = seed::rng(config.seed, &[0x5e17]);
    let n = config.num_authors;
    let members: Vec<Vec<usize>> = (0..config.num_areas)
        .map(|a| (0..n).filter(|&i| config.home_area(i) == a).collect())
        .collect();
    let poisson = Poisson::new(config.papers_per_author)
        .map_err(|e| Error::Infeasible(format!("papers_per_author: {e}")))?;
    let CountRange { min, max } = config.coauthors_per_paper;

    let mut records = Vec::new();
    let mut team: Vec<usize> = Vec::with_capacity(max + 1);
    for lead in 0..n {
        let area = config.home_area(lead);
        let led = (poisson.sample(&mut rng) as usize).max(1);
        for _ in 0..led {
            let size = rng.random_range(min..=max) + 1;
            team.clear();
            team.push(lead);
            while team.len() < size {
                let cand = if rng.random_bool(config.cross_area_probability) {
                    rng.random_range(0..n)
                } else {
                    members[area][rng.random_range(0..members[area].len())]
                };
                if !team.contains(&cand) {
                    team.push(cand);
                }
            }
            let venue_k = rng.random_range(0..config.num_venues_per_area);
            let year = if rng.random_bool(config.eval_fraction) {
                rng.random_range(config.cutoff_year + 1..=config.last_year)
            } else {
                rng.random_range(config.first_year..=config.cutoff_year)
            };
            records.push(BibRecord {
                paper_id: format!("paper{:06}", records.len()),
                year,
                venue: format!("venue{area}_{venue_k}"),
                field: SynthConfig::area_name(area),
                authors: team.iter().map(|&i| config.author_name(i)).collect(),
            });
        }
    }
    Ok(records)
}
