//! Evaluation: pair and author datasets built from embeddings, the four
//! classifiers, and accuracy over repeated random train/test splits.

mod logistic;
mod naive_bayes;
mod tree;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{author_label, BibRecord};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::seed;

pub use logistic::LogisticModel;
pub use naive_bayes::GaussianNbModel;
pub use tree::{DecisionTreeModel, RandomForestModel, TreeParams};

/// Feature rows with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    n_features: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        n_features: usize,
        features: Vec<f64>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InvalidInput(
                "dataset needs at least one feature".into(),
            ));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * n_features,
                found: features.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::InvalidInput(format!(
                "label {bad} has no class name ({} classes)",
                class_names.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
        Ok(LabeledDataset {
            n_features,
            features,
            labels,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn distinct_labels(&self) -> usize {
        self.labels.iter().collect::<BTreeSet<_>>().len()
    }

    pub fn subset(&self, rows: &[usize]) -> LabeledDataset {
        let mut features = Vec::with_capacity(rows.len() * self.n_features);
        for &i in rows {
            features.extend_from_slice(self.row(i));
        }
        LabeledDataset {
            n_features: self.n_features,
            features,
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Debug snapshot: `label<TAB>f1<TAB>f2…` per row.
    pub fn write_tsv(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        for i in 0..self.len() {
            write!(w, "{}", self.class_names[self.labels[i]])?;
            for v in self.row(i) {
                write!(w, "\t{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// How many candidate items survived embedding-coverage filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Coverage {
    pub total: usize,
    pub kept: usize,
}

impl Coverage {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.kept as f64 / self.total as f64
        }
    }
}

/// Element-wise product of two node vectors.
pub fn hadamard_features(u: &[f32], v: &[f32]) -> Result<Vec<f64>> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    Ok(u.iter()
        .zip(v)
        .map(|(&a, &b)| a as f64 * b as f64)
        .collect())
}

/// Uniformly sample `round(ratio * |positives|)` distinct unordered pairs
/// over `0..universe` that are neither self-pairs nor positives.
pub fn sample_nonedges(
    positives: &HashSet<(usize, usize)>,
    universe: usize,
    ratio: f64,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    if !(ratio >= 0.0 && ratio.is_finite()) {
        return Err(Error::Config(format!(
            "negative ratio must be non-negative, got {ratio}"
        )));
    }
    let mut pos = HashSet::with_capacity(positives.len());
    for &(a, b) in positives {
        if a == b || a >= universe || b >= universe {
            return Err(Error::InvalidInput(format!(
                "positive pair ({a}, {b}) outside universe"
            )));
        }
        pos.insert((a.min(b), a.max(b)));
    }
    let count = (ratio * positives.len() as f64).round() as usize;
    let all_pairs = universe * universe.saturating_sub(1) / 2;
    let available = all_pairs - pos.len();
    if count > available {
        return Err(Error::Infeasible(format!(
            "requested {count} non-edges but only {available} exist"
        )));
    }
    let mut rng = seed::rng(seed, &[0x6e65]);
    if count == 0 {
        return Ok(Vec::new());
    }
    if count * 2 <= available {
        let mut chosen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let a = rng.random_range(0..universe);
            let b = rng.random_range(0..universe);
            if a == b {
                continue;
            }
            let pair = (a.min(b), a.max(b));
            if !pos.contains(&pair) && chosen.insert(pair) {
                out.push(pair);
            }
        }
        Ok(out)
    } else {
        let mut candidates = Vec::with_capacity(available);
        for a in 0..universe {
            for b in a + 1..universe {
                if !pos.contains(&(a, b)) {
                    candidates.push((a, b));
                }
            }
        }
        Ok(sample(&mut rng, candidates.len(), count)
            .into_iter()
            .map(|i| candidates[i])
            .collect())
    }
}

/// Co-authorship pairs (label 1) against sampled non-co-author pairs
/// (label 0), featurized by the Hadamard product of the author vectors.
///
/// Coverage counts distinct co-author pairs before and after dropping pairs
/// with an author missing from `embeddings`.
pub fn build_linkpred_dataset(
    eval_records: &[BibRecord],
    embeddings: &EmbeddingMatrix,
    ratio: f64,
    seed: u64,
) -> Result<(LabeledDataset, Coverage)> {
    let mut all_pairs = BTreeSet::new();
    let mut authors = BTreeSet::new();
    for r in eval_records {
        for (i, a) in r.authors.iter().enumerate() {
            authors.insert(a.as_str());
            for b in &r.authors[i + 1..] {
                let (x, y) = if a < b { (a, b) } else { (b, a) };
                all_pairs.insert((x.as_str(), y.as_str()));
            }
        }
    }
    let universe: Vec<&str> = authors
        .into_iter()
        .filter(|a| embeddings.contains(&author_label(a)))
        .collect();
    let index: HashMap<&str, usize> = universe.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    let positives: Vec<(usize, usize)> = all_pairs
        .iter()
        .filter_map(|(a, b)| Some((*index.get(a)?, *index.get(b)?)))
        .collect();
    let coverage = Coverage {
        total: all_pairs.len(),
        kept: positives.len(),
    };
    if positives.is_empty() {
        return Err(Error::InvalidInput(
            "no co-author pair has both authors embedded".into(),
        ));
    }
    let pos_set: HashSet<(usize, usize)> = positives.iter().copied().collect();
    let negatives = sample_nonedges(&pos_set, universe.len(), ratio, seed)?;
    let dim = embeddings.dim();
    let vec_of = |i: usize| {
        embeddings
            .get(&author_label(universe[i]))
            .expect("filtered")
    };
    let mut features = Vec::with_capacity((positives.len() + negatives.len()) * dim);
    let mut labels = Vec::with_capacity(positives.len() + negatives.len());
    for (pairs, label) in [(&positives, 1usize), (&negatives, 0usize)] {
        for &(a, b) in pairs {
            features.extend(hadamard_features(vec_of(a), vec_of(b))?);
            labels.push(label);
        }
    }
    let ds = LabeledDataset::new(dim, features, labels, vec!["0".into(), "1".into()])?;
    Ok((ds, coverage))
}

/// One row per labeled author with an embedding; the feature is the
/// author's vector and the class is the author's research area.
pub fn build_area_dataset(
    labels: &BTreeMap<String, String>,
    embeddings: &EmbeddingMatrix,
) -> Result<(LabeledDataset, Coverage)> {
    let kept: Vec<(&[f32], &str)> = labels
        .iter()
        .filter_map(|(author, field)| {
            Some((embeddings.get(&author_label(author))?, field.as_str()))
        })
        .collect();
    let class_names: Vec<String> = kept
        .iter()
        .map(|&(_, f)| f)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_string)
        .collect();
    if class_names.len() < 2 {
        return Err(Error::SingleClass);
    }
    let class_of: HashMap<&str, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut features = Vec::with_capacity(kept.len() * embeddings.dim());
    let mut ys = Vec::with_capacity(kept.len());
    for (v, f) in &kept {
        features.extend(v.iter().map(|&x| x as f64));
        ys.push(class_of[f]);
    }
    let coverage = Coverage {
        total: labels.len(),
        kept: kept.len(),
    };
    Ok((
        LabeledDataset::new(embeddings.dim(), features, ys, class_names)?,
        coverage,
    ))
}

/// Classifier families, in the row order of the result tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassifierKind {
    NB,
    RF,
    DT,
    LR,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::NB,
        ClassifierKind::RF,
        ClassifierKind::DT,
        ClassifierKind::LR,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::NB => "NB",
            ClassifierKind::RF => "RF",
            ClassifierKind::DT => "DT",
            ClassifierKind::LR => "LR",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NB" | "GNB" => Ok(ClassifierKind::NB),
            "RF" => Ok(ClassifierKind::RF),
            "DT" => Ok(ClassifierKind::DT),
            "LR" => Ok(ClassifierKind::LR),
            other => Err(Error::InvalidInput(format!("unknown classifier {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrParams {
    pub l2: f64,
    pub max_iter: usize,
    /// Stop when an iteration improves the loss by less than this fraction.
    pub tol: f64,
}

impl Default for LrParams {
    fn default() -> Self {
        LrParams {
            l2: 1e-4,
            max_iter: 1000,
            tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NbParams {
    pub var_floor: f64,
}

impl Default for NbParams {
    fn default() -> Self {
        NbParams { var_floor: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DtParams {
    /// 0 means unlimited.
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for DtParams {
    fn default() -> Self {
        DtParams {
            max_depth: 16,
            min_samples_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfParams {
    pub trees: usize,
    /// Features tried per split; 0 means `ceil(sqrt(d))`.
    pub max_features: usize,
    /// 0 means unlimited.
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            trees: 100,
            max_features: 0,
            max_depth: 16,
            min_samples_leaf: 2,
            bootstrap: true,
        }
    }
}

/// A classifier family with its hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ClassifierSpec {
    LR(LrParams),
    NB(NbParams),
    DT(DtParams),
    RF(RfParams),
}

impl ClassifierSpec {
    pub fn default_for(kind: ClassifierKind) -> Self {
        match kind {
            ClassifierKind::LR => ClassifierSpec::LR(LrParams::default()),
            ClassifierKind::NB => ClassifierSpec::NB(NbParams::default()),
            ClassifierKind::DT => ClassifierSpec::DT(DtParams::default()),
            ClassifierKind::RF => ClassifierSpec::RF(RfParams::default()),
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierSpec::LR(_) => ClassifierKind::LR,
            ClassifierSpec::NB(_) => ClassifierKind::NB,
            ClassifierSpec::DT(_) => ClassifierKind::DT,
            ClassifierSpec::RF(_) => ClassifierKind::RF,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            ClassifierSpec::LR(p) => p.l2 >= 0.0 && p.max_iter >= 1 && p.tol >= 0.0,
            ClassifierSpec::NB(p) => p.var_floor > 0.0,
            ClassifierSpec::DT(p) => p.min_samples_leaf >= 1,
            ClassifierSpec::RF(p) => p.trees >= 1 && p.min_samples_leaf >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid {} parameters: {self:?}",
                self.kind()
            )))
        }
    }
}

fn depth_limit(d: usize) -> Option<usize> {
    (d > 0).then_some(d)
}

/// A fitted classifier.
#[derive(Debug, Clone)]
pub enum Model {
    LR(LogisticModel),
    NB(GaussianNbModel),
    DT(DecisionTreeModel),
    RF(RandomForestModel),
}

impl Model {
    pub fn predict(&self, row: &[f64]) -> usize {
        match self {
            Model::LR(m) => m.predict(row),
            Model::NB(m) => m.predict(row),
            Model::DT(m) => m.predict(row),
            Model::RF(m) => m.predict(row),
        }
    }

    pub fn accuracy(&self, data: &LabeledDataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = (0..data.len())
            .filter(|&i| self.predict(data.row(i)) == data.labels()[i])
            .count();
        hits as f64 / data.len() as f64
    }
}

pub fn train_classifier(spec: &ClassifierSpec, train: &LabeledDataset, seed: u64) -> Result<Model> {
    spec.validate()?;
    if train.distinct_labels() < 2 {
        return Err(Error::SingleClass);
    }
    Ok(match spec {
        ClassifierSpec::LR(p) => Model::LR(LogisticModel::fit(train, p.l2, p.max_iter, p.tol)),
        ClassifierSpec::NB(p) => Model::NB(GaussianNbModel::fit(train, p.var_floor)),
        ClassifierSpec::DT(p) => Model::DT(DecisionTreeModel::fit(
            train,
            TreeParams {
                max_depth: depth_limit(p.max_depth),
                min_samples_leaf: p.min_samples_leaf,
                max_features: None,
            },
        )),
        ClassifierSpec::RF(p) => {
            let d = train.n_features();
            let m = if p.max_features == 0 {
                (d as f64).sqrt().ceil() as usize
            } else {
                p.max_features.min(d)
            };
            Model::RF(RandomForestModel::fit(
                train,
                p.trees,
                TreeParams {
                    max_depth: depth_limit(p.max_depth),
                    min_samples_leaf: p.min_samples_leaf,
                    max_features: Some(m),
                },
                p.bootstrap,
                seed,
            ))
        }
    })
}

/// Mean and spread of held-out accuracy over repeated random splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub mean: f64,
    /// Population standard deviation over repeats.
    pub std: f64,
    pub repeats: usize,
    pub n_samples: usize,
    pub accuracies: Vec<f64>,
}

const SPLIT_RETRIES: u64 = 10;

/// Shuffle, split `train_fraction` / rest, fit, score; `repeats` times.
/// A split whose training part holds a single class is redrawn with the
/// next sub-seed, up to a bounded number of retries.
pub fn repeated_eval(
    dataset: &LabeledDataset,
    spec: &ClassifierSpec,
    train_fraction: f64,
    repeats: usize,
    seed: u64,
) -> Result<EvalOutcome> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    spec.validate()?;
    let n = dataset.len();
    if n < 2 {
        return Err(Error::InvalidInput(
            "need at least two samples to split".into(),
        ));
    }
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let accuracies = (0..repeats as u64)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            for attempt in 0..SPLIT_RETRIES {
                let mut rng = seed::rng(seed, &[r, attempt]);
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut rng);
                let train = dataset.subset(&order[..n_train]);
                if train.distinct_labels() < 2 {
                    continue;
                }
                let test = dataset.subset(&order[n_train..]);
                let model = train_classifier(spec, &train, seed::derive(seed, &[r, attempt, 1]))?;
                return Ok(model.accuracy(&test));
            }
            Err(Error::SingleClass)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = accuracies.iter().sum::<f64>() / repeats as f64;
    let var = accuracies
        .iter()
        .map(|a| (a - mean) * (a - mean))
        .sum::<f64>()
        / repeats as f64;
    Ok(EvalOutcome {
        mean,
        std: var.sqrt(),
        repeats,
        n_samples: n,
        accuracies,
    })
}
