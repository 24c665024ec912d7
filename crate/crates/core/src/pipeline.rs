//! Declarative end-to-end runs.
//!
//! A [`PipelineConfig`] expands into a fixed stage graph: one `records`
//! stage, one `network-*` stage per network, `walks-*` and `embed-*` stages
//! per (network, method), `eval-*` stages per (task, network, method), and a
//! final `report`. Each stage writes plain files under
//! `<output_dir>/stages/<name>/` next to a `stage.json` holding the hash of
//! everything the stage read. A stage whose input hash and output files are
//! unchanged is skipped.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::corpus::{
    build_network, derive_author_labels, parse_records, read_labels, synth_generate,
    temporal_split, write_labels, write_records, BibRecord, NetworkKind, SynthConfig, AUTHOR,
};
use crate::embed_sgns::{train_sgns, SgnsConfig};
use crate::embed_verse::{train_verse, VerseConfig};
use crate::embedding::{concat_embeddings, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::evalkit::{
    build_area_dataset, build_linkpred_dataset, repeated_eval, ClassifierKind, ClassifierSpec,
    DtParams, LrParams, NbParams, RfParams,
};
use crate::hetgraph::{read_edge_list, write_edge_list, MetaPathSchema, TypedGraph};
use crate::report::{read_report_csv, report_table, write_report_csv, Method, ReportRow, Task};
use crate::seed;
use crate::walks::{metapath_walks, node2vec_walks, WalkConfig, WalkCorpus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub train_fraction: f64,
    pub repeats: usize,
    /// Sampled non-co-author pairs per co-author pair.
    pub negative_ratio: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            train_fraction: 0.8,
            repeats: 10,
            negative_ratio: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSettings {
    pub lr: LrParams,
    pub nb: NbParams,
    pub dt: DtParams,
    pub rf: RfParams,
}

impl ClassifierSettings {
    pub fn spec(&self, kind: ClassifierKind) -> ClassifierSpec {
        match kind {
            ClassifierKind::LR => ClassifierSpec::LR(self.lr.clone()),
            ClassifierKind::NB => ClassifierSpec::NB(self.nb.clone()),
            ClassifierKind::DT => ClassifierSpec::DT(self.dt.clone()),
            ClassifierKind::RF => ClassifierSpec::RF(self.rf.clone()),
        }
    }
}

/// Everything a run needs. Seeds inside `walk`, `sgns` and `verse` are
/// ignored: each stage draws its own seed from `seed` and its stage name.
/// The synthetic corpus keeps `synth.seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Record TSV to ingest. Exclusive with `synth`.
    pub input: Option<PathBuf>,
    /// Synthetic corpus parameters; used when `input` is unset.
    pub synth: Option<SynthConfig>,
    pub cutoff_year: u32,
    pub networks: Vec<NetworkKind>,
    pub methods: Vec<Method>,
    pub tasks: Vec<Task>,
    pub classifiers: Vec<ClassifierKind>,
    /// Meta-path for metapath2vec on the All network.
    pub all_schema: String,
    pub walk: WalkConfig,
    pub sgns: SgnsConfig,
    pub verse: VerseConfig,
    pub eval: EvalSettings,
    pub classifier: ClassifierSettings,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Single-worker training so reruns are byte-identical.
    pub deterministic: bool,
    /// Training workers when not deterministic; 0 uses every core.
    pub threads: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: None,
            synth: None,
            cutoff_year: 2008,
            networks: NetworkKind::ALL_KINDS.to_vec(),
            methods: Method::ALL.to_vec(),
            tasks: Task::ALL.to_vec(),
            classifiers: ClassifierKind::ALL.to_vec(),
            all_schema: "A-P-A".into(),
            walk: WalkConfig::default(),
            sgns: SgnsConfig::default(),
            verse: VerseConfig::default(),
            eval: EvalSettings::default(),
            classifier: ClassifierSettings::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
            deterministic: true,
            threads: 0,
        }
    }
}

fn canonical<T: Ord + Copy>(items: &[T]) -> Vec<T> {
    let mut v = items.to_vec();
    v.sort();
    v.dedup();
    v
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Fill in the implicit synthetic source, sort and dedup the lists, and
    /// check every constraint.
    pub fn resolved(&self) -> Result<Self> {
        let mut c = self.clone();
        if c.input.is_some() && c.synth.is_some() {
            return Err(Error::Config(
                "set either `input` or `[synth]`, not both".into(),
            ));
        }
        if c.input.is_none() && c.synth.is_none() {
            c.synth = Some(SynthConfig::default());
        }
        c.networks = canonical(&c.networks);
        c.methods = canonical(&c.methods);
        c.tasks = canonical(&c.tasks);
        c.classifiers = canonical(&c.classifiers);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (what, empty) in [
            ("networks", self.networks.is_empty()),
            ("methods", self.methods.is_empty()),
            ("tasks", self.tasks.is_empty()),
            ("classifiers", self.classifiers.is_empty()),
        ] {
            if empty {
                return Err(Error::Config(format!("`{what}` must not be empty")));
            }
        }
        if self.methods.contains(&Method::Combine) {
            let missing: Vec<&str> = Method::BASE
                .iter()
                .filter(|m| !self.methods.contains(m))
                .map(|m| m.as_str())
                .collect();
            if !missing.is_empty() {
                return Err(Error::Config(format!(
                    "combine needs every base method; missing {}",
                    missing.join(", ")
                )));
            }
        }
        if let Some(s) = &self.synth {
            s.validate()?;
            if s.cutoff_year != self.cutoff_year {
                return Err(Error::Config(format!(
                    "synth.cutoff_year ({}) differs from cutoff_year ({})",
                    s.cutoff_year, self.cutoff_year
                )));
            }
        }
        self.walk.validate()?;
        self.sgns.validate()?;
        self.verse.validate()?;
        for n in &self.networks {
            let schema = self.schema_for(*n)?;
            if !schema.is_symmetric() || schema.types()[0].as_str() != AUTHOR {
                return Err(Error::Config(format!(
                    "meta-path for {n} must start and end at authors and be symmetric, got {schema}"
                )));
            }
        }
        for k in &self.classifiers {
            self.classifier.spec(*k).validate()?;
        }
        let e = &self.eval;
        if !(e.train_fraction > 0.0 && e.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "eval.train_fraction must lie in (0, 1), got {}",
                e.train_fraction
            )));
        }
        if e.repeats < 1 {
            return Err(Error::Config("eval.repeats must be at least 1".into()));
        }
        if !(e.negative_ratio > 0.0 && e.negative_ratio.is_finite()) {
            return Err(Error::Config("eval.negative_ratio must be positive".into()));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::Config("output_dir must not be empty".into()));
        }
        Ok(())
    }

    /// Walk schema metapath2vec uses on `network`.
    pub fn schema_for(&self, network: NetworkKind) -> Result<MetaPathSchema> {
        match network {
            NetworkKind::AA => MetaPathSchema::parse("A-A"),
            NetworkKind::APA => MetaPathSchema::parse("A-P-A"),
            NetworkKind::AVA => MetaPathSchema::parse("A-V-A"),
            NetworkKind::All => MetaPathSchema::parse(&self.all_schema),
        }
    }

    fn workers(&self) -> usize {
        if self.deterministic {
            1
        } else if self.threads > 0 {
            self.threads
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum StageKind {
    Records,
    Network(NetworkKind),
    Walks(NetworkKind, Method),
    Embed(NetworkKind, Method),
    Eval(Task, NetworkKind, Method),
    Report,
}

#[derive(Debug, Clone)]
struct Stage {
    name: String,
    kind: StageKind,
    deps: Vec<String>,
}

fn network_stage(n: NetworkKind) -> String {
    format!("network-{n}")
}

fn walks_stage(n: NetworkKind, m: Method) -> String {
    format!("walks-{n}-{m}")
}

fn embed_stage(n: NetworkKind, m: Method) -> String {
    format!("embed-{n}-{m}")
}

fn eval_stage(t: Task, n: NetworkKind, m: Method) -> String {
    format!("eval-{t}-{n}-{m}")
}

fn plan(cfg: &PipelineConfig) -> Vec<Stage> {
    let mut stages = vec![Stage {
        name: "records".into(),
        kind: StageKind::Records,
        deps: vec![],
    }];
    let mut evals = Vec::new();
    for &n in &cfg.networks {
        stages.push(Stage {
            name: network_stage(n),
            kind: StageKind::Network(n),
            deps: vec!["records".into()],
        });
        for &m in &cfg.methods {
            let deps = match m {
                Method::Metapath2vec | Method::Node2vec => {
                    stages.push(Stage {
                        name: walks_stage(n, m),
                        kind: StageKind::Walks(n, m),
                        deps: vec![network_stage(n)],
                    });
                    vec![network_stage(n), walks_stage(n, m)]
                }
                Method::Verse => vec![network_stage(n)],
                Method::Combine => Method::BASE.iter().map(|&b| embed_stage(n, b)).collect(),
            };
            stages.push(Stage {
                name: embed_stage(n, m),
                kind: StageKind::Embed(n, m),
                deps,
            });
        }
    }
    for &t in &cfg.tasks {
        for &n in &cfg.networks {
            for &m in &cfg.methods {
                let name = eval_stage(t, n, m);
                evals.push(name.clone());
                stages.push(Stage {
                    name,
                    kind: StageKind::Eval(t, n, m),
                    deps: vec!["records".into(), embed_stage(n, m)],
                });
            }
        }
    }
    stages.push(Stage {
        name: "report".into(),
        kind: StageKind::Report,
        deps: evals,
    });
    stages
}

/// Stage names in execution order.
pub fn stage_names(cfg: &PipelineConfig) -> Vec<String> {
    plan(cfg).into_iter().map(|s| s.name).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    /// Hash of the stage's inputs and parameters.
    pub key: String,
    pub cache_hit: bool,
    pub seconds: f64,
    /// Output path relative to the output directory → sha256.
    pub artifacts: BTreeMap<String, String>,
}

/// What a run did and produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: PipelineConfig,
    pub stages: Vec<StageRecord>,
    /// Relative paths of the final report files, when the report stage ran.
    pub report_csv: Option<String>,
    pub report_txt: Option<String>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
    }

    /// Check that every declared artifact under `root` exists with its
    /// recorded hash.
    pub fn verify(&self, root: &Path) -> Result<()> {
        for s in &self.stages {
            for (rel, want) in &s.artifacts {
                let got = sha256_file(&root.join(rel))?;
                if &got != want {
                    return Err(Error::InvalidInput(format!(
                        "artifact {rel} changed since stage {}",
                        s.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn report_rows(&self, root: &Path) -> Result<Vec<ReportRow>> {
        let rel = self
            .report_csv
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("manifest has no report".into()))?;
        let path = root.join(rel);
        read_report_csv(File::open(&path).map_err(|e| Error::io(&path, e))?)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Run only this stage and what it depends on.
    pub target: Option<String>,
    /// Config path quoted in replay hints of failing stages.
    pub config_path: Option<PathBuf>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(w: BufWriter<File>, path: &Path) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .sync_all()
        .map_err(|e| Error::io(path, e))
}

fn write_with(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

pub fn load_records(path: &Path) -> Result<Vec<BibRecord>> {
    let parsed = parse_records(open(path)?)?;
    for e in &parsed.errors {
        log::warn!("{}: skipped {e}", path.display());
    }
    Ok(parsed.records)
}

pub fn load_graph(path: &Path) -> Result<TypedGraph> {
    read_edge_list(open(path)?)
}

pub fn load_embedding(path: &Path) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::read_text(open(path)?)
}

#[derive(Debug, Deserialize, Serialize)]
struct StageStamp {
    key: String,
    outputs: BTreeMap<String, String>,
}

struct Runner<'a> {
    cfg: &'a PipelineConfig,
    root: PathBuf,
    replay_config: String,
    done: HashMap<String, BTreeMap<String, String>>,
    records: Vec<StageRecord>,
}

impl Runner<'_> {
    fn dir(&self, stage: &str) -> PathBuf {
        self.root.join("stages").join(stage)
    }

    fn file(&self, stage: &str, name: &str) -> PathBuf {
        self.dir(stage).join(name)
    }

    fn stage_seed(&self, name: &str) -> u64 {
        seed::derive_str(self.cfg.seed, name)
    }

    fn walk_config(&self, stage: &str) -> WalkConfig {
        WalkConfig {
            seed: self.stage_seed(stage),
            ..self.cfg.walk.clone()
        }
    }

    fn sgns_config(&self, stage: &str) -> SgnsConfig {
        SgnsConfig {
            seed: self.stage_seed(stage),
            workers: self.cfg.workers(),
            ..self.cfg.sgns.clone()
        }
    }

    fn verse_config(&self, stage: &str) -> VerseConfig {
        VerseConfig {
            seed: self.stage_seed(stage),
            workers: self.cfg.workers(),
            ..self.cfg.verse.clone()
        }
    }

    fn eval_seed(&self, t: Task, n: NetworkKind) -> u64 {
        // Shared by every method on one network, so methods see the same
        // negative pairs and the same splits.
        seed::derive_str(self.cfg.seed, &format!("eval-{t}-{n}"))
    }

    fn params(&self, stage: &Stage) -> Result<serde_json::Value> {
        let c = self.cfg;
        Ok(match &stage.kind {
            StageKind::Records => match (&c.input, &c.synth) {
                (Some(path), _) => {
                    json!({"input_sha256": sha256_file(path)?, "cutoff": c.cutoff_year})
                }
                (None, Some(s)) => json!({"synth": s, "cutoff": c.cutoff_year}),
                (None, None) => unreachable!("resolved config has a source"),
            },
            StageKind::Network(n) => json!({"network": n}),
            StageKind::Walks(n, Method::Metapath2vec) => json!({
                "walk": self.walk_config(&stage.name),
                "schema": c.schema_for(*n)?.to_string(),
            }),
            StageKind::Walks(_, _) => {
                json!({"walk": self.walk_config(&stage.name), "node2vec": true})
            }
            StageKind::Embed(_, Method::Verse) => json!({"verse": self.verse_config(&stage.name)}),
            StageKind::Embed(_, Method::Combine) => json!({"combine": Method::BASE}),
            StageKind::Embed(_, _) => json!({"sgns": self.sgns_config(&stage.name)}),
            StageKind::Eval(t, n, _) => json!({
                "task": t,
                "eval": c.eval,
                "classifiers": c.classifiers.iter().map(|k| c.classifier.spec(*k)).collect::<Vec<_>>(),
                "seed": self.eval_seed(*t, *n),
            }),
            StageKind::Report => json!({"report": 1}),
        })
    }

    fn execute(&mut self, stage: &Stage) -> Result<()> {
        let started = Instant::now();
        let inputs: BTreeMap<&str, &BTreeMap<String, String>> = stage
            .deps
            .iter()
            .map(|d| (d.as_str(), &self.done[d]))
            .collect();
        let key_doc = json!({
            "stage": stage.name,
            "version": env!("CARGO_PKG_VERSION"),
            "inputs": inputs,
            "params": self.params(stage)?,
        });
        let key = sha256_hex(key_doc.to_string().as_bytes());
        let dir = self.dir(&stage.name);
        let stamp_path = dir.join("stage.json");
        if let Some(outputs) = self.cached(&stamp_path, &key) {
            log::info!("{}: cached", stage.name);
            self.finish_stage(stage, key, outputs, true, started);
            return Ok(());
        }
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        log::info!("{}: running", stage.name);
        let files = self.run(stage)?;
        let mut outputs = BTreeMap::new();
        for f in files {
            outputs.insert(f.to_string(), sha256_file(&dir.join(f))?);
        }
        let stamp = StageStamp {
            key: key.clone(),
            outputs: outputs.clone(),
        };
        write_with(&stamp_path, |w| {
            serde_json::to_writer_pretty(&mut *w, &stamp)?;
            writeln!(w)
        })?;
        self.finish_stage(stage, key, outputs, false, started);
        Ok(())
    }

    fn cached(&self, stamp_path: &Path, key: &str) -> Option<BTreeMap<String, String>> {
        let text = fs::read_to_string(stamp_path).ok()?;
        let stamp: StageStamp = serde_json::from_str(&text).ok()?;
        if stamp.key != key {
            return None;
        }
        let dir = stamp_path.parent()?;
        for (f, h) in &stamp.outputs {
            if sha256_file(&dir.join(f)).ok()? != *h {
                return None;
            }
        }
        Some(stamp.outputs)
    }

    fn finish_stage(
        &mut self,
        stage: &Stage,
        key: String,
        outputs: BTreeMap<String, String>,
        cache_hit: bool,
        started: Instant,
    ) {
        let artifacts = outputs
            .iter()
            .map(|(f, h)| (format!("stages/{}/{f}", stage.name), h.clone()))
            .collect();
        self.records.push(StageRecord {
            name: stage.name.clone(),
            key,
            cache_hit,
            seconds: started.elapsed().as_secs_f64(),
            artifacts,
        });
        self.done.insert(stage.name.clone(), outputs);
    }

    /// Execute a stage into its directory and return the files it wrote.
    fn run(&self, stage: &Stage) -> Result<Vec<&'static str>> {
        let c = self.cfg;
        let out = |f: &str| self.file(&stage.name, f);
        match &stage.kind {
            StageKind::Records => {
                let records = match (&c.input, &c.synth) {
                    (Some(path), _) => {
                        let parsed = parse_records(open(path)?)?;
                        write_with(&out("rejected.txt"), |w| {
                            parsed.errors.iter().try_for_each(|e| writeln!(w, "{e}"))
                        })?;
                        parsed.records
                    }
                    (None, Some(s)) => {
                        write_with(&out("rejected.txt"), |_| Ok(()))?;
                        synth_generate(s)?
                    }
                    (None, None) => unreachable!("resolved config has a source"),
                };
                let (train, eval) = temporal_split(&records, c.cutoff_year);
                if train.is_empty() {
                    return Err(Error::InvalidInput(format!(
                        "no records on or before {}",
                        c.cutoff_year
                    )));
                }
                if eval.is_empty() && c.tasks.contains(&Task::Linkpred) {
                    return Err(Error::InvalidInput(format!(
                        "no records after {}",
                        c.cutoff_year
                    )));
                }
                write_with(&out("records.tsv"), |w| write_records(&records, w))?;
                write_with(&out("train.tsv"), |w| write_records(&train, w))?;
                write_with(&out("eval.tsv"), |w| write_records(&eval, w))?;
                let labels = derive_author_labels(&train);
                write_with(&out("labels.tsv"), |w| write_labels(&labels, w))?;
                Ok(vec![
                    "records.tsv",
                    "train.tsv",
                    "eval.tsv",
                    "labels.tsv",
                    "rejected.txt",
                ])
            }
            StageKind::Network(n) => {
                let train = load_records(&self.file("records", "train.tsv"))?;
                let g = build_network(&train, *n)?;
                write_with(&out("edges.tsv"), |w| write_edge_list(&g, w))?;
                write_with(&out("summary.txt"), |w| writeln!(w, "{}", g.summarize()))?;
                Ok(vec!["edges.tsv", "summary.txt"])
            }
            StageKind::Walks(n, m) => {
                let g = load_graph(&self.file(&network_stage(*n), "edges.tsv"))?;
                let wc = self.walk_config(&stage.name);
                let corpus = if *m == Method::Metapath2vec {
                    metapath_walks(&g, &c.schema_for(*n)?, &wc)?
                } else {
                    node2vec_walks(&g, &wc)?
                };
                write_with(&out("walks.txt"), |w| corpus.write(&g, w))?;
                Ok(vec!["walks.txt"])
            }
            StageKind::Embed(n, Method::Combine) => {
                let parts = Method::BASE
                    .iter()
                    .map(|&b| {
                        Ok(
                            load_embedding(&self.file(&embed_stage(*n, b), "embedding.txt"))?
                                .of_type(AUTHOR),
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                let refs: Vec<&EmbeddingMatrix> = parts.iter().collect();
                let combined = concat_embeddings(&refs)?;
                write_with(&out("embedding.txt"), |w| combined.write_text(w))?;
                Ok(vec!["embedding.txt"])
            }
            StageKind::Embed(n, m) => {
                let g = load_graph(&self.file(&network_stage(*n), "edges.tsv"))?;
                let emb = if *m == Method::Verse {
                    train_verse(&g, &self.verse_config(&stage.name))?
                } else {
                    let corpus =
                        WalkCorpus::read(&g, open(&self.file(&walks_stage(*n, *m), "walks.txt"))?)?;
                    let model = train_sgns(&corpus, &g, &self.sgns_config(&stage.name))?;
                    write_with(&out("losses.txt"), |w| {
                        model
                            .epoch_losses
                            .iter()
                            .try_for_each(|l| writeln!(w, "{l}"))
                    })?;
                    model.embedding
                };
                write_with(&out("embedding.txt"), |w| emb.write_text(w))?;
                Ok(if *m == Method::Verse {
                    vec!["embedding.txt"]
                } else {
                    vec!["embedding.txt", "losses.txt"]
                })
            }
            StageKind::Eval(t, n, m) => {
                let emb = load_embedding(&self.file(&embed_stage(*n, *m), "embedding.txt"))?;
                let seed = self.eval_seed(*t, *n);
                let (dataset, coverage) = match t {
                    Task::Linkpred => {
                        let eval = load_records(&self.file("records", "eval.tsv"))?;
                        build_linkpred_dataset(&eval, &emb, c.eval.negative_ratio, seed)?
                    }
                    Task::Areaclass => {
                        let labels = read_labels(open(&self.file("records", "labels.tsv"))?)?;
                        build_area_dataset(&labels, &emb)?
                    }
                };
                let mut rows = Vec::new();
                for &k in &c.classifiers {
                    let outcome = repeated_eval(
                        &dataset,
                        &c.classifier.spec(k),
                        c.eval.train_fraction,
                        c.eval.repeats,
                        seed::derive(seed, &[k as u64]),
                    )?;
                    rows.push(ReportRow {
                        task: *t,
                        network: *n,
                        method: *m,
                        classifier: k,
                        mean_accuracy: outcome.mean,
                        std_accuracy: outcome.std,
                        repeats: outcome.repeats,
                        n_samples: outcome.n_samples,
                        coverage: coverage.fraction(),
                    });
                }
                let mut buf = Vec::new();
                write_report_csv(&rows, &mut buf)?;
                write_with(&out("rows.csv"), |w| w.write_all(&buf))?;
                Ok(vec!["rows.csv"])
            }
            StageKind::Report => {
                let mut rows = Vec::new();
                for d in &stage.deps {
                    rows.extend(read_report_csv(open(&self.file(d, "rows.csv"))?)?);
                }
                let mut buf = Vec::new();
                write_report_csv(&rows, &mut buf)?;
                write_with(&out("report.csv"), |w| w.write_all(&buf))?;
                write_with(&out("report.txt"), |w| {
                    w.write_all(report_table(&rows).as_bytes())
                })?;
                Ok(vec!["report.csv", "report.txt"])
            }
        }
    }
}

/// Execute the stage graph for `config` (or the part of it that `target`
/// needs) and write `manifest.json` plus the report files into the output
/// directory.
pub fn run_pipeline(config: &PipelineConfig, opts: &RunOptions) -> Result<RunManifest> {
    let cfg = config.resolved()?;
    let mut stages = plan(&cfg);
    if let Some(target) = &opts.target {
        if !stages.iter().any(|s| &s.name == target) {
            return Err(Error::Config(format!("no stage named {target:?}")));
        }
        let mut needed: HashSet<String> = HashSet::from([target.clone()]);
        for s in stages.iter().rev() {
            if needed.contains(&s.name) {
                needed.extend(s.deps.iter().cloned());
            }
        }
        stages.retain(|s| needed.contains(&s.name));
    }
    let root = cfg.output_dir.clone();
    fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    let resolved_path = root.join("config.resolved.toml");
    write_with(&resolved_path, |w| {
        w.write_all(cfg.to_toml_string().unwrap_or_default().as_bytes())
    })?;
    let replay_config = opts
        .config_path
        .clone()
        .unwrap_or(resolved_path)
        .display()
        .to_string();
    let mut runner = Runner {
        cfg: &cfg,
        root: root.clone(),
        replay_config,
        done: HashMap::new(),
        records: Vec::new(),
    };
    for stage in &stages {
        runner.execute(stage).map_err(|e| Error::Stage {
            stage: stage.name.clone(),
            replay: format!(
                "hetembed run --config {} --stage {}",
                runner.replay_config, stage.name
            ),
            source: Box::new(e),
        })?;
    }
    let has_report = stages.iter().any(|s| s.kind == StageKind::Report);
    let mut manifest = RunManifest {
        config: cfg.clone(),
        stages: runner.records,
        report_csv: None,
        report_txt: None,
    };
    if has_report {
        for name in ["report.csv", "report.txt"] {
            let from = root.join("stages/report").join(name);
            let to = root.join(name);
            fs::copy(&from, &to).map_err(|e| Error::io(&to, e))?;
        }
        manifest.report_csv = Some("report.csv".into());
        manifest.report_txt = Some("report.txt".into());
    }
    let manifest_path = root.join("manifest.json");
    write_with(&manifest_path, |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        writeln!(w)
    })?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_requires_base_methods() {
        let cfg = PipelineConfig {
            methods: vec![Method::Metapath2vec, Method::Verse, Method::Combine],
            ..PipelineConfig::default()
        };
        let err = cfg.resolved().unwrap_err();
        assert!(err.to_string().contains("node2vec"), "{err}");
        assert!(err.is_validation());
    }

    #[test]
    fn source_is_exclusive() {
        let cfg = PipelineConfig {
            input: Some("x.tsv".into()),
            synth: Some(SynthConfig::default()),
            ..PipelineConfig::default()
        };
        assert!(cfg.resolved().is_err());
        assert!(PipelineConfig::default()
            .resolved()
            .unwrap()
            .synth
            .is_some());
    }

    #[test]
    fn schemas_follow_networks() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.schema_for(NetworkKind::AA).unwrap().to_string(), "A-A");
        assert_eq!(
            cfg.schema_for(NetworkKind::APA).unwrap().to_string(),
            "A-P-A"
        );
        assert_eq!(
            cfg.schema_for(NetworkKind::AVA).unwrap().to_string(),
            "A-V-A"
        );
        assert_eq!(
            cfg.schema_for(NetworkKind::All).unwrap().to_string(),
            "A-P-A"
        );
        let bad = PipelineConfig {
            all_schema: "P-A-P".into(),
            ..PipelineConfig::default()
        };
        assert!(bad.resolved().is_err());
    }

    #[test]
    fn plan_covers_grid() {
        let names = stage_names(&PipelineConfig::default().resolved().unwrap());
        // records + 4 networks + 4×2 walks + 4×4 embeds + 2×4×4 evals + report
        assert_eq!(names.len(), 1 + 4 + 8 + 16 + 32 + 1);
        assert_eq!(names.first().unwrap(), "records");
        assert_eq!(names.last().unwrap(), "report");
        assert!(names.contains(&"embed-All-combine".to_string()));
        assert!(names.contains(&"eval-areaclass-AVA-verse".to_string()));
    }

    #[test]
    fn toml_round_trip_and_unknown_keys() {
        let text = r#"
            networks = ["AA", "ALL"]
            methods = ["verse"]
            tasks = ["areaclass"]
            classifiers = ["LR"]
            seed = 3
            [synth]
            num_authors = 40
            [verse]
            dim = 8
            [classifier.lr]
            l2 = 0.01
        "#;
        let cfg = PipelineConfig::from_toml_str(text)
            .unwrap()
            .resolved()
            .unwrap();
        assert_eq!(cfg.networks, vec![NetworkKind::AA, NetworkKind::All]);
        assert_eq!(cfg.verse.dim, 8);
        assert_eq!(cfg.classifier.lr.l2, 0.01);
        let again = PipelineConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
        assert!(PipelineConfig::from_toml_str("bogus = 1").is_err());
    }
}
