use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hetembed::corpus::{
    build_network, derive_author_labels, parse_records, read_labels, synth_generate,
    temporal_split, write_labels, write_records, CountRange, NetworkKind, SynthConfig,
};
use hetembed::embed_sgns::{train_sgns, SgnsConfig};
use hetembed::embed_verse::{train_verse, VerseConfig};
use hetembed::evalkit::{
    build_area_dataset, build_linkpred_dataset, repeated_eval, ClassifierKind,
};
use hetembed::hetgraph::{write_edge_list, MetaPathSchema};
use hetembed::pipeline::{
    load_embedding, load_graph, load_records, run_pipeline, ClassifierSettings, PipelineConfig,
    RunManifest, RunOptions,
};
use hetembed::report::{read_report_csv, report_table, write_report_csv, Method, ReportRow, Task};
use hetembed::walks::{metapath_walks, node2vec_walks, WalkConfig, WalkCorpus};
use hetembed::{seed, Error, Result};

#[derive(Parser)]
#[command(
    name = "hetembed",
    version,
    about = "Heterogeneous bibliographic network embedding benchmark"
)]
struct Cli {
    /// Base seed; every random stream is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Force single-worker training so outputs are byte-identical across runs.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Output root for `run` (overrides `output_dir` in the config).
    #[arg(long, global = true, env = "HETEMBED_OUT")]
    out: Option<PathBuf>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted-area synthetic record file.
    Synth(SynthArgs),
    /// Validate a record file, split it at the cutoff year, and derive author labels.
    Ingest(IngestArgs),
    /// Build one network from a record file and write its edge list.
    BuildNet(BuildNetArgs),
    /// Generate a walk corpus (meta-path guided or node2vec).
    Walk(WalkArgs),
    /// Train an embedding (skip-gram over walks, or VERSE on the graph).
    Embed(EmbedArgs),
    /// Score an embedding on one task with repeated random splits.
    Eval(EvalArgs),
    /// Render result tables from a report CSV or a run manifest.
    Report(ReportArgs),
    /// Run the full pipeline from a TOML config.
    Run(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    authors: usize,
    #[arg(long, default_value_t = 5)]
    areas: usize,
    #[arg(long, default_value_t = 4)]
    venues_per_area: usize,
    #[arg(long, default_value_t = 4.0)]
    papers_per_author: f64,
    #[arg(long, default_value_t = 1)]
    min_coauthors: usize,
    #[arg(long, default_value_t = 3)]
    max_coauthors: usize,
    #[arg(long, default_value_t = 0.1)]
    cross_area: f64,
    #[arg(long, default_value_t = 0.2)]
    eval_fraction: f64,
    #[arg(long, default_value_t = 2008)]
    cutoff: u32,
    /// Output record TSV (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    /// Record TSV: paper_id, year, venue, field, authors separated by '|'.
    records: PathBuf,
    #[arg(long, default_value_t = 2008)]
    cutoff: u32,
    /// Directory for train.tsv, eval.tsv and labels.tsv.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also build the four networks and print their sizes.
    #[arg(long)]
    summary: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum NetArg {
    #[value(name = "AA")]
    Aa,
    #[value(name = "APA")]
    Apa,
    #[value(name = "AVA")]
    Ava,
    #[value(name = "All", alias = "ALL")]
    All,
}

impl From<NetArg> for NetworkKind {
    fn from(n: NetArg) -> Self {
        match n {
            NetArg::Aa => NetworkKind::AA,
            NetArg::Apa => NetworkKind::APA,
            NetArg::Ava => NetworkKind::AVA,
            NetArg::All => NetworkKind::All,
        }
    }
}

#[derive(Args)]
struct BuildNetArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long, value_enum)]
    network: NetArg,
    /// Output edge list (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct WalkArgs {
    #[arg(long)]
    edges: PathBuf,
    /// Meta-path such as A,P,A; node2vec walks when omitted.
    #[arg(long)]
    metapath: Option<String>,
    #[arg(long, default_value_t = 10)]
    walks_per_node: usize,
    #[arg(long, default_value_t = 80)]
    walk_length: usize,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Trainer {
    Sgns,
    Verse,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long, value_enum)]
    method: Trainer,
    #[arg(long)]
    edges: PathBuf,
    /// Walk corpus (required for sgns).
    #[arg(long)]
    walks: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    /// Negative samples per positive (default 5 for sgns, 3 for verse).
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    /// Initial learning rate (default 0.025 for sgns, 0.0025 for verse).
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    subsample: Option<f64>,
    #[arg(long, default_value_t = 0.85)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    steps_per_node: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Linkpred,
    Areaclass,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_enum)]
    task: TaskArg,
    #[arg(long)]
    embedding: PathBuf,
    /// Post-cutoff records (linkpred).
    #[arg(long)]
    records: Option<PathBuf>,
    /// Author labels TSV (areaclass).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Comma-separated subset of NB,RF,DT,LR.
    #[arg(long, default_value = "NB,RF,DT,LR")]
    classifiers: String,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Negative pairs per positive pair (linkpred).
    #[arg(long, default_value_t = 1.0)]
    ratio: f64,
    /// Network label written into the CSV rows.
    #[arg(long, value_enum, default_value = "All")]
    network: NetArg,
    /// Method label written into the CSV rows.
    #[arg(long, default_value = "node2vec")]
    method: String,
    /// Output CSV (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Report CSV to render.
    #[arg(long, conflicts_with = "manifest")]
    csv: Option<PathBuf>,
    /// Run manifest; its artifacts are verified before rendering.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Pipeline config (TOML); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run only this stage and its prerequisites.
    #[arg(long)]
    stage: Option<String>,
    /// Print the stage names and exit.
    #[arg(long)]
    list_stages: bool,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

/// Write to `path`, or stdout when `None`.
fn emit(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).map_err(io_err(p))?);
            f(&mut w).and_then(|_| w.flush()).map_err(io_err(p))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock).map_err(io_err(Path::new("<stdout>")))
        }
    }
}

struct Globals {
    seed: u64,
    workers: usize,
}

fn synth(args: &SynthArgs, g: &Globals) -> Result<()> {
    let cfg = SynthConfig {
        num_authors: args.authors,
        num_areas: args.areas,
        num_venues_per_area: args.venues_per_area,
        papers_per_author: args.papers_per_author,
        coauthors_per_paper: CountRange {
            min: args.min_coauthors,
            max: args.max_coauthors,
        },
        cross_area_probability: args.cross_area,
        eval_fraction: args.eval_fraction,
        cutoff_year: args.cutoff,
        seed: g.seed,
        ..SynthConfig::default()
    };
    let records = synth_generate(&cfg)?;
    emit(args.output.as_deref(), |w| write_records(&records, w))
}

fn ingest(args: &IngestArgs) -> Result<()> {
    let parsed = parse_records(open(&args.records)?)?;
    for e in &parsed.errors {
        eprintln!("{}: skipped {e}", args.records.display());
    }
    let (train, eval) = temporal_split(&parsed.records, args.cutoff);
    let labels = derive_author_labels(&train);
    println!(
        "records: {} accepted, {} rejected; {} on or before {}, {} after",
        parsed.records.len(),
        parsed.errors.len(),
        train.len(),
        args.cutoff,
        eval.len()
    );
    if let Some(dir) = &args.output {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        emit(Some(&dir.join("train.tsv")), |w| write_records(&train, w))?;
        emit(Some(&dir.join("eval.tsv")), |w| write_records(&eval, w))?;
        emit(Some(&dir.join("labels.tsv")), |w| write_labels(&labels, w))?;
    }
    if args.summary {
        if train.is_empty() {
            return Err(Error::InvalidInput(
                "no records on or before the cutoff".into(),
            ));
        }
        for kind in NetworkKind::ALL_KINDS {
            let g = build_network(&train, kind)?;
            println!("{kind}: {}", g.summarize());
        }
        let mut authors = BTreeSet::new();
        let mut pairs = BTreeSet::new();
        for r in &eval {
            for (i, a) in r.authors.iter().enumerate() {
                authors.insert(a.as_str());
                for b in &r.authors[i + 1..] {
                    pairs.insert(if a < b { (a, b) } else { (b, a) });
                }
            }
        }
        println!(
            "eval: {} authors, {} co-author relations",
            authors.len(),
            pairs.len()
        );
    }
    Ok(())
}

fn build_net(args: &BuildNetArgs) -> Result<()> {
    let records = load_records(&args.records)?;
    let g = build_network(&records, args.network.into())?;
    eprintln!("{}", g.summarize());
    emit(args.output.as_deref(), |w| write_edge_list(&g, w))
}

fn walk(args: &WalkArgs, g: &Globals) -> Result<()> {
    let graph = load_graph(&args.edges)?;
    let cfg = WalkConfig {
        walks_per_node: args.walks_per_node,
        walk_length: args.walk_length,
        p: args.p,
        q: args.q,
        seed: g.seed,
    };
    let corpus = match &args.metapath {
        Some(s) => metapath_walks(&graph, &MetaPathSchema::parse(s)?, &cfg)?,
        None => node2vec_walks(&graph, &cfg)?,
    };
    eprintln!(
        "{} walks, {} tokens",
        corpus.walks.len(),
        corpus.token_count()
    );
    emit(Some(&args.output), |w| corpus.write(&graph, w))
}

fn embed(args: &EmbedArgs, g: &Globals) -> Result<()> {
    let graph = load_graph(&args.edges)?;
    let emb = match args.method {
        Trainer::Sgns => {
            let path = args
                .walks
                .as_ref()
                .ok_or_else(|| Error::Config("--walks is required for sgns".into()))?;
            let corpus = WalkCorpus::read(&graph, open(path)?)?;
            let defaults = SgnsConfig::default();
            let cfg = SgnsConfig {
                dim: args.dim,
                window: args.window,
                negatives: args.negatives.unwrap_or(defaults.negatives),
                epochs: args.epochs,
                initial_lr: args.lr.unwrap_or(defaults.initial_lr),
                subsample: args.subsample,
                seed: g.seed,
                workers: g.workers,
            };
            let model = train_sgns(&corpus, &graph, &cfg)?;
            for (i, l) in model.epoch_losses.iter().enumerate() {
                eprintln!("epoch {}: mean loss {l:.6}", i + 1);
            }
            model.embedding
        }
        Trainer::Verse => {
            let defaults = VerseConfig::default();
            let cfg = VerseConfig {
                dim: args.dim,
                alpha: args.alpha,
                negatives: args.negatives.unwrap_or(defaults.negatives),
                steps: None,
                steps_per_node: args.steps_per_node,
                lr: args.lr.unwrap_or(defaults.lr),
                seed: g.seed,
                workers: g.workers,
            };
            train_verse(&graph, &cfg)?
        }
    };
    emit(Some(&args.output), |w| emb.write_text(w))
}

fn eval(args: &EvalArgs, g: &Globals) -> Result<()> {
    let emb = load_embedding(&args.embedding)?;
    let (task, (dataset, coverage)) = match args.task {
        TaskArg::Linkpred => {
            let path = args
                .records
                .as_ref()
                .ok_or_else(|| Error::Config("--records is required for linkpred".into()))?;
            let records = load_records(path)?;
            (
                Task::Linkpred,
                build_linkpred_dataset(&records, &emb, args.ratio, g.seed)?,
            )
        }
        TaskArg::Areaclass => {
            let path = args
                .labels
                .as_ref()
                .ok_or_else(|| Error::Config("--labels is required for areaclass".into()))?;
            let labels = read_labels(open(path)?)?;
            (Task::Areaclass, build_area_dataset(&labels, &emb)?)
        }
    };
    eprintln!(
        "{} samples, coverage {}/{}",
        dataset.len(),
        coverage.kept,
        coverage.total
    );
    let method: Method = args.method.parse()?;
    let settings = ClassifierSettings::default();
    let mut rows = Vec::new();
    for name in args.classifiers.split(',') {
        let kind: ClassifierKind = name.parse()?;
        let out = repeated_eval(
            &dataset,
            &settings.spec(kind),
            args.train_fraction,
            args.repeats,
            seed::derive(g.seed, &[kind as u64]),
        )?;
        rows.push(ReportRow {
            task,
            network: args.network.into(),
            method,
            classifier: kind,
            mean_accuracy: out.mean,
            std_accuracy: out.std,
            repeats: out.repeats,
            n_samples: out.n_samples,
            coverage: coverage.fraction(),
        });
    }
    let mut buf = Vec::new();
    write_report_csv(&rows, &mut buf)?;
    emit(args.output.as_deref(), |w| w.write_all(&buf))
}

fn report(args: &ReportArgs) -> Result<()> {
    let rows = match (&args.csv, &args.manifest) {
        (Some(csv), _) => read_report_csv(open(csv)?)?,
        (None, Some(path)) => {
            let manifest = RunManifest::load(path)?;
            let root = path.parent().unwrap_or(Path::new("."));
            manifest.verify(root)?;
            manifest.report_rows(root)?
        }
        (None, None) => return Err(Error::Config("give --csv or --manifest".into())),
    };
    print!("{}", report_table(&rows));
    Ok(())
}

fn run(args: &RunArgs, cli: &Cli) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if cli.deterministic {
        cfg.deterministic = true;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if args.list_stages {
        let mut out = io::stdout().lock();
        for name in hetembed::pipeline::stage_names(&cfg.resolved()?) {
            // A closed pipe (e.g. `| head`) just ends the listing.
            if writeln!(out, "{name}").is_err() {
                break;
            }
        }
        return Ok(());
    }
    let opts = RunOptions {
        target: args.stage.clone(),
        config_path: args.config.clone(),
    };
    let manifest = run_pipeline(&cfg, &opts)?;
    let hits = manifest.stages.iter().filter(|s| s.cache_hit).count();
    eprintln!(
        "{} stages ({} cached); outputs in {}",
        manifest.stages.len(),
        hits,
        cfg.output_dir.display()
    );
    if manifest.report_csv.is_some() {
        print!("{}", report_table(&manifest.report_rows(&cfg.output_dir)?));
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    let g = Globals {
        seed: cli.seed.unwrap_or(0),
        workers: if cli.deterministic {
            1
        } else {
            cli.threads.unwrap_or(1).max(1)
        },
    };
    match &cli.command {
        Command::Synth(a) => synth(
            a,
            &Globals {
                seed: cli.seed.unwrap_or(7),
                ..g
            },
        ),
        Command::Ingest(a) => ingest(a),
        Command::BuildNet(a) => build_net(a),
        Command::Walk(a) => walk(a, &g),
        Command::Embed(a) => embed(a, &g),
        Command::Eval(a) => eval(a, &g),
        Command::Report(a) => report(a),
        Command::Run(a) => run(a, cli),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("warning: thread pool: {e}");
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
