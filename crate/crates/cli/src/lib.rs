//! The `taxa` command line.
//!
//! Exit codes: 0 on success, 1 when the inputs are rejected (bad files,
//! operator errors), 2 on usage errors.

use std::fmt::Write as _;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use taxa_core::assist::{cluster_taxon, embed_file, EmbeddingTable, FALLBACK_DIM};
use taxa_core::compare::{agreement_report, majority_merge, union_merge, AnnotatedMergedTree, MetricsReport};
use taxa_core::model::{CoderSession, ImageLocation, Labeling, TaxonNode, TaxonPath};
use taxa_core::persist::{
    encode_embeddings, encode_labeling, encode_majority, encode_union, load_captions, load_dataset, load_embeddings,
    load_probabilities, load_session, read_labeling, sample_batches, to_canonical_json,
};
use taxa_core::predict::{close_labeling, evaluate, loo_evaluate, similarity_predict, zero_shot_predict, DEFAULT_THRESHOLD};
use taxa_server::{AppState, ServerConfig};

#[derive(Debug, Parser)]
#[command(name = "taxa", version, about = "Collaborative image-taxonomy workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw disjoint random batches of images from a dataset
    Sample(SampleArgs),
    /// Run the HTTP service
    Serve(ServeArgs),
    /// Merge coder sessions
    Merge(MergeArgs),
    /// Show the union of coder trees with creators and assignment discrepancies
    Diff(DiffArgs),
    /// Agreement between coder sessions
    Metrics(MetricsArgs),
    /// Propose a k-means division of a leaf taxon
    Cluster(ClusterArgs),
    /// Predict labels for uncoded images
    Predict(PredictArgs),
    /// Score predictions against gold labels
    Evaluate(EvaluateArgs),
    /// Compute fallback color/layout embeddings for image files
    Embed(EmbedArgs),
}

#[derive(Debug, Args)]
pub struct Output {
    /// Write to this file instead of stdout
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Dataset metadata (JSON array of records with a uuid)
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 4)]
    pub batches: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "TAXA_HOST", default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, env = "TAXA_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "TAXA_DATA_DIR", default_value = "taxa-data")]
    pub data_dir: PathBuf,
    #[arg(long, env = "TAXA_DATASET")]
    pub dataset: Option<PathBuf>,
    #[arg(long, env = "TAXA_EMBEDDINGS")]
    pub embeddings: Option<PathBuf>,
    #[arg(long, env = "TAXA_CAPTIONS")]
    pub captions: Option<PathBuf>,
    /// Origin allowed to call the API from a browser (`*` for any)
    #[arg(long, env = "TAXA_CORS_ORIGIN")]
    pub cors_origin: Option<String>,
    /// Built web UI to serve at `/`
    #[arg(long, env = "TAXA_STATIC_DIR")]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    Union,
    Majority,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[arg(long, value_enum, default_value_t = Strategy::Majority)]
    pub strategy: Strategy,
    #[arg(required = true)]
    pub sessions: Vec<PathBuf>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    #[arg(required = true)]
    pub sessions: Vec<PathBuf>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(required = true, num_args = 2..)]
    pub sessions: Vec<PathBuf>,
    /// Truncate label paths to this many levels first
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub depth: Option<u64>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    pub session: PathBuf,
    /// Leaf to divide, as a `/`-joined path
    #[arg(long)]
    pub taxon: String,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub captions: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Similarity,
    Zeroshot,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// Labeled images (session, labeling or merge file), for similarity
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Images to predict; defaults to every embedded image without a label
    #[arg(long = "target")]
    pub targets: Vec<String>,
    /// Probability table, for zero-shot
    #[arg(long)]
    pub probs: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predicted labels (labeling, session or merge file)
    #[arg(long, required_unless_present = "loo")]
    pub pred: Option<PathBuf>,
    /// Gold labels
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub depth: Option<u64>,
    /// Add every ancestor of each label to both sides first
    #[arg(long)]
    pub closure: bool,
    /// Leave-one-out similarity matching over the gold labels
    #[arg(long, requires = "embeddings", conflicts_with = "pred")]
    pub loo: bool,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Image files; the file stem is the uuid
    pub images: Vec<PathBuf>,
    /// Embed every dataset record with a local image path instead
    #[arg(long, conflicts_with = "images")]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub out: Output,
}

/// A semantically invalid combination of otherwise well-formed arguments.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_sessions(paths: &[PathBuf]) -> Result<Vec<CoderSession>> {
    paths
        .iter()
        .map(|p| load_session(&read(p)?).with_context(|| format!("{}", p.display())))
        .collect()
}

fn labeling_from(path: &Path) -> Result<Labeling> {
    read_labeling(&read(path)?).with_context(|| format!("{}", path.display()))
}

fn embeddings_from(path: &Path) -> Result<EmbeddingTable> {
    load_embeddings(&read(path)?).with_context(|| format!("{}", path.display()))
}

fn emit(out: &Output, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match &out.output {
        Some(path) => {
            taxa_core::persist::atomic_write(path, text.as_bytes())
                .with_context(|| format!("cannot write {}", path.display()))
        }
        None => stdout.write_all(text.as_bytes()).context("cannot write to stdout"),
    }
}

/// Metrics as a two-column table with three decimals.
pub fn render_report(report: &MetricsReport) -> String {
    let mut rows: Vec<(&str, String)> = vec![
        ("Match", format!("{:.3}", report.exact_match.to_f64())),
        ("Jaccard", format!("{:.3}", report.jaccard.to_f64())),
    ];
    if let Some(iou) = &report.node_iou {
        rows.push(("Node IoU", format!("{:.3}", iou.to_f64())));
    }
    rows.push(("Images", report.n_images.to_string()));
    let header = match report.depth {
        Some(d) => format!("Value (D={d})"),
        None => "Value".to_owned(),
    };
    let mut out = format!("{:<10}{header}\n", "Metric");
    for (name, value) in rows {
        writeln!(out, "{name:<10}{value}").unwrap();
    }
    out
}

/// The union tree as an indented outline, one node per line with its
/// creators and its consensus and partial assignment counts.
pub fn render_diff(merged: &AnnotatedMergedTree) -> String {
    fn walk(node: &TaxonNode, at: &TaxonPath, merged: &AnnotatedMergedTree, depth: usize, out: &mut String) {
        for child in &node.children {
            let path = at.child(child.name.clone());
            let info = merged.node(&path).expect("every union path is annotated");
            let mark = if info.creators.len() < merged.coders.len() { "*" } else { " " };
            let creators: Vec<&str> = info.creators.iter().map(String::as_str).collect();
            writeln!(
                out,
                "{mark} {}{}  [{}]  consensus {}  partial {}",
                "  ".repeat(depth),
                child.name,
                creators.join(", "),
                info.consensus_count,
                info.partial_count
            )
            .unwrap();
            walk(child, &path, merged, depth + 1, out);
        }
    }
    let mut out = String::new();
    for w in &merged.warnings {
        writeln!(out, "warning: {w}").unwrap();
    }
    writeln!(out, "coders: {}", merged.coders.join(", ")).unwrap();
    walk(merged.tree.root(), &TaxonPath::root(), merged, 0, &mut out);
    out
}

fn depth(d: Option<u64>) -> Option<usize> {
    d.map(|d| d as usize)
}

pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Sample(a) => {
            let records = load_dataset(&read(&a.dataset)?).with_context(|| format!("{}", a.dataset.display()))?;
            let plan = sample_batches(records.iter().map(|r| r.uuid.as_str()), a.batch_size, a.batches, a.seed)?;
            emit(&a.out, &to_canonical_json(&plan), stdout)
        }
        Command::Serve(a) => serve(a),
        Command::Merge(a) => {
            let sessions = load_sessions(&a.sessions)?;
            let text = match a.strategy {
                Strategy::Union => encode_union(&union_merge(&sessions)?),
                Strategy::Majority => encode_majority(&majority_merge(&sessions)?),
            };
            emit(&a.out, &text, stdout)
        }
        Command::Diff(a) => {
            let sessions = load_sessions(&a.sessions)?;
            emit(&a.out, &render_diff(&union_merge(&sessions)?), stdout)
        }
        Command::Metrics(a) => {
            let sessions = load_sessions(&a.sessions)?;
            let report = agreement_report(&sessions, depth(a.depth))?;
            emit(&a.out, &render_report(&report), stdout)
        }
        Command::Cluster(a) => {
            let session = load_sessions(std::slice::from_ref(&a.session))?.remove(0);
            let emb = embeddings_from(&a.embeddings)?;
            let captions = match &a.captions {
                Some(p) => load_captions(&read(p)?).with_context(|| format!("{}", p.display()))?,
                None => Default::default(),
            };
            let partition = cluster_taxon(&session, &TaxonPath::parse(&a.taxon), &emb, &captions, a.seed)?;
            emit(&a.out, &to_canonical_json(&partition), stdout)
        }
        Command::Predict(a) => {
            let labels = match a.method {
                Method::Zeroshot => {
                    let path = a.probs.as_ref().ok_or_else(|| usage("--method zeroshot needs --probs"))?;
                    if !(0.0..=1.0).contains(&a.threshold) {
                        return Err(usage("--threshold must lie in [0, 1]"));
                    }
                    let rows = load_probabilities(&read(path)?).with_context(|| format!("{}", path.display()))?;
                    zero_shot_predict(&rows, a.threshold)?
                }
                Method::Similarity => {
                    let (Some(lp), Some(ep)) = (&a.labels, &a.embeddings) else {
                        return Err(usage("--method similarity needs --labels and --embeddings"));
                    };
                    let labeled: Labeling = labeling_from(lp)?.into_iter().filter(|(_, p)| !p.is_empty()).collect();
                    let emb = embeddings_from(ep)?;
                    let targets = if a.targets.is_empty() {
                        emb.iter()
                            .map(|(u, _)| u.to_owned())
                            .filter(|u| !labeled.contains_key(u))
                            .collect()
                    } else {
                        a.targets.clone()
                    };
                    similarity_predict(&labeled, &emb, &targets)?
                }
            };
            emit(&a.out, &encode_labeling(&labels), stdout)
        }
        Command::Evaluate(a) => {
            let mut gold = labeling_from(&a.gold)?;
            if a.closure {
                gold = close_labeling(&gold);
            }
            let report = if a.loo {
                let emb = embeddings_from(a.embeddings.as_ref().expect("clap requires it"))?;
                loo_evaluate(&gold, &emb, depth(a.depth))?
            } else {
                let mut pred = labeling_from(a.pred.as_ref().expect("clap requires it"))?;
                if a.closure {
                    pred = close_labeling(&pred);
                }
                evaluate(&pred, &gold, depth(a.depth))?
            };
            emit(&a.out, &render_report(&report), stdout)
        }
        Command::Embed(a) => {
            let mut table = EmbeddingTable::new(FALLBACK_DIM)?;
            let files: Vec<(String, PathBuf)> = match &a.dataset {
                Some(ds) => {
                    let root = ds.parent().map(Path::to_owned).unwrap_or_default();
                    load_dataset(&read(ds)?)
                        .with_context(|| format!("{}", ds.display()))?
                        .into_iter()
                        .filter_map(|r| match r.location() {
                            Some(ImageLocation::Local(p)) => Some((r.uuid, root.join(p))),
                            _ => None,
                        })
                        .collect()
                }
                None if a.images.is_empty() => return Err(usage("give image files or --dataset")),
                None => a
                    .images
                    .iter()
                    .map(|p| {
                        let stem = p.file_stem().and_then(|s| s.to_str()).ok_or_else(|| anyhow!("bad file name {}", p.display()))?;
                        Ok((stem.to_owned(), p.clone()))
                    })
                    .collect::<Result<_>>()?,
            };
            for (uuid, path) in files {
                let v = embed_file(&path).with_context(|| format!("{}", path.display()))?;
                table.insert(uuid, v)?;
            }
            emit(&a.out, &encode_embeddings(&table), stdout)
        }
    }
}

fn serve(a: ServeArgs) -> Result<()> {
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|_| usage(format!("invalid address {}:{}", a.host, a.port)))?;
    let config = ServerConfig {
        data_dir: a.data_dir,
        dataset: a.dataset,
        embeddings: a.embeddings,
        captions: a.captions,
        cors_origin: a.cors_origin,
        static_dir: a.static_dir,
    };
    let app = Arc::new(AppState::load(config)?);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!("taxa: listening on http://{}", listener.local_addr()?);
        taxa_server::serve(app, listener).await
    })?;
    Ok(())
}

/// Parses `argv` and runs it, returning the process exit code.
pub fn run<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e) if e.is::<UsageError>() => {
            let _ = writeln!(stderr, "taxa: {e}");
            2
        }
        Err(e) => {
            let _ = writeln!(stderr, "taxa: {e:#}");
            1
        }
    }
}
