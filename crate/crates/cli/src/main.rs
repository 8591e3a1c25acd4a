//! `imgraph`: build graph datasets from IDX images, train the GCN, and run
//! the representation comparison.

use std::borrow::Cow;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use imgraph::dataset_store::{
    config_hash, export_dot, load_samples, DatasetFile, DatasetHeader, DatasetWriter, SourceTag,
    StoreError,
};
use imgraph::experiment::{self, DataSource, ExperimentError, Plan, Scale};
use imgraph::gnn::{
    self, GcnConfig, GnnError, NormKind, NormalizedGraph, SampleSource, REPORT_TSV_HEADER,
};
use imgraph::image_io::{load_dataset, stratified_subset, IdxError, Split};
use imgraph::pipeline::{for_each_record, BuildConfig, PipelineError, Representation};
use imgraph::{FeatureKind, GraphKind};

/// Datasets larger than this are streamed from disk during training.
const IN_MEMORY_LIMIT: u64 = 1 << 30;

#[derive(Parser)]
#[command(
    name = "imgraph",
    version,
    about = "Correlation graphs from images, and a GCN to classify them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert an IDX image/label pair into a CGDS1 graph dataset.
    Build(BuildArgs),
    /// Train a GCN on one dataset and evaluate on another.
    Train(TrainArgs),
    /// Run every representation over several seeds and print the comparison table.
    Reproduce(ReproduceArgs),
    /// Print a dataset header.
    Inspect(InspectArgs),
    /// Export one record of a dataset as Graphviz DOT.
    Dot(DotArgs),
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, value_parser = parse_graph)]
    graph_type: GraphKind,
    #[arg(long, value_parser = parse_feature)]
    feature_type: FeatureKind,
    #[arg(long)]
    out: PathBuf,
    /// Keep this many images per class (stratified, seeded); default keeps all.
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Source dataset recorded in the header.
    #[arg(long, default_value = "mnist", value_parser = parse_source)]
    source: SourceTag,
    #[arg(long, default_value_t = imgraph::corrgraph::DEFAULT_KMEANS_ITERS)]
    kmeans_iters: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train_ds: PathBuf,
    #[arg(long)]
    test_ds: PathBuf,
    /// Number of GCN layers.
    #[arg(long, default_value_t = 3)]
    layers: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// none, graph (standardize channels over nodes) or layer (standardize each node).
    #[arg(long, default_value = "graph", value_parser = parse_norm)]
    norm: NormKind,
    #[arg(long)]
    report_out: PathBuf,
    /// Also write a one-row TSV summary.
    #[arg(long)]
    tsv_out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Directory containing `mnist/` and/or `fashion/` IDX folders.
    #[arg(long, env = "IMGRAPH_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    seeds: Vec<u64>,
    #[arg(long, default_value = "desk", value_parser = parse_scale)]
    scale: Scale,
    /// Only the four cells the ordering checks need.
    #[arg(long)]
    ordering_only: bool,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Args)]
struct DotArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_graph(s: &str) -> Result<GraphKind, String> {
    s.parse()
        .map_err(|e| format!("{e}; expected one of grid, row, column, product"))
}

fn parse_feature(s: &str) -> Result<FeatureKind, String> {
    s.parse()
        .map_err(|e| format!("{e}; expected one of pixel, standard, correlation"))
}

fn parse_source(s: &str) -> Result<SourceTag, String> {
    SourceTag::parse(s)
        .ok_or_else(|| format!("unknown source '{s}'; expected mnist, fashion-mnist or synthetic"))
}

fn parse_norm(s: &str) -> Result<NormKind, String> {
    NormKind::parse(s).ok_or_else(|| format!("unknown norm '{s}'; expected none, graph or layer"))
}

fn parse_scale(s: &str) -> Result<Scale, String> {
    Scale::parse(s).ok_or_else(|| format!("unknown scale '{s}'; expected smoke, desk or full"))
}

/// An error tagged with its exit status.
struct Failure {
    code: u8,
    message: String,
}

const EXIT_USAGE: u8 = 2;
const EXIT_CONTRACT: u8 = 3;
const EXIT_CORRUPT: u8 = 4;
const EXIT_INTERNAL: u8 = 5;

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::new(EXIT_CONTRACT, format!("{}: {e}", path.display()))
}

impl From<IdxError> for Failure {
    fn from(e: IdxError) -> Self {
        let code = match e {
            IdxError::BadMagic { .. }
            | IdxError::Truncated { .. }
            | IdxError::CountMismatch { .. }
            | IdxError::LabelOutOfRange { .. } => EXIT_CORRUPT,
            _ => EXIT_CONTRACT,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        let code = if e.is_corruption() {
            EXIT_CORRUPT
        } else if matches!(
            e,
            StoreError::IoFailure(_) | StoreError::TooLarge(_) | StoreError::OutOfRange { .. }
        ) {
            EXIT_CONTRACT
        } else {
            EXIT_INTERNAL
        };
        Failure::new(code, e.to_string())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match e {
            PipelineError::InvalidCombination { .. } => EXIT_USAGE,
            PipelineError::EmptyDataset
            | PipelineError::MixedSides { .. }
            | PipelineError::Feature(_) => EXIT_CONTRACT,
            PipelineError::Graph(_) | PipelineError::Gnn(_) => EXIT_INTERNAL,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<GnnError> for Failure {
    fn from(e: GnnError) -> Self {
        let code = match e {
            GnnError::InvalidConfig(_) => EXIT_USAGE,
            GnnError::EmptyDataset
            | GnnError::LabelOutOfRange { .. }
            | GnnError::ShapeMismatch(_) => EXIT_CONTRACT,
            GnnError::Source { .. } => EXIT_CORRUPT,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Idx(e) => e.into(),
            ExperimentError::Pipeline(e) => e.into(),
            ExperimentError::Gnn(e) => e.into(),
            ExperimentError::NoSeeds => Failure::new(EXIT_USAGE, "no seeds given"),
        }
    }
}

fn set_threads(threads: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure::new(EXIT_USAGE, "--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new(EXIT_INTERNAL, e.to_string()))?;
    }
    Ok(())
}

fn cmd_build(a: BuildArgs) -> Result<(), Failure> {
    set_threads(a.threads)?;
    let representation = Representation::new(a.graph_type, a.feature_type)?;
    let full = load_dataset(&a.images, &a.labels, Split::Train)?;
    let ds = match a.per_class {
        Some(k) => stratified_subset(&full, k, a.seed)?,
        None => full,
    };
    let side = ds.images.first().map_or(0, |im| im.side());
    let canonical = format!(
        "graph={};features={};source={};side={side};input_images={};per_class={};seed={};kmeans_iters={}",
        a.graph_type,
        a.feature_type,
        a.source.name(),
        ds.len(),
        a.per_class.map_or("all".to_owned(), |k| k.to_string()),
        a.seed,
        a.kmeans_iters
    );
    let header = DatasetHeader {
        graph: a.graph_type,
        features: a.feature_type,
        source: a.source,
        side: side as u32,
        record_count: 0,
        config_hash: config_hash(&canonical),
    };
    let file = File::create(&a.out).map_err(|e| io_failure(&a.out, e))?;
    let mut writer = DatasetWriter::new(file, header)?;
    let cfg = BuildConfig {
        representation,
        kmeans_iters: a.kmeans_iters,
    };
    let total = ds.len();
    let mut done = 0usize;
    for_each_record::<Failure>(&ds, &cfg, 64, |rec| {
        writer.push(&rec)?;
        done += 1;
        if done.is_multiple_of(500) || done == total {
            eprintln!("built {done}/{total}");
        }
        Ok(())
    })?;
    let (_, bytes) = writer.finish()?;
    eprintln!(
        "wrote {} records ({bytes} bytes) to {}",
        total,
        a.out.display()
    );
    Ok(())
}

enum Loaded {
    Memory(Vec<NormalizedGraph>),
    Disk(DatasetFile),
}

impl Loaded {
    fn open(path: &Path) -> Result<(DatasetHeader, Loaded), Failure> {
        let size = fs::metadata(path).map_err(|e| io_failure(path, e))?.len();
        if size <= IN_MEMORY_LIMIT {
            let (h, samples) = load_samples(path)?;
            Ok((h, Loaded::Memory(samples)))
        } else {
            let f = DatasetFile::open(path)?;
            Ok((f.header().clone(), Loaded::Disk(f)))
        }
    }
}

impl SampleSource for Loaded {
    fn len(&self) -> usize {
        match self {
            Loaded::Memory(v) => v.len(),
            Loaded::Disk(f) => f.len(),
        }
    }

    fn sample(&self, index: usize) -> Result<Cow<'_, NormalizedGraph>, GnnError> {
        match self {
            Loaded::Memory(v) => v.sample(index),
            Loaded::Disk(f) => f.sample(index),
        }
    }
}

fn cmd_train(a: TrainArgs) -> Result<(), Failure> {
    set_threads(a.threads)?;
    if a.layers == 0 || a.width == 0 {
        return Err(Failure::new(
            EXIT_USAGE,
            "--layers and --width must be positive",
        ));
    }
    let (train_h, train_set) = Loaded::open(&a.train_ds)?;
    let (test_h, test_set) = Loaded::open(&a.test_ds)?;
    if (train_h.graph, train_h.features, train_h.side)
        != (test_h.graph, test_h.features, test_h.side)
    {
        return Err(Failure::new(
            EXIT_CONTRACT,
            format!(
                "tag mismatch: train set is {}+{} (N={}), test set is {}+{} (N={})",
                train_h.graph,
                train_h.features,
                train_h.side,
                test_h.graph,
                test_h.features,
                test_h.side
            ),
        ));
    }
    let cfg = GcnConfig {
        layer_dims: vec![a.width; a.layers],
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: a.batch,
        norm: a.norm,
        ..GcnConfig::desk(a.seed)
    };
    let outcome = gnn::train(&train_set, &test_set, &cfg)?;
    let mut report = outcome.report;
    report.representation = format!("{}+{}", train_h.graph, train_h.features);
    for e in &report.epochs {
        eprintln!(
            "epoch {} loss={:.4} train_acc={:.4}",
            e.epoch, e.loss, e.train_accuracy
        );
    }
    fs::write(&a.report_out, report.to_text()).map_err(|e| io_failure(&a.report_out, e))?;
    if let Some(p) = &a.tsv_out {
        fs::write(p, format!("{REPORT_TSV_HEADER}\n{}\n", report.tsv_row()))
            .map_err(|e| io_failure(p, e))?;
    }
    println!("test_acc={}", report.test_accuracy);
    Ok(())
}

fn cmd_reproduce(a: ReproduceArgs) -> Result<(), Failure> {
    set_threads(a.threads)?;
    let sources: Vec<DataSource> = experiment::default_sources(&a.data_dir)
        .into_iter()
        .filter(DataSource::is_present)
        .collect();
    if sources.is_empty() {
        return Err(Failure::new(
            EXIT_CONTRACT,
            format!(
                "no IDX files under {}/mnist or {}/fashion",
                a.data_dir.display(),
                a.data_dir.display()
            ),
        ));
    }
    fs::create_dir_all(&a.out_dir).map_err(|e| io_failure(&a.out_dir, e))?;
    let plan = if a.ordering_only {
        Plan::ordering_cells(a.scale, a.seeds.clone())
    } else {
        Plan::new(a.scale, a.seeds.clone())
    };
    let mut summary = String::new();
    let mut tsv = vec![experiment::tsv_header()];
    for source in &sources {
        let cells = experiment::run_source(source, &plan, &mut |line| eprintln!("{line}"))?;
        summary.push_str(&experiment::table_text(&cells));
        for v in experiment::verdicts(&cells) {
            summary.push_str(&v.line());
            summary.push('\n');
        }
        summary.push('\n');
        tsv.extend(experiment::tsv_rows(&cells));
    }
    let table_path = a.out_dir.join("table.txt");
    fs::write(&table_path, &summary).map_err(|e| io_failure(&table_path, e))?;
    let tsv_path = a.out_dir.join("runs.tsv");
    fs::write(&tsv_path, tsv.join("\n") + "\n").map_err(|e| io_failure(&tsv_path, e))?;
    print!("{summary}");
    Ok(())
}

fn cmd_inspect(a: InspectArgs) -> Result<(), Failure> {
    let f = DatasetFile::open(&a.dataset)?;
    let h = f.header();
    println!("graph={}", h.graph);
    println!("features={}", h.features);
    println!("source={}", h.source.name());
    println!("side={}", h.side);
    println!("records={}", h.record_count);
    println!("config_hash={:016x}", h.config_hash);
    Ok(())
}

fn cmd_dot(a: DotArgs) -> Result<(), Failure> {
    let f = DatasetFile::open(&a.dataset)?;
    let text = export_dot(&f.record(a.index)?)?;
    match &a.out {
        Some(p) => fs::write(p, text).map_err(|e| io_failure(p, e))?,
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::new(EXIT_INTERNAL, e.to_string()))?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Train(a) => cmd_train(a),
        Command::Reproduce(a) => cmd_reproduce(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Dot(a) => cmd_dot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn store_error_codes() {
        let f: Failure = StoreError::TruncatedFile.into();
        assert_eq!(f.code, EXIT_CORRUPT);
        let f: Failure = StoreError::BadMagic(*b"XXXXX").into();
        assert_eq!(f.code, EXIT_CORRUPT);
        let f: Failure = StoreError::TooLarge(20_000).into();
        assert_eq!(f.code, EXIT_CONTRACT);
    }

    #[test]
    fn cli_parses() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
