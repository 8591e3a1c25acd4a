//! Multi-seed comparison of graph representations on MNIST-style data.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dataset_store::SourceTag;
use crate::gnn::{self, GcnConfig, GnnError, TrainReport, REPORT_TSV_HEADER};
use crate::image_io::{load_dataset, stratified_subset, IdxError, LabeledDataset, Split};
use crate::kinds::{FeatureKind, GraphKind};
use crate::pipeline::{build_samples, BuildConfig, PipelineError, Representation};

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Idx(#[from] IdxError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error("no seeds given")]
    NoSeeds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Smoke,
    Desk,
    Full,
}

impl Scale {
    pub fn name(self) -> &'static str {
        match self {
            Scale::Smoke => "smoke",
            Scale::Desk => "desk",
            Scale::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Scale::Smoke, Scale::Desk, Scale::Full]
            .into_iter()
            .find(|x| x.name() == s)
    }

    /// Training images per class; `None` keeps the whole split.
    pub fn train_per_class(self) -> Option<usize> {
        match self {
            Scale::Smoke => Some(10),
            Scale::Desk => Some(200),
            Scale::Full => None,
        }
    }

    pub fn test_per_class(self) -> Option<usize> {
        match self {
            Scale::Smoke => Some(10),
            Scale::Desk => Some(100),
            Scale::Full => None,
        }
    }

    pub fn gcn_config(self, seed: u64) -> GcnConfig {
        match self {
            Scale::Smoke => GcnConfig {
                epochs: 2,
                ..GcnConfig::desk(seed)
            },
            Scale::Desk => GcnConfig::desk(seed),
            Scale::Full => GcnConfig::pyramid(seed),
        }
    }
}

/// A directory holding the four IDX files under their conventional names.
#[derive(Debug, Clone)]
pub struct DataSource {
    pub tag: SourceTag,
    pub dir: PathBuf,
}

impl DataSource {
    pub fn new(tag: SourceTag, dir: impl Into<PathBuf>) -> Self {
        Self {
            tag,
            dir: dir.into(),
        }
    }

    pub fn is_present(&self) -> bool {
        [TRAIN_IMAGES, TRAIN_LABELS, TEST_IMAGES, TEST_LABELS]
            .iter()
            .all(|f| self.dir.join(f).is_file())
    }

    pub fn load(&self, split: Split) -> Result<LabeledDataset, IdxError> {
        let (images, labels) = match split {
            Split::Train => (TRAIN_IMAGES, TRAIN_LABELS),
            Split::Test => (TEST_IMAGES, TEST_LABELS),
        };
        load_dataset(&self.dir.join(images), &self.dir.join(labels), split)
    }
}

/// Conventional layout: `<root>/mnist` and `<root>/fashion`.
pub fn default_sources(root: &Path) -> Vec<DataSource> {
    vec![
        DataSource::new(SourceTag::Mnist, root.join("mnist")),
        DataSource::new(SourceTag::FashionMnist, root.join("fashion")),
    ]
}

fn subset(
    ds: &LabeledDataset,
    per_class: Option<usize>,
    seed: u64,
) -> Result<LabeledDataset, IdxError> {
    match per_class {
        Some(k) => stratified_subset(ds, k, seed),
        None => Ok(ds.clone()),
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub source: SourceTag,
    pub representation: Representation,
    /// One report per seed, in seed order.
    pub reports: Vec<TrainReport>,
}

impl CellResult {
    pub fn accuracies(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.test_accuracy).collect()
    }

    pub fn mean(&self) -> f64 {
        mean_std(&self.accuracies()).0
    }

    pub fn std(&self) -> f64 {
        mean_std(&self.accuracies()).1
    }
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub scale: Scale,
    pub seeds: Vec<u64>,
    pub representations: Vec<Representation>,
    pub kmeans_iters: usize,
}

impl Plan {
    pub fn new(scale: Scale, seeds: Vec<u64>) -> Self {
        Self {
            scale,
            seeds,
            representations: Representation::all(),
            kmeans_iters: crate::corrgraph::DEFAULT_KMEANS_ITERS,
        }
    }

    /// The cells the ordering checks look at.
    pub fn ordering_cells(scale: Scale, seeds: Vec<u64>) -> Self {
        use FeatureKind::*;
        use GraphKind::*;
        let representations = [
            (Grid, Pixel),
            (Row, Pixel),
            (Column, Pixel),
            (Product, Correlation),
        ]
        .into_iter()
        .map(|(graph, features)| Representation { graph, features })
        .collect();
        Self {
            representations,
            ..Self::new(scale, seeds)
        }
    }
}

/// Runs every cell of `plan` on one source. Each seed draws its own subsets
/// and its own weight initialization. `progress` sees one line per run.
pub fn run_source(
    source: &DataSource,
    plan: &Plan,
    progress: &mut dyn FnMut(&str),
) -> Result<Vec<CellResult>, ExperimentError> {
    if plan.seeds.is_empty() {
        return Err(ExperimentError::NoSeeds);
    }
    let full_train = source.load(Split::Train)?;
    let full_test = source.load(Split::Test)?;
    let mut cells: Vec<CellResult> = plan
        .representations
        .iter()
        .map(|&representation| CellResult {
            source: source.tag,
            representation,
            reports: Vec::new(),
        })
        .collect();
    for &seed in &plan.seeds {
        let train_ds = subset(&full_train, plan.scale.train_per_class(), seed)?;
        let test_ds = subset(&full_test, plan.scale.test_per_class(), seed)?;
        for cell in &mut cells {
            let build = BuildConfig {
                representation: cell.representation,
                kmeans_iters: plan.kmeans_iters,
            };
            let train_samples = build_samples(&train_ds, &build)?;
            let test_samples = build_samples(&test_ds, &build)?;
            let mut report =
                gnn::train(&train_samples, &test_samples, &plan.scale.gcn_config(seed))?.report;
            report.representation = cell.representation.label();
            progress(&format!(
                "{} {} seed={} test_acc={:.4} ({:.1}s)",
                source.tag.name(),
                report.representation,
                seed,
                report.test_accuracy,
                report.wall_seconds
            ));
            cell.reports.push(report);
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub source: SourceTag,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    /// e.g. `ORDER mnist product_corr>grid_pixel: PASS (margin 0.412 >= 0.150)`
    pub fn line(&self) -> String {
        format!(
            "ORDER {} {}: {} ({})",
            self.source.name(),
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.detail
        )
    }
}

fn short_name(rep: Representation) -> String {
    let f = match rep.features {
        FeatureKind::Pixel => "pixel",
        FeatureKind::Standard => "std",
        FeatureKind::Correlation => "corr",
    };
    format!("{}_{}", rep.graph, f)
}

fn find(cells: &[CellResult], graph: GraphKind, features: FeatureKind) -> Option<&CellResult> {
    cells
        .iter()
        .find(|c| c.representation.graph == graph && c.representation.features == features)
}

/// Mean accuracy of `a` must exceed that of `b` by at least `margin`.
pub fn margin_verdict(a: &CellResult, b: &CellResult, margin: f64) -> Verdict {
    let diff = a.mean() - b.mean();
    Verdict {
        source: a.source,
        name: format!(
            "{}>{}",
            short_name(a.representation),
            short_name(b.representation)
        ),
        pass: diff >= margin,
        detail: format!("margin {diff:.3} >= {margin:.3}"),
    }
}

/// `a` must beat `b` in at least two thirds of the paired seeds.
pub fn majority_verdict(a: &CellResult, b: &CellResult) -> Verdict {
    let wins = a
        .accuracies()
        .iter()
        .zip(b.accuracies())
        .filter(|(x, y)| **x > *y)
        .count();
    let n = a.reports.len().min(b.reports.len());
    Verdict {
        source: a.source,
        name: format!(
            "{}>{}",
            short_name(a.representation),
            short_name(b.representation)
        ),
        pass: n > 0 && 3 * wins >= 2 * n,
        detail: format!("wins {wins}/{n}"),
    }
}

/// Required product+correlation lead over grid+pixel, in accuracy units.
pub fn required_margin(source: SourceTag) -> f64 {
    match source {
        SourceTag::Mnist => 0.15,
        SourceTag::FashionMnist | SourceTag::Synthetic => 0.10,
    }
}

/// Ordering checks available from `cells` (cells absent from a run are skipped).
pub fn verdicts(cells: &[CellResult]) -> Vec<Verdict> {
    use FeatureKind::*;
    use GraphKind::*;
    let Some(source) = cells.first().map(|c| c.source) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    if let (Some(pc), Some(gp)) = (find(cells, Product, Correlation), find(cells, Grid, Pixel)) {
        out.push(margin_verdict(pc, gp, required_margin(source)));
    }
    if source == SourceTag::Mnist {
        if let (Some(col), Some(row)) = (find(cells, Column, Pixel), find(cells, Row, Pixel)) {
            out.push(majority_verdict(col, row));
        }
    }
    out
}

/// Graph x feature table of `mean ± std` accuracies (percent); invalid
/// combinations print as `n/a`, cells not run as `-`.
pub fn table_text(cells: &[CellResult]) -> String {
    let mut s = String::new();
    if let Some(c) = cells.first() {
        let seeds = c.reports.len();
        let _ = writeln!(
            s,
            "{} (GCN test accuracy %, {seeds} seed(s))",
            c.source.name()
        );
    }
    let _ = write!(s, "{:<10}", "graph");
    for f in FeatureKind::ALL {
        let _ = write!(s, "{:>16}", f.name());
    }
    s.push('\n');
    for &g in GraphKind::ALL {
        let _ = write!(s, "{:<10}", g.name());
        for &f in FeatureKind::ALL {
            let cell = if !crate::kinds::is_valid_combination(g, f) {
                "n/a".to_owned()
            } else if let Some(c) = find(cells, g, f) {
                format!("{:.2} ± {:.2}", 100.0 * c.mean(), 100.0 * c.std())
            } else {
                "-".to_owned()
            };
            let _ = write!(s, "{cell:>16}");
        }
        s.push('\n');
    }
    s
}

pub fn tsv_header() -> String {
    format!("source\t{REPORT_TSV_HEADER}")
}

pub fn tsv_rows(cells: &[CellResult]) -> Vec<String> {
    cells
        .iter()
        .flat_map(|c| {
            c.reports
                .iter()
                .map(move |r| format!("{}\t{}", c.source.name(), r.tsv_row()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::EpochStats;

    fn cell(
        source: SourceTag,
        graph: GraphKind,
        features: FeatureKind,
        accs: &[f64],
    ) -> CellResult {
        let reports = accs
            .iter()
            .enumerate()
            .map(|(k, &a)| TrainReport {
                representation: format!("{graph}+{features}"),
                config: GcnConfig::desk(k as u64),
                train_size: 10,
                test_size: 10,
                feature_dim: 1,
                epochs: vec![EpochStats {
                    epoch: 1,
                    loss: 1.0,
                    train_accuracy: 0.5,
                }],
                test_accuracy: a,
                wall_seconds: 0.0,
            })
            .collect();
        CellResult {
            source,
            representation: Representation { graph, features },
            reports,
        }
    }

    #[test]
    fn mean_and_sample_std() {
        let (m, s) = mean_std(&[0.2, 0.4, 0.6]);
        assert!((m - 0.4).abs() < 1e-12);
        assert!((s - 0.2).abs() < 1e-12);
        assert_eq!(mean_std(&[0.3]), (0.3, 0.0));
    }

    #[test]
    fn verdict_lines() {
        use FeatureKind::*;
        use GraphKind::*;
        let cells = vec![
            cell(SourceTag::Mnist, Grid, Pixel, &[0.3, 0.2, 0.25]),
            cell(SourceTag::Mnist, Row, Pixel, &[0.5, 0.6, 0.5]),
            cell(SourceTag::Mnist, Column, Pixel, &[0.6, 0.5, 0.7]),
            cell(SourceTag::Mnist, Product, Correlation, &[0.6, 0.6, 0.6]),
        ];
        let v = verdicts(&cells);
        assert_eq!(v.len(), 2);
        assert!(v[0]
            .line()
            .starts_with("ORDER mnist product_corr>grid_pixel: PASS"));
        assert!(v[1]
            .line()
            .starts_with("ORDER mnist column_pixel>row_pixel: PASS (wins 2/3)"));

        let fashion = vec![
            cell(SourceTag::FashionMnist, Grid, Pixel, &[0.5]),
            cell(SourceTag::FashionMnist, Product, Correlation, &[0.55]),
        ];
        let v = verdicts(&fashion);
        assert_eq!(v.len(), 1);
        assert!(!v[0].pass);
    }

    #[test]
    fn table_marks_invalid_cells() {
        let cells = vec![cell(
            SourceTag::Mnist,
            GraphKind::Grid,
            FeatureKind::Pixel,
            &[0.5, 0.7],
        )];
        let t = table_text(&cells);
        assert!(t.contains("60.00 ± 14.14"));
        assert_eq!(t.matches("n/a").count(), 5);
        assert_eq!(tsv_rows(&cells).len(), 2);
        assert!(tsv_rows(&cells)[0].starts_with("mnist\tgrid+pixel\t0\t"));
    }

    #[test]
    fn scale_presets() {
        assert_eq!(Scale::parse("smoke"), Some(Scale::Smoke));
        assert_eq!(Scale::Smoke.gcn_config(3).epochs, 2);
        assert_eq!(Scale::Desk.train_per_class(), Some(200));
        assert_eq!(Scale::Desk.test_per_class(), Some(100));
        assert_eq!(Scale::Full.train_per_class(), None);
    }
}
