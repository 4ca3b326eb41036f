//! Command-line front end: train, experiment, cohort, synth, report.
//!
//! Every output file carries a serialized run manifest so results can be
//! reproduced from the file alone. Commands exit 0 on success, 1 on
//! usage or validation problems, and 2 when the solver hits a non-finite
//! objective.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    filter_cohort, load_dataset, serialize_dataset, split, synth_generate, DataError, Dataset,
    SplitSpec, SynthConfig,
};
use crate::eval::{
    evaluate, lambda_grid, repeated_splits, EvalError, ExperimentSummary, GridPoint,
    DEFAULT_CV_FOLDS, DEFAULT_GRID_POINTS, DEFAULT_GRID_RATIO, DEFAULT_THRESHOLD,
};
use crate::hierarchy::{
    parse_hierarchy, prox_order, serialize_hierarchy, top_level_groups, HierarchyError,
    HierarchyTree,
};
use crate::loss::{predict_all, ModelCoefficients};
use crate::regularizer::{RegularizerError, RegularizerSpec, TreeNormVariant, WeightMode};
use crate::report::{
    nonzero_count, render_sparsity_text, render_top_text, sparsity_by_level, top_k, ReportError,
};
use crate::solver::{fit, lambda_max, SolverConfig, SolverError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("failed to {action} {path}: {source}")]
    Io {
        action: &'static str,
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Regularizer(#[from] RegularizerError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(SolverError::NonFinite { .. }) => 2,
            CliError::Eval(EvalError::Solver(SolverError::NonFinite { .. })) => 2,
            _ => 1,
        }
    }
}

/// Everything needed to rerun a command, written into each output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalty: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree_norm: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_columns: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    pub seed: u64,
    pub version: String,
}

impl RunManifest {
    fn new(command: &str, seed: u64) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            inputs: Vec::new(),
            penalty: None,
            lambda: None,
            alpha: None,
            tree_norm: None,
            weights: None,
            n_columns: None,
            solver: None,
            seed,
            version: VERSION.to_string(),
        }
    }

    fn comment_line(&self) -> String {
        format!(
            "# manifest: {}",
            serde_json::to_string(self).expect("manifest serializes")
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PenaltyArg {
    None,
    L2,
    L1,
    Sgl,
    Tsgl,
}

impl PenaltyArg {
    fn name(self) -> &'static str {
        match self {
            PenaltyArg::None => "none",
            PenaltyArg::L2 => "l2",
            PenaltyArg::L1 => "l1",
            PenaltyArg::Sgl => "sgl",
            PenaltyArg::Tsgl => "tsgl",
        }
    }

    fn needs_tree(self) -> bool {
        matches!(self, PenaltyArg::Sgl | PenaltyArg::Tsgl)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TreeNormArg {
    #[value(name = "group_l2")]
    GroupL2,
    #[value(name = "group_l1")]
    GroupL1,
}

impl TreeNormArg {
    fn name(self) -> &'static str {
        match self {
            TreeNormArg::GroupL2 => "group_l2",
            TreeNormArg::GroupL1 => "group_l1",
        }
    }

    fn variant(self) -> TreeNormVariant {
        match self {
            TreeNormArg::GroupL2 => TreeNormVariant::GroupL2,
            TreeNormArg::GroupL1 => TreeNormVariant::GroupL1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WeightsArg {
    Unit,
    Sqrt,
}

impl WeightsArg {
    fn name(self) -> &'static str {
        match self {
            WeightsArg::Unit => "unit",
            WeightsArg::Sqrt => "sqrt",
        }
    }

    fn mode(self) -> WeightMode {
        match self {
            WeightsArg::Unit => WeightMode::Unit,
            WeightsArg::Sqrt => WeightMode::SqrtSize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "hiersparse",
    version,
    about = "Sparse logistic regression with hierarchy-structured penalties"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one model and write it as a sparse text file.
    Train(TrainArgs),
    /// Repeated random splits with per-split cross-validated penalties.
    Experiment(ExperimentArgs),
    /// Experiment restricted to rows matching a code cohort.
    Cohort(CohortArgs),
    /// Generate a tree-aligned synthetic dataset.
    Synth(SynthArgs),
    /// Sparsity tables and top coefficients for a trained model.
    Report(ReportArgs),
}

#[derive(Debug, clap::Args)]
struct SolverFlags {
    /// Iteration cap for the proximal gradient loop.
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    /// Relative objective-decrease stopping tolerance.
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
}

impl SolverFlags {
    fn config(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            max_iters: self.max_iters,
            tol: self.tol,
            seed,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, clap::Args)]
struct TrainArgs {
    /// Sparse dataset file: `<label> <col>:<val> ...` per row.
    #[arg(long)]
    data: PathBuf,
    /// Tab-separated hierarchy file; required for sgl and tsgl.
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    #[arg(long, value_enum)]
    penalty: PenaltyArg,
    /// Penalty strength; required unless --penalty none.
    #[arg(long)]
    lambda: Option<f64>,
    /// l1 share for sgl.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = TreeNormArg::GroupL2)]
    tree_norm: TreeNormArg,
    #[arg(long, value_enum, default_value_t = WeightsArg::Unit)]
    weights: WeightsArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "model.txt")]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Debug, clap::Args)]
struct ExperimentGrid {
    /// Penalties to compare; comma-separated or repeated.
    #[arg(long, value_enum, value_delimiter = ',', num_args = 1..,
          default_values_t = [PenaltyArg::L2, PenaltyArg::L1, PenaltyArg::Sgl, PenaltyArg::Tsgl])]
    penalty: Vec<PenaltyArg>,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 0.6)]
    train_frac: f64,
    /// Stratify the train/test split by label.
    #[arg(long, default_value_t = false)]
    stratified: bool,
    /// Points in the log-spaced λ grid.
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    grid_points: usize,
    /// Ratio of the smallest grid λ to λ_max.
    #[arg(long, default_value_t = DEFAULT_GRID_RATIO)]
    grid_ratio: f64,
    /// l1 share for sgl; --alphas widens this to a grid.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Candidate alpha values for sgl, cross-producted with the λ grid.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = TreeNormArg::GroupL2)]
    tree_norm: TreeNormArg,
    #[arg(long, value_enum, default_value_t = WeightsArg::Unit)]
    weights: WeightsArg,
    #[arg(long, default_value_t = DEFAULT_CV_FOLDS)]
    folds: usize,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Worker threads for repeats; 0 uses all cores. Defaults to
    /// HIERSPARSE_JOBS or 1.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON summary path.
    #[arg(long, default_value = "experiment.json")]
    out: PathBuf,
    /// Directory for per-penalty ROC point files.
    #[arg(long)]
    roc_out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Debug, clap::Args)]
struct ExperimentArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    #[command(flatten)]
    grid: ExperimentGrid,
}

#[derive(Debug, clap::Args)]
struct CohortArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    /// Comma-separated feature columns (file numbering) defining the cohort.
    #[arg(long, value_delimiter = ',', conflicts_with = "cohort_node")]
    cohort_columns: Option<Vec<usize>>,
    /// Tree node whose descendant leaves define the cohort.
    #[arg(long)]
    cohort_node: Option<String>,
    #[command(flatten)]
    grid: ExperimentGrid,
}

#[derive(Debug, clap::Args)]
struct SynthArgs {
    /// Per-level branching factors for a generated uniform tree.
    #[arg(long, value_delimiter = ',', num_args = 1.., conflicts_with = "hierarchy")]
    branching: Option<Vec<usize>>,
    /// Existing hierarchy file to generate against.
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    /// Node ids whose leaf descendants carry true signal.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    active: Vec<String>,
    #[arg(long, default_value_t = 1.0)]
    magnitude: f64,
    /// Expected nonzero features per row.
    #[arg(long, default_value_t = 5.0)]
    density: f64,
    #[arg(long, default_value_t = 1000)]
    rows: usize,
    #[arg(long, default_value_t = 0.0)]
    intercept: f64,
    /// Label flip probability.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "synth_data.txt")]
    out_data: PathBuf,
    #[arg(long, default_value = "synth_hierarchy.txt")]
    out_hierarchy: PathBuf,
    #[arg(long, default_value = "synth_beta.txt")]
    out_beta: PathBuf,
}

#[derive(Debug, clap::Args)]
struct ReportArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    hierarchy: PathBuf,
    /// How many top coefficients to list.
    #[arg(long, default_value_t = 40)]
    top: usize,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I>(args: I) -> i32
where
    I: IntoIterator<Item = OsString>,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let _ = e.print();
            return 1;
        }
    };
    let result = match cli.command {
        Command::Train(args) => cmd_train(&args),
        Command::Experiment(args) => cmd_experiment(&args),
        Command::Cohort(args) => cmd_cohort(&args),
        Command::Synth(args) => cmd_synth(&args),
        Command::Report(args) => cmd_report(&args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e);
            e.exit_code()
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        action: "read",
        path: path.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content).map_err(|source| CliError::Io {
        action: "write",
        path: path.display().to_string(),
        source,
    })
}

/// Largest feature column mentioned in the data file, plus one.
fn scan_feature_count(text: &str) -> usize {
    let mut max_col = None;
    for line in text.lines() {
        let line = line.trim_start();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for tok in line.split_ascii_whitespace().skip(1) {
            if let Some((col, _)) = tok.split_once(':') {
                if let Ok(c) = col.parse::<usize>() {
                    max_col = Some(max_col.map_or(c, |m: usize| m.max(c)));
                }
            }
        }
    }
    max_col.map_or(0, |m| m + 1)
}

fn load_inputs(
    data_path: &Path,
    hierarchy_path: Option<&Path>,
) -> Result<(Dataset, Option<HierarchyTree>), CliError> {
    let tree = match hierarchy_path {
        Some(p) => Some(parse_hierarchy(&read_file(p)?)?),
        None => None,
    };
    let text = read_file(data_path)?;
    let features = scan_feature_count(&text);
    let leaves = tree.as_ref().map_or(0, |t| t.leaf_count());
    let n_cols = 1 + features.max(leaves);
    let ds = load_dataset(&text, n_cols)?;
    Ok((ds, tree))
}

fn build_spec(
    penalty: PenaltyArg,
    lambda: f64,
    alpha: f64,
    tree: Option<&HierarchyTree>,
    tree_norm: TreeNormArg,
    weights: WeightsArg,
    n_cols: usize,
) -> Result<RegularizerSpec, CliError> {
    match penalty {
        PenaltyArg::None => Ok(RegularizerSpec::none()),
        PenaltyArg::L2 => Ok(RegularizerSpec::l2(lambda)?),
        PenaltyArg::L1 => Ok(RegularizerSpec::l1(lambda)?),
        PenaltyArg::Sgl | PenaltyArg::Tsgl => {
            let tree = tree.ok_or_else(|| {
                CliError::Usage(format!("--penalty {} requires --hierarchy", penalty.name()))
            })?;
            if penalty == PenaltyArg::Sgl {
                let extras: Vec<usize> = (tree.leaf_count()..n_cols.saturating_sub(1)).collect();
                let groups: Vec<_> = top_level_groups(tree, &extras)?
                    .iter()
                    .map(|g| g.shifted(1))
                    .collect();
                Ok(RegularizerSpec::sgl(lambda, alpha, groups, weights.mode())?)
            } else {
                let groups: Vec<_> = prox_order(tree).iter().map(|g| g.shifted(1)).collect();
                Ok(RegularizerSpec::tsgl(
                    lambda,
                    groups,
                    tree_norm.variant(),
                    weights.mode(),
                )?)
            }
        }
    }
}

fn format_model_file(manifest: &RunManifest, beta: &ModelCoefficients) -> String {
    let mut out = String::from("# hiersparse model\n");
    out.push_str(&manifest.comment_line());
    out.push('\n');
    let _ = writeln!(out, "intercept {}", beta.values[0]);
    for (j, &v) in beta.values.iter().enumerate().skip(1) {
        if v != 0.0 {
            let _ = writeln!(out, "{} {}", j, v);
        }
    }
    out
}

fn parse_model_file(text: &str) -> Result<(Option<RunManifest>, ModelCoefficients), CliError> {
    let mut manifest = None;
    let mut entries: Vec<(usize, f64)> = Vec::new();
    let mut intercept = 0.0;
    let bad = |line: &str| CliError::Usage(format!("malformed model line: {}", line));
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# manifest:") {
            manifest = Some(
                serde_json::from_str::<RunManifest>(rest.trim())
                    .map_err(|e| CliError::Usage(format!("bad manifest in model file: {}", e)))?,
            );
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let (head, value) = line.split_once(' ').ok_or_else(|| bad(line))?;
        let value: f64 = value.trim().parse().map_err(|_| bad(line))?;
        if head == "intercept" {
            intercept = value;
        } else {
            let col: usize = head.parse().map_err(|_| bad(line))?;
            if col == 0 {
                return Err(bad(line));
            }
            entries.push((col, value));
        }
    }
    let from_manifest = manifest.as_ref().and_then(|m| m.n_columns).unwrap_or(0);
    let dim = entries
        .iter()
        .map(|&(c, _)| c + 1)
        .max()
        .unwrap_or(1)
        .max(from_manifest)
        .max(1);
    let mut beta = ModelCoefficients::zeros(dim);
    beta.values[0] = intercept;
    for (c, v) in entries {
        beta.values[c] = v;
    }
    Ok((manifest, beta))
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let lambda = match (args.penalty, args.lambda) {
        (PenaltyArg::None, l) => l.unwrap_or(0.0),
        (_, Some(l)) => l,
        (p, None) => {
            return Err(CliError::Usage(format!(
                "--penalty {} requires --lambda",
                p.name()
            )))
        }
    };
    let (ds, tree) = load_inputs(&args.data, args.hierarchy.as_deref())?;
    let spec = build_spec(
        args.penalty,
        lambda,
        args.alpha,
        tree.as_ref(),
        args.tree_norm,
        args.weights,
        ds.n_cols(),
    )?;
    let cfg = args.solver.config(args.seed);
    let fitted = fit(&ds, &spec, &cfg)?;

    let mut manifest = RunManifest::new("train", args.seed);
    manifest.inputs.push(args.data.display().to_string());
    if let Some(h) = &args.hierarchy {
        manifest.inputs.push(h.display().to_string());
    }
    manifest.penalty = Some(args.penalty.name().to_string());
    manifest.lambda = Some(lambda);
    if args.penalty == PenaltyArg::Sgl {
        manifest.alpha = Some(args.alpha);
    }
    if args.penalty == PenaltyArg::Tsgl {
        manifest.tree_norm = Some(args.tree_norm.name().to_string());
    }
    if args.penalty.needs_tree() {
        manifest.weights = Some(args.weights.name().to_string());
    }
    manifest.n_columns = Some(ds.n_cols());
    manifest.solver = Some(cfg);

    write_file(&args.out, &format_model_file(&manifest, &fitted.beta))?;

    println!("penalty: {} (lambda {})", args.penalty.name(), lambda);
    println!(
        "iterations: {} ({})",
        fitted.iterations,
        if fitted.converged {
            "converged"
        } else {
            "max iterations"
        }
    );
    println!(
        "objective: {} -> {}",
        fitted.objective_trace.first().expect("nonempty trace"),
        fitted.objective_trace.last().expect("nonempty trace")
    );
    println!("nonzeros: {}", fitted.nonzero_count);
    println!("model written to {}", args.out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct KindResult {
    kind: String,
    #[serde(flatten)]
    summary: ExperimentSummary,
}

#[derive(Debug, Serialize)]
struct ExperimentDocument {
    manifest: RunManifest,
    results: Vec<KindResult>,
}

fn resolve_jobs(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("HIERSPARSE_JOBS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(1)
}

fn run_experiment(
    ds: &Dataset,
    tree: Option<&HierarchyTree>,
    grid_args: &ExperimentGrid,
    manifest: RunManifest,
) -> Result<(), CliError> {
    let kinds: Vec<PenaltyArg> = {
        let mut seen = Vec::new();
        for &k in &grid_args.penalty {
            if !seen.contains(&k) {
                seen.push(k);
            }
        }
        seen
    };
    for &k in &kinds {
        if k.needs_tree() && tree.is_none() {
            return Err(CliError::Usage(format!(
                "--penalty {} requires --hierarchy",
                k.name()
            )));
        }
    }
    let cfg = grid_args.solver.config(grid_args.seed);
    let split_spec = SplitSpec {
        train_fraction: grid_args.train_frac,
        seed: grid_args.seed,
        stratified: grid_args.stratified,
    };
    let alphas = grid_args
        .alphas
        .clone()
        .unwrap_or_else(|| vec![grid_args.alpha]);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_jobs(grid_args.jobs))
        .build()
        .map_err(|e| CliError::Usage(format!("could not build thread pool: {}", e)))?;

    let mut results = Vec::with_capacity(kinds.len());
    for &kind in &kinds {
        let build = |p: &GridPoint| -> Result<RegularizerSpec, RegularizerError> {
            build_spec(
                kind,
                p.lambda,
                p.alpha,
                tree,
                grid_args.tree_norm,
                grid_args.weights,
                ds.n_cols(),
            )
            .map_err(|e| match e {
                CliError::Regularizer(r) => r,
                other => RegularizerError::BadParam {
                    reason: other.to_string(),
                },
            })
        };
        let grid: Vec<GridPoint> = match kind {
            PenaltyArg::None => vec![GridPoint {
                lambda: 0.0,
                alpha: 0.0,
            }],
            _ => {
                // ridge never nulls the model, so its grid reuses the l1
                // bound as a scale anchor
                let probe = if kind == PenaltyArg::L2 {
                    RegularizerSpec::l1(1.0)?
                } else {
                    build(&GridPoint {
                        lambda: 1.0,
                        alpha: grid_args.alpha,
                    })?
                };
                let lam_max = lambda_max(ds, &probe);
                if !lam_max.is_finite() || lam_max <= 0.0 {
                    return Err(CliError::Usage(format!(
                        "could not anchor a λ grid for {} (bound {})",
                        kind.name(),
                        lam_max
                    )));
                }
                let lambdas = lambda_grid(lam_max, grid_args.grid_points, grid_args.grid_ratio);
                let kind_alphas: &[f64] = if kind == PenaltyArg::Sgl {
                    &alphas
                } else {
                    &[0.0]
                };
                lambdas
                    .iter()
                    .flat_map(|&lambda| {
                        kind_alphas
                            .iter()
                            .map(move |&alpha| GridPoint { lambda, alpha })
                    })
                    .collect()
            }
        };
        let summary = pool.install(|| {
            repeated_splits(
                ds,
                build,
                &cfg,
                grid_args.repeats,
                &split_spec,
                &grid,
                grid_args.folds,
                grid_args.threshold,
            )
        })?;
        results.push(KindResult {
            kind: kind.name().to_string(),
            summary,
        });
    }

    println!("kind  f1_mean  f1_std   auc_mean  lambda");
    for r in &results {
        println!(
            "{:<5} {:<8.4} {:<8.4} {:<9.4} {:e}",
            r.kind,
            r.summary.f1_mean,
            r.summary.f1_std,
            r.summary.auc_mean,
            r.summary.chosen_lambda
        );
    }

    if let Some(dir) = &grid_args.roc_out {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            action: "create",
            path: dir.display().to_string(),
            source,
        })?;
        for r in &results {
            let mut text = String::new();
            for (fpr, tpr) in &r.summary.per_run[0].roc_points {
                let _ = writeln!(text, "{}\t{}", fpr, tpr);
            }
            write_file(&dir.join(format!("roc_{}.txt", r.kind)), &text)?;
        }
    }

    let doc = ExperimentDocument { manifest, results };
    let json = serde_json::to_string_pretty(&doc).expect("summary serializes");
    write_file(&grid_args.out, &(json + "\n"))?;
    println!("summary written to {}", grid_args.out.display());
    Ok(())
}

fn experiment_manifest(
    command: &str,
    data: &Path,
    hierarchy: Option<&Path>,
    grid: &ExperimentGrid,
    n_cols: usize,
) -> RunManifest {
    let mut manifest = RunManifest::new(command, grid.seed);
    manifest.inputs.push(data.display().to_string());
    if let Some(h) = hierarchy {
        manifest.inputs.push(h.display().to_string());
    }
    manifest.penalty = Some(
        grid.penalty
            .iter()
            .map(|p| p.name())
            .collect::<Vec<_>>()
            .join(","),
    );
    manifest.alpha = Some(grid.alpha);
    manifest.tree_norm = Some(grid.tree_norm.name().to_string());
    manifest.weights = Some(grid.weights.name().to_string());
    manifest.n_columns = Some(n_cols);
    manifest.solver = Some(grid.solver.config(grid.seed));
    manifest
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<(), CliError> {
    let (ds, tree) = load_inputs(&args.data, args.hierarchy.as_deref())?;
    let manifest = experiment_manifest(
        "experiment",
        &args.data,
        args.hierarchy.as_deref(),
        &args.grid,
        ds.n_cols(),
    );
    run_experiment(&ds, tree.as_ref(), &args.grid, manifest)
}

fn cmd_cohort(args: &CohortArgs) -> Result<(), CliError> {
    let (ds, tree) = load_inputs(&args.data, args.hierarchy.as_deref())?;
    let design_cols: Vec<usize> = match (&args.cohort_columns, &args.cohort_node) {
        (Some(cols), None) => cols.iter().map(|&c| c + 1).collect(),
        (None, Some(node)) => {
            let tree = tree
                .as_ref()
                .ok_or_else(|| CliError::Usage("--cohort-node requires --hierarchy".to_string()))?;
            tree.leaf_columns_under(node)?
                .into_iter()
                .map(|c| c + 1)
                .collect()
        }
        _ => {
            return Err(CliError::Usage(
                "pass exactly one of --cohort-columns or --cohort-node".to_string(),
            ))
        }
    };
    let cohort = filter_cohort(&ds, &design_cols)?;
    if cohort.n_rows() == 0 {
        return Err(CliError::Usage(format!(
            "cohort matches 0 of {} rows",
            ds.n_rows()
        )));
    }
    println!("cohort rows: {} of {}", cohort.n_rows(), ds.n_rows());
    let mut manifest = experiment_manifest(
        "cohort",
        &args.data,
        args.hierarchy.as_deref(),
        &args.grid,
        ds.n_cols(),
    );
    if let Some(node) = &args.cohort_node {
        manifest.inputs.push(format!("cohort-node:{}", node));
    }
    run_experiment(&cohort, tree.as_ref(), &args.grid, manifest)
}

fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let tree = match (&args.branching, &args.hierarchy) {
        (Some(b), None) => {
            if b.is_empty() || b.iter().any(|&x| x == 0 || x > 100) {
                return Err(CliError::Usage(
                    "--branching needs factors in 1..=100".to_string(),
                ));
            }
            crate::hierarchy::balanced_tree(b)
        }
        (None, Some(p)) => parse_hierarchy(&read_file(p)?)?,
        _ => {
            return Err(CliError::Usage(
                "pass exactly one of --branching or --hierarchy".to_string(),
            ))
        }
    };
    let cfg = SynthConfig {
        tree,
        active_subtrees: args.active.clone(),
        coef_magnitude: args.magnitude,
        row_density: args.density,
        n_rows: args.rows,
        intercept_true: args.intercept,
        label_noise: args.noise,
        seed: args.seed,
    };
    let (ds, beta_true) = synth_generate(&cfg)?;

    let mut manifest = RunManifest::new("synth", args.seed);
    if let Some(h) = &args.hierarchy {
        manifest.inputs.push(h.display().to_string());
    }
    manifest.n_columns = Some(ds.n_cols());
    let header = format!("# synthetic data\n{}\n", manifest.comment_line());

    write_file(
        &args.out_data,
        &format!("{}{}", header, serialize_dataset(&ds)),
    )?;
    write_file(
        &args.out_hierarchy,
        &format!("{}{}", header, serialize_hierarchy(&cfg.tree)),
    )?;
    write_file(&args.out_beta, &format_model_file(&manifest, &beta_true))?;

    println!(
        "wrote {} rows over {} leaves ({} positive)",
        ds.n_rows(),
        cfg.tree.leaf_count(),
        ds.positive_count()
    );
    println!(
        "files: {} {} {}",
        args.out_data.display(),
        args.out_hierarchy.display(),
        args.out_beta.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct ReportDocument {
    #[serde(skip_serializing_if = "Option::is_none")]
    manifest: Option<RunManifest>,
    nonzeros: usize,
    sparsity: crate::report::SparsityByLevel,
    top: crate::report::TopCoefficients,
}

fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    if args.top == 0 {
        return Err(CliError::Usage("--top must be at least 1".to_string()));
    }
    let tree = parse_hierarchy(&read_file(&args.hierarchy)?)?;
    let (manifest, mut beta) = parse_model_file(&read_file(&args.model)?)?;
    // columns the model never saw are plain zeros
    let want = tree.leaf_count() + 1;
    if beta.len() < want {
        beta.values.resize(want, 0.0);
    }
    let sparsity = sparsity_by_level(&beta, &tree)?;
    let top = top_k(&beta, &tree, &[], args.top);
    let nonzeros = nonzero_count(&beta);

    let rendered = match args.format {
        FormatArg::Json => {
            let doc = ReportDocument {
                manifest,
                nonzeros,
                sparsity,
                top,
            };
            serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
        }
        FormatArg::Text => {
            let mut out = String::new();
            if let Some(m) = &manifest {
                out.push_str(&m.comment_line());
                out.push('\n');
            }
            let _ = writeln!(out, "nonzero coefficients: {}", nonzeros);
            out.push('\n');
            out.push_str(&render_sparsity_text(&sparsity));
            out.push('\n');
            out.push_str(&render_top_text(&top));
            out
        }
    };
    match &args.out {
        Some(path) => write_file(path, &rendered)?,
        None => print!("{}", rendered),
    }
    Ok(())
}

/// Fit one spec on a train split and score the test side; used by the
/// acceptance checks and handy for scripting through the Python bindings.
pub fn split_fit_evaluate(
    ds: &Dataset,
    spec: &RegularizerSpec,
    cfg: &SolverConfig,
    split_spec: &SplitSpec,
    threshold: f64,
) -> Result<(crate::eval::MetricsReport, crate::solver::FitResult), CliError> {
    let (train, test) = split(ds, split_spec)?;
    let fitted = fit(&train, spec, cfg)?;
    let scores = predict_all(&fitted.beta, &test);
    let report = evaluate(&scores, test.labels(), threshold)?;
    Ok((report, fitted))
}
