//! Python view of the core types. Wrappers own their inner value; methods
//! that can fail surface the core error text as ValueError.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use hiersparse::data::{self, SplitSpec, SynthConfig};
use hiersparse::eval;
use hiersparse::hierarchy::{self, HierarchyTree};
use hiersparse::loss::{self, ModelCoefficients};
use hiersparse::regularizer::{RegularizerSpec, TreeNormVariant, WeightMode};
use hiersparse::report;
use hiersparse::solver::{self, SolverConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_weights(s: &str) -> PyResult<WeightMode> {
    match s {
        "unit" => Ok(WeightMode::Unit),
        "sqrt" => Ok(WeightMode::SqrtSize),
        other => Err(value_err(format!(
            "unknown weight mode {other:?}, expected \"unit\" or \"sqrt\""
        ))),
    }
}

fn parse_tree_norm(s: &str) -> PyResult<TreeNormVariant> {
    match s {
        "group_l2" => Ok(TreeNormVariant::GroupL2),
        "group_l1" => Ok(TreeNormVariant::GroupL1),
        other => Err(value_err(format!(
            "unknown tree norm {other:?}, expected \"group_l2\" or \"group_l1\""
        ))),
    }
}

/// Feature taxonomy: internal nodes group the leaf columns beneath them.
#[pyclass(frozen)]
struct Hierarchy {
    inner: HierarchyTree,
}

#[pymethods]
impl Hierarchy {
    /// Parse the tab-separated `id<TAB>parent<TAB>label` format; the root
    /// has parent "-".
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(Hierarchy {
            inner: hierarchy::parse_hierarchy(text).map_err(value_err)?,
        })
    }

    /// Uniform tree with the given branching factor per level below the root.
    #[staticmethod]
    fn balanced(branching: Vec<usize>) -> Hierarchy {
        Hierarchy {
            inner: hierarchy::balanced_tree(&branching),
        }
    }

    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn leaf_count(&self) -> usize {
        self.inner.leaf_count()
    }

    fn node_ids(&self) -> Vec<String> {
        self.inner.nodes().iter().map(|n| n.id.clone()).collect()
    }

    /// Design column of a leaf node (0-based feature index + intercept slot).
    fn leaf_column(&self, id: &str) -> Option<usize> {
        self.inner.leaf_column(id)
    }

    /// Feature indices of every leaf in the node's subtree.
    fn leaf_columns_under(&self, id: &str) -> PyResult<Vec<usize>> {
        self.inner.leaf_columns_under(id).map_err(value_err)
    }

    /// Node ids from the root down to the leaf owning this feature column.
    fn ancestor_chain(&self, column: usize) -> PyResult<Vec<String>> {
        Ok(hierarchy::ancestor_chain(&self.inner, column)
            .map_err(value_err)?
            .into_iter()
            .map(str::to_owned)
            .collect())
    }

    fn to_text(&self) -> String {
        hierarchy::serialize_hierarchy(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Hierarchy(depth={}, nodes={}, leaves={})",
            self.inner.depth(),
            self.inner.node_count(),
            self.inner.leaf_count()
        )
    }
}

/// Sparse binary-feature dataset with 0/1 labels; column 0 is the intercept.
#[pyclass(frozen)]
struct Dataset {
    inner: data::Dataset,
}

#[pymethods]
impl Dataset {
    /// Parse the `label col:val ...` line format.
    #[new]
    fn new(text: &str, n_cols: usize) -> PyResult<Self> {
        Ok(Dataset {
            inner: data::load_dataset(text, n_cols).map_err(value_err)?,
        })
    }

    /// Draw a labeled dataset whose active coefficients live on the leaves
    /// of the given subtrees. Returns (dataset, true_coefficients).
    #[staticmethod]
    #[pyo3(signature = (tree, active_subtrees, coef_magnitude, row_density, n_rows, intercept_true=0.0, label_noise=0.0, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn synth(
        tree: &Hierarchy,
        active_subtrees: Vec<String>,
        coef_magnitude: f64,
        row_density: f64,
        n_rows: usize,
        intercept_true: f64,
        label_noise: f64,
        seed: u64,
    ) -> PyResult<(Dataset, Vec<f64>)> {
        let (ds, truth) = data::synth_generate(&SynthConfig {
            tree: tree.inner.clone(),
            active_subtrees,
            coef_magnitude,
            row_density,
            n_rows,
            intercept_true,
            label_noise,
            seed,
        })
        .map_err(value_err)?;
        Ok((Dataset { inner: ds }, truth.values))
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn n_cols(&self) -> usize {
        self.inner.n_cols()
    }

    #[getter]
    fn positive_rate(&self) -> f64 {
        self.inner.positive_rate()
    }

    fn labels(&self) -> Vec<u8> {
        self.inner.labels().to_vec()
    }

    fn mean_nonzeros(&self) -> f64 {
        self.inner.mean_nonzeros()
    }

    fn subset(&self, indices: Vec<usize>) -> Dataset {
        Dataset {
            inner: self.inner.subset(&indices),
        }
    }

    /// Stratified (or plain shuffled) train/test split.
    #[pyo3(signature = (train_fraction, seed=0, stratified=true))]
    fn split(
        &self,
        train_fraction: f64,
        seed: u64,
        stratified: bool,
    ) -> PyResult<(Dataset, Dataset)> {
        let (a, b) = data::split(
            &self.inner,
            &SplitSpec {
                train_fraction,
                seed,
                stratified,
            },
        )
        .map_err(value_err)?;
        Ok((Dataset { inner: a }, Dataset { inner: b }))
    }

    /// Keep only rows where at least one of the given design columns fires.
    /// Columns are design indices: the intercept sits at 0, feature j at j + 1.
    fn filter_cohort(&self, code_columns: Vec<usize>) -> PyResult<Dataset> {
        Ok(Dataset {
            inner: data::filter_cohort(&self.inner, &code_columns).map_err(value_err)?,
        })
    }

    fn to_text(&self) -> String {
        data::serialize_dataset(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(rows={}, cols={}, positive_rate={:.4})",
            self.inner.n_rows(),
            self.inner.n_cols(),
            self.inner.positive_rate()
        )
    }

    fn __len__(&self) -> usize {
        self.inner.n_rows()
    }
}

/// Penalty specification; `strength` is the CLI's --lambda.
#[pyclass(frozen)]
struct Penalty {
    inner: RegularizerSpec,
}

impl Penalty {
    fn wrap(r: Result<RegularizerSpec, impl std::fmt::Display>) -> PyResult<Penalty> {
        Ok(Penalty {
            inner: r.map_err(value_err)?,
        })
    }
}

#[pymethods]
impl Penalty {
    #[staticmethod]
    fn none() -> Penalty {
        Penalty {
            inner: RegularizerSpec::none(),
        }
    }

    #[staticmethod]
    fn l2(strength: f64) -> PyResult<Penalty> {
        Penalty::wrap(RegularizerSpec::l2(strength))
    }

    #[staticmethod]
    fn l1(strength: f64) -> PyResult<Penalty> {
        Penalty::wrap(RegularizerSpec::l1(strength))
    }

    /// Sparse-group lasso over the tree's top-level partition. Design
    /// columns beyond the leaves (pass n_cols) are penalized by the l1
    /// share only, as in the CLI.
    #[staticmethod]
    #[pyo3(signature = (strength, alpha, tree, weights="unit", n_cols=None))]
    fn sgl(
        strength: f64,
        alpha: f64,
        tree: &Hierarchy,
        weights: &str,
        n_cols: Option<usize>,
    ) -> PyResult<Penalty> {
        let extras: Vec<usize> = match n_cols {
            Some(n) => (tree.inner.leaf_count()..n.saturating_sub(1)).collect(),
            None => Vec::new(),
        };
        let groups: Vec<_> = hierarchy::top_level_groups(&tree.inner, &extras)
            .map_err(value_err)?
            .iter()
            .map(|g| g.shifted(1))
            .collect();
        Penalty::wrap(RegularizerSpec::sgl(
            strength,
            alpha,
            groups,
            parse_weights(weights)?,
        ))
    }

    /// Tree-structured group lasso over every node of the hierarchy.
    #[staticmethod]
    #[pyo3(signature = (strength, tree, tree_norm="group_l2", weights="unit"))]
    fn tsgl(strength: f64, tree: &Hierarchy, tree_norm: &str, weights: &str) -> PyResult<Penalty> {
        let groups: Vec<_> = hierarchy::prox_order(&tree.inner)
            .iter()
            .map(|g| g.shifted(1))
            .collect();
        Penalty::wrap(RegularizerSpec::tsgl(
            strength,
            groups,
            parse_tree_norm(tree_norm)?,
            parse_weights(weights)?,
        ))
    }

    #[getter]
    fn kind(&self) -> String {
        format!("{:?}", self.inner.kind).to_lowercase()
    }

    #[getter]
    fn strength(&self) -> f64 {
        self.inner.lambda
    }

    fn __repr__(&self) -> String {
        format!(
            "Penalty(kind={}, strength={})",
            self.kind(),
            self.inner.lambda
        )
    }
}

/// Fitted model: coefficient vector plus convergence diagnostics.
#[pyclass(frozen)]
struct Fit {
    beta: ModelCoefficients,
    iterations: usize,
    converged: bool,
    objective: f64,
}

#[pymethods]
impl Fit {
    /// Full coefficient vector; index 0 is the intercept.
    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.beta.values.clone()
    }

    #[getter]
    fn intercept(&self) -> f64 {
        self.beta.values[0]
    }

    #[getter]
    fn nonzero_count(&self) -> usize {
        self.beta.nonzero_count()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.iterations
    }

    #[getter]
    fn converged(&self) -> bool {
        self.converged
    }

    #[getter]
    fn objective(&self) -> f64 {
        self.objective
    }

    /// Predicted positive-class probabilities.
    fn predict(&self, ds: &Dataset) -> Vec<f64> {
        loss::predict_all(&self.beta, &ds.inner)
    }

    /// (level, total_nodes, all_zero_nodes) per hierarchy level.
    fn sparsity_by_level(&self, tree: &Hierarchy) -> PyResult<Vec<(usize, usize, usize)>> {
        Ok(report::sparsity_by_level(&self.beta, &tree.inner)
            .map_err(value_err)?
            .per_level
            .iter()
            .map(|r| (r.level, r.total_nodes, r.all_zero_nodes))
            .collect())
    }

    fn sparsity_report(&self, tree: &Hierarchy) -> PyResult<String> {
        Ok(report::render_sparsity_text(
            &report::sparsity_by_level(&self.beta, &tree.inner).map_err(value_err)?,
        ))
    }

    /// Largest-magnitude coefficients as (column, name, coefficient,
    /// top-level group label), name falling back to the leaf label.
    #[pyo3(signature = (tree, k, names=None))]
    fn top_coefficients(
        &self,
        tree: &Hierarchy,
        k: usize,
        names: Option<Vec<String>>,
    ) -> Vec<(usize, String, f64, String)> {
        report::top_k(&self.beta, &tree.inner, &names.unwrap_or_default(), k)
            .entries
            .into_iter()
            .map(|e| (e.column, e.name, e.coefficient, e.group_label))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Fit(nonzeros={}, iterations={}, converged={})",
            self.beta.nonzero_count(),
            self.iterations,
            self.converged
        )
    }
}

/// Classification metrics at a fixed probability threshold.
#[pyclass(frozen)]
struct Metrics {
    inner: eval::MetricsReport,
}

#[pymethods]
impl Metrics {
    #[getter]
    fn f1(&self) -> f64 {
        self.inner.f1
    }

    #[getter]
    fn precision(&self) -> f64 {
        self.inner.precision
    }

    #[getter]
    fn recall(&self) -> f64 {
        self.inner.recall
    }

    #[getter]
    fn auc(&self) -> Option<f64> {
        self.inner.auc
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.inner.threshold
    }

    /// (true_pos, false_pos, true_neg, false_neg)
    #[getter]
    fn confusion(&self) -> (usize, usize, usize, usize) {
        let c = &self.inner.confusion;
        (c.true_pos, c.false_pos, c.true_neg, c.false_neg)
    }

    #[getter]
    fn roc_points(&self) -> Vec<(f64, f64)> {
        self.inner.roc_points.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "Metrics(f1={:.4}, precision={:.4}, recall={:.4}, auc={:?})",
            self.inner.f1, self.inner.precision, self.inner.recall, self.inner.auc
        )
    }
}

/// Fit a penalized logistic model by accelerated proximal gradient descent.
#[pyfunction]
#[pyo3(signature = (ds, penalty, max_iters=2000, tol=1e-7))]
fn fit(ds: &Dataset, penalty: &Penalty, max_iters: usize, tol: f64) -> PyResult<Fit> {
    let cfg = SolverConfig {
        max_iters,
        tol,
        ..SolverConfig::default()
    };
    let r = solver::fit(&ds.inner, &penalty.inner, &cfg).map_err(value_err)?;
    Ok(Fit {
        objective: r.objective_trace.last().copied().unwrap_or(f64::NAN),
        beta: r.beta,
        iterations: r.iterations,
        converged: r.converged,
    })
}

/// Smallest strength at which the fit is the exact null model.
#[pyfunction]
fn lambda_max(ds: &Dataset, penalty: &Penalty) -> f64 {
    solver::lambda_max(&ds.inner, &penalty.inner)
}

/// Log-spaced descending grid from lambda_max down by the given ratio.
#[pyfunction]
fn lambda_grid(lambda_max: f64, points: usize, ratio: f64) -> Vec<f64> {
    eval::lambda_grid(lambda_max, points, ratio)
}

/// Disjoint validation index sets covering 0..n.
#[pyfunction]
fn cv_folds(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    eval::cv_folds(n, k, seed)
}

/// Threshold the scores and count: F1, precision, recall, confusion.
#[pyfunction]
#[pyo3(signature = (scores, labels, threshold=0.5))]
fn classify_metrics(scores: Vec<f64>, labels: Vec<u8>, threshold: f64) -> PyResult<Metrics> {
    Ok(Metrics {
        inner: eval::classify_metrics(&scores, &labels, threshold).map_err(value_err)?,
    })
}

/// classify_metrics plus AUC and the ROC curve when both classes are
/// present.
#[pyfunction]
#[pyo3(signature = (scores, labels, threshold=0.5))]
fn evaluate(scores: Vec<f64>, labels: Vec<u8>, threshold: f64) -> PyResult<Metrics> {
    Ok(Metrics {
        inner: eval::evaluate(&scores, &labels, threshold).map_err(value_err)?,
    })
}

/// Rank-based AUC with tie handling.
#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    eval::auc(&scores, &labels).map_err(value_err)
}

/// ROC as (false_positive_rate, true_positive_rate) points.
#[pyfunction]
fn roc_curve(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<Vec<(f64, f64)>> {
    eval::roc_curve(&scores, &labels).map_err(value_err)
}

#[pymodule]
fn hiersparse_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Hierarchy>()?;
    m.add_class::<Dataset>()?;
    m.add_class::<Penalty>()?;
    m.add_class::<Fit>()?;
    m.add_class::<Metrics>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_max, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_grid, m)?)?;
    m.add_function(wrap_pyfunction!(cv_folds, m)?)?;
    m.add_function(wrap_pyfunction!(classify_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(roc_curve, m)?)?;
    Ok(())
}
