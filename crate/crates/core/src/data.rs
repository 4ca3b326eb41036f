//! Sparse dataset ingestion, train/test splitting, cohort filtering, and
//! the synthetic tree-aligned generator used by the verification suite.
//!
//! Rows are stored sparse with the intercept injected at column 0, so a
//! file column `c` lands at design column `c + 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::hierarchy::HierarchyTree;
use crate::loss::ModelCoefficients;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("line {line}: malformed entry `{content}`")]
    Malformed { line: usize, content: String },
    #[error("line {line}: non-binary label `{label}`")]
    NonBinaryLabel { line: usize, label: String },
    #[error("line {line}: column {column} maps past n_cols = {n_cols}")]
    ColumnOutOfRange {
        line: usize,
        column: usize,
        n_cols: usize,
    },
    #[error("line {line}: column {column} out of order or repeated")]
    UnsortedColumns { line: usize, column: usize },
    #[error("line {line}: column {column} stores an explicit zero")]
    ZeroValue { line: usize, column: usize },
    #[error("split needs at least 2 rows, dataset has {n_rows}")]
    TooFewRows { n_rows: usize },
    #[error("train fraction {fraction} yields an empty side for {n_rows} rows")]
    EmptySide { fraction: f64, n_rows: usize },
    #[error("stratified split requires both classes present")]
    MissingClass,
    #[error("cohort column {column} exceeds dataset width {n_cols}")]
    BadCohortColumn { column: usize, n_cols: usize },
    #[error("active subtree `{id}` is not a node in the hierarchy")]
    UnknownSubtree { id: String },
    #[error("invalid synth config: {reason}")]
    BadSynthConfig { reason: String },
}

/// Sparse row-major design matrix with {0,1} labels. Column 0 is the
/// intercept and is present in every row with value 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
    labels: Vec<u8>,
    pub column_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn positive_count(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn positive_rate(&self) -> f64 {
        self.positive_count() as f64 / self.n_rows() as f64
    }

    /// Mean nonzero count per row, intercept excluded.
    pub fn mean_nonzeros(&self) -> f64 {
        let total: usize = self.rows.iter().map(|r| r.len() - 1).sum();
        total as f64 / self.n_rows() as f64
    }

    /// New dataset holding the given rows (ascending indices), column space
    /// unchanged.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            n_cols: self.n_cols,
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            column_names: self.column_names.clone(),
        }
    }

    pub fn from_parts(n_cols: usize, rows: Vec<Vec<(usize, f64)>>, labels: Vec<u8>) -> Dataset {
        debug_assert_eq!(rows.len(), labels.len());
        Dataset {
            n_cols,
            rows,
            labels,
            column_names: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub tree: HierarchyTree,
    pub active_subtrees: Vec<String>,
    pub coef_magnitude: f64,
    pub row_density: f64,
    pub n_rows: usize,
    pub intercept_true: f64,
    pub label_noise: f64,
    pub seed: u64,
}

/// Parse the sparse line format `<label> <col>:<val> ...`. File column `c`
/// becomes design column `c + 1`; the intercept is injected at column 0.
pub fn load_dataset(text: &str, n_cols: usize) -> Result<Dataset, DataError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let lineno = lineno + 1;
        let mut tokens = line.split_ascii_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a first token");
        let label = match label_tok.parse::<f64>() {
            Ok(v) if v == 0.0 => 0u8,
            Ok(v) if v == 1.0 => 1u8,
            Ok(_) => {
                return Err(DataError::NonBinaryLabel {
                    line: lineno,
                    label: label_tok.to_string(),
                })
            }
            Err(_) => {
                return Err(DataError::Malformed {
                    line: lineno,
                    content: label_tok.to_string(),
                })
            }
        };

        let mut row = vec![(0usize, 1.0)];
        let mut prev: Option<usize> = None;
        for tok in tokens {
            let (col_s, val_s) = tok.split_once(':').ok_or_else(|| DataError::Malformed {
                line: lineno,
                content: tok.to_string(),
            })?;
            let file_col: usize = col_s.parse().map_err(|_| DataError::Malformed {
                line: lineno,
                content: tok.to_string(),
            })?;
            let val: f64 = val_s.parse().map_err(|_| DataError::Malformed {
                line: lineno,
                content: tok.to_string(),
            })?;
            let col = file_col + 1;
            if col >= n_cols {
                return Err(DataError::ColumnOutOfRange {
                    line: lineno,
                    column: file_col,
                    n_cols,
                });
            }
            if prev.map_or(false, |p| p >= col) {
                return Err(DataError::UnsortedColumns {
                    line: lineno,
                    column: file_col,
                });
            }
            if val == 0.0 {
                return Err(DataError::ZeroValue {
                    line: lineno,
                    column: file_col,
                });
            }
            prev = Some(col);
            row.push((col, val));
        }
        rows.push(row);
        labels.push(label);
    }
    Ok(Dataset {
        n_cols,
        rows,
        labels,
        column_names: None,
    })
}

/// Inverse of [`load_dataset`]: design column `c` is written as file
/// column `c - 1`.
pub fn serialize_dataset(ds: &Dataset) -> String {
    let mut out = String::new();
    for (row, &label) in ds.rows.iter().zip(&ds.labels) {
        out.push_str(if label == 1 { "1" } else { "0" });
        for &(col, val) in row.iter().skip(1) {
            out.push(' ');
            out.push_str(&format!("{}:{}", col - 1, val));
        }
        out.push('\n');
    }
    out
}

pub(crate) fn shuffled_indices(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    // Fisher-Yates, explicit so the draw stream is pinned.
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

fn round_half_even(x: f64) -> usize {
    let down = x.floor();
    let frac = x - down;
    let down_u = down as usize;
    if frac > 0.5 || (frac == 0.5 && down_u % 2 == 1) {
        down_u + 1
    } else {
        down_u
    }
}

/// Split into (train, test). Train size is round(N·f) with ties to even;
/// the same spec always produces the same partition. Stratified mode
/// applies the rounding per class.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset), DataError> {
    let n = ds.n_rows();
    if n < 2 {
        return Err(DataError::TooFewRows { n_rows: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train_idx: Vec<usize>;
    if spec.stratified {
        let pos: Vec<usize> = (0..n).filter(|&i| ds.labels[i] == 1).collect();
        let neg: Vec<usize> = (0..n).filter(|&i| ds.labels[i] == 0).collect();
        if pos.is_empty() || neg.is_empty() {
            return Err(DataError::MissingClass);
        }
        train_idx = Vec::new();
        for class in [&pos, &neg] {
            let take = round_half_even(class.len() as f64 * spec.train_fraction);
            let order = shuffled_indices(class.len(), &mut rng);
            train_idx.extend(order[..take].iter().map(|&k| class[k]));
        }
    } else {
        let take = round_half_even(n as f64 * spec.train_fraction);
        let order = shuffled_indices(n, &mut rng);
        train_idx = order[..take].to_vec();
    }
    train_idx.sort_unstable();
    if train_idx.is_empty() || train_idx.len() == n {
        return Err(DataError::EmptySide {
            fraction: spec.train_fraction,
            n_rows: n,
        });
    }
    let in_train: Vec<bool> = {
        let mut mask = vec![false; n];
        for &i in &train_idx {
            mask[i] = true;
        }
        mask
    };
    let test_idx: Vec<usize> = (0..n).filter(|&i| !in_train[i]).collect();
    Ok((ds.subset(&train_idx), ds.subset(&test_idx)))
}

/// Keep rows with a nonzero value in at least one of `code_columns`
/// (design-space indices). An empty result is legal.
pub fn filter_cohort(ds: &Dataset, code_columns: &[usize]) -> Result<Dataset, DataError> {
    for &c in code_columns {
        if c >= ds.n_cols {
            return Err(DataError::BadCohortColumn {
                column: c,
                n_cols: ds.n_cols,
            });
        }
    }
    let mut sorted = code_columns.to_vec();
    sorted.sort_unstable();
    let keep: Vec<usize> = (0..ds.n_rows())
        .filter(|&i| {
            ds.rows[i]
                .iter()
                .any(|&(c, _)| sorted.binary_search(&c).is_ok())
        })
        .collect();
    Ok(ds.subset(&keep))
}

/// Generate a tree-aligned binary dataset. True coefficients put
/// ±coef_magnitude (sign from design-column parity: even +, odd −) on
/// every leaf column under the active subtrees. Each row includes each
/// leaf independently with probability row_density / leaf_count, and the
/// label is 1 with probability σ(βᵀx) flipped with probability
/// label_noise. The ChaCha stream is fixed per seed: leaf draws in column
/// order, then the label draw, row by row.
pub fn synth_generate(cfg: &SynthConfig) -> Result<(Dataset, ModelCoefficients), DataError> {
    let leaves = cfg.tree.leaf_count();
    if !(cfg.coef_magnitude > 0.0) {
        return Err(DataError::BadSynthConfig {
            reason: format!(
                "coef_magnitude must be positive, got {}",
                cfg.coef_magnitude
            ),
        });
    }
    if !(0.0..=leaves as f64).contains(&cfg.row_density) {
        return Err(DataError::BadSynthConfig {
            reason: format!(
                "row_density {} outside [0, leaf count {}]",
                cfg.row_density, leaves
            ),
        });
    }
    if !(0.0..0.5).contains(&cfg.label_noise) {
        return Err(DataError::BadSynthConfig {
            reason: format!("label_noise {} outside [0, 0.5)", cfg.label_noise),
        });
    }

    let n_cols = leaves + 1;
    let mut beta = ModelCoefficients::zeros(n_cols);
    beta.values[0] = cfg.intercept_true;
    for id in &cfg.active_subtrees {
        let cols = cfg
            .tree
            .leaf_columns_under(id)
            .map_err(|_| DataError::UnknownSubtree { id: id.clone() })?;
        for f in cols {
            let col = f + 1;
            beta.values[col] = if col % 2 == 0 {
                cfg.coef_magnitude
            } else {
                -cfg.coef_magnitude
            };
        }
    }

    let p_col = cfg.row_density / leaves as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.n_rows);
    let mut labels = Vec::with_capacity(cfg.n_rows);
    for _ in 0..cfg.n_rows {
        let mut row = vec![(0usize, 1.0)];
        let mut t = beta.values[0];
        for f in 0..leaves {
            if rng.gen::<f64>() < p_col {
                row.push((f + 1, 1.0));
                t += beta.values[f + 1];
            }
        }
        let p = crate::loss::sigmoid(t);
        let p_flip = (1.0 - cfg.label_noise) * p + cfg.label_noise * (1.0 - p);
        labels.push((rng.gen::<f64>() < p_flip) as u8);
        rows.push(row);
    }

    Ok((
        Dataset {
            n_cols,
            rows,
            labels,
            column_names: None,
        },
        beta,
    ))
}
