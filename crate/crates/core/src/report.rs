//! Model interpretation: per-level sparsity tallies and top coefficients.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::{ancestor_chain, HierarchyTree};
use crate::loss::ModelCoefficients;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("coefficient vector has {got} entries but the tree expects at least {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSparsity {
    pub level: usize,
    pub total_nodes: usize,
    pub all_zero_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityByLevel {
    pub per_level: Vec<LevelSparsity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopEntry {
    pub column: usize,
    pub name: String,
    pub coefficient: f64,
    pub group_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopCoefficients {
    pub entries: Vec<TopEntry>,
}

pub fn nonzero_count(beta: &ModelCoefficients) -> usize {
    beta.nonzero_count()
}

/// Per tree level, how many nodes have every descendant-leaf coefficient
/// exactly zero. Leaf column c reads design column c + 1.
pub fn sparsity_by_level(
    beta: &ModelCoefficients,
    tree: &HierarchyTree,
) -> Result<SparsityByLevel, ReportError> {
    let expected = tree.leaf_count() + 1;
    if beta.len() < expected {
        return Err(ReportError::DimensionMismatch {
            expected,
            got: beta.len(),
        });
    }
    let depth = tree.depth();
    let mut per_level: Vec<LevelSparsity> = (0..=depth)
        .map(|level| LevelSparsity {
            level,
            total_nodes: 0,
            all_zero_nodes: 0,
        })
        .collect();
    for node in tree.nodes() {
        let cols = tree
            .leaf_columns_under(&node.id)
            .expect("node ids from the tree itself");
        let zero = cols.iter().all(|&c| beta.values[c + 1] == 0.0);
        per_level[node.level].total_nodes += 1;
        if zero {
            per_level[node.level].all_zero_nodes += 1;
        }
    }
    Ok(SparsityByLevel { per_level })
}

fn level_one_label(tree: &HierarchyTree, column: usize) -> String {
    match ancestor_chain(tree, column) {
        Ok(chain) => chain
            .iter()
            .find(|id| tree.node(id).map_or(false, |n| n.level == 1))
            .or_else(|| chain.iter().rev().nth(1))
            .or_else(|| chain.first())
            .and_then(|id| tree.node(id))
            .map(|n| n.label.clone())
            .unwrap_or_else(|| "(ungrouped)".to_string()),
        Err(_) => "(ungrouped)".to_string(),
    }
}

/// The k largest-magnitude nonzero coefficients (intercept excluded),
/// tied magnitudes ordered by column. Names come from `names` indexed by
/// design column, falling back to the leaf label, then to `col<j>`.
pub fn top_k(
    beta: &ModelCoefficients,
    tree: &HierarchyTree,
    names: &[String],
    k: usize,
) -> TopCoefficients {
    let mut cols: Vec<usize> = (1..beta.len()).filter(|&j| beta.values[j] != 0.0).collect();
    cols.sort_by(|&a, &b| {
        beta.values[b]
            .abs()
            .partial_cmp(&beta.values[a].abs())
            .expect("finite coefficients")
            .then(a.cmp(&b))
    });
    cols.truncate(k);
    let entries = cols
        .into_iter()
        .map(|j| {
            let name = names
                .get(j)
                .filter(|n| !n.is_empty())
                .cloned()
                .or_else(|| {
                    ancestor_chain(tree, j - 1)
                        .ok()
                        .and_then(|chain| chain.last().and_then(|id| tree.node(id)))
                        .map(|n| n.label.clone())
                })
                .unwrap_or_else(|| format!("col{}", j));
            TopEntry {
                column: j,
                name,
                coefficient: beta.values[j],
                group_label: level_one_label(tree, j - 1),
            }
        })
        .collect();
    TopCoefficients { entries }
}

pub fn render_sparsity_text(s: &SparsityByLevel) -> String {
    let mut out = String::from("level  nodes  all-zero\n");
    for row in &s.per_level {
        out.push_str(&format!(
            "{:<5}  {:<5}  {}\n",
            row.level, row.total_nodes, row.all_zero_nodes
        ));
    }
    out
}

pub fn render_top_text(t: &TopCoefficients) -> String {
    let name_w = t
        .entries
        .iter()
        .map(|e| e.name.len())
        .max()
        .unwrap_or(4)
        .max(4);
    let mut out = format!("{:<6} {:<name_w$} {:>12}  group\n", "col", "name", "coef");
    for e in &t.entries {
        out.push_str(&format!(
            "{:<6} {:<name_w$} {:>12.6}  {}\n",
            e.column, e.name, e.coefficient, e.group_label
        ));
    }
    out
}
