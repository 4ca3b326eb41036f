//! Sparse logistic regression with hierarchy-aware penalties.
//!
//! Fits L(β) = Σ_i log(1 + exp(-ŷ_i βᵀx_i)) plus one of several sparsity
//! penalties (lasso, ridge, sparse-group lasso, tree-structured group lasso)
//! by accelerated proximal gradient descent. Feature groups come from a
//! taxonomy tree (e.g. ICD-9-CM diagnosis codes), so the tree penalty can
//! zero out whole subtrees at once.
//!
//! ```
//! use hiersparse::hierarchy::parse_hierarchy;
//!
//! let tree = parse_hierarchy("R\t-\troot\nA\tR\tleft\nB\tR\tright\n").unwrap();
//! assert_eq!(tree.depth(), 1);
//! assert_eq!(tree.leaf_count(), 2);
//! ```

pub mod cli;
pub mod data;
pub mod eval;
pub mod hierarchy;
pub mod loss;
pub mod regularizer;
pub mod report;
pub mod solver;

pub use data::{Dataset, SplitSpec, SynthConfig};
pub use hierarchy::{Group, HierarchyTree};
pub use loss::ModelCoefficients;
pub use regularizer::RegularizerSpec;
pub use solver::{FitResult, SolverConfig};
