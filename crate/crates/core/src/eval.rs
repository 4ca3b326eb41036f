//! Classification metrics and the repeated-split experiment harness.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{split, DataError, Dataset, SplitSpec};
use crate::loss::predict_all;
use crate::regularizer::{RegularizerError, RegularizerSpec};
use crate::solver::{fit, SolverConfig, SolverError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("metric needs both classes present")]
    SingleClass,
    #[error("invalid experiment setup: {reason}")]
    BadParam { reason: String },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Regularizer(#[from] RegularizerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    /// None when ranking metrics were not requested or are undefined.
    pub auc: Option<f64>,
    pub roc_points: Vec<(f64, f64)>,
    pub threshold: f64,
    pub confusion: Confusion,
    /// Set when the label vector had no positives, so recall fell back to 0.
    pub no_positives: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub per_run: Vec<MetricsReport>,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub auc_mean: f64,
    pub chosen_lambda: f64,
    pub chosen_alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub lambda: f64,
    pub alpha: f64,
}

pub fn classify_metrics(
    scores: &[f64],
    labels: &[u8],
    threshold: f64,
) -> Result<MetricsReport, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let mut c = Confusion {
        true_pos: 0,
        false_pos: 0,
        true_neg: 0,
        false_neg: 0,
    };
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y == 1) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, false) => c.true_neg += 1,
            (false, true) => c.false_neg += 1,
        }
    }
    let precision = if c.true_pos + c.false_pos > 0 {
        c.true_pos as f64 / (c.true_pos + c.false_pos) as f64
    } else {
        0.0
    };
    let no_positives = c.true_pos + c.false_neg == 0;
    let recall = if no_positives {
        0.0
    } else {
        c.true_pos as f64 / (c.true_pos + c.false_neg) as f64
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(MetricsReport {
        f1,
        precision,
        recall,
        auc: None,
        roc_points: Vec::new(),
        threshold,
        confusion: c,
        no_positives,
    })
}

/// Rows sorted by score descending, grouped by exact score ties:
/// (tied_positives, tied_negatives) per distinct score.
fn tie_groups(scores: &[f64], labels: &[u8]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    let mut groups = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let mut pos = 0;
        let mut neg = 0;
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                pos += 1;
            } else {
                neg += 1;
            }
            i += 1;
        }
        groups.push((pos, neg));
    }
    groups
}

fn class_counts(labels: &[u8]) -> (usize, usize) {
    let p = labels.iter().filter(|&&y| y == 1).count();
    (p, labels.len() - p)
}

/// Mann-Whitney AUC; exact ties count one half. The numerator is kept as
/// an integer count of half-pairs so the result is a single rounding of
/// the underlying rational.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let (p, n) = class_counts(labels);
    if p == 0 || n == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut neg_below = n;
    let mut twice_numer: u64 = 0;
    for (gp, gn) in tie_groups(scores, labels) {
        neg_below -= gn;
        twice_numer += gp as u64 * (2 * neg_below + gn) as u64;
    }
    Ok(twice_numer as f64 / (2 * p * n) as f64)
}

/// Points (fpr, tpr), one per distinct score threshold in descending
/// order, led by (0,0). The final threshold predicts everything positive
/// so the curve always ends at (1,1).
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<(f64, f64)>, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let (p, n) = class_counts(labels);
    if p == 0 || n == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut points = vec![(0.0, 0.0)];
    let mut tp = 0;
    let mut fp = 0;
    for (gp, gn) in tie_groups(scores, labels) {
        tp += gp;
        fp += gn;
        points.push((fp as f64 / n as f64, tp as f64 / p as f64));
    }
    Ok(points)
}

pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) * 0.5)
        .sum()
}

/// classify_metrics plus ranking metrics when both classes are present.
pub fn evaluate(scores: &[f64], labels: &[u8], threshold: f64) -> Result<MetricsReport, EvalError> {
    let mut report = classify_metrics(scores, labels, threshold)?;
    let (p, n) = class_counts(labels);
    if p > 0 && n > 0 {
        report.auc = Some(auc(scores, labels)?);
        report.roc_points = roc_curve(scores, labels)?;
    }
    Ok(report)
}

/// Log-spaced descending grid from `lambda_max` down by `ratio`.
pub fn lambda_grid(lambda_max: f64, points: usize, ratio: f64) -> Vec<f64> {
    if points <= 1 {
        return vec![lambda_max];
    }
    (0..points)
        .map(|i| lambda_max * ratio.powf(i as f64 / (points - 1) as f64))
        .collect()
}

pub const DEFAULT_GRID_POINTS: usize = 20;
pub const DEFAULT_GRID_RATIO: f64 = 1e-3;
pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_CV_FOLDS: usize = 5;

/// Shuffle 0..n with the given seed and cut into k near-equal contiguous
/// folds. Every index lands in exactly one fold.
pub fn cv_folds(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = crate::data::shuffled_indices(n, &mut rng);
    (0..k)
        .map(|f| idx[f * n / k..(f + 1) * n / k].to_vec())
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Lower median of the values each run chose, so the reported number is
/// always an actually-selected grid value.
fn median_choice(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    xs[(xs.len() - 1) / 2]
}

fn cv_choose<F>(
    train: &Dataset,
    grid: &[GridPoint],
    build: &F,
    cfg: &SolverConfig,
    folds: usize,
    threshold: f64,
    seed: u64,
) -> Result<GridPoint, EvalError>
where
    F: Fn(&GridPoint) -> Result<RegularizerSpec, RegularizerError>,
{
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let fold_sets = cv_folds(train.n_rows(), folds, seed);
    let all: Vec<usize> = (0..train.n_rows()).collect();
    let mut best = grid[0];
    let mut best_f1 = f64::NEG_INFINITY;
    for point in grid {
        let spec = build(point)?;
        let mut f1s = Vec::with_capacity(folds);
        for held in &fold_sets {
            debug_assert!(held.iter().all(|i| all.contains(i)));
            let mut in_fold = vec![false; train.n_rows()];
            for &i in held {
                in_fold[i] = true;
            }
            let kept: Vec<usize> = all.iter().copied().filter(|&i| !in_fold[i]).collect();
            if held.is_empty() || kept.is_empty() {
                continue;
            }
            let fit_side = train.subset(&kept);
            let val_side = train.subset(held);
            let fitted = fit(&fit_side, &spec, cfg)?;
            let scores = predict_all(&fitted.beta, &val_side);
            f1s.push(classify_metrics(&scores, val_side.labels(), threshold)?.f1);
        }
        let score = if f1s.is_empty() { 0.0 } else { mean(&f1s) };
        if score > best_f1 {
            best_f1 = score;
            best = *point;
        }
    }
    Ok(best)
}

/// Repeats of: split, pick (λ, α) by k-fold CV on the training side,
/// refit on all of it, score the held-out side. Repeat r splits with
/// seed base + r. Runs repeats in parallel; aggregation order is by
/// repeat index, so results do not depend on thread count.
pub fn repeated_splits<F>(
    ds: &Dataset,
    build: F,
    cfg: &SolverConfig,
    repeats: usize,
    split_spec: &SplitSpec,
    grid: &[GridPoint],
    folds: usize,
    threshold: f64,
) -> Result<ExperimentSummary, EvalError>
where
    F: Fn(&GridPoint) -> Result<RegularizerSpec, RegularizerError> + Sync,
{
    if repeats == 0 {
        return Err(EvalError::BadParam {
            reason: "repeats must be at least 1".into(),
        });
    }
    if grid.is_empty() {
        return Err(EvalError::BadParam {
            reason: "empty (lambda, alpha) grid".into(),
        });
    }
    if folds < 2 && grid.len() > 1 {
        return Err(EvalError::BadParam {
            reason: "cross-validation needs at least 2 folds".into(),
        });
    }

    let runs: Vec<Result<(MetricsReport, GridPoint), EvalError>> = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let per_run_split = SplitSpec {
                seed: split_spec.seed + r as u64,
                ..*split_spec
            };
            let (train, test) = split(ds, &per_run_split)?;
            let choice = cv_choose(
                &train,
                grid,
                &build,
                cfg,
                folds,
                threshold,
                per_run_split.seed,
            )?;
            let spec = build(&choice)?;
            let fitted = fit(&train, &spec, cfg)?;
            let scores = predict_all(&fitted.beta, &test);
            Ok((evaluate(&scores, test.labels(), threshold)?, choice))
        })
        .collect();

    let mut per_run = Vec::with_capacity(repeats);
    let mut choices = Vec::with_capacity(repeats);
    for run in runs {
        let (report, choice) = run?;
        per_run.push(report);
        choices.push(choice);
    }

    let f1s: Vec<f64> = per_run.iter().map(|m| m.f1).collect();
    let aucs: Vec<f64> = per_run.iter().filter_map(|m| m.auc).collect();
    Ok(ExperimentSummary {
        f1_mean: mean(&f1s),
        f1_std: sample_std(&f1s),
        auc_mean: if aucs.is_empty() {
            f64::NAN
        } else {
            mean(&aucs)
        },
        chosen_lambda: median_choice(choices.iter().map(|c| c.lambda).collect()),
        chosen_alpha: median_choice(choices.iter().map(|c| c.alpha).collect()),
        per_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SynthConfig;
    use crate::hierarchy::balanced_tree;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn hand_counted_confusion() {
        let m = classify_metrics(&[0.9, 0.9, 0.1], &[1, 0, 1], 0.5).unwrap();
        assert_eq!(
            m.confusion,
            Confusion {
                true_pos: 1,
                false_pos: 1,
                true_neg: 0,
                false_neg: 1
            }
        );
        assert_eq!(m.precision, 0.5);
        assert_eq!(m.recall, 0.5);
        assert_eq!(m.f1, 0.5);
        assert!(!m.no_positives);
    }

    #[test]
    fn perfect_predictions() {
        let m = classify_metrics(&[0.9, 0.2, 0.8], &[1, 0, 1], 0.5).unwrap();
        assert_eq!(m.f1, 1.0);
    }

    #[test]
    fn degenerate_conventions() {
        // nothing predicted positive, one true positive
        let m = classify_metrics(&[0.1, 0.2], &[1, 0], 0.5).unwrap();
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.f1, 0.0);
        // no positive labels at all
        let m = classify_metrics(&[0.9, 0.2], &[0, 0], 0.5).unwrap();
        assert!(m.no_positives);
        assert_eq!(m.recall, 0.0);

        assert!(matches!(
            classify_metrics(&[0.3], &[1, 0], 0.5),
            Err(EvalError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn auc_anchors() {
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.4, 0.4, 0.4], &[1, 0, 1]).unwrap(), 0.5);
        assert_eq!(auc(&[0.1, 0.9], &[1, 0]).unwrap(), 0.0);
        assert!(matches!(
            auc(&[0.1, 0.9], &[1, 1]),
            Err(EvalError::SingleClass)
        ));
    }

    fn pair_oracle(scores: &[f64], labels: &[u8]) -> f64 {
        let mut total = 0usize;
        let mut sum = 0.0;
        for (i, &sp) in scores.iter().enumerate() {
            if labels[i] != 1 {
                continue;
            }
            for (j, &sn) in scores.iter().enumerate() {
                if labels[j] != 0 {
                    continue;
                }
                total += 1;
                if sp > sn {
                    sum += 1.0;
                } else if sp == sn {
                    sum += 0.5;
                }
            }
        }
        sum / total as f64
    }

    proptest! {
        #[test]
        fn auc_matches_pair_enumeration_exactly(
            n in 2usize..120,
            seed in 0u64..500,
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            // coarse scores force plenty of ties
            let scores: Vec<f64> = (0..n).map(|_| (rng.gen_range(0..7) as f64) / 6.0).collect();
            let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2) as u8).collect();
            labels[0] = 1;
            labels[n - 1] = 0;
            let got = auc(&scores, &labels).unwrap();
            let want = pair_oracle(&scores, &labels);
            prop_assert_eq!(got, want);
        }

        #[test]
        fn roc_trapezoid_equals_auc(
            n in 2usize..100,
            seed in 0u64..300,
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let scores: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2) as u8).collect();
            labels[0] = 1;
            labels[n - 1] = 0;
            let curve = roc_curve(&scores, &labels).unwrap();
            prop_assert!((trapezoid_area(&curve) - auc(&scores, &labels).unwrap()).abs() <= 1e-12);
            for w in curve.windows(2) {
                prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            }
            prop_assert_eq!(curve[0], (0.0, 0.0));
            prop_assert_eq!(*curve.last().unwrap(), (1.0, 1.0));
        }

        #[test]
        fn confusion_counts_rebuild_the_metrics(
            n in 1usize..80,
            seed in 0u64..200,
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let scores: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2) as u8).collect();
            let m = classify_metrics(&scores, &labels, 0.5).unwrap();
            let c = m.confusion;
            prop_assert_eq!(c.true_pos + c.false_pos + c.true_neg + c.false_neg, n);
            let p = if c.true_pos + c.false_pos > 0 {
                c.true_pos as f64 / (c.true_pos + c.false_pos) as f64
            } else { 0.0 };
            let r = if c.true_pos + c.false_neg > 0 {
                c.true_pos as f64 / (c.true_pos + c.false_neg) as f64
            } else { 0.0 };
            let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            prop_assert_eq!(m.precision, p);
            prop_assert_eq!(m.recall, r);
            prop_assert_eq!(m.f1, f1);
        }
    }

    #[test]
    fn roc_anchors() {
        assert_eq!(
            roc_curve(&[0.9, 0.1], &[1, 0]).unwrap(),
            vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
        );
        assert_eq!(
            roc_curve(&[0.5, 0.5], &[1, 0]).unwrap(),
            vec![(0.0, 0.0), (1.0, 1.0)]
        );
    }

    #[test]
    fn grid_shape() {
        let g = lambda_grid(2.0, 20, 1e-3);
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 2.0);
        assert!((g[19] - 2e-3).abs() < 1e-12);
        for w in g.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert_eq!(lambda_grid(2.0, 1, 1e-3), vec![2.0]);
    }

    #[test]
    fn folds_partition_without_overlap() {
        for n in [5usize, 23, 100] {
            for k in [2usize, 5] {
                let folds = cv_folds(n, k, 7);
                let mut seen = vec![false; n];
                for fold in &folds {
                    for &i in fold {
                        assert!(!seen[i], "index {} in two folds", i);
                        seen[i] = true;
                    }
                }
                assert!(seen.iter().all(|&s| s));
                let sizes: Vec<usize> = folds.iter().map(|f| f.len()).collect();
                let min = sizes.iter().min().unwrap();
                let max = sizes.iter().max().unwrap();
                assert!(max - min <= 1);
            }
        }
        assert_eq!(cv_folds(30, 5, 3), cv_folds(30, 5, 3));
    }

    fn synth_for_tests(n_rows: usize, seed: u64) -> Dataset {
        let tree = balanced_tree(&[2, 3]);
        let (ds, _) = crate::data::synth_generate(&SynthConfig {
            tree,
            active_subtrees: vec!["r.00".into()],
            coef_magnitude: 1.5,
            row_density: 2.5,
            n_rows,
            intercept_true: -0.3,
            label_noise: 0.1,
            seed,
        })
        .unwrap();
        ds
    }

    #[test]
    fn single_run_single_lambda_summary_is_that_run() {
        let ds = synth_for_tests(120, 11);
        let split_spec = SplitSpec {
            train_fraction: 0.6,
            seed: 40,
            stratified: false,
        };
        let grid = [GridPoint {
            lambda: 0.5,
            alpha: 0.0,
        }];
        let cfg = SolverConfig::default();
        let summary = repeated_splits(
            &ds,
            |p| RegularizerSpec::l1(p.lambda),
            &cfg,
            1,
            &split_spec,
            &grid,
            DEFAULT_CV_FOLDS,
            0.5,
        )
        .unwrap();
        assert_eq!(summary.per_run.len(), 1);
        assert_eq!(summary.f1_std, 0.0);
        assert_eq!(summary.f1_mean, summary.per_run[0].f1);
        assert_eq!(summary.chosen_lambda, 0.5);

        // replay the run by hand
        let (train, test) = split(&ds, &split_spec).unwrap();
        let fitted = fit(&train, &RegularizerSpec::l1(0.5).unwrap(), &cfg).unwrap();
        let scores = predict_all(&fitted.beta, &test);
        let direct = evaluate(&scores, test.labels(), 0.5).unwrap();
        assert_eq!(summary.per_run[0], direct);
    }

    #[test]
    fn summaries_are_deterministic() {
        let ds = synth_for_tests(100, 12);
        let split_spec = SplitSpec {
            train_fraction: 0.6,
            seed: 3,
            stratified: false,
        };
        let grid: Vec<GridPoint> = lambda_grid(1.0, 3, 1e-2)
            .into_iter()
            .map(|lambda| GridPoint { lambda, alpha: 0.0 })
            .collect();
        let cfg = SolverConfig {
            max_iters: 300,
            ..SolverConfig::default()
        };
        let run = || {
            repeated_splits(
                &ds,
                |p| RegularizerSpec::l1(p.lambda),
                &cfg,
                3,
                &split_spec,
                &grid,
                3,
                0.5,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn experiment_setup_validation() {
        let ds = synth_for_tests(40, 13);
        let split_spec = SplitSpec {
            train_fraction: 0.6,
            seed: 0,
            stratified: false,
        };
        let err = repeated_splits(
            &ds,
            |p| RegularizerSpec::l1(p.lambda),
            &SolverConfig::default(),
            0,
            &split_spec,
            &[GridPoint {
                lambda: 1.0,
                alpha: 0.0,
            }],
            5,
            0.5,
        );
        assert!(matches!(err, Err(EvalError::BadParam { .. })));
        let err = repeated_splits(
            &ds,
            |p| RegularizerSpec::l1(p.lambda),
            &SolverConfig::default(),
            1,
            &split_spec,
            &[],
            5,
            0.5,
        );
        assert!(matches!(err, Err(EvalError::BadParam { .. })));
    }
}
