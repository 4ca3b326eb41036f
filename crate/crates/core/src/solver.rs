//! Accelerated proximal gradient (FISTA) with backtracking line search.
//!
//! The smooth part is the logistic loss (plus the ridge term when the
//! penalty kind is l2); everything else enters through its prox. Adaptive
//! function-value restart keeps the objective trace nonincreasing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::hierarchy::Group;
use crate::loss::{loss_gradient, loss_value, ModelCoefficients};
use crate::regularizer::{
    apply_prox, penalty_value, prox_group, PenaltyKind, RegularizerError, RegularizerSpec,
};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("objective became non-finite at iteration {iteration} (step size {step:e})")]
    NonFinite { iteration: usize, step: f64 },
    #[error(transparent)]
    Regularizer(#[from] RegularizerError),
    #[error("invalid solver config: {reason}")]
    BadConfig { reason: String },
    #[error("cannot fit an empty dataset")]
    EmptyDataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop when the relative objective decrease falls below this.
    pub tol: f64,
    pub backtrack_eta: f64,
    pub init_step: f64,
    /// Function-value adaptive restart.
    pub restart: bool,
    /// Unused; kept so configs round-trip through manifests unchanged.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> SolverConfig {
        SolverConfig {
            max_iters: 2000,
            tol: 1e-7,
            backtrack_eta: 0.5,
            init_step: 1.0,
            restart: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta: ModelCoefficients,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub nonzero_count: usize,
}

/// loss + penalty; the single number the solver drives down.
pub fn objective(ds: &Dataset, spec: &RegularizerSpec, beta: &ModelCoefficients) -> f64 {
    loss_value(beta, ds) + penalty_value(spec, beta).expect("spec matches beta dimension")
}

struct Smooth<'a> {
    ds: &'a Dataset,
    /// ridge coefficient; nonzero only for kind l2
    ridge: f64,
}

impl Smooth<'_> {
    fn value(&self, beta: &ModelCoefficients) -> f64 {
        let mut v = loss_value(beta, self.ds);
        if self.ridge > 0.0 {
            v += self.ridge * beta.values[1..].iter().map(|b| b * b).sum::<f64>();
        }
        v
    }

    fn gradient(&self, beta: &ModelCoefficients) -> Vec<f64> {
        let mut g = loss_gradient(beta, self.ds);
        if self.ridge > 0.0 {
            for (gj, bj) in g.iter_mut().zip(&beta.values).skip(1) {
                *gj += 2.0 * self.ridge * bj;
            }
        }
        g
    }
}

fn nonsmooth(spec: &RegularizerSpec, beta: &ModelCoefficients) -> f64 {
    match spec.kind {
        PenaltyKind::None | PenaltyKind::L2 => 0.0,
        _ => penalty_value(spec, beta).expect("dimensions checked at fit start"),
    }
}

/// One prox-gradient step from `y` with backtracking on the quadratic
/// model of the smooth part. Returns the new point, its smooth value, and
/// the accepted step size.
fn backtracking_step(
    smooth: &Smooth,
    spec: &RegularizerSpec,
    y: &ModelCoefficients,
    f_y: f64,
    g_y: &[f64],
    mut t: f64,
    eta: f64,
    iteration: usize,
) -> Result<(ModelCoefficients, f64, f64), SolverError> {
    loop {
        let mut x = ModelCoefficients {
            values: y
                .values
                .iter()
                .zip(g_y)
                .map(|(yj, gj)| yj - t * gj)
                .collect(),
        };
        apply_prox(spec, &mut x.values, t)?;
        let f_x = smooth.value(&x);
        if f_x.is_finite() {
            let mut lin = 0.0;
            let mut quad = 0.0;
            for ((xj, yj), gj) in x.values.iter().zip(&y.values).zip(g_y) {
                let d = xj - yj;
                lin += gj * d;
                quad += d * d;
            }
            if f_x <= f_y + lin + quad / (2.0 * t) + 1e-14 * f_y.abs().max(1.0) {
                return Ok((x, f_x, t));
            }
        }
        t *= eta;
        if t < 1e-30 {
            return Err(SolverError::NonFinite { iteration, step: t });
        }
    }
}

/// Minimize loss + penalty by FISTA from β = 0.
///
/// Stops when the relative objective decrease falls below `tol` or at
/// `max_iters`. Problems without a finite minimizer (separable data with
/// no penalty) drive the coefficients outward until no objective
/// decrease is representable in f64; the run then reports `converged` at
/// that numerical fixed point unless `max_iters` cuts it off first.
pub fn fit(
    ds: &Dataset,
    spec: &RegularizerSpec,
    cfg: &SolverConfig,
) -> Result<FitResult, SolverError> {
    if ds.n_rows() == 0 {
        return Err(SolverError::EmptyDataset);
    }
    if !(cfg.backtrack_eta > 0.0 && cfg.backtrack_eta < 1.0) {
        return Err(SolverError::BadConfig {
            reason: format!("backtrack_eta must lie in (0,1), got {}", cfg.backtrack_eta),
        });
    }
    if !(cfg.tol > 0.0) {
        return Err(SolverError::BadConfig {
            reason: format!("tol must be positive, got {}", cfg.tol),
        });
    }
    spec.check_dims(ds.n_cols())?;

    let smooth = Smooth {
        ds,
        ridge: if spec.kind == PenaltyKind::L2 {
            spec.lambda
        } else {
            0.0
        },
    };

    let mut x = ModelCoefficients::zeros(ds.n_cols());
    let mut x_prev = x.clone();
    let mut y = x.clone();
    let mut theta = 1.0f64;
    let mut t = cfg.init_step;

    let mut f_full = smooth.value(&x) + nonsmooth(spec, &x);
    let mut trace = vec![f_full];
    let mut iterations = 0;
    let mut converged = false;

    for k in 0..cfg.max_iters {
        let f_y = smooth.value(&y);
        let g_y = smooth.gradient(&y);
        let (mut x_new, mut f_smooth_new, t_used) =
            backtracking_step(&smooth, spec, &y, f_y, &g_y, t, cfg.backtrack_eta, k)?;
        t = t_used;
        let mut f_new = f_smooth_new + nonsmooth(spec, &x_new);

        if cfg.restart && f_new > f_full {
            // momentum overshot: forget it and step from the current
            // iterate, which backtracking guarantees is a descent step
            theta = 1.0;
            y = x.clone();
            let f_y = smooth.value(&y);
            let g_y = smooth.gradient(&y);
            let stepped = backtracking_step(&smooth, spec, &y, f_y, &g_y, t, cfg.backtrack_eta, k)?;
            x_new = stepped.0;
            f_smooth_new = stepped.1;
            t = stepped.2;
            f_new = f_smooth_new + nonsmooth(spec, &x_new);
        }
        if !f_new.is_finite() {
            return Err(SolverError::NonFinite {
                iteration: k,
                step: t,
            });
        }

        let decrease = f_full - f_new;
        trace.push(f_new);
        iterations = k + 1;

        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let momentum = (theta - 1.0) / theta_next;
        y = ModelCoefficients {
            values: x_new
                .values
                .iter()
                .zip(&x_prev.values)
                .map(|(xn, xp)| xn + momentum * (xn - xp))
                .collect(),
        };
        x_prev = x;
        x = x_new;
        theta = theta_next;
        f_full = f_new;

        if decrease >= 0.0 && decrease < cfg.tol * f_full.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    let nonzero_count = x.nonzero_count();
    Ok(FitResult {
        beta: x,
        objective_trace: trace,
        iterations,
        converged,
        nonzero_count,
    })
}

/// Intercept of the feature-free model: logit of the positive rate.
pub fn optimal_intercept(ds: &Dataset) -> f64 {
    let p = ds.positive_rate();
    (p / (1.0 - p)).ln()
}

/// Smallest penalty strength at which the intercept-only model satisfies
/// the penalty's optimality conditions, so any λ ≥ lambda_max fits an
/// all-zero coefficient vector and any λ below it does not. Exact for
/// every kind; kinds without a nulling strength (none, l2) give infinity.
pub fn lambda_max(ds: &Dataset, spec: &RegularizerSpec) -> f64 {
    match spec.kind {
        PenaltyKind::None | PenaltyKind::L2 => return f64::INFINITY,
        _ => {}
    }
    let mut beta = ModelCoefficients::zeros(ds.n_cols());
    beta.values[0] = optimal_intercept(ds);
    let g = loss_gradient(&beta, ds);

    match spec.kind {
        PenaltyKind::L1 => g[1..].iter().fold(0.0, |m, v| v.abs().max(m)),
        PenaltyKind::Sgl => {
            let alpha = spec.alpha;
            let mut lam: f64 = 0.0;
            let mut grouped = vec![false; ds.n_cols()];
            for grp in &spec.groups {
                for &c in &grp.member_columns {
                    grouped[c] = true;
                }
                let g_grp: Vec<f64> = grp.member_columns.iter().map(|&c| g[c]).collect();
                lam = lam.max(sgl_group_null_lambda(&g_grp, alpha, grp.weight));
            }
            for c in 1..ds.n_cols() {
                if !grouped[c] && g[c] != 0.0 {
                    // column sees only the l1 share
                    lam = if alpha > 0.0 {
                        lam.max(g[c].abs() / alpha)
                    } else {
                        f64::INFINITY
                    };
                }
            }
            lam
        }
        PenaltyKind::Tsgl => {
            use crate::regularizer::TreeNormVariant;
            match spec.tree_norm_variant {
                TreeNormVariant::GroupL1 => {
                    let mut col_weight = vec![0.0; ds.n_cols()];
                    for grp in &spec.groups {
                        for &c in &grp.member_columns {
                            col_weight[c] += grp.weight;
                        }
                    }
                    (1..ds.n_cols())
                        .filter(|&c| col_weight[c] > 0.0)
                        .fold(0.0, |m: f64, c| m.max(g[c].abs() / col_weight[c]))
                }
                TreeNormVariant::GroupL2 => {
                    let mut best = vec![(usize::MAX, 0.0f64); ds.n_cols()];
                    for grp in &spec.groups {
                        let size = grp.member_columns.len();
                        for &c in &grp.member_columns {
                            if size < best[c].0 {
                                best[c] = (size, grp.weight);
                            }
                        }
                    }
                    let anchor = (1..ds.n_cols())
                        .filter(|&c| best[c].0 != usize::MAX)
                        .fold(0.0, |m: f64, c| m.max(g[c].abs() / best[c].1));
                    tree_l2_null_lambda(&g, &spec.groups, anchor)
                }
            }
        }
        _ => unreachable!(),
    }
}

/// Smallest λ with ‖soft_threshold(g_G, λα)‖₂ ≤ λ(1−α)w: the KKT
/// condition for a zeroed sgl group at the null model.
fn sgl_group_null_lambda(g: &[f64], alpha: f64, w: f64) -> f64 {
    let norm = |lam: f64| -> f64 {
        g.iter()
            .map(|&v| {
                let s = v.abs() - lam * alpha;
                if s > 0.0 {
                    s * s
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            .sqrt()
    };
    let g_max = g.iter().fold(0.0f64, |m, v| v.abs().max(m));
    let g_norm = norm(0.0);
    if alpha >= 1.0 {
        return g_max;
    }
    if alpha == 0.0 {
        return g_norm / w;
    }
    let mut lo = 0.0f64;
    let mut hi = (g_max / alpha).max(g_norm / ((1.0 - alpha) * w));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm(mid) <= mid * (1.0 - alpha) * w {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Smallest λ whose nested block soft-threshold chain zeroes the null-model
/// gradient. The all-zero fit is optimal exactly when prox_{λΩ}(∇) = 0, and
/// the chain output shrinks monotonically with λ, so bisection pins the
/// critical value. `anchor` is the per-column bound, a valid upper bracket
/// whenever the leaf singletons are present (they threshold first).
fn tree_l2_null_lambda(g: &[f64], groups: &[Group], anchor: f64) -> f64 {
    let dead = |lam: f64| -> bool {
        let mut v = g.to_vec();
        v[0] = 0.0;
        for grp in groups {
            prox_group(&mut v, grp, lam);
        }
        v.iter().all(|&x| x == 0.0)
    };
    if anchor <= 0.0 || dead(0.0) {
        return 0.0;
    }
    let mut hi = anchor;
    while !dead(hi) {
        hi *= 2.0;
    }
    let mut lo = 0.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dead(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
