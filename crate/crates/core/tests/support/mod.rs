//! Oracles for the integration suites, implemented from the definitions
//! rather than through the library's own numerical paths.

#![allow(dead_code)]

/// One penalized group as the oracle sees it: member coordinates and the
/// absolute radial threshold (step size and any weights premultiplied).
#[derive(Debug, Clone)]
pub struct OracleGroup {
    pub cols: Vec<usize>,
    pub threshold: f64,
}

fn group_norm(x: &[f64], cols: &[usize]) -> f64 {
    cols.iter().map(|&c| x[c] * x[c]).sum::<f64>().sqrt()
}

pub fn penalty_sum(x: &[f64], groups: &[OracleGroup]) -> f64 {
    groups
        .iter()
        .map(|g| g.threshold * group_norm(x, &g.cols))
        .sum()
}

/// ½‖x−v‖² + Σ_g c_g‖x_g‖, the quantity the prox minimizes.
pub fn prox_objective(x: &[f64], v: &[f64], groups: &[OracleGroup]) -> f64 {
    let quad: f64 = x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * 0.5;
    quad + penalty_sum(x, groups)
}

fn penalty_subgradient(x: &[f64], groups: &[OracleGroup]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    for grp in groups {
        let n = group_norm(x, &grp.cols);
        if n > 0.0 {
            for &c in &grp.cols {
                g[c] += grp.threshold * x[c] / n;
            }
        }
    }
    g
}

/// Minimize ½‖x−v‖² + Σ_g c_g‖x_g‖ to a certified accuracy: a coarse
/// subgradient-descent pass, then block-coordinate ascent on the dual
/// until the duality gap drops below `certify`. The dual has one vector
/// ξ_g per group constrained to ‖ξ_g‖ ≤ c_g; with s = Σ ξ_g the primal
/// candidate is x(ξ) = v − s and D(ξ) = ⟨s, v⟩ − ½‖s‖². Each block update
/// is an exact constrained maximization (the block Hessian is −I, so the
/// projected unconstrained maximizer is optimal). Panics if the gap
/// cannot be certified, since a silent fallback would invalidate the
/// comparison.
pub fn certified_prox_oracle(v: &[f64], groups: &[OracleGroup], certify: f64) -> (Vec<f64>, f64) {
    let d = v.len();

    let mut x = v.to_vec();
    let mut best_x = x.clone();
    let mut best_p = prox_objective(&x, v, groups);
    for k in 0..2000usize {
        let step = 2.0 / (k as f64 + 2.0);
        let sub = penalty_subgradient(&x, groups);
        for j in 0..d {
            x[j] -= step * ((x[j] - v[j]) + sub[j]);
        }
        let p = prox_objective(&x, v, groups);
        if p < best_p {
            best_p = p;
            best_x = x.clone();
        }
    }

    let mut xi: Vec<Vec<f64>> = groups.iter().map(|g| vec![0.0; g.cols.len()]).collect();
    let mut s = vec![0.0; d];
    let dual_value = |s: &[f64]| -> f64 {
        s.iter().zip(v).map(|(si, vi)| si * vi).sum::<f64>()
            - 0.5 * s.iter().map(|si| si * si).sum::<f64>()
    };

    for iter in 0..2_000_000usize {
        for (g, xi_g) in groups.iter().zip(xi.iter_mut()) {
            let mut norm2 = 0.0;
            for (slot, &c) in xi_g.iter_mut().zip(&g.cols) {
                s[c] -= *slot;
                *slot = v[c] - s[c];
                norm2 += *slot * *slot;
            }
            let norm = norm2.sqrt();
            let scale = if norm > g.threshold {
                g.threshold / norm
            } else {
                1.0
            };
            for (slot, &c) in xi_g.iter_mut().zip(&g.cols) {
                *slot *= scale;
                s[c] += *slot;
            }
        }
        if iter % 8 == 7 {
            let x_dual: Vec<f64> = v.iter().zip(&s).map(|(vi, si)| vi - si).collect();
            let p = prox_objective(&x_dual, v, groups);
            if p < best_p {
                best_p = p;
                best_x = x_dual;
            }
            if best_p - dual_value(&s) <= certify {
                return (best_x, best_p);
            }
        }
    }
    panic!(
        "prox oracle failed to certify a gap of {} (dim {}, {} groups)",
        certify,
        d,
        groups.len()
    );
}

/// Logistic loss Σ log(1 + exp(−ŷ·βᵀx)), written from the definition.
pub fn logistic_loss(beta: &[f64], rows: &[Vec<(usize, f64)>], labels: &[u8]) -> f64 {
    rows.iter()
        .zip(labels)
        .map(|(row, &y)| {
            let t: f64 = row.iter().map(|&(c, v)| beta[c] * v).sum();
            let yt = if y == 1 { t } else { -t };
            (-yt).max(0.0) + (-yt.abs()).exp().ln_1p()
        })
        .sum()
}

fn margin_gradient(margins: &[f64], labels: &[u8], col_rows: &[(usize, f64)]) -> f64 {
    col_rows
        .iter()
        .map(|&(i, v)| {
            let yhat = if labels[i] == 1 { 1.0 } else { -1.0 };
            let z = -yhat * margins[i];
            let sig = if z >= 0.0 {
                1.0 / (1.0 + (-z).exp())
            } else {
                let e = z.exp();
                e / (1.0 + e)
            };
            -yhat * sig * v
        })
        .sum()
}

/// Proximal coordinate descent for l1-penalized logistic regression with
/// the ¼-curvature majorizer; column 0 is the unpenalized intercept.
/// Runs until the objective decrease over a full cycle falls below `tol`
/// relative to the objective. Returns (beta, objective).
pub fn cd_l1_logistic(
    rows: &[Vec<(usize, f64)>],
    labels: &[u8],
    dim: usize,
    lambda: f64,
    tol: f64,
    max_cycles: usize,
) -> (Vec<f64>, f64) {
    let n = rows.len();
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
    for (i, row) in rows.iter().enumerate() {
        for &(c, v) in row {
            by_col[c].push((i, v));
        }
    }
    let curv: Vec<f64> = by_col
        .iter()
        .map(|col| 0.25 * col.iter().map(|&(_, v)| v * v).sum::<f64>())
        .collect();

    let mut beta = vec![0.0; dim];
    let mut margins = vec![0.0; n];
    let objective = |beta: &[f64]| -> f64 {
        logistic_loss(beta, rows, labels) + lambda * beta[1..].iter().map(|b| b.abs()).sum::<f64>()
    };
    let mut obj = objective(&beta);

    for _ in 0..max_cycles {
        for j in 0..dim {
            if by_col[j].is_empty() || curv[j] == 0.0 {
                continue;
            }
            let g = margin_gradient(&margins, labels, &by_col[j]);
            let raw = beta[j] - g / curv[j];
            let new = if j == 0 {
                raw
            } else {
                let thr = lambda / curv[j];
                if raw > thr {
                    raw - thr
                } else if raw < -thr {
                    raw + thr
                } else {
                    0.0
                }
            };
            let delta = new - beta[j];
            if delta != 0.0 {
                beta[j] = new;
                for &(i, v) in &by_col[j] {
                    margins[i] += delta * v;
                }
            }
        }
        let new_obj = objective(&beta);
        let done = obj - new_obj <= tol * obj.abs().max(1.0);
        obj = new_obj;
        if done {
            break;
        }
    }
    (beta, obj)
}

/// AUC by brute-force enumeration of (positive, negative) pairs; ties
/// count one half. Partial sums of halves stay exact in f64.
pub fn auc_pair_oracle(scores: &[f64], labels: &[u8]) -> f64 {
    let mut pairs = 0usize;
    let mut sum = 0.0f64;
    for (i, &sp) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sn) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1;
            if sp > sn {
                sum += 1.0;
            } else if sp == sn {
                sum += 0.5;
            }
        }
    }
    sum / pairs as f64
}

/// One-sided paired sign test: p-value for seeing at least `wins`
/// successes in `wins + losses` fair coin flips. Ties are dropped before
/// calling. Exact binomial tail.
pub fn sign_test_p(wins: usize, losses: usize) -> f64 {
    let m = wins + losses;
    assert!(m <= 62, "exact binomial tail needs m <= 62");
    let mut tail = 0u64;
    for k in wins..=m {
        tail += binomial(m, k);
    }
    tail as f64 / (1u64 << m) as f64
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut num = 1u128;
    let mut den = 1u128;
    for i in 0..k {
        num *= (n - i) as u128;
        den *= (i + 1) as u128;
    }
    (num / den) as u64
}

/// Precision/recall F-score of a recovered support against the true one.
pub fn support_f_score(predicted: &[usize], truth: &[usize]) -> f64 {
    if predicted.is_empty() || truth.is_empty() {
        return 0.0;
    }
    let tp = predicted.iter().filter(|c| truth.contains(c)).count();
    if tp == 0 {
        return 0.0;
    }
    let p = tp as f64 / predicted.len() as f64;
    let r = tp as f64 / truth.len() as f64;
    2.0 * p * r / (p + r)
}
