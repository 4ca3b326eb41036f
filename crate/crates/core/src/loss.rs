//! Logistic loss, gradient, and probabilities, all in overflow-safe forms.
//!
//! The training loss is the plain sum Σ_i log(1 + exp(-ŷ_i βᵀx_i)) with
//! labels mapped {0,1} → {−1,+1}. No division by N, so penalty strengths
//! are absolute.

use crate::data::Dataset;

/// Dense coefficient vector of length D+1; index 0 is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCoefficients {
    pub values: Vec<f64>,
}

impl ModelCoefficients {
    pub fn zeros(len: usize) -> ModelCoefficients {
        ModelCoefficients {
            values: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Count of exactly-zero-free entries, intercept excluded.
    pub fn nonzero_count(&self) -> usize {
        self.values[1..].iter().filter(|&&v| v != 0.0).count()
    }
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(t)) without overflow: max(t, 0) + log1p(exp(−|t|)).
fn log1p_exp(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn dot(beta: &ModelCoefficients, row: &[(usize, f64)]) -> f64 {
    row.iter().map(|&(c, v)| beta.values[c] * v).sum()
}

fn signed(label: u8) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

/// σ(βᵀx) for one sparse row.
pub fn predict_proba(beta: &ModelCoefficients, row: &[(usize, f64)]) -> f64 {
    sigmoid(dot(beta, row))
}

/// σ(βᵀx) for every row.
pub fn predict_all(beta: &ModelCoefficients, ds: &Dataset) -> Vec<f64> {
    ds.rows().iter().map(|r| predict_proba(beta, r)).collect()
}

/// Σ_i log(1 + exp(−ŷ_i βᵀx_i)), summed in row order.
pub fn loss_value(beta: &ModelCoefficients, ds: &Dataset) -> f64 {
    ds.rows()
        .iter()
        .zip(ds.labels())
        .map(|(row, &y)| log1p_exp(-signed(y) * dot(beta, row)))
        .sum()
}

/// Gradient of [`loss_value`]: Σ_i (−ŷ_i σ(−ŷ_i βᵀx_i)) x_i, accumulated
/// sparsely per row in row order.
pub fn loss_gradient(beta: &ModelCoefficients, ds: &Dataset) -> Vec<f64> {
    let mut g = vec![0.0; beta.len()];
    for (row, &y) in ds.rows().iter().zip(ds.labels()) {
        let yh = signed(y);
        let w = -yh * sigmoid(-yh * dot(beta, row));
        for &(c, v) in row {
            g[c] += w * v;
        }
    }
    g
}
