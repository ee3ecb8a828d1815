//! Cross-entropy losses and the regularized risks with analytic gradients.

use serde::{Deserialize, Serialize};

use crate::formulas::RiskWeights;
use crate::graphon::LatentGraph;
use crate::sampler::Subsample;
use crate::{Error, Result};

/// `log(1 + e^y)`, stable for any finite `y`.
#[inline]
pub fn softplus(y: f64) -> f64 {
    if y > 0.0 {
        y + (-y).exp().ln_1p()
    } else {
        y.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}

/// `ℓ(y, x) = −x log σ(y) − (1−x) log(1 − σ(y))`.
#[inline]
pub fn cross_entropy(y: f64, edge: bool) -> f64 {
    if edge {
        softplus(-y)
    } else {
        softplus(y)
    }
}

/// `(ℓ(y, x), ∂ℓ/∂y = σ(y) − x)` sharing one exponential.
#[inline]
pub fn loss_and_slope(y: f64, edge: bool) -> (f64, f64) {
    let e = (-y.abs()).exp();
    let sp_pos = y.max(0.0) + e.ln_1p(); // softplus(y)
    let sig = if y >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
    if edge {
        (sp_pos - y, sig - 1.0)
    } else {
        (sp_pos, sig)
    }
}

/// Row-major `n × d` embedding matrix with box bound `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    n: usize,
    d: usize,
    bound: f64,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn zeros(n: usize, d: usize, bound: f64) -> Self {
        EmbeddingMatrix { n, d, bound, data: vec![0.0; n * d] }
    }

    /// Wraps row-major data; every coordinate must lie in `[−A, A]`.
    pub fn from_vec(n: usize, d: usize, bound: f64, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * d {
            return Err(Error::DimensionMismatch { expected: n * d, got: data.len() });
        }
        if !(bound > 0.0) {
            return Err(Error::InvalidArgument(format!("box bound must be > 0, got {bound}")));
        }
        if let Some(v) = data.iter().find(|v| !(v.abs() <= bound)) {
            return Err(Error::InvalidArgument(format!("coordinate {v} outside [-{bound}, {bound}]")));
        }
        Ok(EmbeddingMatrix { n, d, bound, data })
    }

    /// Unchecked constructor for data already inside the box.
    pub(crate) fn from_raw(n: usize, d: usize, bound: f64, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * d);
        EmbeddingMatrix { n, d, bound, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access; callers must re-establish the box with [`clip`](Self::clip).
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    /// Projects every coordinate onto `[−A, A]`.
    pub fn clip(&mut self) {
        let a = self.bound;
        for v in &mut self.data {
            *v = v.clamp(-a, a);
        }
    }

    #[inline]
    pub fn inner(&self, i: usize, j: usize) -> f64 {
        dot(self.row(i), self.row(j))
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// `(1/n) Σ ‖ω_i‖²`.
    pub fn mean_sq_norm(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.frobenius_sq() / self.n as f64
        }
    }

    /// Number of coordinates within 1% of the box bound.
    pub fn near_bound(&self) -> usize {
        self.data.iter().filter(|v| v.abs() >= 0.99 * self.bound).count()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Pair weights divided by `n²`, vertex weights by `n`.
    #[default]
    PerGraph,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    pub xi: f64,
    #[serde(default)]
    pub normalization: Normalization,
}

impl RiskConfig {
    pub fn new(xi: f64) -> Result<Self> {
        if !(xi >= 0.0) || !xi.is_finite() {
            return Err(Error::InvalidArgument(format!("xi must satisfy xi >= 0, got {xi}")));
        }
        Ok(RiskConfig { xi, normalization: Normalization::PerGraph })
    }
}

/// Loss of a single subsample, with the penalty over the pair endpoints.
pub fn stochastic_loss(emb: &EmbeddingMatrix, s: &Subsample, cfg: &RiskConfig) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; emb.data.len()];
    let v = stochastic_loss_into(emb, s, cfg.xi, &mut grad);
    (v, grad)
}

/// Accumulates the subsample gradient into `grad` and returns the loss.
pub fn stochastic_loss_into(emb: &EmbeddingMatrix, s: &Subsample, xi: f64, grad: &mut [f64]) -> f64 {
    let d = emb.d;
    let mut value = 0.0;
    for (pairs, edge) in [(&s.positives, true), (&s.negatives, false)] {
        for &(i, j) in pairs.iter() {
            let (i, j) = (i as usize, j as usize);
            let (l, slope) = loss_and_slope(emb.inner(i, j), edge);
            value += l;
            axpy(slope, emb.row(j), &mut grad[i * d..(i + 1) * d]);
            axpy(slope, emb.row(i), &mut grad[j * d..(j + 1) * d]);
        }
    }
    if xi > 0.0 {
        let mut touched: Vec<u32> = s
            .positives
            .iter()
            .chain(&s.negatives)
            .flat_map(|&(a, b)| [a, b])
            .collect();
        touched.sort_unstable();
        touched.dedup();
        for i in touched {
            let i = i as usize;
            let row = emb.row(i);
            value += xi * dot(row, row);
            axpy(2.0 * xi, row, &mut grad[i * d..(i + 1) * d]);
        }
    }
    value
}

/// Weighted empirical risk
/// `(1/n²) Σ_{i≠j} f_n(λ_i,λ_j,a_ij) ℓ(⟨ω_i,ω_j⟩, a_ij) + (ξ/n) Σ_i g̃_n(λ_i) ‖ω_i‖²`.
pub fn empirical_risk(
    emb: &EmbeddingMatrix,
    w: &RiskWeights,
    g: &LatentGraph,
    cfg: &RiskConfig,
) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; emb.data.len()];
    let v = empirical_risk_into(emb, w, g, cfg, Some(&mut grad))?;
    Ok((v, grad))
}

/// Value of the empirical risk, writing the gradient into `grad` when given.
pub fn empirical_risk_into(
    emb: &EmbeddingMatrix,
    w: &RiskWeights,
    g: &LatentGraph,
    cfg: &RiskConfig,
    mut grad: Option<&mut [f64]>,
) -> Result<f64> {
    let n = g.n();
    if emb.n != n {
        return Err(Error::DimensionMismatch { expected: n, got: emb.n });
    }
    w.check_graph(g)?;
    let d = emb.d;
    let (pair_scale, vertex_scale) = match cfg.normalization {
        Normalization::PerGraph => (1.0 / (n as f64 * n as f64), 1.0 / n as f64),
        Normalization::Raw => (1.0, 1.0),
    };
    if let Some(gr) = grad.as_deref_mut() {
        if gr.len() != n * d {
            return Err(Error::DimensionMismatch { expected: n * d, got: gr.len() });
        }
        gr.fill(0.0);
    }
    let mut adjacent = vec![false; n];
    let mut value = 0.0;
    for i in 0..n {
        for &v in g.neighbors(i) {
            adjacent[v as usize] = true;
        }
        let wi = emb.row(i);
        let mut row_value = 0.0;
        for j in (i + 1)..n {
            let edge = adjacent[j];
            let f = w.pair_weight(i, j, edge);
            if f == 0.0 {
                continue;
            }
            let wj = emb.row(j);
            let (l, slope) = loss_and_slope(dot(wi, wj), edge);
            row_value += f * l;
            if let Some(gr) = grad.as_deref_mut() {
                // Each unordered pair appears twice in the sum over i ≠ j.
                let c = 2.0 * pair_scale * f * slope;
                let (head, tail) = gr.split_at_mut(j * d);
                axpy(c, wj, &mut head[i * d..(i + 1) * d]);
                axpy(c, wi, &mut tail[..d]);
            }
        }
        value += 2.0 * pair_scale * row_value;
        for &v in g.neighbors(i) {
            adjacent[v as usize] = false;
        }
    }
    if cfg.xi > 0.0 {
        for i in 0..n {
            let row = emb.row(i);
            let c = cfg.xi * vertex_scale * w.vertex_weight(i);
            value += c * dot(row, row);
            if let Some(gr) = grad.as_deref_mut() {
                axpy(2.0 * c, row, &mut gr[i * d..(i + 1) * d]);
            }
        }
    }
    Ok(value)
}
