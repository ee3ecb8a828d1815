//! Minimizers for the regularized losses.
//!
//! [`train_full`] runs box-projected spectral gradient descent on the weighted empirical
//! risk; [`train_sgd`] runs Adam over freshly drawn subsamples.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::formulas::RiskWeights;
use crate::graphon::LatentGraph;
use crate::risk::{empirical_risk_into, stochastic_loss_into, EmbeddingMatrix, RiskConfig};
use crate::rng::{self, domain};
use crate::sampler::{Sampler, SchemeConfig};
use crate::{Error, Result};

pub const DEFAULT_BOUND: f64 = 10.0;
pub const DEFAULT_ADAM_LR: f64 = 1e-3;
const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Optimizer {
    /// `lr` is the initial step; later steps follow Barzilai–Borwein with backtracking.
    ProjectedGradient {
        #[serde(default = "one")]
        lr: f64,
        #[serde(default = "default_max_iters")]
        max_iters: usize,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_patience")]
        patience: usize,
    },
    Adam {
        #[serde(default = "default_adam_lr")]
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default = "default_epochs")]
        epochs: usize,
        #[serde(default = "default_batch")]
        batch: usize,
    },
}

fn one() -> f64 {
    1.0
}
fn default_max_iters() -> usize {
    20_000
}
fn default_tol() -> f64 {
    1e-9
}
fn default_patience() -> usize {
    10
}
fn default_adam_lr() -> f64 {
    DEFAULT_ADAM_LR
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_epochs() -> usize {
    5
}
fn default_batch() -> usize {
    64
}

impl Optimizer {
    pub fn projected_gradient() -> Self {
        Optimizer::ProjectedGradient {
            lr: one(),
            max_iters: default_max_iters(),
            tol: default_tol(),
            patience: default_patience(),
        }
    }

    pub fn adam() -> Self {
        Optimizer::Adam {
            lr: DEFAULT_ADAM_LR,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            epochs: default_epochs(),
            batch: default_batch(),
        }
    }

    fn lr(&self) -> f64 {
        match *self {
            Optimizer::ProjectedGradient { lr, .. } | Optimizer::Adam { lr, .. } => lr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Init {
    /// I.i.d. `N(0, σ₀²)` coordinates; `σ₀` defaults to `0.1/√d`.
    GaussianScaled {
        #[serde(default)]
        sigma: Option<f64>,
    },
    Zero,
}

impl Default for Init {
    fn default() -> Self {
        Init::GaussianScaled { sigma: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub d: usize,
    #[serde(default = "default_bound")]
    pub bound: f64,
    #[serde(default)]
    pub xi: f64,
    pub optimizer: Optimizer,
    #[serde(default)]
    pub init: Init,
    pub seed: u64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

fn default_bound() -> f64 {
    DEFAULT_BOUND
}
fn default_restarts() -> usize {
    3
}

impl TrainConfig {
    /// Projected-gradient defaults: `A = 10`, three restarts.
    pub fn full(d: usize, xi: f64, seed: u64) -> Self {
        TrainConfig {
            d,
            bound: DEFAULT_BOUND,
            xi,
            optimizer: Optimizer::projected_gradient(),
            init: Init::default(),
            seed,
            restarts: default_restarts(),
        }
    }

    /// Adam defaults: `lr = 1e−3`, 5 epochs, batches of 64 subsamples.
    pub fn sgd(d: usize, xi: f64, seed: u64) -> Self {
        TrainConfig { optimizer: Optimizer::adam(), restarts: 1, ..Self::full(d, xi, seed) }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.d < 1 {
            problems.push("d must satisfy d >= 1".to_string());
        }
        if !(self.bound > 0.0) || !self.bound.is_finite() {
            problems.push(format!("box bound A must be > 0, got {}", self.bound));
        }
        if !(self.xi >= 0.0) || !self.xi.is_finite() {
            problems.push(format!("xi must satisfy xi >= 0, got {}", self.xi));
        }
        if !(self.optimizer.lr() > 0.0) {
            problems.push(format!("lr must be > 0, got {}", self.optimizer.lr()));
        }
        match self.optimizer {
            Optimizer::ProjectedGradient { tol, patience, .. } => {
                if !(tol >= 0.0) || patience == 0 {
                    problems.push("tol must be >= 0 and patience >= 1".to_string());
                }
            }
            Optimizer::Adam { beta1, beta2, eps, batch, .. } => {
                if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) || batch == 0 {
                    problems.push("adam needs 0 <= beta < 1, eps > 0, batch >= 1".to_string());
                }
            }
        }
        if let Init::GaussianScaled { sigma: Some(s) } = self.init {
            if !(s >= 0.0) {
                problems.push(format!("init sigma must be >= 0, got {s}"));
            }
        }
        match problems.len() {
            0 => Ok(()),
            1 => Err(Error::InvalidArgument(problems.remove(0))),
            _ => Err(Error::Validation(problems)),
        }
    }

    fn risk(&self) -> Result<RiskConfig> {
        RiskConfig::new(self.xi)
    }
}

/// Initial embeddings for restart `restart`.
pub fn initial_embedding(n: usize, cfg: &TrainConfig, restart: u64) -> EmbeddingMatrix {
    let mut emb = EmbeddingMatrix::zeros(n, cfg.d, cfg.bound);
    if let Init::GaussianScaled { sigma } = cfg.init {
        let s = sigma.unwrap_or(0.1 / (cfg.d as f64).sqrt());
        let mut r = rng::stream(cfg.seed, domain::INIT, restart);
        for v in emb.as_mut_slice() {
            *v = s * r.sample::<f64, _>(StandardNormal);
        }
        emb.clip();
    }
    emb
}

#[derive(Debug, Clone)]
pub struct FullTrainResult {
    pub embedding: EmbeddingMatrix,
    /// Objective after every accepted step, starting from the initial point.
    pub trace: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Restart index that produced the returned embedding.
    pub restart: usize,
}

/// Minimizes the weighted empirical risk over `([−A, A]^d)^n`, keeping the best of `restarts` runs.
pub fn train_full(g: &LatentGraph, w: &RiskWeights, cfg: &TrainConfig) -> Result<FullTrainResult> {
    cfg.validate()?;
    w.check_graph(g)?;
    let runs = if matches!(cfg.init, Init::Zero) { 1 } else { cfg.restarts.max(1) };
    let mut best: Option<FullTrainResult> = None;
    for r in 0..runs {
        let start = initial_embedding(g.n(), cfg, r as u64);
        let mut out = train_full_from(g, w, cfg, start)?;
        out.restart = r;
        if best.as_ref().is_none_or(|b| out.objective < b.objective) {
            best = Some(out);
        }
    }
    Ok(best.expect("at least one run"))
}

/// Single projected-gradient run from `start` (used for warm starts).
pub fn train_full_from(
    g: &LatentGraph,
    w: &RiskWeights,
    cfg: &TrainConfig,
    start: EmbeddingMatrix,
) -> Result<FullTrainResult> {
    cfg.validate()?;
    let Optimizer::ProjectedGradient { lr, max_iters, tol, patience } = cfg.optimizer else {
        return Err(Error::InvalidArgument("train_full needs the projected-gradient optimizer".into()));
    };
    if start.n() != g.n() || start.d() != cfg.d {
        return Err(Error::DimensionMismatch { expected: g.n() * cfg.d, got: start.n() * start.d() });
    }
    let risk = cfg.risk()?;
    let (n, d, bound) = (g.n(), cfg.d, cfg.bound);
    let params = SpgParams { lr, max_iters, tol, patience, bound };
    let out = spg(start.as_slice().to_vec(), &params, |x, grad| {
        let emb = EmbeddingMatrix::from_raw(n, d, bound, x.to_vec());
        empirical_risk_into(&emb, w, g, &risk, Some(grad))
    })?;
    Ok(FullTrainResult {
        embedding: EmbeddingMatrix::from_raw(n, d, bound, out.x),
        trace: out.trace,
        objective: out.value,
        converged: out.converged,
        iterations: out.iterations,
        restart: 0,
    })
}

pub(crate) struct SpgParams {
    pub lr: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub patience: usize,
    pub bound: f64,
}

pub(crate) struct SpgOutcome {
    pub x: Vec<f64>,
    pub trace: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Box-projected gradient with Barzilai–Borwein steps and monotone Armijo backtracking.
pub(crate) fn spg<F>(x0: Vec<f64>, p: &SpgParams, mut eval: F) -> Result<SpgOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    let bound = p.bound;
    let mut x: Vec<f64> = x0.into_iter().map(|v| v.clamp(-bound, bound)).collect();
    let len = x.len();
    let mut grad = vec![0.0; len];
    let mut f = eval(&x, &mut grad)?;
    if !f.is_finite() {
        return Err(Error::NonFinite { backtracks: 0 });
    }
    let mut trace = vec![f];
    let mut step = p.lr;
    let mut calm = 0;
    let mut converged = false;
    let mut iterations = 0;
    let mut trial = x.clone();
    let mut trial_grad = vec![0.0; len];

    while iterations < p.max_iters {
        iterations += 1;
        let mut t = step;
        let mut accepted = None;
        let mut last_finite = true;
        let mut stationary = false;
        for _ in 0..=MAX_BACKTRACKS {
            let mut decrease = 0.0;
            for ((y, &xv), &gv) in trial.iter_mut().zip(&x).zip(&grad) {
                *y = (xv - t * gv).clamp(-bound, bound);
                decrease += gv * (xv - *y);
            }
            if decrease <= 0.0 {
                stationary = true;
                break;
            }
            let ft = eval(&trial, &mut trial_grad)?;
            last_finite = ft.is_finite();
            if last_finite && ft <= f - 1e-4 * decrease {
                accepted = Some(ft);
                break;
            }
            t *= 0.5;
        }
        let Some(ft) = accepted else {
            if !stationary && !last_finite {
                return Err(Error::NonFinite { backtracks: MAX_BACKTRACKS });
            }
            // No representable descent left.
            converged = true;
            break;
        };
        let (mut ss, mut sy) = (0.0, 0.0);
        for k in 0..len {
            let s = trial[k] - x[k];
            ss += s * s;
            sy += s * (trial_grad[k] - grad[k]);
        }
        step = if sy > 0.0 { ss / sy } else { 2.0 * t };
        step = step.clamp(1e-12, 1e12);
        let rel = (f - ft) / ft.abs().max(1e-300);
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut grad, &mut trial_grad);
        f = ft;
        trace.push(f);
        calm = if rel < p.tol { calm + 1 } else { 0 };
        if calm >= p.patience {
            converged = true;
            break;
        }
    }
    Ok(SpgOutcome { x, trace, value: f, converged, iterations })
}

/// Adam over stochastic losses of freshly drawn subsamples, `runs_per_epoch` per epoch.
pub fn train_sgd(g: &LatentGraph, scheme: &SchemeConfig, cfg: &TrainConfig, runs_per_epoch: usize) -> Result<EmbeddingMatrix> {
    cfg.validate()?;
    scheme.validate_for(g)?;
    let Optimizer::Adam { lr, beta1, beta2, eps, epochs, batch } = cfg.optimizer else {
        return Err(Error::InvalidArgument("train_sgd needs the adam optimizer".into()));
    };
    let mut sampler = Sampler::new(g, scheme, rng::child_seed(cfg.seed, domain::UNIGRAM, 0))?;
    let mut emb = initial_embedding(g.n(), cfg, 0);
    let len = emb.as_slice().len();
    let mut grad = vec![0.0; len];
    let mut m = vec![0.0; len];
    let mut v = vec![0.0; len];
    let mut step = 0i32;
    for epoch in 0..epochs {
        let mut r = rng::stream(cfg.seed, domain::SGD, epoch as u64);
        let mut pending = 0;
        for run in 0..runs_per_epoch {
            let s = sampler.draw(&mut r);
            stochastic_loss_into(&emb, &s, cfg.xi, &mut grad);
            pending += 1;
            if pending == batch || run + 1 == runs_per_epoch {
                step += 1;
                let (c1, c2) = (1.0 - beta1.powi(step), 1.0 - beta2.powi(step));
                for (k, x) in emb.as_mut_slice().iter_mut().enumerate() {
                    let gk = grad[k];
                    m[k] = beta1 * m[k] + (1.0 - beta1) * gk;
                    v[k] = beta2 * v[k] + (1.0 - beta2) * gk * gk;
                    *x -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
                }
                emb.clip();
                grad.fill(0.0);
                pending = 0;
            }
        }
    }
    if emb.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { backtracks: 0 });
    }
    Ok(emb)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramSpectrum {
    /// `‖Ω‖_F² = trace(ΩᵀΩ)`.
    pub trace: f64,
    /// Singular values of `Ω`, descending; their squares are the nonzero gram eigenvalues.
    pub singular_values: Vec<f64>,
    /// `|Σσ² − ‖Ω‖_F²| / max(‖Ω‖_F², 1)`.
    pub discrepancy: f64,
}

pub fn gram_spectrum(emb: &EmbeddingMatrix) -> GramSpectrum {
    let trace = emb.frobenius_sq();
    let mut singular_values: Vec<f64> = if emb.n() == 0 {
        vec![0.0; emb.d()]
    } else {
        let omega = DMatrix::from_row_slice(emb.n(), emb.d(), emb.as_slice());
        omega.singular_values().iter().copied().collect()
    };
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let ssq: f64 = singular_values.iter().map(|s| s * s).sum();
    let discrepancy = (ssq - trace).abs() / trace.max(1.0);
    GramSpectrum { trace, singular_values, discrepancy }
}

/// Full `n × n` gram matrix `ΩΩᵀ`.
pub fn gram_matrix(emb: &EmbeddingMatrix) -> DMatrix<f64> {
    let omega = DMatrix::from_row_slice(emb.n(), emb.d(), emb.as_slice());
    &omega * omega.transpose()
}

/// Writes `id,dim0,..,dim{d−1}` rows.
pub fn write_embedding_csv(emb: &EmbeddingMatrix, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(embedding_csv(emb).as_bytes())?;
    out.flush()?;
    Ok(())
}

pub fn embedding_csv(emb: &EmbeddingMatrix) -> String {
    let mut s = String::from("id");
    for k in 0..emb.d() {
        s.push_str(&format!(",dim{k}"));
    }
    s.push('\n');
    for i in 0..emb.n() {
        s.push_str(&i.to_string());
        for v in emb.row(i) {
            s.push(',');
            s.push_str(&v.to_string());
        }
        s.push('\n');
    }
    s
}

pub fn read_embedding_csv(path: &Path, bound: f64) -> Result<EmbeddingMatrix> {
    let reader = BufReader::new(File::open(path)?);
    // Lines starting with '#' are comments.
    let mut lines = reader.lines().enumerate().filter(|(_, l)| !matches!(l, Ok(t) if t.starts_with('#')));
    let (hidx, header) = lines.next().ok_or(Error::Parse { line: 1, message: "empty file".into() })?;
    let header = header?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.first() != Some(&"id") || cols[1..].iter().enumerate().any(|(k, c)| *c != format!("dim{k}")) {
        return Err(Error::Parse { line: hidx + 1, message: format!("bad header {header:?}") });
    }
    let d = cols.len() - 1;
    let mut data = Vec::new();
    let mut n = 0;
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != d + 1 || fields[0].parse::<usize>().ok() != Some(n) {
            return Err(Error::Parse { line: lineno, message: format!("expected id {n} and {d} values") });
        }
        for f in &fields[1..] {
            data.push(f.parse::<f64>().map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?);
        }
        n += 1;
    }
    EmbeddingMatrix::from_vec(n, d, bound, data)
}

const MAGIC: &[u8; 5] = b"GEMB1";

/// `GEMB1`, little-endian `u64 n`, `u64 d`, then `n·d` row-major `f64`.
pub fn write_embedding_binary(emb: &EmbeddingMatrix, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&(emb.n() as u64).to_le_bytes())?;
    out.write_all(&(emb.d() as u64).to_le_bytes())?;
    for v in emb.as_slice() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_embedding_binary(path: &Path, bound: f64) -> Result<EmbeddingMatrix> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |m: &str| Error::Parse { line: 0, message: m.to_string() };
    if bytes.len() < 21 || &bytes[..5] != MAGIC {
        return Err(bad("missing GEMB1 header"));
    }
    let n = u64::from_le_bytes(bytes[5..13].try_into().unwrap()) as usize;
    let d = u64::from_le_bytes(bytes[13..21].try_into().unwrap()) as usize;
    let body = &bytes[21..];
    if n.checked_mul(d).and_then(|c| c.checked_mul(8)) != Some(body.len()) {
        return Err(bad("payload length does not match n*d"));
    }
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    EmbeddingMatrix::from_vec(n, d, bound, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulas::weights_uniform_vertex;
    use crate::graphon::{sample_graph, GraphonSpec};
    use crate::risk::{cross_entropy, empirical_risk};

    fn mean_offdiag_gram(emb: &EmbeddingMatrix) -> (f64, f64) {
        let n = emb.n();
        let (mut s, mut a) = (0.0, 0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = emb.inner(i, j);
                s += v;
                a += v.abs();
            }
        }
        let m = (n * (n - 1) / 2) as f64;
        (s / m, a / m)
    }

    #[test]
    fn trace_is_monotone_and_box_respected() {
        let spec = GraphonSpec::smooth_product(0.2, 0.6).unwrap();
        let g = sample_graph(&spec, 60, 1).unwrap();
        let w = crate::formulas::formula_weights(&spec, &SchemeConfig::random_walk(5, 2, 1.0), &g).unwrap();
        let mut cfg = TrainConfig::full(3, 0.05, 2);
        cfg.bound = 0.5;
        cfg.restarts = 2;
        let out = train_full(&g, &w, &cfg).unwrap();
        assert!(out.trace.windows(2).all(|p| p[1] <= p[0]));
        assert!(out.embedding.as_slice().iter().all(|v| v.abs() <= 0.5));
        assert!(out.converged);
    }

    #[test]
    fn huge_penalty_shrinks_to_zero() {
        let spec = GraphonSpec::constant(0.6).unwrap();
        let g = sample_graph(&spec, 40, 3).unwrap();
        let w = weights_uniform_vertex(5);
        let cfg = TrainConfig::full(2, 1e3, 4);
        let out = train_full(&g, &w, &cfg).unwrap();
        let zero = empirical_risk(&EmbeddingMatrix::zeros(40, 2, 10.0), &w, &g, &RiskConfig::new(1e3).unwrap()).unwrap().0;
        assert!(out.embedding.mean_sq_norm() <= zero / 1e3);
        assert!(out.embedding.as_slice().iter().all(|v| v.abs() < 1e-3));
    }

    #[test]
    fn two_vertex_instance_matches_grid_search() {
        let g = LatentGraph::from_edges(2, [(0, 1)], Some(vec![0.3, 0.7]), 1.0).unwrap();
        let w = weights_uniform_vertex(2);
        let xi = 0.3;
        let mut cfg = TrainConfig::full(1, xi, 5);
        cfg.bound = 3.0;
        let out = train_full(&g, &w, &cfg).unwrap();
        // Symmetric solutions ω₁ = t, ω₂ = ±t: value (2·2/4)·ℓ(±t², 1) + (ξ/2)·2·2t².
        let value = |t: f64, sign: f64| cross_entropy(sign * t * t, true) + 2.0 * xi * t * t;
        let mut best = f64::INFINITY;
        let mut arg = 0.0;
        for k in 0..=300_000 {
            let t = 3.0 * k as f64 / 300_000.0;
            for sign in [1.0, -1.0] {
                let v = value(t, sign);
                if v < best {
                    best = v;
                    arg = t;
                }
            }
        }
        let (mut lo, mut hi) = ((arg - 1e-4).max(0.0), (arg + 1e-4).min(3.0));
        for _ in 0..100 {
            let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
            if value(m1, 1.0) < value(m2, 1.0) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        best = best.min(value(0.5 * (lo + hi), 1.0));
        assert!((out.objective - best).abs() <= 1e-6, "{} vs {best}", out.objective);
    }

    #[test]
    fn zero_init_reaches_zero_logits_for_half_density() {
        let g = sample_graph(&GraphonSpec::constant(0.5).unwrap(), 80, 6).unwrap();
        let w = weights_uniform_vertex(4);
        let mut cfg = TrainConfig::full(2, 0.0, 7);
        cfg.init = Init::Zero;
        let out = train_full(&g, &w, &cfg).unwrap();
        assert!(mean_offdiag_gram(&out.embedding).1 <= 0.05);
    }

    #[test]
    fn sgd_saturates_an_unopposed_edge() {
        let g = LatentGraph::from_edges(2, [(0, 1)], None, 1.0).unwrap();
        let mut cfg = TrainConfig::sgd(2, 0.0, 8);
        cfg.bound = 1.0;
        if let Optimizer::Adam { ref mut lr, .. } = cfg.optimizer {
            *lr = 0.05;
        }
        let emb = train_sgd(&g, &SchemeConfig::random_walk(1, 0, 1.0), &cfg, 2000).unwrap();
        assert!(emb.inner(0, 1) >= 1.9, "{}", emb.inner(0, 1));
    }

    #[test]
    fn sgd_is_deterministic() {
        let g = sample_graph(&GraphonSpec::constant(0.3).unwrap(), 50, 9).unwrap();
        let cfg = TrainConfig::sgd(4, 0.1, 10);
        let scheme = SchemeConfig::random_walk(5, 2, 0.75);
        let a = train_sgd(&g, &scheme, &cfg, 300).unwrap();
        let b = train_sgd(&g, &scheme, &cfg, 300).unwrap();
        assert_eq!(a, b);
        assert!(train_sgd(&g, &scheme, &TrainConfig::full(4, 0.1, 10), 10).is_err());
    }

    #[test]
    fn gram_spectrum_examples() {
        let mut eye = EmbeddingMatrix::zeros(4, 4, 1.0);
        for i in 0..4 {
            eye.as_mut_slice()[i * 4 + i] = 1.0;
        }
        let s = gram_spectrum(&eye);
        assert!(s.singular_values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!((s.trace - 4.0).abs() < 1e-15);
        let z = gram_spectrum(&EmbeddingMatrix::zeros(5, 3, 1.0));
        assert!(z.singular_values.iter().all(|&v| v == 0.0) && z.trace == 0.0);
        let emb = initial_embedding(30, &TrainConfig { init: Init::GaussianScaled { sigma: Some(1.0) }, ..TrainConfig::full(5, 0.0, 11) }, 0);
        let s = gram_spectrum(&emb);
        assert!(s.discrepancy <= 1e-10 && s.singular_values.len() == 5);
        let gram = gram_matrix(&emb);
        assert!((gram.trace() - s.trace).abs() < 1e-10);
    }

    #[test]
    fn embedding_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let emb = initial_embedding(7, &TrainConfig::full(3, 0.0, 12), 0);
        let csv = dir.path().join("e.csv");
        write_embedding_csv(&emb, &csv).unwrap();
        assert!(std::fs::read_to_string(&csv).unwrap().starts_with("id,dim0,dim1,dim2\n0,"));
        assert_eq!(read_embedding_csv(&csv, 10.0).unwrap(), emb);
        let bin = dir.path().join("e.gemb");
        write_embedding_binary(&emb, &bin).unwrap();
        let bytes = std::fs::read(&bin).unwrap();
        assert_eq!(&bytes[..5], b"GEMB1");
        assert_eq!(bytes.len(), 21 + 7 * 3 * 8);
        assert_eq!(read_embedding_binary(&bin, 10.0).unwrap(), emb);
        std::fs::write(&bin, b"GEMB0").unwrap();
        assert!(read_embedding_binary(&bin, 10.0).is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = TrainConfig::full(0, -1.0, 0);
        cfg.bound = 0.0;
        match cfg.validate() {
            Err(Error::Validation(v)) => assert_eq!(v.len(), 3),
            other => panic!("{other:?}"),
        }
    }
}
