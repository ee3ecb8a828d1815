//! Verification experiments: inclusion-probability limits, value and kernel
//! convergence of the regularized minimizers, and shrinkage curves.

mod linkpred;

pub use linkpred::{
    average_precision, link_prediction_eval, link_prediction_with, roc_auc, train_logistic, LinkPredictionResult,
    SplitConfig,
};

use std::time::Instant;

use serde::Serialize;

use crate::formulas::{formula_weights, RiskWeights};
use crate::graphon::{sample_graph, GraphonSpec, LatentGraph};
use crate::population::{discretize_weights, minimize_factored, minimize_psd, StepKernel};
use crate::risk::{empirical_risk, EmbeddingMatrix, RiskConfig};
use crate::rng::{child_seed, domain};
use crate::sampler::{mc_inclusion_probabilities, SchemeConfig, SchemeKind};
use crate::trainer::{gram_spectrum, initial_embedding, train_full, train_full_from, TrainConfig};
use crate::{Error, Result};

/// Bins with fewer inclusion events than this are flagged.
pub const MIN_BIN_EVENTS: f64 = 100.0;

/// Median of finite values; `NaN` for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn cell_of(x: f64, bins: usize) -> usize {
    ((x * bins as f64) as usize).min(bins - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinRecord {
    pub cell_a: usize,
    /// Equal to `cell_a` for vertex bins.
    pub cell_b: usize,
    /// Pair label; `None` for vertex bins.
    pub edge: Option<bool>,
    pub members: usize,
    /// Total inclusion events over all replicates.
    pub events: u64,
    /// `Σ n²·P̂` (pairs) or `Σ n·P̂` (vertices).
    pub empirical: f64,
    /// `Σ f_n` or `Σ g̃_n` over the bin members.
    pub formula: f64,
    pub ratio_error: f64,
    /// Approximate relative Monte Carlo standard error, `1/√events`.
    pub rel_se: f64,
    pub undersampled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assumption1Record {
    pub n: usize,
    pub rho: f64,
    /// Reference rate `(ln n / (n ρ))^{1/2}` at which the relative errors should vanish.
    pub rate: f64,
    pub reps: usize,
    pub bins: usize,
    pub max_pair_error: f64,
    pub max_vertex_error: f64,
    /// Errors against the exact finite-`n` probabilities, when known in closed form.
    pub max_pair_error_exact: Option<f64>,
    pub max_vertex_error_exact: Option<f64>,
    pub max_pair_rel_se: f64,
    pub max_vertex_rel_se: f64,
    pub undersampled_bins: usize,
    pub pair_bins: Vec<BinRecord>,
    pub vertex_bins: Vec<BinRecord>,
}

/// Binned comparison of Monte Carlo inclusion frequencies with the limit formulas.
pub fn verify_assumption1(
    spec: &GraphonSpec,
    scheme: &SchemeConfig,
    n_list: &[usize],
    reps: usize,
    bins: usize,
    seed: u64,
) -> Result<Vec<Assumption1Record>> {
    if bins == 0 || n_list.is_empty() {
        return Err(Error::InvalidArgument("need bins >= 1 and a non-empty n list".into()));
    }
    let mut out = Vec::new();
    for &n in n_list {
        let cell = |e: Error| e.context(format!("assumption 1 at n = {n}"));
        let g = sample_graph(spec, n, child_seed(seed, domain::EXPERIMENT, n as u64)).map_err(cell)?;
        let w = formula_weights(spec, scheme, &g).map_err(cell)?;
        let probs = mc_inclusion_probabilities(&g, scheme, reps, child_seed(seed, domain::MONTE_CARLO, n as u64)).map_err(cell)?;
        let lat = g.latents().expect("sampled graphs carry latents");
        let nf = n as f64;
        let scale = nf / reps as f64;

        // Pair bins indexed by (lower cell, upper cell, label).
        let pb = |a: usize, b: usize, e: bool| ((a.min(b) * bins + a.max(b)) * 2) + e as usize;
        let mut events = vec![0u64; bins * bins * 2];
        let mut formula = vec![0.0; bins * bins * 2];
        let mut members = vec![0usize; bins * bins * 2];
        let cells: Vec<usize> = lat.iter().map(|&x| cell_of(x, bins)).collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let e = g.has_edge(i, j);
                let b = pb(cells[i], cells[j], e);
                events[b] += probs.pair_count(i, j) as u64;
                formula[b] += w.pair_weight(i, j, e);
                members[b] += 1;
            }
        }
        let mut pair_bins = Vec::new();
        for a in 0..bins {
            for b in a..bins {
                for e in [false, true] {
                    let k = pb(a, b, e);
                    if members[k] == 0 {
                        continue;
                    }
                    pair_bins.push(bin_record(a, b, Some(e), members[k], events[k], nf * scale * events[k] as f64, formula[k]));
                }
            }
        }
        let mut v_events = vec![0u64; bins];
        let mut v_formula = vec![0.0; bins];
        let mut v_members = vec![0usize; bins];
        for i in 0..n {
            v_events[cells[i]] += probs.vertex_count(i) as u64;
            v_formula[cells[i]] += w.vertex_weight(i);
            v_members[cells[i]] += 1;
        }
        let vertex_bins: Vec<BinRecord> = (0..bins)
            .filter(|&a| v_members[a] > 0)
            .map(|a| bin_record(a, a, None, v_members[a], v_events[a], scale * v_events[a] as f64, v_formula[a]))
            .collect();

        // Uniform vertex sampling has exact hypergeometric probabilities.
        let (pair_exact, vertex_exact) = match scheme.kind {
            SchemeKind::UniformVertex { k } => {
                let kf = k as f64;
                let pair = nf * nf * kf * (kf - 1.0) / (nf * (nf - 1.0));
                let pe = pair_bins.iter().map(|b| (b.empirical / (pair * b.members as f64) - 1.0).abs()).fold(0.0, f64::max);
                let ve = vertex_bins.iter().map(|b| (b.empirical / (kf * b.members as f64) - 1.0).abs()).fold(0.0, f64::max);
                (Some(pe), Some(ve))
            }
            _ => (None, None),
        };
        let max_of = |bs: &[BinRecord], f: fn(&BinRecord) -> f64| bs.iter().map(f).fold(0.0, f64::max);
        out.push(Assumption1Record {
            n,
            rho: g.rho(),
            rate: ((n as f64).ln() / (n as f64 * g.rho())).sqrt(),
            reps,
            bins,
            max_pair_error: max_of(&pair_bins, |b| b.ratio_error),
            max_vertex_error: max_of(&vertex_bins, |b| b.ratio_error),
            max_pair_error_exact: pair_exact,
            max_vertex_error_exact: vertex_exact,
            max_pair_rel_se: max_of(&pair_bins, |b| b.rel_se),
            max_vertex_rel_se: max_of(&vertex_bins, |b| b.rel_se),
            undersampled_bins: pair_bins.iter().chain(&vertex_bins).filter(|b| b.undersampled).count(),
            pair_bins,
            vertex_bins,
        });
    }
    Ok(out)
}

fn bin_record(a: usize, b: usize, edge: Option<bool>, members: usize, events: u64, empirical: f64, formula: f64) -> BinRecord {
    let ratio_error = if formula > 0.0 {
        (empirical / formula - 1.0).abs()
    } else if empirical == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    BinRecord {
        cell_a: a,
        cell_b: b,
        edge,
        members,
        events,
        empirical,
        formula,
        ratio_error,
        rel_se: if events > 0 { 1.0 / (events as f64).sqrt() } else { f64::INFINITY },
        undersampled: (events as f64) < MIN_BIN_EVENTS,
    }
}

/// Settings shared by the convergence experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceConfig {
    pub xi: f64,
    pub d: usize,
    pub bound: f64,
    pub kappa: usize,
    /// Restarts for the empirical minimization.
    pub restarts: usize,
}

impl ConvergenceConfig {
    pub fn new(xi: f64, d: usize) -> Self {
        ConvergenceConfig { xi, d, bound: crate::trainer::DEFAULT_BOUND, kappa: crate::population::DEFAULT_KAPPA, restarts: 1 }
    }

    fn train(&self, seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig::full(self.d, self.xi, seed);
        cfg.bound = self.bound;
        cfg.restarts = self.restarts;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Record {
    pub n: usize,
    pub seed: u64,
    pub rho: f64,
    pub xi: f64,
    pub d: usize,
    pub empirical_min: f64,
    /// Minimum over the PSD cone.
    pub population_min: f64,
    /// Minimum over rank-`d` factorizations in the box.
    pub population_min_factored: f64,
    pub gap: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Whether `d³ < nρ_n`.
    pub d_condition: bool,
    pub near_bound: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem2Record {
    pub n: usize,
    pub seed: u64,
    pub xi: f64,
    pub d: usize,
    /// `(1/n²) Σ_{i,j} |⟨ω̂_i, ω̂_j⟩ − K*(λ_i, λ_j)|`.
    pub deviation: f64,
    /// Same average restricted to `i ≠ j`.
    pub offdiag_deviation: f64,
    pub kernel_max_entry: f64,
    /// The PSD minimizer has entries beyond `A²`.
    pub box_binding: bool,
    pub converged: bool,
}

struct Population {
    rho: f64,
    psd: crate::population::PopulationMinimum,
    factored_value: Option<f64>,
}

fn population_for(spec: &GraphonSpec, scheme: &SchemeConfig, rho: f64, cfg: &ConvergenceConfig, seed: u64, factored: bool) -> Result<Population> {
    let w = discretize_weights(spec, rho, scheme, cfg.kappa)?;
    let psd = minimize_psd(&w, cfg.xi)?;
    let factored_value = if factored {
        Some(minimize_factored(&w, cfg.xi, cfg.d, cfg.bound, seed)?.objective)
    } else {
        None
    };
    Ok(Population { rho, psd, factored_value })
}

fn cached<'a>(cache: &'a mut Vec<Population>, rho: f64, make: impl FnOnce() -> Result<Population>) -> Result<&'a Population> {
    if let Some(i) = cache.iter().position(|p| p.rho == rho) {
        return Ok(&cache[i]);
    }
    cache.push(make()?);
    Ok(cache.last().expect("just pushed"))
}

/// Gap between the empirical and population minimal values, per `(n, seed)`.
pub fn verify_theorem1(
    spec: &GraphonSpec,
    scheme: &SchemeConfig,
    n_list: &[usize],
    cfg: &ConvergenceConfig,
    seeds: &[u64],
) -> Result<Vec<Theorem1Record>> {
    let mut cache = Vec::new();
    let mut out = Vec::new();
    for &n in n_list {
        let rho = spec.check_n(n)?;
        let pop = cached(&mut cache, rho, || population_for(spec, scheme, rho, cfg, seeds.first().copied().unwrap_or(0), true))?;
        let (pop_min, pop_fac) = (pop.psd.objective, pop.factored_value.unwrap_or(f64::NAN));
        for &seed in seeds {
            let ctx = |e: Error| e.context(format!("value gap at n = {n}, seed = {seed}"));
            let s = child_seed(seed, domain::EXPERIMENT, n as u64);
            let g = sample_graph(spec, n, s).map_err(ctx)?;
            let w = formula_weights(spec, scheme, &g).map_err(ctx)?;
            let fit = train_full(&g, &w, &cfg.train(s)).map_err(ctx)?;
            out.push(Theorem1Record {
                n,
                seed,
                rho,
                xi: cfg.xi,
                d: cfg.d,
                empirical_min: fit.objective,
                population_min: pop_min,
                population_min_factored: pop_fac,
                gap: (fit.objective - pop_min).abs(),
                converged: fit.converged,
                iterations: fit.iterations,
                d_condition: ((cfg.d as f64).powi(3)) < n as f64 * rho,
                near_bound: fit.embedding.near_bound(),
            });
        }
    }
    Ok(out)
}

/// Mean absolute deviation of the learned gram matrix from the population minimizer.
pub fn verify_theorem2(
    spec: &GraphonSpec,
    scheme: &SchemeConfig,
    n_list: &[usize],
    cfg: &ConvergenceConfig,
    seeds: &[u64],
) -> Result<Vec<Theorem2Record>> {
    let mut cache = Vec::new();
    let mut out = Vec::new();
    for &n in n_list {
        let rho = spec.check_n(n)?;
        let pop = cached(&mut cache, rho, || population_for(spec, scheme, rho, cfg, 0, false))?;
        let kernel = &pop.psd.kernel;
        let kmax = kernel.max_abs_entry();
        for &seed in seeds {
            let ctx = |e: Error| e.context(format!("gram deviation at n = {n}, seed = {seed}"));
            let s = child_seed(seed, domain::EXPERIMENT, n as u64);
            let g = sample_graph(spec, n, s).map_err(ctx)?;
            let w = formula_weights(spec, scheme, &g).map_err(ctx)?;
            let fit = train_full(&g, &w, &cfg.train(s)).map_err(ctx)?;
            let (deviation, offdiag_deviation) = gram_deviation(&fit.embedding, kernel, g.latents().expect("latents"));
            out.push(Theorem2Record {
                n,
                seed,
                xi: cfg.xi,
                d: cfg.d,
                deviation,
                offdiag_deviation,
                kernel_max_entry: kmax,
                box_binding: kmax > cfg.bound * cfg.bound,
                converged: fit.converged,
            });
        }
    }
    Ok(out)
}

/// `(all-pairs, off-diagonal)` mean absolute deviation from `K(λ_i, λ_j)`.
pub fn gram_deviation(emb: &EmbeddingMatrix, kernel: &StepKernel, latents: &[f64]) -> (f64, f64) {
    let n = emb.n();
    let cells: Vec<usize> = latents.iter().map(|&x| kernel.cell(x)).collect();
    let k = kernel.matrix();
    let (mut diag, mut off) = (0.0, 0.0);
    for i in 0..n {
        diag += (emb.inner(i, i) - k[(cells[i], cells[i])]).abs();
        for j in (i + 1)..n {
            off += 2.0 * (emb.inner(i, j) - k[(cells[i], cells[j])]).abs();
        }
    }
    let nf = n as f64;
    ((diag + off) / (nf * nf), if n > 1 { off / (nf * (nf - 1.0)) } else { 0.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrinkageRecord {
    pub xi: f64,
    pub objective: f64,
    /// Objective at the zero embedding.
    pub zero_objective: f64,
    pub mean_sq_norm: f64,
    /// `zero_objective / ξ`, the bound on the mean squared norm; `None` at `ξ = 0`.
    pub norm_bound: Option<f64>,
    pub trace: f64,
    /// Top singular values of the gram matrix `ΩΩᵀ`.
    pub top_singular_values: Vec<f64>,
    pub converged: bool,
}

/// Trains along an ascending `ξ` grid, warm-starting each fit from the previous one.
pub fn shrinkage_curve(g: &LatentGraph, w: &RiskWeights, xi_grid: &[f64], cfg: &TrainConfig) -> Result<Vec<ShrinkageRecord>> {
    if xi_grid.is_empty() || xi_grid.windows(2).any(|p| !(p[0] < p[1])) {
        return Err(Error::InvalidArgument("xi grid must be non-empty and strictly ascending".into()));
    }
    let mut out = Vec::new();
    let mut warm: Option<EmbeddingMatrix> = None;
    for &xi in xi_grid {
        let c = TrainConfig { xi, ..*cfg };
        let fit = match warm.take() {
            None => train_full(g, w, &c)?,
            Some(start) => {
                // Keep the warm start unless a fresh start does better.
                let a = train_full_from(g, w, &c, start)?;
                let b = train_full_from(g, w, &c, initial_embedding(g.n(), &c, 0))?;
                if b.objective < a.objective { b } else { a }
            }
        };
        let zero = empirical_risk(&EmbeddingMatrix::zeros(g.n(), c.d, c.bound), w, g, &RiskConfig::new(xi)?)?.0;
        let spec = gram_spectrum(&fit.embedding);
        out.push(ShrinkageRecord {
            xi,
            objective: fit.objective,
            zero_objective: zero,
            mean_sq_norm: fit.embedding.mean_sq_norm(),
            norm_bound: (xi > 0.0).then(|| zero / xi),
            trace: spec.trace,
            top_singular_values: spec.singular_values.iter().take(10).map(|s| s * s).collect(),
            converged: fit.converged,
        });
        warm = Some(fit.embedding);
    }
    Ok(out)
}

/// Everything a verification run produces.
#[derive(Debug, Clone, Default, Serialize)]
pub struct VerificationReport {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub assumption1: Vec<Assumption1Record>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub theorem1: Vec<Theorem1Record>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub theorem2: Vec<Theorem2Record>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub shrinkage: Vec<ShrinkageRecord>,
    pub seeds: Vec<u64>,
    pub config: serde_json::Value,
}

impl VerificationReport {
    /// True when every recorded error, gap and deviation is finite.
    pub fn all_finite(&self) -> bool {
        self.assumption1.iter().all(|r| r.max_pair_error.is_finite() && r.max_vertex_error.is_finite())
            && self.theorem1.iter().all(|r| r.gap.is_finite() && r.empirical_min.is_finite())
            && self.theorem2.iter().all(|r| r.deviation.is_finite())
            && self.shrinkage.iter().all(|r| r.mean_sq_norm.is_finite() && r.trace.is_finite())
    }
}

/// Median of `value` over records sharing the same `n`, in order of first appearance.
pub fn median_by_n<R>(records: &[R], n: impl Fn(&R) -> usize, value: impl Fn(&R) -> f64) -> Vec<(usize, f64)> {
    let mut ns: Vec<usize> = Vec::new();
    for r in records {
        if !ns.contains(&n(r)) {
            ns.push(n(r));
        }
    }
    ns.into_iter()
        .map(|k| {
            let vals: Vec<f64> = records.iter().filter(|r| n(r) == k).map(&value).collect();
            (k, median(&vals))
        })
        .collect()
}

/// Wall-clock timer for report metadata.
pub struct Stopwatch(Instant);

impl Stopwatch {
    pub fn start() -> Self {
        Stopwatch(Instant::now())
    }

    pub fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// CSV rendering of report rows.
pub trait CsvRows {
    fn csv(&self) -> String;
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl CsvRows for [Assumption1Record] {
    fn csv(&self) -> String {
        let mut s = String::from("n,rho,reps,bins,max_pair_error,max_vertex_error,max_pair_error_exact,max_vertex_error_exact,max_pair_rel_se,max_vertex_rel_se,undersampled_bins\n");
        for r in self {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.n,
                r.rho,
                r.reps,
                r.bins,
                r.max_pair_error,
                r.max_vertex_error,
                opt(r.max_pair_error_exact),
                opt(r.max_vertex_error_exact),
                r.max_pair_rel_se,
                r.max_vertex_rel_se,
                r.undersampled_bins
            ));
        }
        s
    }
}

impl CsvRows for [Theorem1Record] {
    fn csv(&self) -> String {
        let mut s = String::from("n,seed,rho,xi,d,empirical_min,population_min,population_min_factored,gap,converged,iterations,d_condition,near_bound\n");
        for r in self {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.n, r.seed, r.rho, r.xi, r.d, r.empirical_min, r.population_min, r.population_min_factored, r.gap, r.converged, r.iterations, r.d_condition, r.near_bound
            ));
        }
        s
    }
}

impl CsvRows for [Theorem2Record] {
    fn csv(&self) -> String {
        let mut s = String::from("n,seed,xi,d,deviation,offdiag_deviation,kernel_max_entry,box_binding,converged\n");
        for r in self {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.n, r.seed, r.xi, r.d, r.deviation, r.offdiag_deviation, r.kernel_max_entry, r.box_binding, r.converged
            ));
        }
        s
    }
}

impl CsvRows for [ShrinkageRecord] {
    fn csv(&self) -> String {
        let mut s = String::from("xi,objective,zero_objective,mean_sq_norm,norm_bound,trace,top_singular_value,converged\n");
        for r in self {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.xi,
                r.objective,
                r.zero_objective,
                r.mean_sq_norm,
                opt(r.norm_bound),
                r.trace,
                r.top_singular_values.first().copied().unwrap_or(0.0),
                r.converged
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulas::weights_uniform_vertex;

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn uniform_vertex_errors_are_monte_carlo_noise() {
        let spec = GraphonSpec::constant(0.4).unwrap();
        let recs = verify_assumption1(&spec, &SchemeConfig::uniform_vertex(10), &[60], 20_000, 2, 1).unwrap();
        let r = &recs[0];
        assert_eq!(r.undersampled_bins, 0);
        assert!(r.max_pair_error_exact.unwrap() <= 3.0 * r.max_pair_rel_se, "{r:?}");
        assert!(r.max_vertex_error_exact.unwrap() <= 3.0 * r.max_vertex_rel_se);
        assert_eq!(r.pair_bins.len(), 6);
        assert_eq!(r.vertex_bins.len(), 2);
    }

    #[test]
    fn huge_penalty_closes_both_gaps() {
        let spec = GraphonSpec::smooth_product(0.2, 0.5).unwrap();
        let scheme = SchemeConfig::random_walk(4, 1, 1.0);
        let cfg = ConvergenceConfig { kappa: 8, ..ConvergenceConfig::new(1e6, 2) };
        let t1 = verify_theorem1(&spec, &scheme, &[60], &cfg, &[1]).unwrap();
        // Both minimizers sit at zero, so the gap is the gap between the two risks at zero.
        let g = sample_graph(&spec, 60, child_seed(1, domain::EXPERIMENT, 60)).unwrap();
        let w = formula_weights(&spec, &scheme, &g).unwrap();
        let at_zero = empirical_risk(&EmbeddingMatrix::zeros(60, 2, 10.0), &w, &g, &RiskConfig::new(1e6).unwrap()).unwrap().0;
        let dw = discretize_weights(&spec, 1.0, &scheme, 8).unwrap();
        let pop_zero = dw.c1.iter().chain(&dw.c0).sum::<f64>() / 64.0 * std::f64::consts::LN_2;
        assert!((t1[0].empirical_min - at_zero).abs() <= 1e-3 && (t1[0].population_min - pop_zero).abs() <= 1e-3, "{t1:?}");
        assert!((t1[0].gap - (at_zero - pop_zero).abs()).abs() <= 1e-3);
        let t2 = verify_theorem2(&spec, &scheme, &[60], &cfg, &[1]).unwrap();
        assert!(t2[0].deviation <= 1e-2);
        assert!(t2[0].deviation >= 0.0 && t1[0].gap >= 0.0);
    }

    #[test]
    fn constant_uniform_vertex_gap_is_small() {
        let spec = GraphonSpec::constant(0.8).unwrap();
        let cfg = ConvergenceConfig { kappa: 4, ..ConvergenceConfig::new(0.0, 1) };
        let recs = verify_theorem1(&spec, &SchemeConfig::uniform_vertex(2), &[200], &cfg, &[3]).unwrap();
        assert!(recs[0].gap <= 0.05, "{recs:?}");
        assert!(recs[0].d_condition);
    }

    #[test]
    fn shrinkage_records_are_monotone_and_bounded() {
        let spec = GraphonSpec::constant(0.7).unwrap();
        let g = sample_graph(&spec, 50, 4).unwrap();
        let w = weights_uniform_vertex(4);
        let mut cfg = TrainConfig::full(2, 0.0, 5);
        cfg.restarts = 1;
        let recs = shrinkage_curve(&g, &w, &[0.0, 0.1, 1.0, 1e3], &cfg).unwrap();
        for p in recs.windows(2) {
            assert!(p[1].mean_sq_norm <= p[0].mean_sq_norm * (1.0 + 1e-6) + 1e-12);
        }
        for r in &recs[1..] {
            assert!(r.mean_sq_norm <= r.norm_bound.unwrap());
        }
        assert!(recs[3].top_singular_values.iter().all(|&s| s <= 0.1));
        assert!(shrinkage_curve(&g, &w, &[1.0, 0.1], &cfg).is_err());
        let csv = recs.csv();
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn median_by_n_groups_records() {
        let recs = [(200, 1.0), (800, 0.5), (200, 3.0), (800, 0.1), (200, 2.0)];
        let m = median_by_n(&recs, |r| r.0, |r| r.1);
        assert_eq!(m, vec![(200, 2.0), (800, 0.3)]);
    }
}
