//! Discretized population risk over step kernels on an equal-width partition of `[0, 1]`.
//!
//! The objective over a `κ × κ` kernel is
//! `F(K) = Σ_{l,l′} p_l p_l′ Σ_x c_f(l,l′,x) ℓ(K_ll′, x) + ξ Σ_l p_l c_g(l) K_ll`
//! with cell mass `p_l = 1/κ`. [`minimize_psd`] solves it over the PSD cone and
//! [`minimize_factored`] over `K = HHᵀ` with `H ∈ [−A, A]^{κ×d}`.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::formulas::LimitFunctions;
use crate::graphon::GraphonSpec;
use crate::quadrature::gauss_legendre5;
use crate::risk::{loss_and_slope, sigmoid};
use crate::rng::{self, domain};
use crate::sampler::SchemeConfig;
use crate::trainer::{spg, SpgParams};
use crate::{Error, Result};

pub const DEFAULT_KAPPA: usize = 64;
const EIGEN_FLOOR: f64 = 1e-12;

/// Cell averages of the expected pair weights and of the vertex weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedWeights {
    pub kappa: usize,
    /// `c_f(l, l′, 1)`, row-major `κ × κ`.
    pub c1: Vec<f64>,
    /// `c_f(l, l′, 0)`, row-major `κ × κ`.
    pub c0: Vec<f64>,
    /// `c_g(l)`.
    pub cg: Vec<f64>,
    /// Gauss–Legendre nodes per cell side.
    pub nodes_per_cell: usize,
}

impl DiscretizedWeights {
    /// Builds weights from raw cell values, checking symmetry and signs.
    pub fn from_parts(kappa: usize, c1: Vec<f64>, c0: Vec<f64>, cg: Vec<f64>) -> Result<Self> {
        if kappa == 0 {
            return Err(Error::InvalidArgument("kappa must be >= 1".into()));
        }
        for (name, v, len) in [("c1", &c1, kappa * kappa), ("c0", &c0, kappa * kappa), ("cg", &cg, kappa)] {
            if v.len() != len {
                return Err(Error::DimensionMismatch { expected: len, got: v.len() }.context(name));
            }
            if v.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} entries must be finite and >= 0")));
            }
        }
        for l in 0..kappa {
            for m in 0..l {
                if c1[l * kappa + m] != c1[m * kappa + l] || c0[l * kappa + m] != c0[m * kappa + l] {
                    return Err(Error::InvalidArgument("cell weights must be symmetric".into()));
                }
            }
        }
        Ok(DiscretizedWeights { kappa, c1, c0, cg, nodes_per_cell: 0 })
    }

    pub fn mass(&self) -> f64 {
        1.0 / self.kappa as f64
    }

    /// Lipschitz constant of `∇F` over the symmetric matrices (the problem is separable per entry).
    fn lipschitz(&self) -> f64 {
        let p2 = self.mass() * self.mass();
        let worst = self.c1.iter().zip(&self.c0).map(|(a, b)| a + b).fold(0.0, f64::max);
        p2 * worst / 4.0
    }
}

/// Per-cell Gauss–Legendre nodes, split at the graphon's breakpoints.
fn cell_rule(spec: &GraphonSpec, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut cuts = vec![lo];
    cuts.extend(spec.breakpoints().into_iter().filter(|&b| b > lo + 1e-15 && b < hi - 1e-15));
    cuts.push(hi);
    cuts.windows(2).flat_map(|w| gauss_legendre5(w[0], w[1])).collect()
}

/// Cell averages `c_f(l,l′,x)` of `f̃_{n,x}` and `c_g(l)` of `g̃_n` on `κ` equal cells.
pub fn discretize_weights(spec: &GraphonSpec, rho: f64, scheme: &SchemeConfig, kappa: usize) -> Result<DiscretizedWeights> {
    if kappa == 0 {
        return Err(Error::InvalidArgument("kappa must be >= 1".into()));
    }
    let limits = LimitFunctions::new(spec, scheme, rho)?;
    let width = 1.0 / kappa as f64;
    let rules: Vec<Vec<(f64, f64)>> = (0..kappa)
        .map(|l| cell_rule(spec, l as f64 * width, (l + 1) as f64 * width))
        .collect();
    let mut c1 = vec![0.0; kappa * kappa];
    let mut c0 = vec![0.0; kappa * kappa];
    for l in 0..kappa {
        for m in l..kappa {
            let (mut s1, mut s0) = (0.0, 0.0);
            for &(x, wx) in &rules[l] {
                for &(y, wy) in &rules[m] {
                    let w = wx * wy;
                    s1 += w * limits.pair_expected(x, y, true);
                    s0 += w * limits.pair_expected(x, y, false);
                }
            }
            let area = width * width;
            for (a, b) in [(l, m), (m, l)] {
                c1[a * kappa + b] = s1 / area;
                c0[a * kappa + b] = s0 / area;
            }
        }
    }
    let cg = rules
        .iter()
        .map(|r| r.iter().map(|&(x, w)| w * limits.vertex(x)).sum::<f64>() / width)
        .collect();
    Ok(DiscretizedWeights { kappa, c1, c0, cg, nodes_per_cell: rules[0].len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum KernelRepr {
    /// Row-major `κ × d` cell embeddings.
    Factored { h: Vec<f64>, d: usize, bound: f64 },
    /// Row-major symmetric `κ × κ` matrix.
    Full { k: Vec<f64> },
}

/// Step kernel constant on the cells of an equal-width partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepKernel {
    pub kappa: usize,
    pub repr: KernelRepr,
    /// `c_g(l)`, used by the trace operator.
    pub cell_penalty: Vec<f64>,
}

impl StepKernel {
    pub fn full(k: DMatrix<f64>, cell_penalty: Vec<f64>) -> Result<Self> {
        let kappa = k.nrows();
        if k.ncols() != kappa || cell_penalty.len() != kappa {
            return Err(Error::DimensionMismatch { expected: kappa, got: cell_penalty.len() });
        }
        let sym = (&k + k.transpose()) * 0.5;
        let mut data = Vec::with_capacity(kappa * kappa);
        for l in 0..kappa {
            data.extend(sym.row(l).iter());
        }
        Ok(StepKernel { kappa, repr: KernelRepr::Full { k: data }, cell_penalty })
    }

    pub fn factored(h: DMatrix<f64>, bound: f64, cell_penalty: Vec<f64>) -> Result<Self> {
        let (kappa, d) = h.shape();
        if cell_penalty.len() != kappa {
            return Err(Error::DimensionMismatch { expected: kappa, got: cell_penalty.len() });
        }
        let mut data: Vec<f64> = Vec::with_capacity(kappa * d);
        for l in 0..kappa {
            data.extend(h.row(l).iter());
        }
        if data.iter().any(|v: &f64| !(v.abs() <= bound)) {
            return Err(Error::InvalidArgument(format!("factor entries must lie in [-{bound}, {bound}]")));
        }
        Ok(StepKernel { kappa, repr: KernelRepr::Factored { h: data, d, bound }, cell_penalty })
    }

    /// `K` as a dense `κ × κ` matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        match &self.repr {
            KernelRepr::Full { k } => DMatrix::from_row_slice(self.kappa, self.kappa, k),
            KernelRepr::Factored { h, d, .. } => {
                let h = DMatrix::from_row_slice(self.kappa, *d, h);
                &h * h.transpose()
            }
        }
    }

    pub fn to_full(&self) -> StepKernel {
        StepKernel::full(self.matrix(), self.cell_penalty.clone()).expect("square kernel")
    }

    /// `K(x, y)` by cell lookup.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (l, m) = (self.cell(x), self.cell(y));
        match &self.repr {
            KernelRepr::Full { k } => k[l * self.kappa + m],
            KernelRepr::Factored { h, d, .. } => h[l * d..(l + 1) * d].iter().zip(&h[m * d..(m + 1) * d]).map(|(a, b)| a * b).sum(),
        }
    }

    pub fn cell(&self, x: f64) -> usize {
        ((x * self.kappa as f64).floor().max(0.0) as usize).min(self.kappa - 1)
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.matrix().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn check_kappa(k: &StepKernel, w: &DiscretizedWeights) -> Result<()> {
    if k.kappa != w.kappa {
        return Err(Error::DimensionMismatch { expected: w.kappa, got: k.kappa });
    }
    Ok(())
}

/// `F(K)` and, when given, its gradient with respect to the entries of `K`.
fn full_objective(k: &DMatrix<f64>, w: &DiscretizedWeights, xi: f64, grad: Option<&mut DMatrix<f64>>) -> f64 {
    let kappa = w.kappa;
    let p = w.mass();
    let p2 = p * p;
    let mut value = 0.0;
    let mut grad = grad;
    for l in 0..kappa {
        for m in 0..kappa {
            let y = k[(l, m)];
            let (a, b) = (w.c1[l * kappa + m], w.c0[l * kappa + m]);
            let (l1, s1) = loss_and_slope(y, true);
            let (l0, s0) = loss_and_slope(y, false);
            value += p2 * (a * l1 + b * l0);
            if let Some(g) = grad.as_deref_mut() {
                g[(l, m)] = p2 * (a * s1 + b * s0);
            }
        }
        value += xi * p * w.cg[l] * k[(l, l)];
        if let Some(g) = grad.as_deref_mut() {
            g[(l, l)] += xi * p * w.cg[l];
        }
    }
    value
}

/// Discretized `I_n[K] + ξ·I_n^reg[K]`.
pub fn population_value(k: &StepKernel, w: &DiscretizedWeights, xi: f64) -> Result<f64> {
    check_kappa(k, w)?;
    Ok(full_objective(&k.matrix(), w, xi, None))
}

/// Discretized `I_n^reg[K] = Σ_l p_l c_g(l) K_ll`.
pub fn regularizer_value(k: &StepKernel, w: &DiscretizedWeights) -> Result<f64> {
    check_kappa(k, w)?;
    let m = k.matrix();
    Ok((0..w.kappa).map(|l| w.mass() * w.cg[l] * m[(l, l)]).sum())
}

/// Symmetrizes and clamps eigenvalues below `1e−12` to zero.
pub fn project_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    if sym.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite iterate".into()));
    }
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 10_000).ok_or_else(|| Error::Eigen("eigensolver did not converge".into()))?;
    let vals = eig.eigenvalues.map(|v| if v < EIGEN_FLOOR { 0.0 } else { v });
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&vals) * v.transpose();
    Ok((&out + out.transpose()) * 0.5)
}

#[derive(Debug, Clone)]
pub struct PopulationMinimum {
    pub kernel: StepKernel,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Projected-gradient fixed-point residual at the returned kernel.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdOptions {
    pub max_iters: usize,
    /// Target fixed-point residual.
    pub tol: f64,
}

impl Default for PsdOptions {
    fn default() -> Self {
        PsdOptions { max_iters: 200_000, tol: 1e-11 }
    }
}

/// Unique minimizer of `F` over the PSD cone, from `K = 0`.
pub fn minimize_psd(w: &DiscretizedWeights, xi: f64) -> Result<PopulationMinimum> {
    minimize_psd_from(w, xi, &DMatrix::zeros(w.kappa, w.kappa), PsdOptions::default())
}

/// Accelerated projected gradient with step `1/L` and adaptive restarts, from `start`.
pub fn minimize_psd_from(w: &DiscretizedWeights, xi: f64, start: &DMatrix<f64>, opts: PsdOptions) -> Result<PopulationMinimum> {
    check_xi(xi)?;
    let kappa = w.kappa;
    if start.shape() != (kappa, kappa) {
        return Err(Error::DimensionMismatch { expected: kappa, got: start.nrows() });
    }
    let step = 1.0 / w.lipschitz().max(1e-300);
    let mut x = project_psd(start)?;
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut grad = DMatrix::zeros(kappa, kappa);
    let mut converged = false;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < opts.max_iters {
        iterations += 1;
        full_objective(&y, w, xi, Some(&mut grad));
        let x_next = project_psd(&(&y - &grad * step))?;
        if iterations % 25 == 0 || iterations == opts.max_iters {
            residual = fixed_point_residual(&x_next, w, xi, step)?;
            if residual <= opts.tol {
                x = x_next;
                converged = true;
                break;
            }
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let restart = (&y - &x_next).dot(&(&x_next - &x)) > 0.0;
        if restart {
            t = 1.0;
            y = x_next.clone();
        } else {
            y = &x_next + (&x_next - &x) * ((t - 1.0) / t_next);
            t = t_next;
        }
        x = x_next;
    }
    if !converged {
        residual = fixed_point_residual(&x, w, xi, step)?;
    }
    let objective = full_objective(&x, w, xi, None);
    let kernel = StepKernel::full(x, w.cg.clone())?;
    Ok(PopulationMinimum { kernel, objective, converged, iterations, residual })
}

fn check_xi(xi: f64) -> Result<()> {
    if !(xi >= 0.0) || !xi.is_finite() {
        return Err(Error::InvalidArgument(format!("xi must satisfy xi >= 0, got {xi}")));
    }
    Ok(())
}

fn fixed_point_residual(k: &DMatrix<f64>, w: &DiscretizedWeights, xi: f64, step: f64) -> Result<f64> {
    let mut grad = DMatrix::zeros(w.kappa, w.kappa);
    full_objective(k, w, xi, Some(&mut grad));
    let moved = project_psd(&(k - &grad * step))?;
    Ok((k - moved).norm() / (1.0 + k.norm()))
}

/// `‖K − Π_PSD(K − s∇F(K))‖_F / (1 + ‖K‖_F)` with `s = 1/L`.
pub fn kkt_residual(k: &StepKernel, w: &DiscretizedWeights, xi: f64) -> Result<f64> {
    check_kappa(k, w)?;
    fixed_point_residual(&k.matrix(), w, xi, 1.0 / w.lipschitz().max(1e-300))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactoredOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub patience: usize,
}

impl Default for FactoredOptions {
    fn default() -> Self {
        FactoredOptions { restarts: 3, max_iters: 50_000, tol: 1e-13, patience: 20 }
    }
}

/// Minimizes `F(HHᵀ)` over `H ∈ [−A, A]^{κ×d}`, best of several restarts.
pub fn minimize_factored(w: &DiscretizedWeights, xi: f64, d: usize, bound: f64, seed: u64) -> Result<PopulationMinimum> {
    minimize_factored_with(w, xi, d, bound, seed, FactoredOptions::default())
}

pub fn minimize_factored_with(
    w: &DiscretizedWeights,
    xi: f64,
    d: usize,
    bound: f64,
    seed: u64,
    opts: FactoredOptions,
) -> Result<PopulationMinimum> {
    check_xi(xi)?;
    if d == 0 || !(bound > 0.0) {
        return Err(Error::InvalidArgument(format!("need d >= 1 and A > 0, got d = {d}, A = {bound}")));
    }
    let kappa = w.kappa;
    let p = w.mass();
    let p2 = p * p;
    let params = SpgParams { lr: 1.0 / (w.lipschitz() * 4.0).max(1e-12), max_iters: opts.max_iters, tol: opts.tol, patience: opts.patience, bound };
    let mut best: Option<(Vec<f64>, f64, bool, usize)> = None;
    let mut gram = vec![0.0; kappa * kappa];
    for r in 0..opts.restarts.max(1) {
        let mut rs = rng::stream(seed, domain::POPULATION, r as u64);
        let sigma = 0.5 / (d as f64).sqrt();
        let h0: Vec<f64> = (0..kappa * d).map(|_| sigma * rs.sample::<f64, _>(StandardNormal)).collect();
        let out = spg(h0, &params, |h, grad| {
            for l in 0..kappa {
                for m in l..kappa {
                    let v: f64 = h[l * d..(l + 1) * d].iter().zip(&h[m * d..(m + 1) * d]).map(|(a, b)| a * b).sum();
                    gram[l * kappa + m] = v;
                    gram[m * kappa + l] = v;
                }
            }
            grad.fill(0.0);
            let mut value = 0.0;
            for l in 0..kappa {
                for m in 0..kappa {
                    let y = gram[l * kappa + m];
                    let (a, b) = (w.c1[l * kappa + m], w.c0[l * kappa + m]);
                    let (l1, _) = loss_and_slope(y, true);
                    let (l0, _) = loss_and_slope(y, false);
                    value += p2 * (a * l1 + b * l0);
                    // d/dh_l of φ(⟨h_l,h_m⟩) summed over both orderings.
                    let c = 2.0 * p2 * ((a + b) * sigmoid(y) - a);
                    for k in 0..d {
                        grad[l * d + k] += c * h[m * d + k];
                    }
                }
                let pen = xi * p * w.cg[l];
                let row = &h[l * d..(l + 1) * d];
                value += pen * row.iter().map(|v| v * v).sum::<f64>();
                for k in 0..d {
                    grad[l * d + k] += 2.0 * pen * row[k];
                }
            }
            Ok(value)
        })?;
        if best.as_ref().is_none_or(|b| out.value < b.1) {
            best = Some((out.x, out.value, out.converged, out.iterations));
        }
    }
    let (h, objective, converged, iterations) = best.expect("one restart");
    let kernel = StepKernel::factored(DMatrix::from_row_slice(kappa, d, &h), bound, w.cg.clone())?;
    let residual = kkt_residual(&kernel, w, xi)?;
    Ok(PopulationMinimum { kernel, objective, converged, iterations, residual })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSpectrum {
    /// `Σ_l p_l c_g(l) K_ll`.
    pub trace: f64,
    /// Eigenvalues of `K·diag(p c_g)`, descending.
    pub eigenvalues: Vec<f64>,
}

/// Spectrum of the operator `f ↦ ∫ K(·, y) f(y) g̃_n(y) dy` on the partition.
pub fn kernel_trace_spectrum(k: &StepKernel) -> TraceSpectrum {
    let kappa = k.kappa;
    let p = 1.0 / kappa as f64;
    let m = k.matrix();
    let root: Vec<f64> = k.cell_penalty.iter().map(|c| (p * c).sqrt()).collect();
    let s = DMatrix::from_fn(kappa, kappa, |l, j| root[l] * m[(l, j)] * root[j]);
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    let trace = (0..kappa).map(|l| p * k.cell_penalty[l] * m[(l, l)]).sum();
    TraceSpectrum { trace, eigenvalues }
}

/// Summary written next to an exported kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSidecar {
    pub kappa: usize,
    pub xi: f64,
    pub objective: f64,
    pub residual: f64,
    pub trace: f64,
    pub top_eigenvalues: Vec<f64>,
}

pub fn kernel_csv(k: &StepKernel) -> String {
    let m = k.matrix();
    let mut s = String::new();
    for l in 0..k.kappa {
        let row: Vec<String> = m.row(l).iter().map(|v| v.to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Writes `<stem>.csv` (the `κ × κ` matrix) and `<stem>.json`.
pub fn export_minimum(min: &PopulationMinimum, xi: f64, dir: &Path, stem: &str) -> Result<KernelSidecar> {
    let spectrum = kernel_trace_spectrum(&min.kernel);
    let sidecar = KernelSidecar {
        kappa: min.kernel.kappa,
        xi,
        objective: min.objective,
        residual: min.residual,
        trace: spectrum.trace,
        top_eigenvalues: spectrum.eigenvalues.iter().take(10).copied().collect(),
    };
    std::fs::write(dir.join(format!("{stem}.csv")), kernel_csv(&min.kernel))?;
    std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(sidecar)
}
