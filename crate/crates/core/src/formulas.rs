//! Closed-form limits of the subsampling inclusion probabilities.
//!
//! For each scheme, `n²·P((i,j) ∈ S | G) ≈ f_n(λ_i, λ_j, a_ij)` and
//! `n·P(i ∈ V(S) | G) ≈ g̃_n(λ_i)`.

use serde::{Deserialize, Serialize};

use crate::graphon::{degree_function, DegreeFunction, GraphonSpec, LatentGraph, DEFAULT_QUADRATURE_POINTS};
use crate::sampler::{tri_index, InclusionProbabilities, SchemeConfig, SchemeKind};
use crate::{Error, Result};

/// `[f, g]_α = f^α g + f g^α`.
pub fn bracket_alpha(f: f64, g: f64, alpha: f64) -> f64 {
    f.powf(alpha) * g + f * g.powf(alpha)
}

/// `T_n(λ) = ∫ (1 − ρ W(λ, y)) W(y, ·) dy`.
pub fn tn_integral(deg: &DegreeFunction, rho: f64, lambda: f64) -> f64 {
    deg.tn(rho, lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightSource {
    UniformVertexFormula,
    UniformEdgeFormula,
    RandomWalkFormula,
    MonteCarloRescaled,
}

/// The limit functions `f_n(x, y, a)` and `g̃_n(x)` of a scheme on a graphon.
#[derive(Debug, Clone)]
pub struct LimitFunctions {
    spec: GraphonSpec,
    deg: DegreeFunction,
    rho: f64,
    kind: SchemeKind,
    pos: f64,
    neg_coef: f64,
    vertex_pos: f64,
    vertex_neg: f64,
    alpha: f64,
}

impl LimitFunctions {
    pub fn new(spec: &GraphonSpec, scheme: &SchemeConfig, rho: f64) -> Result<Self> {
        scheme.validate()?;
        let alpha = match scheme.kind {
            SchemeKind::UniformVertex { .. } => 1.0,
            SchemeKind::UniformEdge { alpha, .. } | SchemeKind::RandomWalk { alpha, .. } => alpha,
        };
        let deg = degree_function(spec, &[1.0, alpha], DEFAULT_QUADRATURE_POINTS)?;
        Self::with_degree_function(spec, &deg, scheme, rho)
    }

    pub fn with_degree_function(
        spec: &GraphonSpec,
        deg: &DegreeFunction,
        scheme: &SchemeConfig,
        rho: f64,
    ) -> Result<Self> {
        scheme.validate()?;
        let ew = deg.mean();
        let (pos, neg_coef, vertex_pos, vertex_neg, alpha) = match scheme.kind {
            SchemeKind::UniformVertex { k } => {
                let k = k as f64;
                (k * (k - 1.0), k * (k - 1.0), k, 0.0, 1.0)
            }
            SchemeKind::UniformEdge { k, l, alpha } => {
                let (k, l) = (k as f64, l as f64);
                let ewa = deg.moment(alpha);
                (2.0 * k / (ew * rho), 2.0 * k * l / (ew * ewa), 2.0 * k / ew, 2.0 * k * l / (ew * ewa), alpha)
            }
            SchemeKind::RandomWalk { k, l, alpha } => {
                let (k, l) = (k as f64, l as f64);
                let ewa = deg.moment(alpha);
                (2.0 * k / (ew * rho), l * (k + 1.0) / (ew * ewa), k / ew, (k + 1.0) * l / (ew * ewa), alpha)
            }
        };
        Ok(LimitFunctions {
            spec: spec.clone(),
            deg: deg.clone(),
            rho,
            kind: scheme.kind,
            pos,
            neg_coef,
            vertex_pos,
            vertex_neg,
            alpha,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn spec(&self) -> &GraphonSpec {
        &self.spec
    }

    pub fn degree_function(&self) -> &DegreeFunction {
        &self.deg
    }

    /// `f_n` given the two degree values `W(x,·)`, `W(y,·)`.
    #[inline]
    fn pair_from_degrees(&self, wx: f64, wy: f64, edge: bool) -> f64 {
        match (self.kind, edge) {
            (SchemeKind::UniformVertex { .. }, _) => self.pos,
            (_, true) => self.pos,
            (_, false) => self.neg_coef * bracket_alpha(wx, wy, self.alpha),
        }
    }

    /// `f_n(x, y, a)`.
    pub fn pair(&self, x: f64, y: f64, edge: bool) -> f64 {
        self.pair_from_degrees(self.deg.at(x), self.deg.at(y), edge)
    }

    /// `f̃_{n,1}(x,y) = f_n(x,y,1)·ρW(x,y)` and `f̃_{n,0}(x,y) = f_n(x,y,0)·(1 − ρW(x,y))`.
    pub fn pair_expected(&self, x: f64, y: f64, edge: bool) -> f64 {
        let w = self.rho * self.spec.value(x, y);
        let f = self.pair(x, y, edge);
        if edge {
            f * w
        } else {
            f * (1.0 - w)
        }
    }

    /// `g̃_n(x)`.
    pub fn vertex(&self, x: f64) -> f64 {
        match self.kind {
            SchemeKind::UniformVertex { .. } => self.vertex_pos,
            _ => {
                let w = self.deg.at(x);
                self.vertex_pos * w + self.vertex_neg * w.powf(self.alpha) * self.deg.tn(self.rho, x)
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Constant {
        pair: f64,
        vertex: f64,
    },
    Latent {
        pos: f64,
        neg_coef: f64,
        deg: Vec<f64>,
        deg_pow: Vec<f64>,
        vertex: Vec<f64>,
    },
    /// Realized weights `f_n(λ_i, λ_j, a_ij)` over the upper triangle.
    Dense {
        pair: Vec<f64>,
        vertex: Vec<f64>,
    },
}

/// Per-pair and per-vertex weights for the empirical risk.
///
/// Formula-based weights are evaluated lazily in O(1) per pair from
/// per-vertex degree values.
#[derive(Debug, Clone)]
pub struct RiskWeights {
    pub scheme: SchemeConfig,
    pub source: WeightSource,
    n: Option<usize>,
    repr: Repr,
}

impl RiskWeights {
    /// Vertex count the weights were built for; `None` for latent-free constant weights.
    pub fn n(&self) -> Option<usize> {
        self.n
    }

    /// `f_n(λ_i, λ_j, a)` evaluated with label `edge`.
    ///
    /// Monte Carlo weights only exist for the realized label, which they return for either value.
    #[inline]
    pub fn pair_weight(&self, i: usize, j: usize, edge: bool) -> f64 {
        match &self.repr {
            Repr::Constant { pair, .. } => *pair,
            Repr::Latent { pos, neg_coef, deg, deg_pow, .. } => {
                if edge {
                    *pos
                } else {
                    neg_coef * (deg_pow[i] * deg[j] + deg[i] * deg_pow[j])
                }
            }
            Repr::Dense { pair, .. } => {
                if i == j {
                    0.0
                } else {
                    pair[tri_index(self.n.unwrap_or(0), i, j)]
                }
            }
        }
    }

    /// `f_n(λ_i, λ_j, a_ij)` for the realized adjacency.
    pub fn realized(&self, g: &LatentGraph, i: usize, j: usize) -> f64 {
        self.pair_weight(i, j, g.has_edge(i, j))
    }

    /// `g̃_n(λ_i)`.
    #[inline]
    pub fn vertex_weight(&self, i: usize) -> f64 {
        match &self.repr {
            Repr::Constant { vertex, .. } => *vertex,
            Repr::Latent { vertex, .. } | Repr::Dense { vertex, .. } => vertex[i],
        }
    }

    /// Checks the weights can be used with `g`.
    pub fn check_graph(&self, g: &LatentGraph) -> Result<()> {
        match self.n {
            Some(n) if n != g.n() => Err(Error::DimensionMismatch { expected: n, got: g.n() }),
            _ => Ok(()),
        }
    }

    /// Eager realized weights over the upper triangle (`n ≤ 4000`).
    pub fn densify(&self, g: &LatentGraph) -> Result<RiskWeights> {
        self.check_graph(g)?;
        let n = g.n();
        if n > 4000 {
            return Err(Error::InvalidArgument(format!("dense weights limited to n <= 4000, got {n}")));
        }
        let mut pair = vec![0.0; n * (n - 1) / 2];
        for i in 0..n {
            for j in (i + 1)..n {
                pair[tri_index(n, i, j)] = self.realized(g, i, j);
            }
        }
        let vertex = (0..n).map(|i| self.vertex_weight(i)).collect();
        Ok(RiskWeights {
            scheme: self.scheme,
            source: self.source,
            n: Some(n),
            repr: Repr::Dense { pair, vertex },
        })
    }

    /// Rescales Monte Carlo inclusion frequencies: `n²·P̂` per pair, `n·P̂` per vertex.
    pub fn from_monte_carlo(probs: &InclusionProbabilities, scheme: &SchemeConfig) -> RiskWeights {
        let n = probs.n();
        let nf = n as f64;
        let mut pair = vec![0.0; n * (n - 1) / 2];
        for i in 0..n {
            for j in (i + 1)..n {
                pair[tri_index(n, i, j)] = nf * nf * probs.pair_prob(i, j);
            }
        }
        let vertex = (0..n).map(|i| nf * probs.vertex_prob(i)).collect();
        RiskWeights {
            scheme: *scheme,
            source: WeightSource::MonteCarloRescaled,
            n: Some(n),
            repr: Repr::Dense { pair, vertex },
        }
    }
}

/// Uniform vertex sampling: `f_n ≡ k(k−1)`, `g̃_n ≡ k`.
pub fn weights_uniform_vertex(k: usize) -> RiskWeights {
    let kf = k as f64;
    RiskWeights {
        scheme: SchemeConfig::uniform_vertex(k),
        source: WeightSource::UniformVertexFormula,
        n: None,
        repr: Repr::Constant {
            pair: kf * (kf - 1.0),
            vertex: kf,
        },
    }
}

fn latent_weights(limits: &LimitFunctions, scheme: &SchemeConfig, latents: &[f64], source: WeightSource) -> RiskWeights {
    let deg: Vec<f64> = latents.iter().map(|&x| limits.deg.at(x)).collect();
    let deg_pow = deg.iter().map(|w| w.powf(limits.alpha)).collect();
    let vertex = latents.iter().map(|&x| limits.vertex(x)).collect();
    RiskWeights {
        scheme: *scheme,
        source,
        n: Some(latents.len()),
        repr: Repr::Latent {
            pos: limits.pos,
            neg_coef: limits.neg_coef,
            deg,
            deg_pow,
            vertex,
        },
    }
}

/// Uniform edge sampling with unigram negatives.
pub fn weights_uniform_edge(cfg: &SchemeConfig, deg: &DegreeFunction, rho: f64, latents: &[f64]) -> Result<RiskWeights> {
    if !matches!(cfg.kind, SchemeKind::UniformEdge { .. }) {
        return Err(Error::InvalidScheme("expected a uniform edge configuration".into()));
    }
    let limits = LimitFunctions::with_degree_function(deg.spec(), deg, cfg, rho)?;
    Ok(latent_weights(&limits, cfg, latents, WeightSource::UniformEdgeFormula))
}

/// Random walk sampling with unigram negatives.
pub fn weights_random_walk(cfg: &SchemeConfig, deg: &DegreeFunction, rho: f64, latents: &[f64]) -> Result<RiskWeights> {
    if !matches!(cfg.kind, SchemeKind::RandomWalk { .. }) {
        return Err(Error::InvalidScheme("expected a random walk configuration".into()));
    }
    let limits = LimitFunctions::with_degree_function(deg.spec(), deg, cfg, rho)?;
    Ok(latent_weights(&limits, cfg, latents, WeightSource::RandomWalkFormula))
}

/// Formula weights for whichever scheme `cfg` names, evaluated at the graph's latents.
pub fn formula_weights(spec: &GraphonSpec, cfg: &SchemeConfig, g: &LatentGraph) -> Result<RiskWeights> {
    let latents = g.latents().ok_or(Error::MissingLatents("formula weights"))?;
    match cfg.kind {
        SchemeKind::UniformVertex { k } => {
            let mut w = weights_uniform_vertex(k);
            w.scheme = *cfg;
            Ok(w)
        }
        SchemeKind::UniformEdge { alpha, .. } | SchemeKind::RandomWalk { alpha, .. } => {
            let deg = degree_function(spec, &[1.0, alpha], DEFAULT_QUADRATURE_POINTS)?;
            if matches!(cfg.kind, SchemeKind::UniformEdge { .. }) {
                weights_uniform_edge(cfg, &deg, g.rho(), latents)
            } else {
                weights_random_walk(cfg, &deg, g.rho(), latents)
            }
        }
    }
}
