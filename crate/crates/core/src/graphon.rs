//! Graphon families, degree functions and latent-variable graph sampling.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::quadrature;
use crate::rng::{self, domain};
use crate::{Error, Result};

/// Default Simpson node count for smooth families.
pub const DEFAULT_QUADRATURE_POINTS: usize = 1025;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// `W(x, y) = p`.
    Constant { p: f64 },
    /// Piecewise constant on an `m × m` grid of equal-width cells.
    StepBlock { blocks: Vec<Vec<f64>> },
    /// `W(x, y) = a + b·x·y`.
    SmoothProduct { a: f64, b: f64 },
}

/// Rule producing the sparsity factor `ρ_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum Sparsity {
    Constant { rho: f64 },
    /// `ρ_n = min(1, c·(log n / n)^γ)` with `0 < γ < 1`.
    Decaying { c: f64, gamma: f64 },
}

impl Default for Sparsity {
    fn default() -> Self {
        Sparsity::Constant { rho: 1.0 }
    }
}

impl Sparsity {
    pub fn rho(&self, n: usize) -> f64 {
        match *self {
            Sparsity::Constant { rho } => rho,
            Sparsity::Decaying { c, gamma } => {
                let n = n.max(2) as f64;
                (c * (n.ln() / n).powf(gamma)).min(1.0)
            }
        }
    }
}

/// Hölder smoothness metadata `(β, L)`. Reported, never used in computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Holder {
    pub beta: f64,
    pub lipschitz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphonSpec {
    pub family: Family,
    pub sparsity: Sparsity,
    pub holder: Holder,
}

fn cell(x: f64, m: usize) -> usize {
    ((x * m as f64) as usize).min(m - 1)
}

impl GraphonSpec {
    /// Builds and validates a spec; Hölder metadata is filled from the family.
    pub fn new(family: Family, sparsity: Sparsity) -> Result<Self> {
        let holder = match &family {
            Family::Constant { .. } => Holder { beta: 1.0, lipschitz: 0.0 },
            // Step graphons are only piecewise smooth; the exponent is nominal.
            Family::StepBlock { .. } => Holder { beta: 1.0, lipschitz: 0.0 },
            Family::SmoothProduct { b, .. } => Holder {
                beta: 1.0,
                lipschitz: std::f64::consts::SQRT_2 * b.abs(),
            },
        };
        let spec = GraphonSpec { family, sparsity, holder };
        spec.validate()?;
        Ok(spec)
    }

    pub fn constant(p: f64) -> Result<Self> {
        Self::new(Family::Constant { p }, Sparsity::default())
    }

    pub fn step_block(blocks: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(Family::StepBlock { blocks }, Sparsity::default())
    }

    pub fn smooth_product(a: f64, b: f64) -> Result<Self> {
        Self::new(Family::SmoothProduct { a, b }, Sparsity::default())
    }

    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        self.sparsity = Sparsity::Constant { rho };
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if let Family::StepBlock { blocks } = &self.family {
            let m = blocks.len();
            if m == 0 {
                return Err(Error::InvalidGraphon("step-block matrix is empty".into()));
            }
            for (i, row) in blocks.iter().enumerate() {
                if row.len() != m {
                    return Err(Error::InvalidGraphon(format!(
                        "step-block row {i} has {} entries, expected {m}",
                        row.len()
                    )));
                }
                for (j, v) in row.iter().enumerate() {
                    if (v - blocks[j][i]).abs() > 1e-12 {
                        return Err(Error::InvalidGraphon(format!(
                            "step-block matrix not symmetric at ({i},{j})"
                        )));
                    }
                }
            }
        }
        let (lo, hi) = self.bounds();
        if !(lo > 0.0) || !(hi < 1.0) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidGraphon(format!(
                "graphon must satisfy 0 < C <= W <= C' < 1, found range [{lo}, {hi}]"
            )));
        }
        match self.sparsity {
            Sparsity::Constant { rho } => {
                if !(rho > 0.0 && rho <= 1.0) {
                    return Err(Error::InvalidGraphon(format!("rho must lie in (0, 1], got {rho}")));
                }
            }
            Sparsity::Decaying { c, gamma } => {
                if !(c > 0.0) {
                    return Err(Error::InvalidGraphon(format!("decaying sparsity needs c > 0, got {c}")));
                }
                if !(gamma > 0.0 && gamma < 1.0) {
                    return Err(Error::InvalidGraphon(format!(
                        "decaying sparsity needs 0 < gamma < 1, got {gamma}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks `ρ_n·C' < 1` for a concrete vertex count.
    pub fn check_n(&self, n: usize) -> Result<f64> {
        let rho = self.sparsity.rho(n);
        let (_, hi) = self.bounds();
        if !(rho * hi < 1.0) || !(rho > 0.0) {
            return Err(Error::InvalidGraphon(format!(
                "rho_n * C' = {} must be < 1 at n = {n}",
                rho * hi
            )));
        }
        Ok(rho)
    }

    /// `(C, C')`: exact for constant and step families, a 257×257 grid scan otherwise.
    pub fn bounds(&self) -> (f64, f64) {
        match &self.family {
            Family::Constant { p } => (*p, *p),
            Family::StepBlock { blocks } => blocks.iter().flatten().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), &v| (lo.min(v), hi.max(v)),
            ),
            Family::SmoothProduct { .. } => {
                let m = 256;
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for i in 0..=m {
                    for j in 0..=m {
                        let v = self.value(i as f64 / m as f64, j as f64 / m as f64);
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// `W(x, y)` without range checks.
    #[inline]
    pub fn value(&self, x: f64, y: f64) -> f64 {
        match &self.family {
            Family::Constant { p } => *p,
            Family::StepBlock { blocks } => {
                let m = blocks.len();
                blocks[cell(x, m)][cell(y, m)]
            }
            Family::SmoothProduct { a, b } => a + b * (x * y),
        }
    }

    /// `W(x, y)` for `x, y ∈ [0, 1]`.
    pub fn evaluate(&self, x: f64, y: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::OutOfRange { x, y });
        }
        Ok(self.value(x, y))
    }

    /// Breakpoints where `W` may be discontinuous, including 0 and 1.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.family {
            Family::StepBlock { blocks } => {
                let m = blocks.len();
                (0..=m).map(|c| c as f64 / m as f64).collect()
            }
            _ => vec![0.0, 1.0],
        }
    }

    /// Row averages of the closed-form families, one entry per block.
    fn closed_rows(&self) -> Option<Vec<f64>> {
        match &self.family {
            Family::Constant { p } => Some(vec![*p]),
            Family::StepBlock { blocks } => Some(
                blocks
                    .iter()
                    .map(|row| row.iter().sum::<f64>() / row.len() as f64)
                    .collect(),
            ),
            Family::SmoothProduct { .. } => None,
        }
    }
}

/// Integration rule on `[0, 1]` adapted to the family's breakpoints.
#[derive(Debug, Clone)]
struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Rule {
    fn for_spec(spec: &GraphonSpec, points: usize) -> Rule {
        let breaks = spec.breakpoints();
        if breaks.len() == 2 {
            let (nodes, weights) = quadrature::simpson(0.0, 1.0, points);
            return Rule { nodes, weights };
        }
        // Piecewise families: composite Gauss–Legendre aligned to the cells so
        // no node sits on a discontinuity.
        let pieces = breaks.len() - 1;
        let panels = points.div_ceil(5 * pieces).max(1);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in breaks.windows(2) {
            let h = (w[1] - w[0]) / panels as f64;
            for p in 0..panels {
                let a = w[0] + h * p as f64;
                for (x, wt) in quadrature::gauss_legendre5(a, a + h) {
                    nodes.push(x);
                    weights.push(wt);
                }
            }
        }
        Rule { nodes, weights }
    }
}

/// `λ ↦ W(λ, ·)` on a quadrature grid together with its moments `E_W(α)`.
#[derive(Debug, Clone)]
pub struct DegreeFunction {
    spec: GraphonSpec,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    weights: Vec<f64>,
    /// `(α, E_W(α))` for the requested exponents.
    pub moments: Vec<(f64, f64)>,
    /// True when closed forms are used (constant and step families).
    pub exact: bool,
    rows: Option<Vec<f64>>,
}

/// Degree function using closed forms where available and composite Simpson otherwise.
pub fn degree_function(spec: &GraphonSpec, alphas: &[f64], quadrature_points: usize) -> Result<DegreeFunction> {
    build_degree_function(spec, alphas, quadrature_points, false)
}

/// Degree function computed purely by quadrature, even for closed-form families.
pub fn degree_function_by_quadrature(
    spec: &GraphonSpec,
    alphas: &[f64],
    quadrature_points: usize,
) -> Result<DegreeFunction> {
    build_degree_function(spec, alphas, quadrature_points, true)
}

fn build_degree_function(
    spec: &GraphonSpec,
    alphas: &[f64],
    quadrature_points: usize,
    force_quadrature: bool,
) -> Result<DegreeFunction> {
    if quadrature_points < 2 {
        return Err(Error::InvalidArgument(format!(
            "quadrature_points must be >= 2, got {quadrature_points}"
        )));
    }
    spec.validate()?;
    let rule = Rule::for_spec(spec, quadrature_points);
    let rows = if force_quadrature { None } else { spec.closed_rows() };
    let values: Vec<f64> = match &rows {
        Some(r) => rule.nodes.iter().map(|&x| r[cell(x, r.len())]).collect(),
        None => rule
            .nodes
            .iter()
            .map(|&x| {
                rule.nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&y, w)| w * spec.value(x, y))
                    .sum()
            })
            .collect(),
    };
    let mut deg = DegreeFunction {
        spec: spec.clone(),
        grid: rule.nodes,
        values,
        weights: rule.weights,
        moments: Vec::new(),
        exact: rows.is_some(),
        rows,
    };
    deg.moments = alphas.iter().map(|&a| (a, deg.moment(a))).collect();
    Ok(deg)
}

impl DegreeFunction {
    pub fn spec(&self) -> &GraphonSpec {
        &self.spec
    }

    /// `W(λ, ·)`; linear interpolation between grid nodes for quadrature-based values.
    pub fn at(&self, lambda: f64) -> f64 {
        if let Some(rows) = &self.rows {
            return rows[cell(lambda, rows.len())];
        }
        let g = &self.grid;
        let idx = g.partition_point(|&x| x < lambda);
        if idx == 0 {
            return self.values[0];
        }
        if idx >= g.len() {
            return *self.values.last().unwrap();
        }
        let (x0, x1) = (g[idx - 1], g[idx]);
        let t = if x1 > x0 { (lambda - x0) / (x1 - x0) } else { 0.0 };
        self.values[idx - 1] * (1.0 - t) + self.values[idx] * t
    }

    /// `E_W(α) = ∫ W(λ, ·)^α dλ`.
    pub fn moment(&self, alpha: f64) -> f64 {
        match &self.rows {
            Some(rows) => rows.iter().map(|r| r.powf(alpha)).sum::<f64>() / rows.len() as f64,
            None => self
                .values
                .iter()
                .zip(&self.weights)
                .map(|(v, w)| w * v.powf(alpha))
                .sum(),
        }
    }

    /// `E_W = E_W(1)`.
    pub fn mean(&self) -> f64 {
        self.moment(1.0)
    }

    /// `T_n(λ) = ∫ (1 − ρ W(λ, y)) W(y, ·) dy`.
    pub fn tn(&self, rho: f64, lambda: f64) -> f64 {
        match (&self.rows, &self.spec.family) {
            (Some(rows), Family::Constant { p }) => (1.0 - rho * p) * rows[0],
            (Some(rows), Family::StepBlock { blocks }) => {
                let m = blocks.len();
                let r = &blocks[cell(lambda, m)];
                r.iter()
                    .zip(rows)
                    .map(|(b, deg)| (1.0 - rho * b) * deg)
                    .sum::<f64>()
                    / m as f64
            }
            _ => self
                .grid
                .iter()
                .zip(&self.values)
                .zip(&self.weights)
                .map(|((&y, deg), w)| w * (1.0 - rho * self.spec.value(lambda, y)) * deg)
                .sum(),
        }
    }
}

/// A simple undirected graph, optionally carrying latent positions.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGraph {
    n: usize,
    latents: Option<Vec<f64>>,
    neighbors: Vec<Vec<u32>>,
    rho: f64,
    edge_count: usize,
}

impl LatentGraph {
    /// Builds a graph from an edge iterator. Duplicates and self-loops are dropped.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        latents: Option<Vec<f64>>,
        rho: f64,
    ) -> Result<Self> {
        if let Some(l) = &latents {
            if l.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: l.len() });
            }
        }
        let mut neighbors = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidArgument(format!("edge ({u},{v}) out of range for n = {n}")));
            }
            if u == v {
                continue;
            }
            neighbors[u].push(v as u32);
            neighbors[v].push(u as u32);
        }
        let mut twice = 0;
        for nb in &mut neighbors {
            nb.sort_unstable();
            nb.dedup();
            twice += nb.len();
        }
        Ok(LatentGraph {
            n,
            latents,
            neighbors,
            rho,
            edge_count: twice / 2,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn latents(&self) -> Option<&[f64]> {
        self.latents.as_deref()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[v]
    }

    #[inline]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors[u].binary_search(&(v as u32)).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors.iter().enumerate().flat_map(|(u, nb)| {
            nb.iter()
                .filter(move |&&v| (v as usize) > u)
                .map(move |&v| (u, v as usize))
        })
    }

    /// Copy of the graph with the given edges removed (latents preserved).
    pub fn without_edges(&self, removed: &[(usize, usize)]) -> LatentGraph {
        let mut drop: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
        for &(u, v) in removed {
            drop.insert((u.min(v), u.max(v)));
        }
        let edges: Vec<(usize, usize)> = self.edges().filter(|e| !drop.contains(e)).collect();
        LatentGraph::from_edges(self.n, edges, self.latents.clone(), self.rho)
            .expect("edges of an existing graph are in range")
    }

    /// Edge list text: one `u v` line per edge, `u < v`, 0-indexed.
    pub fn edge_list_text(&self) -> String {
        let mut s = String::with_capacity(self.edge_count * 10);
        for (u, v) in self.edges() {
            let _ = writeln!(s, "{u} {v}");
        }
        s
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.edge_list_text())?;
        Ok(())
    }

    /// One latent per line, full round-trip precision.
    pub fn write_latents(&self, path: &Path) -> Result<()> {
        let latents = self.latents.as_ref().ok_or(Error::MissingLatents("latent export"))?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for l in latents {
            writeln!(f, "{l:?}")?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Draws `λ_i ~ U(0,1)` and independent edges `a_ij ~ Bern(ρ_n W(λ_i, λ_j))`.
///
/// Latents and each adjacency row use their own derived stream, so the
/// result depends only on `(spec, n, seed)`.
pub fn sample_graph(spec: &GraphonSpec, n: usize, seed: u64) -> Result<LatentGraph> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("sample_graph needs n >= 2, got {n}")));
    }
    spec.validate()?;
    let rho = spec.check_n(n)?;
    let mut lat_rng = rng::stream(seed, domain::LATENTS, 0);
    let latents: Vec<f64> = (0..n).map(|_| lat_rng.random::<f64>()).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        let mut row_rng = rng::stream(seed, domain::EDGES, i as u64);
        let li = latents[i];
        for (j, &lj) in latents.iter().enumerate().skip(i + 1) {
            if row_rng.random::<f64>() < rho * spec.value(li, lj) {
                edges.push((i, j));
            }
        }
    }
    LatentGraph::from_edges(n, edges, Some(latents), rho)
}
