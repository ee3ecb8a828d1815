//! Subsampling schemes: uniform vertex, uniform edge and random walk, the
//! latter two with unigram negative sampling.

use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graphon::LatentGraph;
use crate::rng::{self, domain};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SchemeKind {
    /// Induced subgraph on `k` vertices drawn without replacement.
    UniformVertex { k: usize },
    /// `k` edges without replacement, `l` unigram negatives per sampled vertex.
    UniformEdge { k: usize, l: usize, alpha: f64 },
    /// A `k`-step walk from stationarity, `l` unigram negatives per path vertex.
    RandomWalk { k: usize, l: usize, alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "kebab-case")]
pub enum UnigramBackend {
    /// `deg(v)^α`.
    #[default]
    DegreePower,
    /// `(1 − C(m − deg v, k)/C(m, k))^α`; uniform edge sampling only.
    ExactCombinatorial,
    /// Monte Carlo estimate of `P(v ∈ V(S₀) | G)^α`.
    MonteCarlo { reps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    #[serde(flatten)]
    pub kind: SchemeKind,
    #[serde(default)]
    pub unigram: UnigramBackend,
}

impl SchemeConfig {
    pub fn uniform_vertex(k: usize) -> Self {
        SchemeConfig { kind: SchemeKind::UniformVertex { k }, unigram: UnigramBackend::default() }
    }

    pub fn uniform_edge(k: usize, l: usize, alpha: f64) -> Self {
        SchemeConfig { kind: SchemeKind::UniformEdge { k, l, alpha }, unigram: UnigramBackend::default() }
    }

    pub fn random_walk(k: usize, l: usize, alpha: f64) -> Self {
        SchemeConfig { kind: SchemeKind::RandomWalk { k, l, alpha }, unigram: UnigramBackend::default() }
    }

    pub fn with_unigram(mut self, unigram: UnigramBackend) -> Self {
        self.unigram = unigram;
        self
    }

    /// Graph-independent checks.
    pub fn validate(&self) -> Result<()> {
        let (k, alpha) = match self.kind {
            SchemeKind::UniformVertex { k } => (k, None),
            SchemeKind::UniformEdge { k, alpha, .. } | SchemeKind::RandomWalk { k, alpha, .. } => (k, Some(alpha)),
        };
        if k < 1 {
            return Err(Error::InvalidScheme("k must be >= 1".into()));
        }
        if let Some(a) = alpha {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::InvalidScheme(format!("alpha must be > 0, got {a}")));
            }
        }
        if let (SchemeKind::RandomWalk { .. }, UnigramBackend::ExactCombinatorial) = (self.kind, self.unigram) {
            return Err(Error::InvalidScheme(
                "exact combinatorial unigram weights exist only for uniform edge sampling".into(),
            ));
        }
        if let UnigramBackend::MonteCarlo { reps: 0 } = self.unigram {
            return Err(Error::InvalidScheme("Monte Carlo unigram backend needs reps >= 1".into()));
        }
        Ok(())
    }

    /// Checks that depend on the graph (`k ≤ n`, `k ≤ edge_count`, walks need an edge).
    pub fn validate_for(&self, g: &LatentGraph) -> Result<()> {
        self.validate()?;
        match self.kind {
            SchemeKind::UniformVertex { k } if k > g.n() => Err(Error::InvalidScheme(format!(
                "uniform vertex sampling needs k <= n, got k = {k}, n = {}",
                g.n()
            ))),
            SchemeKind::UniformEdge { k, .. } if k > g.edge_count() => Err(Error::InvalidScheme(format!(
                "uniform edge sampling needs k <= edge_count, got k = {k}, edges = {}",
                g.edge_count()
            ))),
            SchemeKind::RandomWalk { .. } if g.edge_count() == 0 => {
                Err(Error::InvalidScheme("random walk sampling needs at least one edge".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn negatives_per_vertex(&self) -> usize {
        match self.kind {
            SchemeKind::UniformVertex { .. } => 0,
            SchemeKind::UniformEdge { l, .. } | SchemeKind::RandomWalk { l, .. } => l,
        }
    }
}

/// A vertex set with positive (edge) and negative (non-edge) unordered pairs.
///
/// All collections are sorted and deduplicated; pairs are stored as `(i, j)` with `i < j`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Subsample {
    pub vertices: Vec<u32>,
    pub positives: Vec<(u32, u32)>,
    pub negatives: Vec<(u32, u32)>,
}

fn ordered(u: u32, v: u32) -> (u32, u32) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl Subsample {
    fn finish(mut vertices: Vec<u32>, mut positives: Vec<(u32, u32)>, mut negatives: Vec<(u32, u32)>) -> Self {
        for (a, b) in positives.iter_mut().chain(negatives.iter_mut()) {
            if *a > *b {
                std::mem::swap(a, b);
            }
        }
        positives.sort_unstable();
        positives.dedup();
        negatives.sort_unstable();
        negatives.dedup();
        vertices.extend(positives.iter().chain(&negatives).flat_map(|&(a, b)| [a, b]));
        vertices.sort_unstable();
        vertices.dedup();
        Subsample { vertices, positives, negatives }
    }

    /// Checks the structural invariants against the source graph.
    pub fn check(&self, g: &LatentGraph) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        for &(i, j) in &self.positives {
            if i >= j || !g.has_edge(i as usize, j as usize) {
                return bad(format!("positive pair ({i},{j}) is not an edge"));
            }
        }
        for &(i, j) in &self.negatives {
            if i >= j || g.has_edge(i as usize, j as usize) {
                return bad(format!("negative pair ({i},{j}) is an edge or self-pair"));
            }
        }
        for &(i, j) in self.positives.iter().chain(&self.negatives) {
            if self.vertices.binary_search(&i).is_err() || self.vertices.binary_search(&j).is_err() {
                return bad(format!("pair ({i},{j}) has an endpoint outside the vertex set"));
            }
        }
        if self.positives.iter().any(|p| self.negatives.binary_search(p).is_ok()) {
            return bad("a pair is both positive and negative".into());
        }
        Ok(())
    }

    /// Labeled pair list, one `u v 1` (positive) or `u v 0` (negative) per line.
    pub fn pair_text(&self) -> String {
        let mut s = String::new();
        for &(u, v) in &self.positives {
            let _ = writeln!(s, "{u} {v} 1");
        }
        for &(u, v) in &self.negatives {
            let _ = writeln!(s, "{u} {v} 0");
        }
        s
    }
}

/// Unigram weights for negative sampling (unnormalized).
pub fn unigram_weights(g: &LatentGraph, cfg: &SchemeConfig, seed: u64) -> Result<Vec<f64>> {
    cfg.validate()?;
    let (k, alpha) = match cfg.kind {
        SchemeKind::UniformVertex { .. } => {
            return Err(Error::InvalidScheme("uniform vertex sampling draws no negatives".into()))
        }
        SchemeKind::UniformEdge { k, alpha, .. } | SchemeKind::RandomWalk { k, alpha, .. } => (k, alpha),
    };
    match cfg.unigram {
        UnigramBackend::DegreePower => Ok((0..g.n())
            .map(|v| match g.degree(v) {
                0 => 0.0,
                d => (d as f64).powf(alpha),
            })
            .collect()),
        UnigramBackend::ExactCombinatorial => {
            let m = g.edge_count();
            Ok((0..g.n())
                .map(|v| {
                    let free = m - g.degree(v);
                    // C(m - deg, k) / C(m, k) = prod_{t<k} (m - deg - t) / (m - t)
                    let mut miss = 1.0;
                    for t in 0..k {
                        if free <= t {
                            miss = 0.0;
                            break;
                        }
                        miss *= (free - t) as f64 / (m - t) as f64;
                    }
                    (1.0 - miss).max(0.0).powf(alpha)
                })
                .collect())
        }
        UnigramBackend::MonteCarlo { reps } => {
            cfg.validate_for(g)?;
            let mut sampler = Sampler::positives_only(g, cfg)?;
            let mut counts = vec![0u32; g.n()];
            let mut seen = Vec::new();
            for r in 0..reps {
                let mut rng = rng::stream(seed, domain::UNIGRAM, r as u64);
                seen.clear();
                sampler.base_vertices(&mut rng, &mut seen);
                seen.sort_unstable();
                seen.dedup();
                for &v in &seen {
                    counts[v as usize] += 1;
                }
            }
            Ok(counts
                .iter()
                .map(|&c| (c as f64 / reps as f64).powf(alpha))
                .collect())
        }
    }
}

/// Reusable sampler holding per-graph precomputation (edge list, unigram table).
///
/// Each draw is a pure function of the supplied RNG: index scratch arrays
/// are restored after every partial Fisher–Yates pass.
pub struct Sampler<'g> {
    g: &'g LatentGraph,
    cfg: SchemeConfig,
    edges: Vec<(u32, u32)>,
    perm: Vec<u32>,
    unigram: Option<(WeightedIndex<f64>, Vec<f64>, f64)>,
}

impl<'g> Sampler<'g> {
    pub fn new(g: &'g LatentGraph, cfg: &SchemeConfig, seed: u64) -> Result<Self> {
        let mut s = Self::positives_only(g, cfg)?;
        if cfg.negatives_per_vertex() > 0 {
            let w = unigram_weights(g, cfg, rng::child_seed(seed, domain::UNIGRAM, 0))?;
            let total: f64 = w.iter().sum();
            let idx = WeightedIndex::new(&w)
                .map_err(|e| Error::InvalidScheme(format!("unigram weights unusable: {e}")))?;
            s.unigram = Some((idx, w, total));
        }
        Ok(s)
    }

    fn positives_only(g: &'g LatentGraph, cfg: &SchemeConfig) -> Result<Self> {
        cfg.validate_for(g)?;
        let edges: Vec<(u32, u32)> = match cfg.kind {
            SchemeKind::UniformVertex { .. } => Vec::new(),
            _ => g.edges().map(|(u, v)| (u as u32, v as u32)).collect(),
        };
        let perm = match cfg.kind {
            SchemeKind::UniformVertex { .. } => (0..g.n() as u32).collect(),
            SchemeKind::UniformEdge { .. } => (0..edges.len() as u32).collect(),
            SchemeKind::RandomWalk { .. } => Vec::new(),
        };
        Ok(Sampler { g, cfg: *cfg, edges, perm, unigram: None })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    /// Partial Fisher–Yates: the first `k` entries of `perm` after the pass,
    /// with `perm` restored to its prior state afterwards.
    fn choose(&mut self, k: usize, rng: &mut ChaCha8Rng, out: &mut Vec<u32>) {
        let len = self.perm.len();
        let mut swaps = Vec::with_capacity(k);
        for i in 0..k {
            let j = rng.random_range(i..len);
            self.perm.swap(i, j);
            swaps.push(j);
            out.push(self.perm[i]);
        }
        for (i, &j) in swaps.iter().enumerate().rev() {
            self.perm.swap(i, j);
        }
    }

    fn walk(&self, k: usize, rng: &mut ChaCha8Rng, path: &mut Vec<u32>) {
        // Stationary start: a uniform edge endpoint has probability deg(v)/2m.
        let (a, b) = self.edges[rng.random_range(0..self.edges.len())];
        let mut cur = if rng.random::<bool>() { a } else { b };
        path.push(cur);
        for _ in 0..k {
            let nb = self.g.neighbors(cur as usize);
            cur = nb[rng.random_range(0..nb.len())];
            path.push(cur);
        }
    }

    /// Vertices of the positive part `S₀` with multiplicity (walk positions `i ≤ k`).
    fn base_vertices(&mut self, rng: &mut ChaCha8Rng, out: &mut Vec<u32>) {
        match self.cfg.kind {
            SchemeKind::UniformVertex { k } => self.choose(k, rng, out),
            SchemeKind::UniformEdge { k, .. } => {
                let mut idx = Vec::with_capacity(k);
                self.choose(k, rng, &mut idx);
                for i in idx {
                    let (a, b) = self.edges[i as usize];
                    out.push(a);
                    out.push(b);
                }
            }
            SchemeKind::RandomWalk { k, .. } => {
                self.walk(k, rng, out);
                out.pop();
            }
        }
    }

    fn draw_negatives(&self, sources: &[u32], l: usize, rng: &mut ChaCha8Rng, out: &mut Vec<(u32, u32)>) {
        let Some((dist, w, total)) = &self.unigram else { return };
        for &u in sources {
            // Rejection of self-draws never terminates if u carries all the mass.
            if *total - w[u as usize] <= 0.0 {
                continue;
            }
            for _ in 0..l {
                let v = loop {
                    let v = dist.sample(rng) as u32;
                    if v != u {
                        break v;
                    }
                };
                if !self.g.has_edge(u as usize, v as usize) {
                    out.push(ordered(u, v));
                }
            }
        }
    }

    pub fn draw(&mut self, rng: &mut ChaCha8Rng) -> Subsample {
        match self.cfg.kind {
            SchemeKind::UniformVertex { k } => {
                let mut vs = Vec::with_capacity(k);
                self.choose(k, rng, &mut vs);
                vs.sort_unstable();
                let mut pos = Vec::new();
                let mut neg = Vec::new();
                for (a, &u) in vs.iter().enumerate() {
                    for &v in &vs[a + 1..] {
                        if self.g.has_edge(u as usize, v as usize) {
                            pos.push((u, v));
                        } else {
                            neg.push((u, v));
                        }
                    }
                }
                Subsample::finish(vs, pos, neg)
            }
            SchemeKind::UniformEdge { k, l, .. } => {
                let mut idx = Vec::with_capacity(k);
                self.choose(k, rng, &mut idx);
                let pos: Vec<(u32, u32)> = idx.iter().map(|&i| self.edges[i as usize]).collect();
                let mut sources: Vec<u32> = pos.iter().flat_map(|&(a, b)| [a, b]).collect();
                sources.sort_unstable();
                sources.dedup();
                let mut neg = Vec::new();
                self.draw_negatives(&sources, l, rng, &mut neg);
                Subsample::finish(Vec::new(), pos, neg)
            }
            SchemeKind::RandomWalk { k, l, .. } => {
                let mut path = Vec::with_capacity(k + 1);
                self.walk(k, rng, &mut path);
                let pos: Vec<(u32, u32)> = path.windows(2).map(|w| ordered(w[0], w[1])).collect();
                let mut neg = Vec::new();
                self.draw_negatives(&path, l, rng, &mut neg);
                Subsample::finish(path, pos, neg)
            }
        }
    }
}

fn sample_once(g: &LatentGraph, cfg: &SchemeConfig, seed: u64) -> Result<Subsample> {
    let mut sampler = Sampler::new(g, cfg, seed)?;
    let mut rng = rng::stream(seed, domain::SUBSAMPLE, 0);
    Ok(sampler.draw(&mut rng))
}

pub fn uniform_vertex_sample(g: &LatentGraph, k: usize, seed: u64) -> Result<Subsample> {
    sample_once(g, &SchemeConfig::uniform_vertex(k), seed)
}

pub fn uniform_edge_sample(g: &LatentGraph, cfg: &SchemeConfig, seed: u64) -> Result<Subsample> {
    if !matches!(cfg.kind, SchemeKind::UniformEdge { .. }) {
        return Err(Error::InvalidScheme("expected a uniform edge configuration".into()));
    }
    sample_once(g, cfg, seed)
}

pub fn random_walk_sample(g: &LatentGraph, cfg: &SchemeConfig, seed: u64) -> Result<Subsample> {
    if !matches!(cfg.kind, SchemeKind::RandomWalk { .. }) {
        return Err(Error::InvalidScheme("expected a random walk configuration".into()));
    }
    sample_once(g, cfg, seed)
}

/// Draws one subsample with whichever scheme `cfg` names.
pub fn sample(g: &LatentGraph, cfg: &SchemeConfig, seed: u64) -> Result<Subsample> {
    sample_once(g, cfg, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum Provenance {
    MonteCarlo { reps: usize },
    Formula,
}

/// Conditional inclusion probabilities given the graph.
///
/// Pair probabilities are stored densely over the upper triangle.
#[derive(Debug, Clone)]
pub struct InclusionProbabilities {
    n: usize,
    reps: usize,
    pair_counts: Vec<u32>,
    vertex_counts: Vec<u32>,
    pub provenance: Provenance,
}

#[inline]
pub(crate) fn tri_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

impl InclusionProbabilities {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn reps(&self) -> usize {
        self.reps
    }

    /// `P((i, j) ∈ P ∪ N | G)`; zero for `i == j`.
    pub fn pair_prob(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        self.pair_counts[tri_index(self.n, i, j)] as f64 / self.reps as f64
    }

    pub fn pair_count(&self, i: usize, j: usize) -> u32 {
        if i == j {
            0
        } else {
            self.pair_counts[tri_index(self.n, i, j)]
        }
    }

    /// `P(i ∈ V(S) | G)`.
    pub fn vertex_prob(&self, i: usize) -> f64 {
        self.vertex_counts[i] as f64 / self.reps as f64
    }

    pub fn vertex_count(&self, i: usize) -> u32 {
        self.vertex_counts[i]
    }
}

/// Monte Carlo inclusion frequencies over `reps` independent draws.
///
/// Replicate `r` uses its own stream derived from `(seed, r)`; counts are
/// integers, so the result is exactly reproducible.
pub fn mc_inclusion_probabilities(
    g: &LatentGraph,
    cfg: &SchemeConfig,
    reps: usize,
    seed: u64,
) -> Result<InclusionProbabilities> {
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be >= 1".into()));
    }
    let n = g.n();
    let mut sampler = Sampler::new(g, cfg, seed)?;
    let mut pair_counts = vec![0u32; n * (n - 1) / 2];
    let mut vertex_counts = vec![0u32; n];
    for r in 0..reps {
        let mut rng = rng::stream(seed, domain::MONTE_CARLO, r as u64);
        let s = sampler.draw(&mut rng);
        for &v in &s.vertices {
            vertex_counts[v as usize] += 1;
        }
        // Disjoint sorted sets, so each pair is counted at most once.
        for &(i, j) in s.positives.iter().chain(&s.negatives) {
            pair_counts[tri_index(n, i as usize, j as usize)] += 1;
        }
    }
    Ok(InclusionProbabilities {
        n,
        reps,
        pair_counts,
        vertex_counts,
        provenance: Provenance::MonteCarlo { reps },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphon::{sample_graph, GraphonSpec};
    use proptest::prelude::*;

    fn er(n: usize, p: f64, seed: u64) -> LatentGraph {
        sample_graph(&GraphonSpec::constant(p).unwrap(), n, seed).unwrap()
    }

    fn star(n: usize) -> LatentGraph {
        LatentGraph::from_edges(n, (1..n).map(|v| (0, v)), None, 1.0).unwrap()
    }

    #[test]
    fn uniform_vertex_edge_cases() {
        let g = er(30, 0.3, 1);
        let all = uniform_vertex_sample(&g, 30, 5).unwrap();
        assert_eq!(all.vertices.len(), 30);
        assert_eq!(all.positives.len(), g.edge_count());
        assert_eq!(all.negatives.len(), 30 * 29 / 2 - g.edge_count());
        let one = uniform_vertex_sample(&g, 1, 5).unwrap();
        assert_eq!(one.vertices.len(), 1);
        assert!(one.positives.is_empty() && one.negatives.is_empty());
        assert!(uniform_vertex_sample(&g, 31, 5).is_err());
    }

    #[test]
    fn uniform_edge_edge_cases() {
        let g = er(40, 0.3, 2);
        let s = uniform_edge_sample(&g, &SchemeConfig::uniform_edge(10, 0, 1.0), 3).unwrap();
        assert!(s.negatives.is_empty());
        assert_eq!(s.positives.len(), 10);
        let mut ends: Vec<u32> = s.positives.iter().flat_map(|&(a, b)| [a, b]).collect();
        ends.sort_unstable();
        ends.dedup();
        assert_eq!(ends, s.vertices);
        let m = g.edge_count();
        let full = uniform_edge_sample(&g, &SchemeConfig::uniform_edge(m, 2, 1.0), 3).unwrap();
        assert_eq!(full.positives.len(), m);
        assert!(uniform_edge_sample(&g, &SchemeConfig::uniform_edge(m + 1, 2, 1.0), 3).is_err());
    }

    #[test]
    fn random_walk_edge_cases() {
        let g = er(40, 0.3, 4);
        let s = random_walk_sample(&g, &SchemeConfig::random_walk(1, 3, 1.0), 8).unwrap();
        assert_eq!(s.positives.len(), 1);
        let pair = LatentGraph::from_edges(2, [(0, 1)], None, 1.0).unwrap();
        let s = random_walk_sample(&pair, &SchemeConfig::random_walk(5, 0, 1.0), 1).unwrap();
        assert_eq!(s.positives, vec![(0, 1)]);
        assert_eq!(s.vertices, vec![0, 1]);
        let empty = LatentGraph::from_edges(3, [], None, 1.0).unwrap();
        assert!(random_walk_sample(&empty, &SchemeConfig::random_walk(2, 1, 1.0), 1).is_err());
    }

    #[test]
    fn walks_skip_isolated_vertices() {
        let g = LatentGraph::from_edges(5, [(0, 1), (1, 2), (2, 0)], None, 1.0).unwrap();
        let probs = mc_inclusion_probabilities(&g, &SchemeConfig::random_walk(4, 2, 1.0), 500, 3).unwrap();
        assert_eq!(probs.vertex_prob(3), 0.0);
        assert_eq!(probs.vertex_prob(4), 0.0);
    }

    #[test]
    fn unigram_examples() {
        let g = star(6);
        let w = unigram_weights(&g, &SchemeConfig::uniform_edge(1, 1, 1.0), 0).unwrap();
        assert_eq!(w, vec![5.0, 1.0, 1.0, 1.0, 1.0, 1.0]);

        let ring = LatentGraph::from_edges(8, (0..8).map(|v| (v, (v + 1) % 8)), None, 1.0).unwrap();
        let w = unigram_weights(&ring, &SchemeConfig::random_walk(3, 1, 0.75), 0).unwrap();
        assert!(w.iter().all(|&x| (x - w[0]).abs() < 1e-15 && x > 0.0));

        let m = ring.edge_count();
        let exact = SchemeConfig::uniform_edge(m, 1, 1.0).with_unigram(UnigramBackend::ExactCombinatorial);
        assert!(unigram_weights(&ring, &exact, 0).unwrap().iter().all(|&x| x == 1.0));

        let bad = SchemeConfig::random_walk(3, 1, 1.0).with_unigram(UnigramBackend::ExactCombinatorial);
        assert!(unigram_weights(&ring, &bad, 0).is_err());
        assert!(unigram_weights(&ring, &SchemeConfig::uniform_vertex(2), 0).is_err());
    }

    #[test]
    fn exact_combinatorial_matches_monte_carlo() {
        let g = er(30, 0.2, 6);
        let k = 12;
        let exact = unigram_weights(
            &g,
            &SchemeConfig::uniform_edge(k, 1, 1.0).with_unigram(UnigramBackend::ExactCombinatorial),
            0,
        )
        .unwrap();
        let reps = 20_000;
        let mc = unigram_weights(
            &g,
            &SchemeConfig::uniform_edge(k, 1, 1.0).with_unigram(UnigramBackend::MonteCarlo { reps }),
            11,
        )
        .unwrap();
        for (e, m) in exact.iter().zip(&mc) {
            let se = (e * (1.0 - e) / reps as f64).sqrt();
            assert!((e - m).abs() <= 4.0 * se + 1e-12, "{e} vs {m}");
        }
    }

    #[test]
    fn mc_probability_edge_cases() {
        let g = er(25, 0.4, 7);
        let full = mc_inclusion_probabilities(&g, &SchemeConfig::uniform_vertex(25), 20, 1).unwrap();
        assert!((0..25).all(|v| full.vertex_prob(v) == 1.0));
        let once = mc_inclusion_probabilities(&g, &SchemeConfig::random_walk(6, 2, 1.0), 1, 1).unwrap();
        for i in 0..25 {
            assert!(matches!(once.vertex_prob(i), p if p == 0.0 || p == 1.0));
            for j in 0..25 {
                assert!(matches!(once.pair_prob(i, j), p if p == 0.0 || p == 1.0));
            }
        }
        let a = mc_inclusion_probabilities(&g, &SchemeConfig::random_walk(6, 2, 1.0), 50, 9).unwrap();
        let b = mc_inclusion_probabilities(&g, &SchemeConfig::random_walk(6, 2, 1.0), 50, 9).unwrap();
        assert_eq!(a.pair_counts, b.pair_counts);
        assert_eq!(a.vertex_counts, b.vertex_counts);
    }

    #[test]
    fn uniform_vertex_frequencies_match_hypergeometric() {
        let g = er(200, 0.5, 12);
        let (n, k, reps): (f64, f64, usize) = (200.0, 20.0, 100_000);
        let probs = mc_inclusion_probabilities(&g, &SchemeConfig::uniform_vertex(20), reps, 5).unwrap();
        let pair = k * (k - 1.0) / (n * (n - 1.0));
        assert!((pair - 0.009547).abs() < 1e-6);
        let pair_se = (pair * (1.0 - pair) / reps as f64).sqrt();
        let mut outside = 0usize;
        let mut total = 0usize;
        for i in 0..200 {
            for j in (i + 1)..200 {
                total += 1;
                if (probs.pair_prob(i, j) - pair).abs() > 3.0 * pair_se {
                    outside += 1;
                }
            }
        }
        // About 0.27% of pairs fall outside 3 SE under exact binomial noise.
        assert!((outside as f64) < 0.01 * total as f64, "{outside} of {total}");
        let vert = k / n;
        let vert_se = (vert * (1.0 - vert) / reps as f64).sqrt();
        for v in 0..200 {
            assert!((probs.vertex_prob(v) - vert).abs() <= 4.0 * vert_se, "vertex {v}");
        }
    }

    #[test]
    fn walk_visits_follow_stationary_distribution() {
        let g = er(60, 0.15, 13);
        let cfg = SchemeConfig::random_walk(2000, 0, 1.0);
        let sampler = Sampler::new(&g, &cfg, 1).unwrap();
        let mut visits = vec![0.0; g.n()];
        let mut total = 0.0;
        for r in 0..20 {
            let mut rng = rng::stream(3, domain::SUBSAMPLE, r);
            let mut path = Vec::new();
            sampler.walk(2000, &mut rng, &mut path);
            for v in path {
                visits[v as usize] += 1.0;
                total += 1.0;
            }
        }
        let two_m = 2.0 * g.edge_count() as f64;
        let mut chi2 = 0.0;
        let mut dof = 0.0;
        for v in 0..g.n() {
            let expect = total * g.degree(v) as f64 / two_m;
            if expect > 0.0 {
                chi2 += (visits[v] - expect).powi(2) / expect;
                dof += 1.0;
            }
        }
        // Walk samples are autocorrelated, so allow a generous multiple of the dof.
        assert!(chi2 / dof < 5.0, "chi2/dof = {}", chi2 / dof);
    }

    #[test]
    fn degree_power_unigram_tracks_degree_function() {
        let spec = GraphonSpec::smooth_product(0.2, 0.6).unwrap();
        let g = sample_graph(&spec, 1500, 17).unwrap();
        let w = unigram_weights(&g, &SchemeConfig::random_walk(5, 5, 1.0), 0).unwrap();
        let lat = g.latents().unwrap();
        let bins = 5;
        let mut ratio_sum = vec![0.0; bins];
        let mut count = vec![0.0; bins];
        for v in 0..g.n() {
            let target = (g.n() - 1) as f64 * (0.2 + 0.3 * lat[v]);
            let b = ((lat[v] * bins as f64) as usize).min(bins - 1);
            ratio_sum[b] += w[v] / target;
            count[b] += 1.0;
        }
        for b in 0..bins {
            let r = ratio_sum[b] / count[b];
            assert!((r - 1.0).abs() < 0.1, "bin {b}: {r}");
        }
    }

    #[test]
    fn pair_text_format() {
        let s = Subsample::finish(vec![], vec![(2, 0)], vec![(1, 3)]);
        assert_eq!(s.pair_text(), "0 2 1\n1 3 0\n");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn subsample_invariants_hold(
            n in 4usize..40,
            p in 0.1f64..0.8,
            gseed in 0u64..1000,
            sseed in 0u64..1000,
            which in 0usize..3,
            k in 1usize..8,
            l in 0usize..4,
            alpha in 0.25f64..1.5,
        ) {
            let g = er(n, p, gseed);
            let cfg = match which {
                0 => SchemeConfig::uniform_vertex(k.min(n)),
                1 => SchemeConfig::uniform_edge(k, l, alpha),
                _ => SchemeConfig::random_walk(k, l, alpha),
            };
            match sample(&g, &cfg, sseed) {
                Ok(s) => prop_assert!(s.check(&g).is_ok()),
                Err(_) => prop_assert!(cfg.validate_for(&g).is_err()),
            }
        }
    }
}
