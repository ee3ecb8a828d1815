//! Run manifests, edge-list ingestion and experiment orchestration.
//!
//! A manifest is a TOML file. Only `kind` and one of `[graphon]` / `[input]` are required:
//!
//! ```toml
//! kind = "verify-t1"
//!
//! [graphon]
//! family = "constant"
//! p = 0.8
//!
//! [scheme]
//! kind = "random-walk"
//! k = 10
//! l = 1
//! alpha = 1.0
//!
//! [train]
//! d = 2
//!
//! [experiment]
//! n = [200, 800]
//! seeds = [1, 2, 3, 4, 5]
//! xi = [0.0, 0.1]
//!
//! [[assert]]
//! metric = "gap[n=800,xi=0]"
//! op = "<"
//! than = "gap[n=200,xi=0]"
//! ```
//!
//! Every run writes `report.json`, one or more CSV tables, `metrics.csv` and
//! `stamp.json` into the output directory. Metrics are medians over seeds, keyed
//! `name[n=..,xi=..]`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::formulas::formula_weights;
use crate::graphon::{sample_graph, Family, GraphonSpec, LatentGraph, Sparsity};
use crate::harness::{
    link_prediction_eval, median, shrinkage_curve, verify_assumption1, verify_theorem1, verify_theorem2, ConvergenceConfig,
    CsvRows, SplitConfig, Stopwatch,
};
use crate::population::{discretize_weights, kernel_csv, kernel_trace_spectrum, minimize_psd, DEFAULT_KAPPA};
use crate::rng::{child_seed, domain};
use crate::sampler::{sample, SchemeConfig, SchemeKind};
use crate::trainer::{embedding_csv, gram_spectrum, train_full, train_sgd, Init, Optimizer, TrainConfig, DEFAULT_BOUND};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Generate,
    Sample,
    Train,
    Population,
    #[serde(rename = "verify-a1")]
    VerifyA1,
    #[serde(rename = "verify-t1")]
    VerifyT1,
    #[serde(rename = "verify-t2")]
    VerifyT2,
    Shrinkage,
    Linkpred,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Generate => "generate",
            ExperimentKind::Sample => "sample",
            ExperimentKind::Train => "train",
            ExperimentKind::Population => "population",
            ExperimentKind::VerifyA1 => "verify-a1",
            ExperimentKind::VerifyT1 => "verify-t1",
            ExperimentKind::VerifyT2 => "verify-t2",
            ExperimentKind::Shrinkage => "shrinkage",
            ExperimentKind::Linkpred => "linkpred",
        }
    }

    /// Kinds that evaluate formula weights or population quantities.
    fn needs_latents(self) -> bool {
        !matches!(self, ExperimentKind::Sample | ExperimentKind::Train | ExperimentKind::Linkpred)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeListFormat {
    /// `u v` per line.
    #[default]
    Whitespace,
    /// Comma-separated with a header row; the first two columns are the endpoints.
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphonSection {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default)]
    pub sparsity: Sparsity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub path: PathBuf,
    /// Inferred from the extension when absent.
    #[serde(default)]
    pub format: Option<EdgeListFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub d: usize,
    pub bound: f64,
    /// Projected gradient for latent-variable runs, Adam otherwise.
    pub optimizer: Option<Optimizer>,
    pub init: Init,
    pub restarts: Option<usize>,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection { d: 2, bound: DEFAULT_BOUND, optimizer: None, init: Init::default(), restarts: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub n: Vec<usize>,
    pub seeds: Vec<u64>,
    pub xi: Vec<f64>,
    pub kappa: usize,
    /// Monte Carlo replicates for `verify-a1`.
    pub reps: usize,
    pub bins: usize,
    /// Subsamples per SGD epoch; defaults to the number of vertices.
    pub runs_per_epoch: Option<usize>,
    /// Link-prediction repeats.
    pub repeats: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            n: vec![200],
            seeds: vec![1],
            xi: vec![0.0],
            kappa: DEFAULT_KAPPA,
            reps: 10_000,
            bins: 10,
            runs_per_epoch: None,
            repeats: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl Comparison {
    fn holds(self, a: f64, b: f64) -> bool {
        match self {
            Comparison::Lt => a < b,
            Comparison::Le => a <= b,
            Comparison::Gt => a > b,
            Comparison::Ge => a >= b,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparison::Lt => "<",
            Comparison::Le => "<=",
            Comparison::Gt => ">",
            Comparison::Ge => ">=",
        }
    }
}

/// `metric op value` or `metric op than`, where `than` names another metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertion {
    pub metric: String,
    pub op: Comparison,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub than: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum GraphSource {
    Graphon { spec: GraphonSpec },
    EdgeList { path: PathBuf, format: EdgeListFormat },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    kind: ExperimentKind,
    graphon: Option<GraphonSection>,
    input: Option<InputSection>,
    scheme: Option<SchemeConfig>,
    #[serde(default)]
    train: TrainSection,
    #[serde(default)]
    experiment: ExperimentSection,
    #[serde(default)]
    split: SplitConfig,
    #[serde(default)]
    output: OutputSection,
    #[serde(default, rename = "assert")]
    assertions: Vec<Assertion>,
}

/// A parsed, validated and defaulted manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub kind: ExperimentKind,
    pub source: GraphSource,
    pub scheme: SchemeConfig,
    pub train: TrainSection,
    pub optimizer: Optimizer,
    pub experiment: ExperimentSection,
    pub split: SplitConfig,
    pub out_dir: Option<PathBuf>,
    pub assertions: Vec<Assertion>,
    /// Hex SHA-256 of the manifest text.
    pub sha256: String,
}

pub fn default_scheme() -> SchemeConfig {
    SchemeConfig::random_walk(5, 1, 1.0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub fn load_manifest(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Parses manifest text; relative paths resolve against `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<RunManifest> {
    let raw: RawManifest = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().trim().to_string(),
    })?;
    let mut problems = Vec::new();
    let kind = raw.kind;

    let source = match (raw.graphon, raw.input) {
        (Some(_), Some(_)) => {
            problems.push("give either [graphon] or [input], not both".to_string());
            None
        }
        (None, None) => {
            problems.push("a [graphon] section or an [input] edge list is required".to_string());
            None
        }
        (Some(g), None) => match GraphonSpec::new(g.family, g.sparsity) {
            Ok(spec) => Some(GraphSource::Graphon { spec }),
            Err(e) => {
                problems.push(e.to_string());
                None
            }
        },
        (None, Some(input)) => {
            let path = if input.path.is_absolute() { input.path.clone() } else { base.join(&input.path) };
            if !path.is_file() {
                problems.push(format!("input path {} does not exist", path.display()));
            }
            if kind.needs_latents() {
                problems.push(format!("{} needs a [graphon]: edge-list input carries no latent positions", kind.name()));
            }
            let format = input.format.unwrap_or(match path.extension().and_then(|e| e.to_str()) {
                Some("csv") => EdgeListFormat::Csv,
                _ => EdgeListFormat::Whitespace,
            });
            Some(GraphSource::EdgeList { path, format })
        }
    };
    let has_latents = matches!(source, Some(GraphSource::Graphon { .. }));

    let scheme = raw.scheme.unwrap_or_else(default_scheme);
    if let Err(e) = scheme.validate() {
        problems.push(e.to_string());
    }
    let ex = &raw.experiment;
    if ex.n.is_empty() {
        problems.push("experiment.n must be non-empty".into());
    }
    if let Some(&n) = ex.n.iter().find(|&&n| n < 2) {
        problems.push(format!("experiment.n entries must be >= 2, got {n}"));
    }
    if ex.seeds.is_empty() {
        problems.push("experiment.seeds must be non-empty".into());
    }
    if ex.xi.is_empty() {
        problems.push("experiment.xi must be non-empty".into());
    }
    for &x in &ex.xi {
        if !(x >= 0.0) || !x.is_finite() {
            problems.push(format!("regularization weights must satisfy ξ ≥ 0, got {x}"));
        }
    }
    if kind == ExperimentKind::Shrinkage && ex.xi.windows(2).any(|p| !(p[0] < p[1])) {
        problems.push("shrinkage needs a strictly ascending xi grid".into());
    }
    if ex.kappa == 0 || ex.reps == 0 || ex.bins == 0 || ex.repeats == 0 || ex.runs_per_epoch == Some(0) {
        problems.push("kappa, reps, bins, repeats and runs_per_epoch must all be >= 1".into());
    }
    if let (SchemeKind::UniformVertex { k }, true) = (scheme.kind, has_latents) {
        for &n in ex.n.iter().filter(|&&n| k > n) {
            problems.push(format!("uniform vertex sampling needs k <= n, got k = {k} > n = {n}"));
        }
    }

    let full_batch = matches!(kind, ExperimentKind::VerifyT1 | ExperimentKind::VerifyT2 | ExperimentKind::Shrinkage)
        || (kind == ExperimentKind::Train && has_latents && raw.train.optimizer.is_none());
    let optimizer = raw.train.optimizer.unwrap_or(if full_batch { Optimizer::projected_gradient() } else { Optimizer::adam() });
    match (kind, optimizer) {
        (ExperimentKind::VerifyT1 | ExperimentKind::VerifyT2 | ExperimentKind::Shrinkage, Optimizer::Adam { .. }) => {
            problems.push(format!("{} trains full-batch; use the projected-gradient optimizer", kind.name()));
        }
        (ExperimentKind::Linkpred, Optimizer::ProjectedGradient { .. }) => {
            problems.push("linkpred trains with the adam optimizer".into());
        }
        (ExperimentKind::Train, Optimizer::ProjectedGradient { .. }) if !has_latents && source.is_some() => {
            problems.push("projected-gradient training needs latent positions; use adam for edge-list input".into());
        }
        _ => {}
    }
    let probe = TrainConfig {
        d: raw.train.d,
        bound: raw.train.bound,
        xi: 0.0,
        optimizer,
        init: raw.train.init,
        seed: 0,
        restarts: raw.train.restarts.unwrap_or(1),
    };
    match probe.validate() {
        Err(Error::Validation(v)) => problems.extend(v),
        Err(e) => problems.push(e.to_string()),
        Ok(()) => {}
    }
    if raw.train.restarts == Some(0) {
        problems.push("train.restarts must be >= 1".into());
    }
    let sp = raw.split;
    if !(sp.holdout_frac > 0.0 && sp.holdout_frac < 1.0) || !(sp.classifier_frac > 0.0 && sp.classifier_frac < 1.0) || !(sp.l2 >= 0.0) {
        problems.push("split fractions must lie in (0, 1) and l2 must be >= 0".into());
    }
    for a in &raw.assertions {
        if a.value.is_some() == a.than.is_some() {
            problems.push(format!("assertion on {:?} needs exactly one of `value` or `than`", a.metric));
        }
    }

    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    Ok(RunManifest {
        kind,
        source: source.expect("checked above"),
        scheme,
        train: raw.train,
        optimizer,
        experiment: raw.experiment,
        split: raw.split,
        out_dir: raw.output.dir.map(|d| if d.is_absolute() { d } else { base.join(d) }),
        assertions: raw.assertions,
        sha256: sha256_hex(text.as_bytes()),
    })
}

impl RunManifest {
    pub fn train_config(&self, xi: f64, seed: u64) -> TrainConfig {
        let default_restarts = match self.optimizer {
            Optimizer::ProjectedGradient { .. } => 3,
            Optimizer::Adam { .. } => 1,
        };
        TrainConfig {
            d: self.train.d,
            bound: self.train.bound,
            xi,
            optimizer: self.optimizer,
            init: self.train.init,
            seed,
            restarts: self.train.restarts.unwrap_or(default_restarts),
        }
    }

    fn convergence(&self, xi: f64) -> ConvergenceConfig {
        let mut c = ConvergenceConfig::new(xi, self.train.d);
        c.bound = self.train.bound;
        c.kappa = self.experiment.kappa;
        if let Some(r) = self.train.restarts {
            c.restarts = r;
        }
        c
    }

    fn spec(&self) -> Result<&GraphonSpec> {
        match &self.source {
            GraphSource::Graphon { spec } => Ok(spec),
            GraphSource::EdgeList { .. } => Err(Error::MissingLatents("this experiment")),
        }
    }
}

/// An ingested edge list with canonicalization counts.
#[derive(Debug, Clone)]
pub struct IngestedGraph {
    pub graph: LatentGraph,
    /// Original vertex label of each index.
    pub labels: Vec<String>,
    pub duplicates: usize,
    pub self_loops: usize,
}

pub fn ingest_edge_list(path: &Path, format: EdgeListFormat) -> Result<IngestedGraph> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
    parse_edge_list(&text, format)
}

/// Parses an edge list. Blank lines and lines starting with `#` are skipped.
///
/// Numeric labels are remapped to `0..n` in ascending order, other labels in order
/// of first appearance.
pub fn parse_edge_list(text: &str, format: EdgeListFormat) -> Result<IngestedGraph> {
    let mut raw: Vec<(&str, &str)> = Vec::new();
    let mut columns = None;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = match format {
            EdgeListFormat::Whitespace => line.split_whitespace().collect(),
            EdgeListFormat::Csv => line.split(',').map(str::trim).collect(),
        };
        let bad = |message: String| Error::Parse { line: idx + 1, message };
        match (format, columns) {
            (EdgeListFormat::Csv, None) => {
                if tokens.len() < 2 {
                    return Err(bad(format!("header needs at least two columns, got {line:?}")));
                }
                columns = Some(tokens.len());
                continue;
            }
            (EdgeListFormat::Csv, Some(c)) if tokens.len() != c => {
                return Err(bad(format!("expected {c} fields, got {}", tokens.len())));
            }
            (EdgeListFormat::Whitespace, _) if tokens.len() != 2 => {
                return Err(bad(format!("expected two vertex ids, got {line:?}")));
            }
            _ => {}
        }
        if tokens[0].is_empty() || tokens[1].is_empty() {
            return Err(bad("empty vertex id".into()));
        }
        raw.push((tokens[0], tokens[1]));
    }

    let mut labels: Vec<&str> = Vec::new();
    let mut seen = HashSet::new();
    for &(a, b) in &raw {
        for v in [a, b] {
            if seen.insert(v) {
                labels.push(v);
            }
        }
    }
    let numeric: Option<Vec<u64>> = labels.iter().map(|l| l.parse::<u64>().ok()).collect();
    if let Some(num) = numeric {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.sort_by_key(|&i| num[i]);
        labels = order.into_iter().map(|i| labels[i]).collect();
    }
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();

    let mut edges = HashSet::new();
    let (mut duplicates, mut self_loops) = (0, 0);
    let mut list = Vec::new();
    for &(a, b) in &raw {
        let (u, v) = (index[a], index[b]);
        if u == v {
            self_loops += 1;
        } else if !edges.insert((u.min(v), u.max(v))) {
            duplicates += 1;
        } else {
            list.push((u, v));
        }
    }
    let graph = LatentGraph::from_edges(labels.len(), list, None, 1.0)?;
    Ok(IngestedGraph { graph, labels: labels.into_iter().map(String::from).collect(), duplicates, self_loops })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssertionResult {
    #[serde(flatten)]
    pub assertion: Assertion,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub passed: bool,
}

impl AssertionResult {
    pub fn describe(&self) -> String {
        let rhs = self.assertion.than.clone().unwrap_or_else(|| format!("{}", self.assertion.value.unwrap_or(f64::NAN)));
        let show = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "missing".into());
        format!(
            "{} {} {} {} ({} vs {})",
            if self.passed { "PASS" } else { "FAIL" },
            self.assertion.metric,
            self.assertion.op.symbol(),
            rhs,
            show(self.lhs),
            show(self.rhs)
        )
    }
}

pub fn evaluate_assertions(assertions: &[Assertion], metrics: &BTreeMap<String, f64>) -> Vec<AssertionResult> {
    assertions
        .iter()
        .map(|a| {
            let lhs = metrics.get(&a.metric).copied();
            let rhs = match &a.than {
                Some(other) => metrics.get(other).copied(),
                None => a.value,
            };
            let passed = matches!((lhs, rhs), (Some(x), Some(y)) if a.op.holds(x, y));
            AssertionResult { assertion: a.clone(), lhs, rhs, passed }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    pub manifest_sha256: String,
    pub metrics: BTreeMap<String, f64>,
    pub assertions: Vec<AssertionResult>,
    /// File names written, relative to the output directory.
    pub artifacts: Vec<String>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

/// Metric key `name[n=..,xi=..]`.
pub fn metric_key(name: &str, n: Option<usize>, xi: Option<f64>) -> String {
    let mut q = Vec::new();
    if let Some(n) = n {
        q.push(format!("n={n}"));
    }
    if let Some(x) = xi {
        q.push(format!("xi={x}"));
    }
    if q.is_empty() {
        name.to_string()
    } else {
        format!("{name}[{}]", q.join(","))
    }
}

#[derive(Default)]
struct Metrics(BTreeMap<String, Vec<f64>>);

impl Metrics {
    fn push(&mut self, name: &str, n: Option<usize>, xi: Option<f64>, v: f64) {
        self.0.entry(metric_key(name, n, xi)).or_default().push(v);
    }

    fn medians(self) -> BTreeMap<String, f64> {
        self.0.into_iter().map(|(k, v)| (k, median(&v))).collect()
    }
}

struct Artifacts {
    dir: PathBuf,
    hash: String,
    written: Vec<String>,
}

impl Artifacts {
    /// Writes `body` behind a `# manifest-sha256:` comment line.
    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let mut s = format!("# manifest-sha256: {}\n", self.hash);
        s.push_str(body);
        self.raw(name, &s)
    }

    fn json(&mut self, name: &str, value: serde_json::Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(&value)?;
        s.push('\n');
        self.raw(name, &s)
    }

    fn raw(&mut self, name: &str, body: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), body).map_err(|e| Error::from(e).context(format!("writing {name}")))?;
        self.written.push(name.to_string());
        Ok(())
    }
}

struct Cell {
    n: Option<usize>,
    seed: u64,
    graph: LatentGraph,
}

impl Cell {
    fn tag(&self) -> String {
        match self.n {
            Some(n) => format!("n{n}_s{}", self.seed),
            None => format!("s{}", self.seed),
        }
    }
}

/// The graph for `(n, seed)`; shared by every experiment kind.
pub fn experiment_graph(spec: &GraphonSpec, n: usize, seed: u64) -> Result<LatentGraph> {
    sample_graph(spec, n, child_seed(seed, domain::EXPERIMENT, n as u64))
}

fn cells(m: &RunManifest) -> Result<Vec<Cell>> {
    let seeds = &m.experiment.seeds;
    match &m.source {
        GraphSource::Graphon { spec } => {
            let mut out = Vec::new();
            for &n in &m.experiment.n {
                for &seed in seeds {
                    let graph = experiment_graph(spec, n, seed).map_err(|e| e.context(format!("graph at n = {n}, seed = {seed}")))?;
                    out.push(Cell { n: Some(n), seed, graph });
                }
            }
            Ok(out)
        }
        GraphSource::EdgeList { path, format } => {
            let g = ingest_edge_list(path, *format)?.graph;
            Ok(seeds.iter().map(|&seed| Cell { n: None, seed, graph: g.clone() }).collect())
        }
    }
}

fn bool01(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Executes the manifest's experiment, writing artifacts into `out`.
pub fn run(m: &RunManifest, out: &Path) -> Result<RunOutcome> {
    std::fs::create_dir_all(out)?;
    let clock = Stopwatch::start();
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut art = Artifacts { dir: out.to_path_buf(), hash: m.sha256.clone(), written: Vec::new() };
    let mut mx = Metrics::default();
    let ex = &m.experiment;
    let records: serde_json::Value;

    match m.kind {
        ExperimentKind::Generate => {
            let mut csv = String::from("n,seed,rho,edges,mean_degree\n");
            let mut rows = Vec::new();
            for c in cells(m)? {
                let g = &c.graph;
                let mean_degree = 2.0 * g.edge_count() as f64 / g.n() as f64;
                art.text(&format!("graph_{}.edges", c.tag()), &g.edge_list_text())?;
                let latents = g.latents().ok_or(Error::MissingLatents("latent export"))?;
                art.text(&format!("graph_{}.latents", c.tag()), &latents.iter().map(|l| format!("{l:?}\n")).collect::<String>())?;
                let _ = writeln!(csv, "{},{},{},{},{}", g.n(), c.seed, g.rho(), g.edge_count(), mean_degree);
                mx.push("edges", c.n, None, g.edge_count() as f64);
                mx.push("mean_degree", c.n, None, mean_degree);
                rows.push(json!({"n": g.n(), "seed": c.seed, "rho": g.rho(), "edges": g.edge_count(), "mean_degree": mean_degree}));
            }
            art.text("generate.csv", &csv)?;
            records = json!(rows);
        }
        ExperimentKind::Sample => {
            let mut csv = String::from("n,seed,vertices,positives,negatives\n");
            let mut rows = Vec::new();
            for c in cells(m)? {
                let s = sample(&c.graph, &m.scheme, child_seed(c.seed, domain::SUBSAMPLE, 0)).map_err(|e| e.context(format!("sampling {}", c.tag())))?;
                art.text(&format!("subsample_{}.pairs", c.tag()), &s.pair_text())?;
                let (v, p, q) = (s.vertices.len(), s.positives.len(), s.negatives.len());
                let _ = writeln!(csv, "{},{},{v},{p},{q}", c.graph.n(), c.seed);
                mx.push("vertices", c.n, None, v as f64);
                mx.push("positives", c.n, None, p as f64);
                mx.push("negatives", c.n, None, q as f64);
                rows.push(json!({"n": c.graph.n(), "seed": c.seed, "vertices": v, "positives": p, "negatives": q}));
            }
            art.text("sample.csv", &csv)?;
            records = json!(rows);
        }
        ExperimentKind::Train => {
            let mut csv = String::from("n,seed,xi,objective,mean_sq_norm,trace,top_singular_value,converged,iterations\n");
            let mut rows = Vec::new();
            for c in cells(m)? {
                for &xi in &ex.xi {
                    let ctx = |e: Error| e.context(format!("training {} at xi = {xi}", c.tag()));
                    let cfg = m.train_config(xi, c.seed);
                    let (emb, objective, converged, iterations) = match m.optimizer {
                        Optimizer::ProjectedGradient { .. } => {
                            let w = formula_weights(m.spec()?, &m.scheme, &c.graph).map_err(ctx)?;
                            let fit = train_full(&c.graph, &w, &cfg).map_err(ctx)?;
                            (fit.embedding, Some(fit.objective), fit.converged, fit.iterations)
                        }
                        Optimizer::Adam { epochs, .. } => {
                            let runs = ex.runs_per_epoch.unwrap_or(c.graph.n());
                            (train_sgd(&c.graph, &m.scheme, &cfg, runs).map_err(ctx)?, None, true, epochs)
                        }
                    };
                    let spec = gram_spectrum(&emb);
                    let top = spec.singular_values.first().copied().unwrap_or(0.0);
                    art.text(&format!("embedding_{}_xi{xi}.csv", c.tag()), &embedding_csv(&emb))?;
                    let obj = objective.map(|o| o.to_string()).unwrap_or_default();
                    let msn = emb.mean_sq_norm();
                    let _ = writeln!(csv, "{},{},{xi},{obj},{msn},{},{top},{converged},{iterations}", c.graph.n(), c.seed, spec.trace);
                    if let Some(o) = objective {
                        mx.push("objective", c.n, Some(xi), o);
                    }
                    mx.push("mean_sq_norm", c.n, Some(xi), msn);
                    mx.push("top_singular_value", c.n, Some(xi), top);
                    rows.push(json!({"n": c.graph.n(), "seed": c.seed, "xi": xi, "objective": objective, "mean_sq_norm": msn,
                        "trace": spec.trace, "singular_values": spec.singular_values, "converged": converged}));
                }
            }
            art.text("train.csv", &csv)?;
            records = json!(rows);
        }
        ExperimentKind::Population => {
            let spec = m.spec()?;
            let mut csv = String::from("n,rho,xi,kappa,objective,residual,trace,top_eigenvalue,kernel_max_entry,converged,iterations\n");
            let mut rows = Vec::new();
            for &n in &ex.n {
                let rho = spec.check_n(n)?;
                let w = discretize_weights(spec, rho, &m.scheme, ex.kappa)?;
                for &xi in &ex.xi {
                    let min = minimize_psd(&w, xi).map_err(|e| e.context(format!("population at n = {n}, xi = {xi}")))?;
                    let sp = kernel_trace_spectrum(&min.kernel);
                    let top = sp.eigenvalues.first().copied().unwrap_or(0.0);
                    let kmax = min.kernel.max_abs_entry();
                    art.text(&format!("kernel_n{n}_xi{xi}.csv"), &kernel_csv(&min.kernel))?;
                    let _ = writeln!(
                        csv,
                        "{n},{rho},{xi},{},{},{},{},{top},{kmax},{},{}",
                        ex.kappa, min.objective, min.residual, sp.trace, min.converged, min.iterations
                    );
                    mx.push("objective", Some(n), Some(xi), min.objective);
                    mx.push("residual", Some(n), Some(xi), min.residual);
                    mx.push("trace", Some(n), Some(xi), sp.trace);
                    mx.push("top_eigenvalue", Some(n), Some(xi), top);
                    mx.push("kernel_max_entry", Some(n), Some(xi), kmax);
                    rows.push(json!({"n": n, "rho": rho, "xi": xi, "objective": min.objective, "residual": min.residual,
                        "trace": sp.trace, "eigenvalues": sp.eigenvalues, "converged": min.converged}));
                }
            }
            art.text("population.csv", &csv)?;
            records = json!(rows);
        }
        ExperimentKind::VerifyA1 => {
            let seed = ex.seeds[0];
            let recs = verify_assumption1(m.spec()?, &m.scheme, &ex.n, ex.reps, ex.bins, seed)?;
            let mut bins = String::from("n,type,cell_a,cell_b,edge,members,events,empirical,formula,ratio_error,rel_se,undersampled\n");
            for r in &recs {
                for (t, b) in r.pair_bins.iter().map(|b| ("pair", b)).chain(r.vertex_bins.iter().map(|b| ("vertex", b))) {
                    let edge = b.edge.map(|e| (e as u8).to_string()).unwrap_or_default();
                    let _ = writeln!(
                        bins,
                        "{},{t},{},{},{edge},{},{},{},{},{},{},{}",
                        r.n, b.cell_a, b.cell_b, b.members, b.events, b.empirical, b.formula, b.ratio_error, b.rel_se, b.undersampled
                    );
                }
                let n = Some(r.n);
                mx.push("max_pair_error", n, None, r.max_pair_error);
                mx.push("max_vertex_error", n, None, r.max_vertex_error);
                mx.push("max_pair_rel_se", n, None, r.max_pair_rel_se);
                mx.push("max_vertex_rel_se", n, None, r.max_vertex_rel_se);
                mx.push("rate", n, None, r.rate);
                mx.push("undersampled_bins", n, None, r.undersampled_bins as f64);
                if let (Some(p), Some(v)) = (r.max_pair_error_exact, r.max_vertex_error_exact) {
                    mx.push("max_pair_error_exact", n, None, p);
                    mx.push("max_vertex_error_exact", n, None, v);
                }
            }
            art.text("verify-a1.csv", &recs.csv())?;
            art.text("verify-a1-bins.csv", &bins)?;
            records = json!(recs);
        }
        ExperimentKind::VerifyT1 => {
            let mut recs = Vec::new();
            for &xi in &ex.xi {
                recs.extend(verify_theorem1(m.spec()?, &m.scheme, &ex.n, &m.convergence(xi), &ex.seeds)?);
            }
            for r in &recs {
                let (n, xi) = (Some(r.n), Some(r.xi));
                mx.push("gap", n, xi, r.gap);
                mx.push("empirical_min", n, xi, r.empirical_min);
                mx.push("population_min", n, xi, r.population_min);
                mx.push("converged", n, xi, bool01(r.converged));
            }
            art.text("verify-t1.csv", &recs.csv())?;
            records = json!(recs);
        }
        ExperimentKind::VerifyT2 => {
            let mut recs = Vec::new();
            for &xi in &ex.xi {
                recs.extend(verify_theorem2(m.spec()?, &m.scheme, &ex.n, &m.convergence(xi), &ex.seeds)?);
            }
            for r in &recs {
                let (n, xi) = (Some(r.n), Some(r.xi));
                mx.push("deviation", n, xi, r.deviation);
                mx.push("offdiag_deviation", n, xi, r.offdiag_deviation);
                mx.push("converged", n, xi, bool01(r.converged));
            }
            art.text("verify-t2.csv", &recs.csv())?;
            records = json!(recs);
        }
        ExperimentKind::Shrinkage => {
            let spec = m.spec()?;
            let mut csv = String::from("n,seed,");
            let mut rows = Vec::new();
            let mut header = true;
            for c in cells(m)? {
                let w = formula_weights(spec, &m.scheme, &c.graph)?;
                let recs = shrinkage_curve(&c.graph, &w, &ex.xi, &m.train_config(0.0, c.seed))
                    .map_err(|e| e.context(format!("shrinkage at {}", c.tag())))?;
                let table = recs.csv();
                let mut lines = table.lines();
                let head = lines.next().unwrap_or_default();
                if header {
                    csv.push_str(head);
                    csv.push('\n');
                    header = false;
                }
                for line in lines {
                    let _ = writeln!(csv, "{},{},{line}", c.graph.n(), c.seed);
                }
                for r in &recs {
                    mx.push("mean_sq_norm", c.n, Some(r.xi), r.mean_sq_norm);
                    mx.push("objective", c.n, Some(r.xi), r.objective);
                    mx.push("trace", c.n, Some(r.xi), r.trace);
                    mx.push("top_singular_value", c.n, Some(r.xi), r.top_singular_values.first().copied().unwrap_or(0.0));
                }
                rows.push(json!({"n": c.graph.n(), "seed": c.seed, "curve": recs}));
            }
            art.text("shrinkage.csv", &csv)?;
            records = json!(rows);
        }
        ExperimentKind::Linkpred => {
            let mut csv = String::from("n,seed,xi,roc_auc_mean,roc_auc_std,pr_auc_mean,pr_auc_std,repeats\n");
            let mut rows = Vec::new();
            for c in cells(m)? {
                let runs = ex.runs_per_epoch.unwrap_or(c.graph.n());
                let (mut best_roc, mut best_pr) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                for &xi in &ex.xi {
                    let r = link_prediction_eval(&c.graph, &m.scheme, &m.train_config(xi, c.seed), &m.split, ex.repeats, c.seed, runs)
                        .map_err(|e| e.context(format!("link prediction at {}, xi = {xi}", c.tag())))?;
                    let _ = writeln!(
                        csv,
                        "{},{},{xi},{},{},{},{},{}",
                        c.graph.n(),
                        c.seed,
                        r.roc_auc_mean,
                        r.roc_auc_std,
                        r.pr_auc_mean,
                        r.pr_auc_std,
                        r.repeats
                    );
                    mx.push("roc_auc", c.n, Some(xi), r.roc_auc_mean);
                    mx.push("pr_auc", c.n, Some(xi), r.pr_auc_mean);
                    best_roc = best_roc.max(r.roc_auc_mean);
                    best_pr = best_pr.max(r.pr_auc_mean);
                    rows.push(json!({"n": c.graph.n(), "seed": c.seed, "xi": xi, "result": r}));
                }
                mx.push("roc_auc_best", c.n, None, best_roc);
                mx.push("pr_auc_best", c.n, None, best_pr);
            }
            art.text("linkpred.csv", &csv)?;
            records = json!(rows);
        }
    }

    let metrics = mx.medians();
    if let Some((k, _)) = metrics.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { backtracks: 0 }.context(format!("metric {k}")));
    }
    let assertions = evaluate_assertions(&m.assertions, &metrics);
    let passed = assertions.iter().all(|a| a.passed);
    art.text("metrics.csv", &metrics.iter().map(|(k, v)| format!("\"{k}\",{v}\n")).fold(String::from("metric,value\n"), |s, l| s + &l))?;
    art.json(
        "report.json",
        json!({
            "manifest_sha256": m.sha256,
            "kind": m.kind,
            "manifest": m,
            "records": records,
            "metrics": metrics,
            "assertions": assertions,
            "passed": passed,
        }),
    )?;
    let mut artifacts = art.written.clone();
    artifacts.push("stamp.json".into());
    art.json(
        "stamp.json",
        json!({
            "manifest_sha256": m.sha256,
            "kind": m.kind,
            "seeds": ex.seeds,
            "versions": {
                "embreg": env!("CARGO_PKG_VERSION"),
                "os": std::env::consts::OS,
                "arch": std::env::consts::ARCH,
            },
            "started_unix_seconds": started,
            "elapsed_seconds": clock.seconds(),
            "artifacts": artifacts,
            "passed": passed,
        }),
    )?;
    Ok(RunOutcome { manifest_sha256: m.sha256.clone(), metrics, assertions, artifacts })
}

#[derive(Debug, Parser)]
#[command(name = "embreg", version, about = "Graphon embeddings: sampling, training and convergence checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML run manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample graphs from a graphon.
    Generate(RunArgs),
    /// Draw one subsample per graph.
    Sample(RunArgs),
    /// Train embeddings over the xi grid.
    Train(RunArgs),
    /// Minimize the discretized population risk.
    Population(RunArgs),
    /// Compare Monte Carlo inclusion probabilities with the limit formulas.
    #[command(name = "verify-a1")]
    VerifyA1(RunArgs),
    /// Empirical versus population minimal values.
    #[command(name = "verify-t1")]
    VerifyT1(RunArgs),
    /// Learned gram matrices versus the population kernel.
    #[command(name = "verify-t2")]
    VerifyT2(RunArgs),
    /// Embedding norms and spectra along the xi grid.
    Shrinkage(RunArgs),
    /// Held-out edge prediction.
    Linkpred(RunArgs),
}

impl Command {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Command::Generate(_) => ExperimentKind::Generate,
            Command::Sample(_) => ExperimentKind::Sample,
            Command::Train(_) => ExperimentKind::Train,
            Command::Population(_) => ExperimentKind::Population,
            Command::VerifyA1(_) => ExperimentKind::VerifyA1,
            Command::VerifyT1(_) => ExperimentKind::VerifyT1,
            Command::VerifyT2(_) => ExperimentKind::VerifyT2,
            Command::Shrinkage(_) => ExperimentKind::Shrinkage,
            Command::Linkpred(_) => ExperimentKind::Linkpred,
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Generate(a)
            | Command::Sample(a)
            | Command::Train(a)
            | Command::Population(a)
            | Command::VerifyA1(a)
            | Command::VerifyT1(a)
            | Command::VerifyT2(a)
            | Command::Shrinkage(a)
            | Command::Linkpred(a) => a,
        }
    }
}

/// Loads, runs and reports. Exit status: 0 all assertions pass, 1 an assertion failed, 2 error.
pub fn execute(cmd: &Command) -> Result<RunOutcome> {
    let args = cmd.args();
    let m = load_manifest(&args.manifest)?;
    if m.kind != cmd.kind() {
        return Err(Error::InvalidArgument(format!(
            "manifest kind is {} but the subcommand is {}",
            m.kind.name(),
            cmd.kind().name()
        )));
    }
    let out = args
        .out
        .clone()
        .or_else(|| m.out_dir.clone())
        .ok_or_else(|| Error::InvalidArgument("no output directory: pass --out or set [output] dir".into()))?;
    run(&m, &out)
}

pub fn main_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::parse_from(args);
    match execute(&cli.command) {
        Ok(outcome) => {
            for a in &outcome.assertions {
                println!("{}", a.describe());
            }
            println!("manifest {} -> {} artifacts", &outcome.manifest_sha256[..12], outcome.artifacts.len());
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunManifest> {
        parse_manifest(text, Path::new("."))
    }

    const MINIMAL: &str = "kind = \"population\"\n[graphon]\nfamily = \"constant\"\np = 0.8\n";

    #[test]
    fn minimal_manifest_gets_defaults() {
        let m = parse(MINIMAL).unwrap();
        assert_eq!(m.kind, ExperimentKind::Population);
        assert_eq!(m.experiment.kappa, 64);
        assert_eq!(m.train.bound, 10.0);
        assert_eq!(m.scheme, default_scheme());
        assert_eq!(m.sha256.len(), 64);
        let adam = parse("kind = \"train\"\n[input]\npath = \"Cargo.toml\"\n");
        assert!(adam.is_ok(), "{adam:?}");
        match adam.unwrap().optimizer {
            Optimizer::Adam { lr, .. } => assert_eq!(lr, 1e-3),
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn negative_xi_is_rejected() {
        let e = parse(&format!("{MINIMAL}[experiment]\nxi = [0.0, -0.1]\n")).unwrap_err().to_string();
        assert!(e.contains("ξ ≥ 0"), "{e}");
    }

    #[test]
    fn k_above_n_is_rejected_with_every_problem_listed() {
        let text = format!("{MINIMAL}[scheme]\nkind = \"uniform-vertex\"\nk = 30\n[experiment]\nn = [20, 25, 40]\nseeds = []\n");
        match parse(&text) {
            Err(Error::Validation(v)) => {
                assert_eq!(v.iter().filter(|p| p.contains("k <= n")).count(), 2, "{v:?}");
                assert!(v.iter().any(|p| p.contains("seeds")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match parse("kind = \"population\"\n[graphon]\nfamily = \"constant\"\np = = 0.8\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        match parse("kind = \"population\"\nbogus = 1\n") {
            Err(Error::Parse { line, message }) => assert!(line == 2 && message.contains("bogus"), "{line} {message}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn latent_kinds_reject_edge_lists() {
        let e = parse("kind = \"verify-t1\"\n[input]\npath = \"does-not-exist.txt\"\n").unwrap_err().to_string();
        assert!(e.contains("does not exist") && e.contains("latent"), "{e}");
    }

    #[test]
    fn edge_list_parsing() {
        let g = parse_edge_list("0 1\n1 2\n", EdgeListFormat::Whitespace).unwrap();
        assert_eq!((g.graph.n(), g.graph.edge_count()), (3, 2));
        assert!(g.graph.latents().is_none());
        let g = parse_edge_list("0 1\n1 0\n", EdgeListFormat::Whitespace).unwrap();
        assert_eq!((g.graph.edge_count(), g.duplicates), (1, 1));
        let g = parse_edge_list("# c\nsrc,dst\n10,30\n30,30\n20,10\n", EdgeListFormat::Csv).unwrap();
        assert_eq!(g.labels, vec!["10", "20", "30"]);
        assert_eq!((g.graph.edge_count(), g.self_loops), (2, 1));
        assert!(g.graph.has_edge(0, 2) && g.graph.has_edge(0, 1));
        match parse_edge_list("0 1\n2\n", EdgeListFormat::Whitespace) {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn assertions_compare_metrics() {
        let metrics: BTreeMap<String, f64> = [("a".to_string(), 1.0), ("b".to_string(), 2.0)].into_iter().collect();
        let mk = |op, value, than: Option<&str>| Assertion { metric: "a".into(), op, value, than: than.map(String::from) };
        let r = evaluate_assertions(
            &[mk(Comparison::Lt, None, Some("b")), mk(Comparison::Ge, Some(1.01), None), mk(Comparison::Le, None, Some("zz"))],
            &metrics,
        );
        assert_eq!(r.iter().map(|a| a.passed).collect::<Vec<_>>(), vec![true, false, false]);
        assert_eq!(metric_key("gap", Some(800), Some(0.1)), "gap[n=800,xi=0.1]");
    }
}
