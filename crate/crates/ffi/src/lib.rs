//! C ABI over `embreg`.
//!
//! Every fallible function returns an [`EmbregStatus`]; on failure the message is
//! available from [`embreg_last_error`] on the same thread. Handles are opaque and
//! must be released with the matching `*_free` function. Panics never cross the
//! boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use embreg::formulas::formula_weights;
use embreg::graphon::{sample_graph, GraphonSpec, LatentGraph};
use embreg::population::{discretize_weights, minimize_psd, StepKernel};
use embreg::risk::{empirical_risk, EmbeddingMatrix, RiskConfig};
use embreg::sampler::SchemeConfig;
use embreg::trainer::{train_full, train_sgd, Optimizer, TrainConfig};
use embreg::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbregStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGraphon = 3,
    InvalidScheme = 4,
    MissingLatents = 5,
    Numerical = 6,
    BufferTooSmall = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbregSchemeKind {
    UniformVertex = 0,
    UniformEdge = 1,
    RandomWalk = 2,
}

/// Subsampling scheme; `l` and `alpha` are ignored for uniform vertex sampling.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EmbregScheme {
    pub kind: EmbregSchemeKind,
    pub k: usize,
    pub l: usize,
    pub alpha: f64,
}

impl EmbregScheme {
    fn config(&self) -> SchemeConfig {
        match self.kind {
            EmbregSchemeKind::UniformVertex => SchemeConfig::uniform_vertex(self.k),
            EmbregSchemeKind::UniformEdge => SchemeConfig::uniform_edge(self.k, self.l, self.alpha),
            EmbregSchemeKind::RandomWalk => SchemeConfig::random_walk(self.k, self.l, self.alpha),
        }
    }
}

pub struct EmbregGraphon {
    spec: GraphonSpec,
}

pub struct EmbregGraph {
    graph: LatentGraph,
}

pub struct EmbregEmbedding {
    emb: EmbeddingMatrix,
}

pub struct EmbregKernel {
    kernel: StepKernel,
    objective: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(EmbregStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let mut root = &e;
        while let Error::Context { source, .. } = root {
            root = source;
        }
        let status = match root {
            Error::InvalidGraphon(_) | Error::OutOfRange { .. } => EmbregStatus::InvalidGraphon,
            Error::InvalidScheme(_) => EmbregStatus::InvalidScheme,
            Error::MissingLatents(_) => EmbregStatus::MissingLatents,
            Error::NonFinite { .. } | Error::Eigen(_) => EmbregStatus::Numerical,
            Error::Io(_) => EmbregStatus::Io,
            _ => EmbregStatus::InvalidArgument,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(EmbregStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EmbregStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EmbregStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            EmbregStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = value;
    Ok(())
}

unsafe fn copy_into(src: &[f64], buf: *mut f64, cap: usize) -> Result<(), Fail> {
    if cap < src.len() {
        return Err(Fail(EmbregStatus::BufferTooSmall, format!("buffer holds {cap} values, need {}", src.len())));
    }
    if buf.is_null() {
        return Err(null("buffer"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn embreg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn embreg_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => c"unknown",
    };
    VERSION.as_ptr()
}

#[no_mangle]
pub unsafe extern "C" fn embreg_graphon_constant(p: f64, out: *mut *mut EmbregGraphon) -> EmbregStatus {
    guard(|| put(out, EmbregGraphon { spec: GraphonSpec::constant(p)? }))
}

#[no_mangle]
pub unsafe extern "C" fn embreg_graphon_smooth_product(a: f64, b: f64, out: *mut *mut EmbregGraphon) -> EmbregStatus {
    guard(|| put(out, EmbregGraphon { spec: GraphonSpec::smooth_product(a, b)? }))
}

/// `blocks` is an `m × m` row-major matrix.
#[no_mangle]
pub unsafe extern "C" fn embreg_graphon_step_block(blocks: *const f64, m: usize, out: *mut *mut EmbregGraphon) -> EmbregStatus {
    guard(|| {
        if blocks.is_null() {
            return Err(null("blocks"));
        }
        let flat = std::slice::from_raw_parts(blocks, m * m);
        let rows = flat.chunks(m.max(1)).map(<[f64]>::to_vec).collect();
        put(out, EmbregGraphon { spec: GraphonSpec::step_block(rows)? })
    })
}

#[no_mangle]
pub unsafe extern "C" fn embreg_graphon_set_rho(h: *mut EmbregGraphon, rho: f64) -> EmbregStatus {
    guard(|| {
        let g = h.as_mut().ok_or_else(|| null("graphon"))?;
        g.spec = g.spec.clone().with_rho(rho)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn embreg_graphon_value(h: *const EmbregGraphon, x: f64, y: f64, out: *mut f64) -> EmbregStatus {
    guard(|| write_out(out, get(h, "graphon")?.spec.evaluate(x, y)?))
}

#[no_mangle]
pub unsafe extern "C" fn embreg_graphon_free(h: *mut EmbregGraphon) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

#[no_mangle]
pub unsafe extern "C" fn embreg_graph_sample(spec: *const EmbregGraphon, n: usize, seed: u64, out: *mut *mut EmbregGraph) -> EmbregStatus {
    guard(|| put(out, EmbregGraph { graph: sample_graph(&get(spec, "graphon")?.spec, n, seed)? }))
}

/// Graph without latents from `m` pairs stored as `[u0, v0, u1, v1, ...]`.
#[no_mangle]
pub unsafe extern "C" fn embreg_graph_from_edges(n: usize, edges: *const u32, m: usize, out: *mut *mut EmbregGraph) -> EmbregStatus {
    guard(|| {
        if edges.is_null() && m > 0 {
            return Err(null("edges"));
        }
        let flat = if m == 0 { &[][..] } else { std::slice::from_raw_parts(edges, 2 * m) };
        let pairs = flat.chunks(2).map(|p| (p[0] as usize, p[1] as usize));
        put(out, EmbregGraph { graph: LatentGraph::from_edges(n, pairs, None, 1.0)? })
    })
}

#[no_mangle]
pub unsafe extern "C" fn embreg_graph_vertex_count(h: *const EmbregGraph, out: *mut usize) -> EmbregStatus {
    guard(|| write_out(out, get(h, "graph")?.graph.n()))
}

#[no_mangle]
pub unsafe extern "C" fn embreg_graph_edge_count(h: *const EmbregGraph, out: *mut usize) -> EmbregStatus {
    guard(|| write_out(out, get(h, "graph")?.graph.edge_count()))
}

/// Writes edges as `[u0, v0, ...]` with `u < v`; `cap` counts `u32` slots.
#[no_mangle]
pub unsafe extern "C" fn embreg_graph_edges(h: *const EmbregGraph, buf: *mut u32, cap: usize) -> EmbregStatus {
    guard(|| {
        let g = &get(h, "graph")?.graph;
        let need = 2 * g.edge_count();
        if cap < need {
            return Err(Fail(EmbregStatus::BufferTooSmall, format!("buffer holds {cap} ids, need {need}")));
        }
        if buf.is_null() && need > 0 {
            return Err(null("buffer"));
        }
        for (k, (u, v)) in g.edges().enumerate() {
            *buf.add(2 * k) = u as u32;
            *buf.add(2 * k + 1) = v as u32;
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn embreg_graph_latents(h: *const EmbregGraph, buf: *mut f64, cap: usize) -> EmbregStatus {
    guard(|| {
        let lat = get(h, "graph")?.graph.latents().ok_or(Error::MissingLatents("latent export"))?;
        copy_into(lat, buf, cap)
    })
}

#[no_mangle]
pub unsafe extern "C" fn embreg_graph_free(h: *mut EmbregGraph) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Full-batch projected gradient on the formula-weighted empirical risk.
#[no_mangle]
pub unsafe extern "C" fn embreg_train_full(
    graph: *const EmbregGraph,
    spec: *const EmbregGraphon,
    scheme: EmbregScheme,
    d: usize,
    xi: f64,
    seed: u64,
    out: *mut *mut EmbregEmbedding,
    objective: *mut f64,
) -> EmbregStatus {
    guard(|| {
        let g = &get(graph, "graph")?.graph;
        let w = formula_weights(&get(spec, "graphon")?.spec, &scheme.config(), g)?;
        let fit = train_full(g, &w, &TrainConfig::full(d, xi, seed))?;
        if !objective.is_null() {
            *objective = fit.objective;
        }
        put(out, EmbregEmbedding { emb: fit.embedding })
    })
}

/// Adam over fresh subsamples; `lr <= 0` keeps the default rate.
#[no_mangle]
pub unsafe extern "C" fn embreg_train_sgd(
    graph: *const EmbregGraph,
    scheme: EmbregScheme,
    d: usize,
    xi: f64,
    seed: u64,
    epochs: usize,
    runs_per_epoch: usize,
    lr: f64,
    out: *mut *mut EmbregEmbedding,
) -> EmbregStatus {
    guard(|| {
        let g = &get(graph, "graph")?.graph;
        let mut cfg = TrainConfig::sgd(d, xi, seed);
        if let Optimizer::Adam { epochs: e, lr: rate, .. } = &mut cfg.optimizer {
            *e = epochs;
            if lr > 0.0 {
                *rate = lr;
            }
        }
        put(out, EmbregEmbedding { emb: train_sgd(g, &scheme.config(), &cfg, runs_per_epoch)? })
    })
}

/// Embedding from `n·d` row-major values, all within `[-bound, bound]`.
#[no_mangle]
pub unsafe extern "C" fn embreg_embedding_from_data(
    data: *const f64,
    n: usize,
    d: usize,
    bound: f64,
    out: *mut *mut EmbregEmbedding,
) -> EmbregStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let v = std::slice::from_raw_parts(data, n * d).to_vec();
        put(out, EmbregEmbedding { emb: EmbeddingMatrix::from_vec(n, d, bound, v)? })
    })
}

#[no_mangle]
pub unsafe extern "C" fn embreg_embedding_shape(h: *const EmbregEmbedding, n: *mut usize, d: *mut usize) -> EmbregStatus {
    guard(|| {
        let e = &get(h, "embedding")?.emb;
        write_out(n, e.n())?;
        write_out(d, e.d())
    })
}

/// Copies the `n·d` row-major coordinates.
#[no_mangle]
pub unsafe extern "C" fn embreg_embedding_data(h: *const EmbregEmbedding, buf: *mut f64, cap: usize) -> EmbregStatus {
    guard(|| copy_into(get(h, "embedding")?.emb.as_slice(), buf, cap))
}

#[no_mangle]
pub unsafe extern "C" fn embreg_embedding_free(h: *mut EmbregEmbedding) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Formula-weighted empirical risk, penalty included.
#[no_mangle]
pub unsafe extern "C" fn embreg_empirical_risk(
    graph: *const EmbregGraph,
    spec: *const EmbregGraphon,
    scheme: EmbregScheme,
    emb: *const EmbregEmbedding,
    xi: f64,
    out: *mut f64,
) -> EmbregStatus {
    guard(|| {
        let g = &get(graph, "graph")?.graph;
        let w = formula_weights(&get(spec, "graphon")?.spec, &scheme.config(), g)?;
        let (value, _) = empirical_risk(&get(emb, "embedding")?.emb, &w, g, &RiskConfig::new(xi)?)?;
        write_out(out, value)
    })
}

/// Minimizes the discretized population risk over PSD step kernels.
#[no_mangle]
pub unsafe extern "C" fn embreg_population_minimize(
    spec: *const EmbregGraphon,
    scheme: EmbregScheme,
    rho: f64,
    kappa: usize,
    xi: f64,
    out: *mut *mut EmbregKernel,
) -> EmbregStatus {
    guard(|| {
        let w = discretize_weights(&get(spec, "graphon")?.spec, rho, &scheme.config(), kappa)?;
        let min = minimize_psd(&w, xi)?;
        put(out, EmbregKernel { kernel: min.kernel, objective: min.objective })
    })
}

#[no_mangle]
pub unsafe extern "C" fn embreg_kernel_kappa(h: *const EmbregKernel, out: *mut usize) -> EmbregStatus {
    guard(|| write_out(out, get(h, "kernel")?.kernel.kappa))
}

#[no_mangle]
pub unsafe extern "C" fn embreg_kernel_objective(h: *const EmbregKernel, out: *mut f64) -> EmbregStatus {
    guard(|| write_out(out, get(h, "kernel")?.objective))
}

/// Copies the `κ × κ` cell values, row-major.
#[no_mangle]
pub unsafe extern "C" fn embreg_kernel_matrix(h: *const EmbregKernel, buf: *mut f64, cap: usize) -> EmbregStatus {
    guard(|| {
        let k = &get(h, "kernel")?.kernel;
        let m = k.matrix();
        let flat: Vec<f64> = (0..k.kappa).flat_map(|i| (0..k.kappa).map(move |j| (i, j))).map(|ij| m[ij]).collect();
        copy_into(&flat, buf, cap)
    })
}

#[no_mangle]
pub unsafe extern "C" fn embreg_kernel_eval(h: *const EmbregKernel, x: f64, y: f64, out: *mut f64) -> EmbregStatus {
    guard(|| {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::OutOfRange { x, y }.into());
        }
        write_out(out, get(h, "kernel")?.kernel.eval(x, y))
    })
}

#[no_mangle]
pub unsafe extern "C" fn embreg_kernel_free(h: *mut EmbregKernel) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_follows_the_root_cause() {
        let e = Error::InvalidScheme("k".into()).context("outer").context("outermost");
        let Fail(status, msg) = Fail::from(e);
        assert_eq!(status, EmbregStatus::InvalidScheme);
        assert!(msg.starts_with("outermost"));
    }

    #[test]
    fn panics_become_status_codes() {
        assert_eq!(guard(|| panic!("boom")), EmbregStatus::Panic);
        let msg = unsafe { CStr::from_ptr(embreg_last_error()) }.to_string_lossy().into_owned();
        assert_eq!(msg, "panic: boom");
    }
}
