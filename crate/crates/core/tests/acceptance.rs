//! Acceptance criteria. Each prints one `PASS`/`FAIL` line; the process fails if any criterion fails.
//!
//! Pass substrings as arguments to run a subset, e.g. `cargo test --test acceptance -- gradient`.
//! Set `EMBREG_CORA` to a Cora edge list to run the optional real-data reproduction.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use embreg::cli::{experiment_graph, ingest_edge_list, EdgeListFormat};
use embreg::formulas::formula_weights;
use embreg::graphon::{sample_graph, GraphonSpec};
use embreg::harness::*;
use embreg::population::{
    discretize_weights, kkt_residual, minimize_factored, minimize_psd, population_value, regularizer_value, StepKernel,
};
use embreg::risk::{empirical_risk, stochastic_loss, EmbeddingMatrix, RiskConfig};
use embreg::rng::stream;
use embreg::sampler::{mc_inclusion_probabilities, sample, SchemeConfig};
use embreg::trainer::{gram_spectrum, Optimizer, TrainConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gaussian(r: &mut impl Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| scale * r.sample::<f64, _>(StandardNormal)).collect()
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-12);
    diff / scale
}

fn central_difference(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-5;
    let mut y = x.to_vec();
    (0..x.len())
        .map(|k| {
            y[k] = x[k] + h;
            let up = f(&y);
            y[k] = x[k] - h;
            let down = f(&y);
            y[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn gradients() -> Outcome {
    let clock = Stopwatch::start();
    let mut r = stream(2024, 0, 0);
    let mut worst: f64 = 0.0;
    for inst in 0..20u64 {
        let n = r.random_range(3..=10);
        let d = r.random_range(1..=4);
        let xi = [0.0, 0.05, 0.7][inst as usize % 3];
        let spec = if inst % 2 == 0 { GraphonSpec::constant(0.6).unwrap() } else { GraphonSpec::smooth_product(0.3, 0.6).unwrap() };
        let g = sample_graph(&spec, n, inst).unwrap();
        let scheme = match inst % 3 {
            0 => SchemeConfig::uniform_vertex(n.min(4)),
            1 => SchemeConfig::uniform_edge(1, 2, 0.75),
            _ => SchemeConfig::random_walk(3, 2, 1.0),
        };
        let scheme = if scheme.validate_for(&g).is_ok() { scheme } else { SchemeConfig::uniform_vertex(n.min(4)) };
        let x = gaussian(&mut r, n * d, 0.8);
        let cfg = RiskConfig::new(xi).unwrap();
        let emb = |v: &[f64]| EmbeddingMatrix::from_vec(n, d, 10.0, v.to_vec()).unwrap();

        let s = sample(&g, &scheme, inst).unwrap();
        let (_, grad) = stochastic_loss(&emb(&x), &s, &cfg);
        let fd = central_difference(&x, |v| stochastic_loss(&emb(v), &s, &cfg).0);
        worst = worst.max(max_rel(&grad, &fd));

        let w = formula_weights(&spec, &scheme, &g).unwrap();
        let (_, grad) = empirical_risk(&emb(&x), &w, &g, &cfg).unwrap();
        let fd = central_difference(&x, |v| empirical_risk(&emb(v), &w, &g, &cfg).unwrap().0);
        worst = worst.max(max_rel(&grad, &fd));
    }
    let t = clock.seconds();
    outcome(worst <= 1e-6 && t < 5.0, format!("max relative error {worst:.2e} over 20 instances, {t:.2}s"))
}

fn uniform_vertex_exactness() -> Outcome {
    let clock = Stopwatch::start();
    let (n, k, reps) = (200usize, 20usize, 100_000usize);
    let g = sample_graph(&GraphonSpec::constant(0.3).unwrap(), n, 11).unwrap();
    let probs = mc_inclusion_probabilities(&g, &SchemeConfig::uniform_vertex(k), reps, 12).unwrap();
    let (nf, kf, rf) = (n as f64, k as f64, reps as f64);
    let z = |phat: f64, p: f64| (phat - p) / (p * (1.0 - p) / rf).sqrt();
    let pv = kf / nf;
    let pp = kf * (kf - 1.0) / (nf * (nf - 1.0));
    let vz: Vec<f64> = (0..n).map(|i| z(probs.vertex_prob(i), pv).abs()).collect();
    let mut pz = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pz.push(z(probs.pair_prob(i, j), pp).abs());
        }
    }
    let frac = |v: &[f64]| v.iter().filter(|&&x| x > 3.0).count() as f64 / v.len() as f64;
    let (fv, fp) = (frac(&vz), frac(&pz));
    let vmax = vz.iter().copied().fold(0.0, f64::max);
    let t = clock.seconds();
    outcome(
        fv <= 0.01 && fp <= 0.01 && vmax <= 4.0 && t < 60.0,
        format!(
            "beyond 3 SE: {:.2}% of vertices, {:.2}% of pairs (0.27% expected); max vertex |z| {vmax:.2}; {t:.1}s",
            100.0 * fv,
            100.0 * fp
        ),
    )
}

fn edge_and_walk_formulas() -> Outcome {
    let clock = Stopwatch::start();
    let spec = GraphonSpec::constant(0.5).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, scheme) in [("edge", SchemeConfig::uniform_edge(50, 5, 1.0)), ("walk", SchemeConfig::random_walk(50, 5, 1.0))] {
        let r = verify_assumption1(&spec, &scheme, &[500, 2000], 4000, 4, 21).unwrap();
        let (small, large) = (&r[0], &r[1]);
        let ok_pairs = large.max_pair_error <= 0.15;
        let ok_vertices = large.max_vertex_error <= 0.05;
        let shrinks = large.max_pair_error < small.max_pair_error && large.max_vertex_error < small.max_vertex_error;
        pass &= ok_pairs && ok_vertices && shrinks;
        detail.push(format!(
            "{name}: pairs {:.3} -> {:.3} [{}], vertices {:.3} -> {:.3} [{}], shrinking [{}]",
            small.max_pair_error,
            large.max_pair_error,
            if ok_pairs { "ok" } else { "over 0.15" },
            small.max_vertex_error,
            large.max_vertex_error,
            if ok_vertices { "ok" } else { "over 0.05" },
            if shrinks { "ok" } else { "no" }
        ));
    }
    let t = clock.seconds();
    outcome(pass && t < 600.0, format!("{}; {t:.1}s", detail.join("; ")))
}

fn population_oracle() -> Outcome {
    let clock = Stopwatch::start();
    let logit = |p: f64| (p / (1.0 - p)).ln();
    let w = discretize_weights(&GraphonSpec::constant(0.8).unwrap(), 1.0, &SchemeConfig::uniform_vertex(2), 8).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for (xi, target) in [(0.0, logit(0.8)), (0.1, logit(0.7))] {
        let psd = minimize_psd(&w, xi).unwrap();
        let fac = minimize_factored(&w, xi, 8, 10.0, 3).unwrap();
        let m = psd.kernel.matrix();
        let entry = m.iter().map(|v| (v - target).abs()).fold(0.0, f64::max);
        let agree = (psd.objective - fac.objective).abs();
        let kkt = kkt_residual(&psd.kernel, &w, xi).unwrap();
        pass &= entry <= 1e-3 && agree <= 1e-6 && kkt <= 1e-5;
        detail.push(format!("xi={xi}: |K-{target:.4}| {entry:.1e}, psd vs factored {agree:.1e}, kkt {kkt:.1e}"));
    }
    let t = clock.seconds();
    outcome(pass && t < 30.0, format!("{}; {t:.1}s", detail.join("; ")))
}

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn value_gap_shrinks() -> Outcome {
    let clock = Stopwatch::start();
    let scheme = SchemeConfig::random_walk(10, 1, 1.0);
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, spec) in [("constant", GraphonSpec::constant(0.8).unwrap()), ("smooth", GraphonSpec::smooth_product(0.3, 0.5).unwrap())] {
        for xi in [0.0, 0.1] {
            let recs = verify_theorem1(&spec, &scheme, &[200, 800], &ConvergenceConfig::new(xi, 2), &SEEDS).unwrap();
            let m = median_by_n(&recs, |r| r.n, |r| r.gap);
            let ok = recs.iter().all(|r| r.gap >= 0.0 && r.gap.is_finite()) && m[1].1 < m[0].1;
            pass &= ok;
            detail.push(format!("{name} xi={xi}: {:.4} -> {:.4}", m[0].1, m[1].1));
        }
    }
    let t = clock.seconds();
    outcome(pass && t < 1800.0, format!("median gap n=200 -> 800: {}; {t:.0}s", detail.join(", ")))
}

fn gram_deviation_shrinks() -> Outcome {
    let clock = Stopwatch::start();
    let spec = GraphonSpec::constant(0.8).unwrap();
    let recs = verify_theorem2(&spec, &SchemeConfig::uniform_vertex(5), &[200, 400, 800], &ConvergenceConfig::new(0.0, 2), &SEEDS).unwrap();
    let m = median_by_n(&recs, |r| r.n, |r| r.deviation);
    let trend = m[2].1 < m[0].1;
    let small = m[2].1 <= 0.1;
    let t = clock.seconds();
    outcome(
        trend && small && recs.iter().all(|r| r.deviation >= 0.0) && t < 1800.0,
        format!(
            "median deviation {:.4} / {:.4} / {:.4} at n = 200 / 400 / 800; decreasing [{}]; <= 0.1 at 800 [{}]; {t:.0}s",
            m[0].1,
            m[1].1,
            m[2].1,
            if trend { "ok" } else { "no" },
            if small { "ok" } else { "no" }
        ),
    )
}

fn shrinkage_laws() -> Outcome {
    let clock = Stopwatch::start();
    let spec = GraphonSpec::smooth_product(0.3, 0.5).unwrap();
    let g = experiment_graph(&spec, 200, 1).unwrap();
    let scheme = SchemeConfig::random_walk(10, 1, 1.0);
    let w = formula_weights(&spec, &scheme, &g).unwrap();
    let grid = [0.0, 1e-2, 1e-1, 1.0, 10.0, 1e3];
    let recs = shrinkage_curve(&g, &w, &grid, &TrainConfig::full(4, 0.0, 1)).unwrap();
    let norms: Vec<f64> = recs.iter().map(|r| r.mean_sq_norm).collect();
    let tops: Vec<f64> = recs.iter().map(|r| r.top_singular_values[0]).collect();
    let nonincreasing = |v: &[f64]| v.windows(2).all(|p| p[1] <= p[0]);
    let bounded = recs.iter().all(|r| r.norm_bound.is_none_or(|b| r.mean_sq_norm <= b));
    let last = recs.last().unwrap().top_singular_values.iter().copied().fold(0.0, f64::max);
    let t = clock.seconds();
    outcome(
        nonincreasing(&norms) && nonincreasing(&tops) && bounded && last <= 0.1 && t < 600.0,
        format!(
            "mean sq norms {:?}; top gram singular values {:?}; bound held [{}]; largest at 1e3 {last:.2e}; {t:.1}s",
            norms.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(),
            tops.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(),
            if bounded { "ok" } else { "no" }
        ),
    )
}

fn random_orthogonal(d: usize, r: &mut impl Rng) -> DMatrix<f64> {
    let a = DMatrix::from_vec(d, d, gaussian(r, d * d, 1.0));
    a.qr().q()
}

fn invariants() -> Outcome {
    let mut r = stream(77, 0, 0);
    let spec = GraphonSpec::smooth_product(0.2, 0.6).unwrap();
    let scheme = SchemeConfig::random_walk(4, 2, 0.75);
    let mut rot: f64 = 0.0;
    let mut svd: f64 = 0.0;
    for seed in 0..5u64 {
        let (n, d) = (40, 4);
        let g = sample_graph(&spec, n, seed).unwrap();
        let w = formula_weights(&spec, &scheme, &g).unwrap();
        let cfg = RiskConfig::new(0.3).unwrap();
        let x = gaussian(&mut r, n * d, 1.0);
        let emb = EmbeddingMatrix::from_vec(n, d, 1e3, x.clone()).unwrap();
        let q = random_orthogonal(d, &mut r);
        let rotated = DMatrix::from_row_slice(n, d, &x) * q;
        let rows: Vec<f64> = (0..n).flat_map(|i| rotated.row(i).iter().copied().collect::<Vec<_>>()).collect();
        let emb_r = EmbeddingMatrix::from_vec(n, d, 1e3, rows).unwrap();
        let (a, b) = (empirical_risk(&emb, &w, &g, &cfg).unwrap().0, empirical_risk(&emb_r, &w, &g, &cfg).unwrap().0);
        rot = rot.max((a - b).abs() / a.abs());
        svd = svd.max(gram_spectrum(&emb).discrepancy);
    }

    let dw = discretize_weights(&spec, 1.0, &scheme, 6).unwrap();
    let psd = |r: &mut _| {
        let h = DMatrix::from_vec(6, 3, gaussian(r, 18, 1.0));
        &h * h.transpose()
    };
    let (k1, k2) = (psd(&mut r), psd(&mut r));
    let kernel = |m: DMatrix<f64>| StepKernel::full(m, dw.cg.clone()).unwrap();
    let (a, b) = (0.7, 2.5);
    let lhs = regularizer_value(&kernel(&k1 * a + &k2 * b), &dw).unwrap();
    let rhs = a * regularizer_value(&kernel(k1.clone()), &dw).unwrap() + b * regularizer_value(&kernel(k2), &dw).unwrap();
    let mut lin = (lhs - rhs).abs() / rhs.abs();
    let k = kernel(k1);
    for xi in [0.1, 3.0] {
        let split = population_value(&k, &dw, 0.0).unwrap() + xi * regularizer_value(&k, &dw).unwrap();
        let whole = population_value(&k, &dw, xi).unwrap();
        lin = lin.max((split - whole).abs() / whole.abs());
    }
    outcome(
        rot <= 1e-10 && svd <= 1e-8 && lin <= 1e-13,
        format!("rotation rel change {rot:.1e}; |sum sigma^2 - |W|_F^2| {svd:.1e}; trace linearity {lin:.1e}"),
    )
}

fn adam_config(d: usize, xi: f64) -> TrainConfig {
    let mut cfg = TrainConfig::sgd(d, xi, 1);
    if let Optimizer::Adam { epochs, .. } = &mut cfg.optimizer {
        *epochs = 5;
    }
    cfg
}

fn synthetic_link_prediction() -> Outcome {
    let clock = Stopwatch::start();
    let spec = GraphonSpec::step_block(vec![vec![0.9, 0.05], vec![0.05, 0.9]]).unwrap();
    let g = experiment_graph(&spec, 600, 1).unwrap();
    let scheme = SchemeConfig::random_walk(5, 1, 1.0);
    let split = SplitConfig::default();
    let runs = 50 * g.n();
    let score = |xi: f64| link_prediction_eval(&g, &scheme, &adam_config(16, xi), &split, 3, 5, runs).unwrap().roc_auc_mean;
    let unreg = score(0.0);
    let regs: Vec<(f64, f64)> = [1e-4, 1e-3, 1e-2, 1e-1].into_iter().map(|xi| (xi, score(xi))).collect();
    let (best_xi, best) = regs.iter().copied().fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let random = link_prediction_with(&g, &split, 3, 5, |t, s| {
        let mut r = stream(s, 0, 0);
        EmbeddingMatrix::from_vec(t.n(), 16, 10.0, gaussian(&mut r, t.n() * 16, 0.1))
    })
    .unwrap()
    .roc_auc_mean;
    let t = clock.seconds();
    outcome(
        best >= unreg - 0.01 && best >= 0.85 && (random - 0.5).abs() <= 0.05 && t < 900.0,
        format!("ROC AUC unregularized {unreg:.4}, best regularized {best:.4} (xi={best_xi}), random {random:.4}; {t:.1}s"),
    )
}

fn cora() -> Option<Outcome> {
    let path = std::env::var_os("EMBREG_CORA")?;
    let path = std::path::PathBuf::from(path);
    let format = if path.extension().is_some_and(|e| e == "csv") { EdgeListFormat::Csv } else { EdgeListFormat::Whitespace };
    let g = ingest_edge_list(&path, format).unwrap().graph;
    let scheme = SchemeConfig::random_walk(5, 1, 1.0);
    let runs = 50 * g.n();
    let pr = |xi: f64| link_prediction_eval(&g, &scheme, &adam_config(128, xi), &SplitConfig::default(), 10, 1, runs).unwrap().pr_auc_mean;
    let unreg = pr(0.0);
    let best = [1.0, 5.0]
        .into_iter()
        .flat_map(|m| (3..=8).map(move |e| m * 10f64.powi(-e)))
        .map(pr)
        .fold(f64::NEG_INFINITY, f64::max);
    Some(outcome(
        (unreg - 0.84).abs() <= 0.03 && (best - 0.90).abs() <= 0.03,
        format!("PR AUC unregularized {unreg:.4}, best regularized {best:.4}"),
    ))
}

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient correctness", gradients),
        ("uniform vertex inclusion exactness", uniform_vertex_exactness),
        ("uniform edge and random walk limit formulas", edge_and_walk_formulas),
        ("population oracle", population_oracle),
        ("empirical vs population value gap", value_gap_shrinks),
        ("gram deviation from the population kernel", gram_deviation_shrinks),
        ("shrinkage laws", shrinkage_laws),
        ("rotation and normalization invariants", invariants),
        ("synthetic link prediction", synthetic_link_prediction),
    ];
    let selected = |name: &str| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str()));
    let mut failed = 0;
    for (name, run) in criteria {
        if !selected(name) {
            continue;
        }
        let o = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if selected("cora") {
        match cora() {
            Some(o) => {
                println!("{} cora reproduction (optional): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
                failed += usize::from(!o.pass);
            }
            None => println!("SKIP cora reproduction (optional): EMBREG_CORA not set"),
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
