//! Link prediction: edge/non-edge holdout, Hadamard pair features and a logistic classifier.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graphon::LatentGraph;
use crate::risk::{loss_and_slope, EmbeddingMatrix};
use crate::rng::{self, child_seed, domain};
use crate::sampler::SchemeConfig;
use crate::trainer::{train_sgd, TrainConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Fraction of edges held out, with as many sampled non-edges.
    pub holdout_frac: f64,
    /// Fraction of held-out pairs used to fit the classifier; the rest is scored.
    pub classifier_frac: f64,
    #[serde(default = "default_l2")]
    pub l2: f64,
}

fn default_l2() -> f64 {
    1e-4
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { holdout_frac: 0.1, classifier_frac: 0.5, l2: default_l2() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RepeatScore {
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub held_out_edges: usize,
    pub isolated_vertices: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkPredictionResult {
    pub roc_auc_mean: f64,
    pub roc_auc_std: f64,
    pub pr_auc_mean: f64,
    pub pr_auc_std: f64,
    pub holdout_frac: f64,
    pub classifier_frac: f64,
    pub repeats: usize,
    pub runs: Vec<RepeatScore>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Link prediction with embeddings from [`train_sgd`] on the training graph.
pub fn link_prediction_eval(
    g: &LatentGraph,
    scheme: &SchemeConfig,
    cfg: &TrainConfig,
    split: &SplitConfig,
    repeats: usize,
    seed: u64,
    runs_per_epoch: usize,
) -> Result<LinkPredictionResult> {
    link_prediction_with(g, split, repeats, seed, |train, s| {
        train_sgd(train, scheme, &TrainConfig { seed: s, ..*cfg }, runs_per_epoch)
    })
}

/// Link prediction with a caller-supplied embedding of the training graph.
pub fn link_prediction_with<F>(g: &LatentGraph, split: &SplitConfig, repeats: usize, seed: u64, mut embed: F) -> Result<LinkPredictionResult>
where
    F: FnMut(&LatentGraph, u64) -> Result<EmbeddingMatrix>,
{
    if !(split.holdout_frac > 0.0 && split.holdout_frac < 1.0) || !(split.classifier_frac > 0.0 && split.classifier_frac < 1.0) {
        return Err(Error::InvalidArgument("holdout and classifier fractions must lie in (0, 1)".into()));
    }
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be >= 1".into()));
    }
    let n = g.n();
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let m = ((split.holdout_frac * edges.len() as f64).round() as usize).max(1);
    let total_pairs = n * n.saturating_sub(1) / 2;
    if edges.len() < 2 || total_pairs < edges.len() + m {
        return Err(Error::DegenerateSplit(format!("cannot hold out {m} edges and {m} non-edges")));
    }
    let mut runs = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let mut rs = rng::stream(seed, domain::SPLIT, r as u64);
        let mut pool = edges.clone();
        let (held, _) = pool.partial_shuffle(&mut rs, m);
        let held: Vec<(usize, usize)> = held.to_vec();

        let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(m);
        let mut non_edges = Vec::with_capacity(m);
        let mut attempts = 0usize;
        while non_edges.len() < m {
            attempts += 1;
            if attempts > 1000 * m + 10_000 {
                return Err(Error::DegenerateSplit("non-edge rejection sampling did not finish".into()));
            }
            let u = rs.random_range(0..n);
            let v = rs.random_range(0..n);
            if u == v {
                continue;
            }
            let pair = (u.min(v), u.max(v));
            if g.has_edge(pair.0, pair.1) || !seen.insert(pair) {
                continue;
            }
            non_edges.push(pair);
        }

        let train = g.without_edges(&held);
        let isolated = (0..n).filter(|&v| train.degree(v) == 0).count();
        let emb = embed(&train, child_seed(seed, domain::SGD, r as u64))?;
        if emb.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: emb.n() });
        }

        let mut pairs: Vec<((usize, usize), bool)> = held.iter().map(|&p| (p, true)).chain(non_edges.iter().map(|&p| (p, false))).collect();
        pairs.shuffle(&mut rs);
        let cut = (split.classifier_frac * pairs.len() as f64).round() as usize;
        let (fit, test) = pairs.split_at(cut.clamp(1, pairs.len() - 1));
        let features = |set: &[((usize, usize), bool)]| -> Vec<Vec<f64>> {
            set.iter().map(|&((u, v), _)| emb.row(u).iter().zip(emb.row(v)).map(|(a, b)| a * b).collect()).collect()
        };
        let labels = |set: &[((usize, usize), bool)]| -> Vec<bool> { set.iter().map(|p| p.1).collect() };
        let (test_labels, fit_labels) = (labels(test), labels(fit));
        if test_labels.iter().all(|&y| y) || test_labels.iter().all(|&y| !y) {
            return Err(Error::DegenerateSplit("test set has a single class".into()));
        }
        let weights = train_logistic(&features(fit), &fit_labels, split.l2, 10_000)?;
        let scores: Vec<f64> = features(test).iter().map(|x| logistic_score(&weights, x)).collect();
        runs.push(RepeatScore {
            roc_auc: roc_auc(&scores, &test_labels),
            pr_auc: average_precision(&scores, &test_labels),
            held_out_edges: m,
            isolated_vertices: isolated,
        });
    }
    let (roc_auc_mean, roc_auc_std) = mean_std(&runs.iter().map(|r| r.roc_auc).collect::<Vec<_>>());
    let (pr_auc_mean, pr_auc_std) = mean_std(&runs.iter().map(|r| r.pr_auc).collect::<Vec<_>>());
    Ok(LinkPredictionResult {
        roc_auc_mean,
        roc_auc_std,
        pr_auc_mean,
        pr_auc_std,
        holdout_frac: split.holdout_frac,
        classifier_frac: split.classifier_frac,
        repeats,
        runs,
    })
}

/// Linear score `wᵀx + b`; `weights` ends with the intercept.
pub fn logistic_score(weights: &[f64], x: &[f64]) -> f64 {
    let d = weights.len() - 1;
    weights[..d].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + weights[d]
}

fn logistic_objective(w: &[f64], x: &[Vec<f64>], y: &[bool], l2: f64, grad: &mut [f64]) -> f64 {
    let d = w.len() - 1;
    let m = x.len() as f64;
    grad.fill(0.0);
    let mut value = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let (l, s) = loss_and_slope(logistic_score(w, xi), yi);
        value += l;
        for k in 0..d {
            grad[k] += s * xi[k];
        }
        grad[d] += s;
    }
    value /= m;
    for g in grad.iter_mut() {
        *g /= m;
    }
    for k in 0..d {
        value += 0.5 * l2 * w[k] * w[k];
        grad[k] += l2 * w[k];
    }
    value
}

/// ℓ2-regularized logistic regression by gradient descent with Barzilai–Borwein steps.
///
/// Returns `d + 1` weights, the intercept last (not penalized).
pub fn train_logistic(features: &[Vec<f64>], labels: &[bool], l2: f64, iters: usize) -> Result<Vec<f64>> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: features.len(), got: labels.len() });
    }
    if !labels.iter().any(|&y| y) || labels.iter().all(|&y| y) {
        return Err(Error::DegenerateSplit("logistic regression needs both classes".into()));
    }
    let d = features[0].len();
    if features.iter().any(|x| x.len() != d) {
        return Err(Error::InvalidArgument("ragged feature matrix".into()));
    }
    let mut w = vec![0.0; d + 1];
    let mut grad = vec![0.0; d + 1];
    let mut f = logistic_objective(&w, features, labels, l2, &mut grad);
    let mut step = 1.0;
    let mut trial = vec![0.0; d + 1];
    let mut trial_grad = vec![0.0; d + 1];
    for _ in 0..iters {
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2.sqrt() <= 1e-6 {
            break;
        }
        let mut t = step;
        let mut ft = f;
        let mut moved = false;
        for _ in 0..60 {
            for k in 0..=d {
                trial[k] = w[k] - t * grad[k];
            }
            ft = logistic_objective(&trial, features, labels, l2, &mut trial_grad);
            if ft.is_finite() && ft <= f - 1e-4 * t * gnorm2 {
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
        let (mut ss, mut sy) = (0.0, 0.0);
        for k in 0..=d {
            let s = trial[k] - w[k];
            ss += s * s;
            sy += s * (trial_grad[k] - grad[k]);
        }
        step = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e10) } else { 2.0 * t };
        std::mem::swap(&mut w, &mut trial);
        std::mem::swap(&mut grad, &mut trial_grad);
        f = ft;
    }
    Ok(w)
}

/// Area under the ROC curve with ties counted as one half; `NaN` without both classes.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut rank_sum, mut pos) = (0.0, 0usize);
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg_rank = 0.5 * ((i + 1) + (j + 1)) as f64;
        for &k in &idx[i..=j] {
            if labels[k] {
                rank_sum += avg_rank;
                pos += 1;
            }
        }
        i = j + 1;
    }
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return f64::NAN;
    }
    let (p, q) = (pos as f64, neg as f64);
    (rank_sum - p * (p + 1.0) / 2.0) / (p * q)
}

/// Average precision with one step per distinct score threshold.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> f64 {
    let total_pos = labels.iter().filter(|&&y| y).count();
    if total_pos == 0 {
        return f64::NAN;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp, mut ap) = (0usize, 0usize, 0.0);
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let before = tp;
        for &k in &idx[i..=j] {
            if labels[k] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        ap += (tp - before) as f64 / total_pos as f64 * tp as f64 / (tp + fp) as f64;
        i = j + 1;
    }
    ap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphon::{sample_graph, GraphonSpec};
    use crate::trainer::initial_embedding;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] && !labels[j] {
                    den += 1.0;
                    num += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]), 0.75);
        assert_eq!(roc_auc(&[1.0, 1.0], &[true, false]), 0.5);
        assert!(roc_auc(&[1.0, 2.0], &[true, true]).is_nan());
        let ap = average_precision(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]);
        assert!((ap - (0.5 * 1.0 + 0.5 * 2.0 / 3.0)).abs() < 1e-15);
        assert_eq!(average_precision(&[3.0, 2.0, 1.0], &[true, true, false]), 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(30))]
        #[test]
        fn auc_matches_brute_force(raw in prop::collection::vec((0u8..20, any::<bool>()), 2..500)) {
            let scores: Vec<f64> = raw.iter().map(|r| r.0 as f64).collect();
            let labels: Vec<bool> = raw.iter().map(|r| r.1).collect();
            prop_assume!(labels.iter().any(|&y| y) && labels.iter().any(|&y| !y));
            prop_assert!((roc_auc(&scores, &labels) - brute_auc(&scores, &labels)).abs() < 1e-12);
        }
    }

    #[test]
    fn logistic_separates_toy_data() {
        let x: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![2.0, 1.5], vec![1.5, 3.0], vec![-1.0, -0.5], vec![-2.0, 0.1], vec![-0.5, -2.0]];
        let y = [true, true, true, false, false, false];
        let w = train_logistic(&x, &y, 1e-6, 5000).unwrap();
        for (xi, &yi) in x.iter().zip(&y) {
            assert_eq!(logistic_score(&w, xi) > 0.0, yi);
        }
        assert!(train_logistic(&x, &[true; 6], 1e-6, 10).is_err());
    }

    #[test]
    fn logistic_sign_follows_class_means() {
        let mut r = rng::stream(1, 0, 0);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..400 {
            let label = i % 2 == 0;
            let centre = if label { -0.7 } else { 0.7 };
            x.push(vec![centre + r.sample::<f64, _>(StandardNormal)]);
            y.push(label);
        }
        let w = train_logistic(&x, &y, 1e-3, 5000).unwrap();
        assert!(w[0] < 0.0);
    }

    #[test]
    fn uninformative_labels_give_chance_auc() {
        let mut r = rng::stream(2, 0, 0);
        let x: Vec<Vec<f64>> = (0..4000).map(|_| vec![r.sample::<f64, _>(StandardNormal), r.sample(StandardNormal)]).collect();
        let y: Vec<bool> = (0..4000).map(|_| r.random::<bool>()).collect();
        let w = train_logistic(&x[..2000], &y[..2000], 1e-4, 2000).unwrap();
        let s: Vec<f64> = x[2000..].iter().map(|v| logistic_score(&w, v)).collect();
        assert!((roc_auc(&s, &y[2000..]) - 0.5).abs() < 0.05);
    }

    #[test]
    fn random_embeddings_score_near_chance() {
        let g = sample_graph(&GraphonSpec::constant(0.1).unwrap(), 400, 3).unwrap();
        let split = SplitConfig::default();
        let res = link_prediction_with(&g, &split, 3, 4, |train, s| {
            let cfg = TrainConfig { init: crate::trainer::Init::GaussianScaled { sigma: Some(1.0) }, ..TrainConfig::full(8, 0.0, s) };
            Ok(initial_embedding(train.n(), &cfg, 0))
        })
        .unwrap();
        assert!((res.roc_auc_mean - 0.5).abs() <= 0.05, "{res:?}");
        assert_eq!(res.runs.len(), 3);
        assert!(res.roc_auc_std >= 0.0);
    }

    #[test]
    fn tiny_graphs_are_degenerate() {
        let g = LatentGraph::from_edges(3, [(0, 1), (1, 2), (0, 2)], None, 1.0).unwrap();
        let r = link_prediction_with(&g, &SplitConfig::default(), 1, 0, |t, _| Ok(EmbeddingMatrix::zeros(t.n(), 2, 1.0)));
        assert!(matches!(r, Err(Error::DegenerateSplit(_))));
    }
}
