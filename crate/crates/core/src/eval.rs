//! Ranking accuracy, AUC, the logistic-regression probe, classification and
//! link-prediction protocols, and cold-start slicing.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::hetgraph::{Edge, HeteroGraph};
use crate::model::{dot, log_sigmoid, sigmoid, Matrix, ModelParams, TrainConfig};
use crate::optimizer;
use crate::sampler::{RelationSample, SampleSet};
use crate::seed;

/// Mann-Whitney `U` of `pos` over `neg`: pairs with the positive scored
/// higher, plus half the ties. Sort-and-rank with midranks.
pub fn mann_whitney_u(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.iter().chain(neg).any(|v| v.is_nan()) {
        return Err(Error::NonFinite("score"));
    }
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        let n_pos = all[i..=j].iter().filter(|x| x.1).count();
        rank_sum += mid * n_pos as f64;
        i = j + 1;
    }
    let n = pos.len() as f64;
    Ok(rank_sum - n * (n + 1.0) / 2.0)
}

/// Area under the ROC curve for `(score, is_positive)` pairs.
pub fn auc(scored: &[(f64, bool)]) -> Result<f64> {
    let pos: Vec<f64> = scored.iter().filter(|s| s.1).map(|s| s.0).collect();
    let neg: Vec<f64> = scored.iter().filter(|s| !s.1).map(|s| s.0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    Ok(mann_whitney_u(&pos, &neg)? / (pos.len() as f64 * neg.len() as f64))
}

/// Fraction of label-discordant pairs ordered like their labels; tied
/// scores count one half. Returns `(accuracy, n_pairs)`.
pub fn pairwise_ranking_accuracy(scores: &[f64], labels: &[i64]) -> Result<(f64, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    let mut groups: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for (&s, &l) in scores.iter().zip(labels) {
        groups.entry(l).or_default().push(s);
    }
    let groups: Vec<&Vec<f64>> = groups.values().collect();
    let mut correct = 0.0;
    let mut pairs = 0usize;
    for (a, low) in groups.iter().enumerate() {
        for high in &groups[a + 1..] {
            correct += mann_whitney_u(high, low)?;
            pairs += low.len() * high.len();
        }
    }
    if pairs == 0 {
        return Err(Error::NoEligiblePairs("need users with distinct labels"));
    }
    Ok((correct / pairs as f64, pairs))
}

/// Fitted L2-regularized logistic regression on raw feature coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Infinity norm of the objective gradient at the returned point.
    pub grad_norm: f64,
    pub iterations: usize,
}

impl LogisticModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.intercept
    }
}

pub const LOGISTIC_TOL: f64 = 1e-6;
pub const LOGISTIC_MAX_ITER: usize = 10_000;

struct Standardized {
    x: Vec<f64>,
    mean: Vec<f64>,
    scale: Vec<f64>,
    k: usize,
}

fn standardize(features: &Matrix) -> Standardized {
    let (n, k) = (features.rows(), features.cols());
    let mut mean = vec![0.0; k];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(features.row(i)) {
            *m += v / n as f64;
        }
    }
    let mut var = vec![0.0; k];
    for i in 0..n {
        for ((s, v), m) in var.iter_mut().zip(features.row(i)).zip(&mean) {
            *s += (v - m) * (v - m) / n as f64;
        }
    }
    let scale: Vec<f64> = var
        .iter()
        .map(|v| if *v > 0.0 { v.sqrt() } else { 1.0 })
        .collect();
    let mut x = Vec::with_capacity(n * k);
    for i in 0..n {
        for ((v, m), s) in features.row(i).iter().zip(&mean).zip(&scale) {
            x.push((v - m) / s);
        }
    }
    Standardized { x, mean, scale, k }
}

/// Mean log-likelihood minus `l2/2 |w|^2`, and its gradient (last entry is the intercept).
fn logistic_value_grad(z: &Standardized, y: &[bool], theta: &[f64], l2: f64) -> (f64, Vec<f64>) {
    let k = z.k;
    let n = y.len() as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; k + 1];
    for (i, &yi) in y.iter().enumerate() {
        let row = &z.x[i * k..(i + 1) * k];
        let s = dot(row, &theta[..k]) + theta[k];
        value += if yi { log_sigmoid(s) } else { log_sigmoid(-s) };
        let resid = if yi { sigmoid(-s) } else { -sigmoid(s) };
        for (g, v) in grad.iter_mut().zip(row) {
            *g += resid * v;
        }
        grad[k] += resid;
    }
    value /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    let wsq: f64 = theta[..k].iter().map(|w| w * w).sum();
    value -= 0.5 * l2 * wsq;
    for (g, w) in grad[..k].iter_mut().zip(&theta[..k]) {
        *g -= l2 * w;
    }
    (value, grad)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Fits logistic regression by gradient ascent (Barzilai-Borwein step with
/// Armijo backtracking) on standardized features; the returned weights are
/// mapped back to the raw coordinates.
pub fn train_logistic(features: &Matrix, labels: &[bool], l2: f64) -> Result<LogisticModel> {
    if features.rows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: features.rows(),
        });
    }
    if features.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("features"));
    }
    if !(l2 >= 0.0) {
        return Err(Error::Validation("l2 must be non-negative".into()));
    }
    if !labels.iter().any(|&y| y) || labels.iter().all(|&y| y) {
        return Err(Error::SingleClass);
    }
    let z = standardize(features);
    let k = z.k;
    let lipschitz = 0.25 * (k as f64 + 1.0) + l2;
    let mut theta = vec![0.0; k + 1];
    let (mut value, mut grad) = logistic_value_grad(&z, labels, &theta, l2);
    let mut step = 1.0 / lipschitz;
    let mut iterations = 0;
    while iterations < LOGISTIC_MAX_ITER && inf_norm(&grad) >= LOGISTIC_TOL {
        iterations += 1;
        let gsq: f64 = grad.iter().map(|g| g * g).sum();
        let mut alpha = step;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t + alpha * g).collect();
            let (v, g) = logistic_value_grad(&z, labels, &cand, l2);
            if v >= value + 1e-4 * alpha * gsq {
                accepted = Some((cand, v, g));
                break;
            }
            alpha *= 0.5;
        }
        let Some((cand, v, g)) = accepted else { break };
        // BB1 step for ascent on a concave objective: s.s / (-s.y)
        let s: Vec<f64> = cand.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = -dot(&s, &yv);
        step = if sy > 0.0 {
            (dot(&s, &s) / sy).min(1e6)
        } else {
            1.0 / lipschitz
        };
        theta = cand;
        value = v;
        grad = g;
    }
    let weights: Vec<f64> = theta[..k]
        .iter()
        .zip(&z.scale)
        .map(|(w, s)| w / s)
        .collect();
    let intercept = theta[k] - dot(&weights, &z.mean);
    Ok(LogisticModel {
        weights,
        intercept,
        grad_norm: inf_norm(&grad),
        iterations,
    })
}

fn select_rows(features: &Matrix, rows: &[usize]) -> Matrix {
    let k = features.cols();
    let mut data = Vec::with_capacity(rows.len() * k);
    for &i in rows {
        data.extend_from_slice(features.row(i));
    }
    Matrix::from_vec(rows.len(), k, data).expect("consistent shape")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    pub mean: f64,
    pub std: f64,
    pub runs: Vec<f64>,
}

impl ProtocolResult {
    pub fn from_runs(runs: Vec<f64>) -> Self {
        let n = runs.len() as f64;
        let mean = runs.iter().sum::<f64>() / n;
        let std = if runs.len() > 1 {
            (runs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std, runs }
    }
}

pub const SPLIT_ATTEMPTS: usize = 100;

/// Repeated random train/test splits: fit [`train_logistic`] on the train
/// part and report the held-out AUC of its decision values.
pub fn classification_protocol(
    features: &Matrix,
    labels: &[bool],
    runs: usize,
    train_frac: f64,
    l2: f64,
    seed: u64,
) -> Result<ProtocolResult> {
    if features.rows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: features.rows(),
        });
    }
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::Validation("train_frac must lie in (0, 1)".into()));
    }
    if runs == 0 {
        return Err(Error::Validation("runs must be positive".into()));
    }
    let n = labels.len();
    if n < 4 {
        return Err(Error::Validation(format!("{n} labeled rows are too few to split")));
    }
    let n_train = ((train_frac * n as f64).round() as usize).clamp(2, n - 2);
    let mut aucs = Vec::with_capacity(runs);
    for run in 0..runs {
        let mut split = None;
        for attempt in 0..SPLIT_ATTEMPTS {
            let mut rng = seed::rng_for(seed, &[seed::STREAM_EVAL, run as u64, attempt as u64]);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let (train, test) = idx.split_at(n_train);
            let both = |part: &[usize]| {
                part.iter().any(|&i| labels[i]) && part.iter().any(|&i| !labels[i])
            };
            if both(train) && both(test) {
                split = Some((train.to_vec(), test.to_vec()));
                break;
            }
        }
        let (train, test) = split.ok_or(Error::DegenerateSplit(SPLIT_ATTEMPTS))?;
        let train_y: Vec<bool> = train.iter().map(|&i| labels[i]).collect();
        let model = train_logistic(&select_rows(features, &train), &train_y, l2)?;
        let scored: Vec<(f64, bool)> = test
            .iter()
            .map(|&i| (model.decision(features.row(i)), labels[i]))
            .collect();
        aucs.push(auc(&scored)?);
    }
    Ok(ProtocolResult::from_runs(aucs))
}

/// One held-out link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeldOutLink {
    pub relation: usize,
    pub sender: usize,
    pub receiver: usize,
    pub positive: bool,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSplit {
    pub train_fraction: f64,
    pub held_out: Vec<HeldOutLink>,
}

/// Holds out `1 - train_fraction` of the sampled links (existing and
/// non-existing together) of each listed relation, chosen uniformly.
/// Relations not listed stay whole in the returned training set.
pub fn split_links(
    samples: &SampleSet,
    relations: &[usize],
    train_fraction: f64,
    seed: u64,
) -> Result<(SampleSet, LinkSplit)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Validation("train_fraction must lie in (0, 1)".into()));
    }
    for &r in relations {
        if r >= samples.num_relations() {
            return Err(Error::OutOfBounds {
                what: "relation",
                index: r,
                len: samples.num_relations(),
            });
        }
    }
    for attempt in 0..SPLIT_ATTEMPTS {
        let mut train_rel: Vec<RelationSample> = samples.relations().to_vec();
        let mut held_out = Vec::new();
        for &r in relations {
            let rs = samples.relation(r);
            let mut entries: Vec<(Edge, bool)> = rs.signed().map(|(e, s)| (*e, s)).collect();
            let mut rng = seed::rng_for(seed, &[seed::STREAM_SPLIT, r as u64, attempt as u64]);
            entries.shuffle(&mut rng);
            let keep = (train_fraction * entries.len() as f64).round() as usize;
            let (train, test) = entries.split_at(keep);
            let mut positives: Vec<Edge> = train.iter().filter(|x| x.1).map(|x| x.0).collect();
            let mut negatives: Vec<Edge> = train.iter().filter(|x| !x.1).map(|x| x.0).collect();
            positives.sort_by_key(|e| (e.sender, e.receiver));
            negatives.sort_by_key(|e| (e.sender, e.receiver));
            train_rel[r] = RelationSample {
                positives,
                negatives,
                starved_senders: rs.starved_senders,
            };
            held_out.extend(test.iter().map(|(e, positive)| HeldOutLink {
                relation: r,
                sender: e.sender,
                receiver: e.receiver,
                positive: *positive,
                count: e.count,
            }));
        }
        let has_pos = held_out.iter().any(|h| h.positive);
        let has_neg = held_out.iter().any(|h| !h.positive);
        if has_pos && has_neg {
            return Ok((
                SampleSet::new(train_rel),
                LinkSplit {
                    train_fraction,
                    held_out,
                },
            ));
        }
    }
    Err(Error::DegenerateSplit(SPLIT_ATTEMPTS))
}

/// AUC of `sigmoid(p . q + b)` on the held-out links.
pub fn link_prediction_auc(params: &ModelParams, split: &LinkSplit) -> Result<f64> {
    let scored: Vec<(f64, bool)> = split
        .held_out
        .iter()
        .map(|h| (params.probability(h.relation, h.sender, h.receiver), h.positive))
        .collect();
    auc(&scored)
}

/// Trains on `train_samples` and scores the held-out links.
pub fn link_prediction_protocol(
    g: &HeteroGraph,
    train_samples: &SampleSet,
    split: &LinkSplit,
    config: &TrainConfig,
) -> Result<f64> {
    let state = optimizer::train(g, train_samples, config)?;
    link_prediction_auc(&state.params, split)
}

/// Held-out AUC of the bias-free averaged-label score
/// `sigmoid(aver_i * label_j)`; unknown values contribute a zero logit.
pub fn aver_link_prediction_auc(
    aver: &[Option<f64>],
    receiver_labels: &[Option<i8>],
    split: &LinkSplit,
) -> Result<f64> {
    let scored: Vec<(f64, bool)> = split
        .held_out
        .iter()
        .map(|h| {
            let a = aver.get(h.sender).copied().flatten().unwrap_or(0.0);
            let l = receiver_labels
                .get(h.receiver)
                .copied()
                .flatten()
                .map_or(0.0, f64::from);
            (sigmoid(a * l), h.positive)
        })
        .collect();
    auc(&scored)
}

/// Senders whose count-summed out-degree in `relation` is at most `threshold`.
pub fn cold_start_slice(g: &HeteroGraph, relation: usize, threshold: u64) -> Result<Vec<usize>> {
    g.relation(relation)?;
    (0..g.num_senders())
        .filter_map(|s| match g.out_degree(relation, s) {
            Ok(d) if d <= threshold => Some(Ok(s)),
            Ok(_) => None,
            Err(e) => Some(Err(e)),
        })
        .collect()
}

/// Cold-start slice measured on a training sample set (positives only).
pub fn cold_start_slice_samples(
    samples: &SampleSet,
    relation: usize,
    n_senders: usize,
    threshold: u64,
) -> Result<Vec<usize>> {
    if relation >= samples.num_relations() {
        return Err(Error::OutOfBounds {
            what: "relation",
            index: relation,
            len: samples.num_relations(),
        });
    }
    let mut deg = vec![0u64; n_senders];
    for e in &samples.relation(relation).positives {
        deg[e.sender] += u64::from(e.count);
    }
    Ok((0..n_senders).filter(|&s| deg[s] <= threshold).collect())
}

/// Node labels used by the evaluation tasks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalLabels {
    /// 1 (most liberal) ..= 5 (most conservative).
    pub ordinal: HashMap<String, u8>,
    /// -1 / +1.
    pub binary: HashMap<String, i8>,
}

/// Reads `id,label` rows; an `id,label` header line is skipped.
pub fn read_label_csv(path: &Path) -> Result<Vec<(String, i64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let perr = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let (id, label) = line
            .rsplit_once(',')
            .ok_or_else(|| perr("expected 'id,label'".into()))?;
        if lineno == 0 && label.trim() == "label" {
            continue;
        }
        let label: i64 = label
            .trim()
            .parse()
            .map_err(|e| perr(format!("bad label '{label}': {e}")))?;
        out.push((id.trim().to_owned(), label));
    }
    Ok(out)
}

impl EvalLabels {
    pub fn ordinal_from_csv(path: &Path) -> Result<HashMap<String, u8>> {
        read_label_csv(path)?
            .into_iter()
            .map(|(id, l)| {
                if (1..=5).contains(&l) {
                    Ok((id, l as u8))
                } else {
                    Err(Error::Validation(format!("ordinal label {l} for '{id}' outside 1..=5")))
                }
            })
            .collect()
    }

    pub fn binary_from_csv(path: &Path) -> Result<HashMap<String, i8>> {
        read_label_csv(path)?
            .into_iter()
            .map(|(id, l)| match l {
                -1 | 1 => Ok((id, l as i8)),
                _ => Err(Error::Validation(format!("binary label {l} for '{id}' must be -1 or 1"))),
            })
            .collect()
    }
}
