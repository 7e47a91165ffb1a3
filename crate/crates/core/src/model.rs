//! Model parameters, link probability, per-relation losses, the weighted
//! L2-regularized objective and its exact gradients.
//!
//! A link from sender `i` to receiver `j` under relation `r` has probability
//! `sigmoid(p_i . q_j^(r) + b_j^(r))`. The objective is
//!
//! ```text
//! J = sum_r w_r * loglik_r / N_r  -  mu/2 * (|P|^2 + sum_r |Q^(r)|^2 + sum_r |b^(r)|^2)
//! ```
//!
//! where `loglik_r` sums `e+ log s` over positives and `e- log(1 - s)` over
//! sampled negatives, and `N_r` is the summed count of both.

use std::thread;

use rand::Rng;

use crate::error::{Error, Result};
use crate::hetgraph::HeteroGraph;
use crate::sampler::{RelationSample, SampleSet};
use crate::seed;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// Sender ideologies, per-relation receiver images and biases, relation weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// `N1 x K`
    pub ideology: Matrix,
    /// One `N2 x K` matrix per relation.
    pub images: Vec<Matrix>,
    /// One length-`N2` vector per relation.
    pub biases: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(n_senders: usize, n_receivers: usize, n_relations: usize, dim: usize) -> Self {
        Self {
            ideology: Matrix::zeros(n_senders, dim),
            images: vec![Matrix::zeros(n_receivers, dim); n_relations],
            biases: vec![vec![0.0; n_receivers]; n_relations],
            weights: vec![1.0; n_relations],
        }
    }

    /// `P` and `Q` uniform in `[-init_scale, init_scale]`, `B = 0`, `w = 1`.
    pub fn random(
        n_senders: usize,
        n_receivers: usize,
        n_relations: usize,
        dim: usize,
        init_scale: f64,
        seed: u64,
    ) -> Self {
        let mut params = Self::zeros(n_senders, n_receivers, n_relations, dim);
        let mut rng = seed::rng_for(seed, &[seed::STREAM_INIT]);
        if init_scale > 0.0 {
            for v in params.ideology.as_mut_slice() {
                *v = rng.random_range(-init_scale..=init_scale);
            }
            for q in &mut params.images {
                for v in q.as_mut_slice() {
                    *v = rng.random_range(-init_scale..=init_scale);
                }
            }
        }
        params
    }

    /// Randomly initialized parameters shaped for `g`.
    pub fn for_graph(g: &HeteroGraph, config: &TrainConfig, seed: u64) -> Self {
        Self::random(
            g.num_senders(),
            g.num_receivers(),
            g.num_relations(),
            config.dim,
            config.init_scale,
            seed,
        )
    }

    pub fn dim(&self) -> usize {
        self.ideology.cols()
    }

    pub fn num_senders(&self) -> usize {
        self.ideology.rows()
    }

    pub fn num_receivers(&self) -> usize {
        self.biases.first().map_or(0, Vec::len)
    }

    pub fn num_relations(&self) -> usize {
        self.weights.len()
    }

    /// `p_i . q_j^(r) + b_j^(r)`
    #[inline]
    pub fn logit(&self, relation: usize, sender: usize, receiver: usize) -> f64 {
        dot(self.ideology.row(sender), self.images[relation].row(receiver))
            + self.biases[relation][receiver]
    }

    pub fn probability(&self, relation: usize, sender: usize, receiver: usize) -> f64 {
        sigmoid(self.logit(relation, sender, receiver))
    }

    /// `|P|_F^2 + sum_r |Q^(r)|_F^2 + sum_r |b^(r)|^2`
    pub fn squared_norm(&self) -> f64 {
        self.ideology.frobenius_sq()
            + self.images.iter().map(Matrix::frobenius_sq).sum::<f64>()
            + self
                .biases
                .iter()
                .flat_map(|b| b.iter())
                .map(|v| v * v)
                .sum::<f64>()
    }

    /// Checks shapes, finiteness, and the weight constraint.
    pub fn validate(&self) -> Result<()> {
        let r = self.weights.len();
        let k = self.dim();
        let n2 = self.num_receivers();
        if self.images.len() != r || self.biases.len() != r {
            return Err(Error::DimensionMismatch {
                expected: r,
                got: self.images.len().min(self.biases.len()),
            });
        }
        for (q, b) in self.images.iter().zip(&self.biases) {
            if q.cols() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: q.cols(),
                });
            }
            if q.rows() != n2 || b.len() != n2 {
                return Err(Error::DimensionMismatch {
                    expected: n2,
                    got: q.rows().min(b.len()),
                });
            }
        }
        let finite = self.ideology.as_slice().iter().all(|v| v.is_finite())
            && self
                .images
                .iter()
                .all(|q| q.as_slice().iter().all(|v| v.is_finite()))
            && self.biases.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("model parameters"));
        }
        if self.weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Validation("relation weights must be positive".into()));
        }
        let log_prod: f64 = self.weights.iter().map(|w| w.ln()).sum();
        if log_prod.abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "relation weights must multiply to 1 (log product {log_prod:e})"
            )));
        }
        Ok(())
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Ideology dimension `K`.
    pub dim: usize,
    /// L2 strength `mu`.
    pub mu: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub negatives_per_pair: usize,
    pub seed: u64,
    pub line_search: bool,
    pub init_scale: f64,
    /// Freeze all relation weights at 1.
    pub fixed_weights: bool,
    /// Worker threads for gradient accumulation; 1 is bit-deterministic.
    pub threads: usize,
    /// Independent initializations; the highest final objective wins.
    pub restarts: usize,
    /// Stop once `|dJ| < tol * (1 + |J|)` for several consecutive epochs; 0 disables.
    pub convergence_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 5,
            mu: 1e-4,
            learning_rate: 100.0,
            epochs: 200,
            negatives_per_pair: 1,
            seed: 0,
            line_search: true,
            init_scale: 0.1,
            fixed_weights: false,
            threads: 1,
            restarts: 1,
            convergence_tol: 1e-7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(m.to_owned()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad("mu must be a non-negative finite number");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.negatives_per_pair == 0 {
            return bad("negatives_per_pair must be positive");
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad("init_scale must be non-negative");
        }
        if self.threads == 0 {
            return bad("threads must be positive");
        }
        if !(self.convergence_tol >= 0.0 && self.convergence_tol.is_finite()) {
            return bad("convergence_tol must be non-negative");
        }
        if self.restarts == 0 {
            return bad("restarts must be positive");
        }
        Ok(())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(x))` without overflow or cancellation.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Probability that sender ideology `p` links to a receiver with image `q` and bias `b`.
pub fn link_probability(p: &[f64], q: &[f64], b: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    if !b.is_finite() || p.iter().chain(q).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("link_probability input"));
    }
    Ok(sigmoid(dot(p, q) + b))
}

/// Log-likelihood sum and raw gradient contributions of one relation,
/// before the `w_r / N_r` scaling.
#[derive(Debug, Clone)]
pub struct RelationPass {
    pub loglik: f64,
    pub total: f64,
    pub grad: Option<RawGradient>,
}

#[derive(Debug, Clone)]
pub struct RawGradient {
    pub ideology: Vec<f64>,
    pub images: Vec<f64>,
    pub biases: Vec<f64>,
}

impl RawGradient {
    fn zeros(n1: usize, n2: usize, k: usize) -> Self {
        Self {
            ideology: vec![0.0; n1 * k],
            images: vec![0.0; n2 * k],
            biases: vec![0.0; n2],
        }
    }

    fn add_assign(&mut self, other: &RawGradient) {
        add_into(&mut self.ideology, &other.ideology);
        add_into(&mut self.images, &other.images);
        add_into(&mut self.biases, &other.biases);
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn pass_range(
    params: &ModelParams,
    relation: usize,
    rs: &RelationSample,
    lo: usize,
    hi: usize,
    with_grad: bool,
) -> (f64, Option<RawGradient>) {
    let k = params.dim();
    let p_mat = &params.ideology;
    let q_mat = &params.images[relation];
    let bias = &params.biases[relation];
    let n_pos = rs.positives.len();
    let mut loglik = 0.0;
    let mut grad = with_grad.then(|| RawGradient::zeros(p_mat.rows(), q_mat.rows(), k));
    for idx in lo..hi {
        let (e, positive) = if idx < n_pos {
            (&rs.positives[idx], true)
        } else {
            (&rs.negatives[idx - n_pos], false)
        };
        let p = p_mat.row(e.sender);
        let q = q_mat.row(e.receiver);
        let x = dot(p, q) + bias[e.receiver];
        let c = f64::from(e.count);
        // d/dx log s(x) = 1 - s(x) = s(-x);  d/dx log(1 - s(x)) = -s(x)
        let (ll, slope) = if positive {
            (log_sigmoid(x), sigmoid(-x))
        } else {
            (log_sigmoid(-x), -sigmoid(x))
        };
        loglik += c * ll;
        if let Some(g) = grad.as_mut() {
            let s = c * slope;
            let gp = &mut g.ideology[e.sender * k..(e.sender + 1) * k];
            for (d, qv) in gp.iter_mut().zip(q) {
                *d += s * qv;
            }
            let gq = &mut g.images[e.receiver * k..(e.receiver + 1) * k];
            for (d, pv) in gq.iter_mut().zip(p) {
                *d += s * pv;
            }
            g.biases[e.receiver] += s;
        }
    }
    (loglik, grad)
}

fn check_shapes(params: &ModelParams, samples: &SampleSet) -> Result<()> {
    if samples.num_relations() != params.num_relations() {
        return Err(Error::DimensionMismatch {
            expected: params.num_relations(),
            got: samples.num_relations(),
        });
    }
    let n1 = params.num_senders();
    let n2 = params.num_receivers();
    for rs in samples.relations() {
        for (e, _) in rs.signed() {
            if e.sender >= n1 {
                return Err(Error::OutOfBounds {
                    what: "sender",
                    index: e.sender,
                    len: n1,
                });
            }
            if e.receiver >= n2 {
                return Err(Error::OutOfBounds {
                    what: "receiver",
                    index: e.receiver,
                    len: n2,
                });
            }
        }
    }
    Ok(())
}

/// Runs every relation's edge pass. With `threads > 1` each relation's edge
/// list is cut into `threads` fixed contiguous chunks whose partial sums are
/// merged in chunk order.
pub fn relation_passes(
    params: &ModelParams,
    samples: &SampleSet,
    with_grad: bool,
    threads: usize,
) -> Result<Vec<RelationPass>> {
    check_shapes(params, samples)?;
    samples
        .relations()
        .iter()
        .enumerate()
        .map(|(r, rs)| {
            let total = rs.total_count();
            if total == 0 {
                return Err(Error::EmptyRelationSample(r));
            }
            let n = rs.positives.len() + rs.negatives.len();
            let (loglik, grad) = if threads <= 1 || n < 2 * threads {
                pass_range(params, r, rs, 0, n, with_grad)
            } else {
                let bounds: Vec<(usize, usize)> = (0..threads)
                    .map(|t| (t * n / threads, (t + 1) * n / threads))
                    .collect();
                let parts: Vec<(f64, Option<RawGradient>)> = thread::scope(|s| {
                    let handles: Vec<_> = bounds
                        .iter()
                        .map(|&(lo, hi)| s.spawn(move || pass_range(params, r, rs, lo, hi, with_grad)))
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("gradient worker panicked"))
                        .collect()
                });
                let mut iter = parts.into_iter();
                let (mut loglik, mut grad) = iter.next().expect("at least one chunk");
                for (ll, g) in iter {
                    loglik += ll;
                    if let (Some(acc), Some(g)) = (grad.as_mut(), g.as_ref()) {
                        acc.add_assign(g);
                    }
                }
                (loglik, grad)
            };
            Ok(RelationPass {
                loglik,
                total: total as f64,
                grad,
            })
        })
        .collect()
}

/// `L_r = -loglik_r / N_r`
pub fn relation_loss(params: &ModelParams, samples: &SampleSet, relation: usize) -> Result<f64> {
    if relation >= samples.num_relations() {
        return Err(Error::OutOfBounds {
            what: "relation",
            index: relation,
            len: samples.num_relations(),
        });
    }
    check_shapes(params, samples)?;
    let rs = samples.relation(relation);
    let total = rs.total_count();
    if total == 0 {
        return Err(Error::EmptyRelationSample(relation));
    }
    let n = rs.positives.len() + rs.negatives.len();
    let (loglik, _) = pass_range(params, relation, rs, 0, n, false);
    Ok(-loglik / total as f64)
}

/// All `L_r` in relation order.
pub fn relation_losses(params: &ModelParams, samples: &SampleSet, threads: usize) -> Result<Vec<f64>> {
    Ok(relation_passes(params, samples, false, threads)?
        .iter()
        .map(|p| -p.loglik / p.total)
        .collect())
}

/// Weighted data term `sum_r w_r * (-L_r)` without the penalty.
pub fn unregularized_objective(params: &ModelParams, samples: &SampleSet) -> Result<f64> {
    let losses = relation_losses(params, samples, 1)?;
    Ok(params.weights.iter().zip(&losses).map(|(w, l)| -w * l).sum())
}

pub fn objective(params: &ModelParams, samples: &SampleSet, mu: f64) -> Result<f64> {
    objective_threaded(params, samples, mu, 1)
}

pub fn objective_threaded(
    params: &ModelParams,
    samples: &SampleSet,
    mu: f64,
    threads: usize,
) -> Result<f64> {
    let losses = relation_losses(params, samples, threads)?;
    Ok(objective_from_losses(params, &losses, mu))
}

pub(crate) fn objective_from_losses(params: &ModelParams, losses: &[f64], mu: f64) -> f64 {
    let data: f64 = params.weights.iter().zip(losses).map(|(w, l)| -w * l).sum();
    data - 0.5 * mu * params.squared_norm()
}

/// Gradient of the objective with respect to `P`, `Q`, `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub ideology: Matrix,
    pub images: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    /// Scales the raw passes by `w_r / N_r` and adds the `-mu * theta` penalty term.
    pub fn combine(params: &ModelParams, passes: &[RelationPass], mu: f64) -> Self {
        let n1 = params.num_senders();
        let n2 = params.num_receivers();
        let k = params.dim();
        let mut ideology = Matrix::zeros(n1, k);
        let mut images = Vec::with_capacity(passes.len());
        let mut biases = Vec::with_capacity(passes.len());
        for (r, pass) in passes.iter().enumerate() {
            let scale = params.weights[r] / pass.total;
            let raw = pass.grad.as_ref().expect("pass computed without gradient");
            for (d, g) in ideology.as_mut_slice().iter_mut().zip(&raw.ideology) {
                *d += scale * g;
            }
            let mut q = Matrix::zeros(n2, k);
            for ((d, g), theta) in q
                .as_mut_slice()
                .iter_mut()
                .zip(&raw.images)
                .zip(params.images[r].as_slice())
            {
                *d = scale * g - mu * theta;
            }
            images.push(q);
            biases.push(
                raw.biases
                    .iter()
                    .zip(&params.biases[r])
                    .map(|(g, theta)| scale * g - mu * theta)
                    .collect(),
            );
        }
        for (d, theta) in ideology
            .as_mut_slice()
            .iter_mut()
            .zip(params.ideology.as_slice())
        {
            *d -= mu * theta;
        }
        Self {
            ideology,
            images,
            biases,
        }
    }

    pub fn inf_norm(&self) -> f64 {
        self.ideology
            .as_slice()
            .iter()
            .chain(self.images.iter().flat_map(|q| q.as_slice().iter()))
            .chain(self.biases.iter().flatten())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

pub fn compute_gradients(params: &ModelParams, samples: &SampleSet, mu: f64) -> Result<Gradients> {
    compute_gradients_threaded(params, samples, mu, 1)
}

pub fn compute_gradients_threaded(
    params: &ModelParams,
    samples: &SampleSet,
    mu: f64,
    threads: usize,
) -> Result<Gradients> {
    let passes = relation_passes(params, samples, true, threads)?;
    Ok(Gradients::combine(params, &passes, mu))
}

/// Count-weighted mean of out-neighbor labels in `relation`.
///
/// `receiver_labels` is indexed by receiver and holds `+1`/`-1` or `None`.
/// Senders without any labeled out-neighbor map to `None`.
pub fn aver_score(
    g: &HeteroGraph,
    receiver_labels: &[Option<i8>],
    relation: usize,
) -> Result<Vec<Option<f64>>> {
    if receiver_labels.len() != g.num_receivers() {
        return Err(Error::DimensionMismatch {
            expected: g.num_receivers(),
            got: receiver_labels.len(),
        });
    }
    let rel = g.relation(relation)?;
    let mut sum = vec![0.0; g.num_senders()];
    let mut weight = vec![0u64; g.num_senders()];
    for e in rel.edges() {
        if let Some(label) = receiver_labels[e.receiver] {
            sum[e.sender] += f64::from(label) * f64::from(e.count);
            weight[e.sender] += u64::from(e.count);
        }
    }
    Ok(sum
        .into_iter()
        .zip(weight)
        .map(|(s, w)| (w > 0).then(|| s / w as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetgraph::{Edge, HeteroGraphBuilder};

    fn edge(sender: usize, receiver: usize, count: u32) -> Edge {
        Edge {
            sender,
            receiver,
            count,
        }
    }

    fn single(pos: Vec<Edge>, neg: Vec<Edge>) -> SampleSet {
        SampleSet::new(vec![RelationSample {
            positives: pos,
            negatives: neg,
            starved_senders: 0,
        }])
    }

    #[test]
    fn link_probability_cases() {
        assert_eq!(link_probability(&[0.0], &[3.0], 0.0).unwrap(), 0.5);
        let p = link_probability(&[0.0, 0.0], &[1.0, 1.0], 3f64.ln()).unwrap();
        assert!((p - 0.75).abs() < 1e-15);
        // sigmoid(0.1) to 16 digits
        let p = link_probability(&[1.0, 2.0], &[0.5, -0.25], 0.1).unwrap();
        assert!((p - 0.524_979_187_478_939_99).abs() < 1e-15);
        assert!(link_probability(&[f64::NAN], &[1.0], 0.0).is_err());
        assert!(link_probability(&[1.0], &[1.0, 2.0], 0.0).is_err());
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        for &x in &[-700.0, -40.0, 40.0, 700.0] {
            let s = sigmoid(x);
            assert!(s.is_finite() && (0.0..=1.0).contains(&s));
            assert!(log_sigmoid(x).is_finite());
        }
        assert!((log_sigmoid(-700.0) + 700.0).abs() < 1e-12);
        assert!(log_sigmoid(700.0) <= 0.0);
    }

    #[test]
    fn complementary_probabilities_sum_to_one() {
        let p = [0.3, -1.2];
        let q = [2.0, 0.7];
        let a = link_probability(&p, &q, 0.4).unwrap();
        let b = link_probability(&p, &[-2.0, -0.7], -0.4).unwrap();
        assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_single_positive_at_zero_logit() {
        let params = ModelParams::zeros(1, 1, 1, 2);
        let s = single(vec![edge(0, 0, 1)], vec![]);
        let l = relation_loss(&params, &s, 0).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn loss_balanced_pair_at_zero_logit() {
        let params = ModelParams::zeros(1, 2, 1, 1);
        let s = single(vec![edge(0, 0, 1)], vec![edge(0, 1, 1)]);
        let l = relation_loss(&params, &s, 0).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn loss_with_multiplicities() {
        let mut params = ModelParams::zeros(1, 2, 1, 1);
        params.biases[0] = vec![3f64.ln(), 3f64.ln()];
        let s = single(vec![edge(0, 0, 2)], vec![edge(0, 1, 1)]);
        let l = relation_loss(&params, &s, 0).unwrap();
        let expected = (2.0 * (4.0f64 / 3.0).ln() + 4f64.ln()) / 3.0;
        assert!((l - expected).abs() < 1e-15, "{l} vs {expected}");
    }

    #[test]
    fn empty_relation_sample_errors() {
        let params = ModelParams::zeros(1, 1, 1, 1);
        let s = single(vec![], vec![]);
        assert!(matches!(
            relation_loss(&params, &s, 0),
            Err(Error::EmptyRelationSample(0))
        ));
    }

    #[test]
    fn objective_at_zero_params() {
        let mut params = ModelParams::zeros(2, 2, 2, 1);
        params.weights = vec![2.0, 0.5];
        let rs = RelationSample {
            positives: vec![edge(0, 0, 1), edge(1, 1, 2)],
            negatives: vec![edge(0, 1, 1), edge(1, 0, 1)],
            starved_senders: 0,
        };
        let s = SampleSet::new(vec![rs.clone(), rs]);
        let j = objective(&params, &s, 0.3).unwrap();
        assert!((j + std::f64::consts::LN_2 * 2.5).abs() < 1e-14);
    }

    #[test]
    fn objective_reduces_to_negative_loss_for_single_relation() {
        let mut params = ModelParams::random(3, 3, 1, 2, 0.8, 5);
        params.biases[0] = vec![0.2, -0.1, 0.4];
        let s = single(vec![edge(0, 1, 3), edge(2, 0, 1)], vec![edge(1, 2, 1)]);
        let j = objective(&params, &s, 0.0).unwrap();
        let l = relation_loss(&params, &s, 0).unwrap();
        assert!((j + l).abs() < 1e-15);
    }

    #[test]
    fn gradient_at_zero_params_single_positive() {
        let params = ModelParams::zeros(1, 1, 1, 3);
        let s = single(vec![edge(0, 0, 1)], vec![]);
        let g = compute_gradients(&params, &s, 0.0).unwrap();
        assert_eq!(g.biases[0][0], 0.5);
        assert!(g.ideology.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.images[0].as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sender_without_samples_only_shrinks() {
        let mut params = ModelParams::random(2, 1, 1, 2, 1.0, 3);
        params.ideology.set(1, 0, 0.7);
        params.ideology.set(1, 1, -0.2);
        let s = single(vec![edge(0, 0, 1)], vec![]);
        let mu = 0.05;
        let g = compute_gradients(&params, &s, mu).unwrap();
        assert!((g.ideology.get(1, 0) + mu * 0.7).abs() < 1e-16);
        assert!((g.ideology.get(1, 1) - mu * 0.2).abs() < 1e-16);
    }

    #[test]
    fn threaded_pass_matches_serial() {
        let n1 = 40;
        let n2 = 15;
        let params = ModelParams::random(n1, n2, 2, 3, 1.0, 17);
        let rs: Vec<RelationSample> = (0..2)
            .map(|r| RelationSample {
                positives: (0..n1).map(|i| edge(i, (i * 3 + r) % n2, 1 + (i % 3) as u32)).collect(),
                negatives: (0..n1).map(|i| edge(i, (i * 5 + 1 + r) % n2, 1)).collect(),
                starved_senders: 0,
            })
            .collect();
        let s = SampleSet::new(rs);
        let serial = compute_gradients_threaded(&params, &s, 0.01, 1).unwrap();
        let par = compute_gradients_threaded(&params, &s, 0.01, 4).unwrap();
        let par2 = compute_gradients_threaded(&params, &s, 0.01, 4).unwrap();
        assert_eq!(par, par2);
        for (a, b) in serial
            .ideology
            .as_slice()
            .iter()
            .zip(par.ideology.as_slice())
        {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12));
        }
        let j1 = objective_threaded(&params, &s, 0.01, 1).unwrap();
        let j4 = objective_threaded(&params, &s, 0.01, 4).unwrap();
        assert!((j1 - j4).abs() <= 1e-9 * j1.abs());
    }

    #[test]
    fn validate_rejects_bad_weights() {
        let mut params = ModelParams::zeros(1, 1, 2, 1);
        params.validate().unwrap();
        params.weights = vec![2.0, 2.0];
        assert!(params.validate().is_err());
        params.weights = vec![2.0, 0.5];
        params.validate().unwrap();
        params.ideology.set(0, 0, f64::INFINITY);
        assert!(params.validate().is_err());
    }

    #[test]
    fn aver_cases() {
        let mut b = HeteroGraphBuilder::new();
        let r = b.add_relation("r").unwrap();
        for (s, t, c) in [("a", "x", 1), ("a", "y", 1), ("a", "z", 1), ("b", "x", 2), ("b", "z", 2)] {
            b.add_edge(r, s, t, c).unwrap();
        }
        b.vocab_mut().add_sender("c");
        let g = b.build().unwrap();
        let labels = vec![Some(1), Some(1), Some(-1)];
        let scores = aver_score(&g, &labels, 0).unwrap();
        assert!((scores[0].unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(scores[1], Some(0.0));
        assert_eq!(scores[2], None);
    }
}
