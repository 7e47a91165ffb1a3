//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use mlipm_core::hetgraph::Edge;
use mlipm_core::model::{Matrix, ModelParams};
use mlipm_core::sampler::{RelationSample, SampleSet};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// All-pairs AUC.
pub fn brute_auc(scored: &[(f64, bool)]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for a in scored.iter().filter(|s| s.1) {
        for b in scored.iter().filter(|s| !s.1) {
            den += 1.0;
            if a.0 > b.0 {
                num += 1.0;
            } else if a.0 == b.0 {
                num += 0.5;
            }
        }
    }
    num / den
}

/// All-pairs ranking accuracy; `None` when no pair has distinct labels.
pub fn brute_ranking(scores: &[f64], labels: &[i64]) -> Option<(f64, usize)> {
    let (mut num, mut den) = (0.0, 0usize);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] < labels[j] {
                den += 1;
                if scores[i] < scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    (den > 0).then(|| (num / den as f64, den))
}

/// Minimizes `sum_r w_r L_r` subject to `prod_r w_r = 1` numerically:
/// log-parameterize, eliminate the last coordinate and run damped Newton.
pub fn constrained_weight_minimizer(losses: &[f64]) -> Vec<f64> {
    let r = losses.len();
    let m = r - 1;
    let f = |u: &[f64]| -> f64 {
        let last = -u.iter().sum::<f64>();
        u.iter().zip(losses).map(|(x, l)| l * x.exp()).sum::<f64>() + losses[m] * last.exp()
    };
    let gradient = |u: &[f64]| -> Vec<f64> {
        let tail = losses[m] * (-u.iter().sum::<f64>()).exp();
        (0..m).map(|a| losses[a] * u[a].exp() - tail).collect()
    };
    let norm = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>();
    let mut u = vec![0.0; m];
    for _ in 0..200 {
        let tail = losses[m] * (-u.iter().sum::<f64>()).exp();
        let grad = gradient(&u);
        if grad.iter().all(|g| g.abs() < 1e-15) {
            break;
        }
        // Hessian = diag(L_a e^{u_a}) + tail * 1 1^T
        let mut h = vec![vec![tail; m]; m];
        for a in 0..m {
            h[a][a] += losses[a] * u[a].exp();
        }
        let step = solve(h, grad.iter().map(|g| -g).collect());
        let f0 = f(&u);
        let g0 = norm(&grad);
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = u.iter().zip(&step).map(|(x, s)| x + t * s).collect();
            // near the optimum f is flat to rounding, so a smaller gradient also counts
            if f(&cand) < f0 || norm(&gradient(&cand)) < g0 || t < 1e-12 {
                u = cand;
                break;
            }
            t *= 0.5;
        }
    }
    let mut w: Vec<f64> = u.iter().map(|x| x.exp()).collect();
    w.push((-u.iter().sum::<f64>()).exp());
    w
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Random parameters with weights whose product is one.
pub fn random_params(rng: &mut ChaCha8Rng, n1: usize, n2: usize, r: usize, k: usize) -> ModelParams {
    let mut mat = |rows: usize| {
        Matrix::from_vec(rows, k, (0..rows * k).map(|_| rng.random_range(-1.5..1.5)).collect())
            .unwrap()
    };
    let ideology = mat(n1);
    let images = (0..r).map(|_| mat(n2)).collect();
    let biases = (0..r)
        .map(|_| (0..n2).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let logs: Vec<f64> = (0..r).map(|_| rng.random_range(-0.7..0.7)).collect();
    let mean = logs.iter().sum::<f64>() / r as f64;
    let weights = logs.iter().map(|l| (l - mean).exp()).collect();
    ModelParams {
        ideology,
        images,
        biases,
        weights,
    }
}

/// Random disjoint positive/negative samples with counts, every relation non-empty.
pub fn random_samples(rng: &mut ChaCha8Rng, n1: usize, n2: usize, r: usize) -> SampleSet {
    let rels = (0..r)
        .map(|_| {
            let mut rs = RelationSample::default();
            for s in 0..n1 {
                for t in 0..n2 {
                    let edge = Edge {
                        sender: s,
                        receiver: t,
                        count: rng.random_range(1..=3),
                    };
                    match rng.random_range(0..3) {
                        0 => rs.positives.push(edge),
                        1 => rs.negatives.push(Edge { count: 1, ..edge }),
                        _ => {}
                    }
                }
            }
            if rs.positives.is_empty() {
                rs.positives.push(Edge {
                    sender: 0,
                    receiver: 0,
                    count: 1,
                });
                rs.negatives.retain(|e| (e.sender, e.receiver) != (0, 0));
            }
            rs
        })
        .collect();
    SampleSet::new(rels)
}
