//! Random-utility view of link formation.
//!
//! A sender at `p` weighs two placements of a receiver: `psi` (link) and
//! `zeta` (no link), with utilities `-|p - psi|^2 + eta` and
//! `-|p - zeta|^2 + nu`, where `eta` and `nu` are independent standard
//! Gumbel noises. The difference of two Gumbel variables is logistic, so the
//! link is chosen with probability `sigmoid(p . q + b)` where
//! `q = 2 (psi - zeta)` and `b = |zeta|^2 - |psi|^2`. This module provides
//! the Gumbel primitives, the placement reduction, and a Monte-Carlo
//! estimator of the choice probability to check that identity numerically.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::dot;
use crate::seed;

const U_MIN: f64 = 1e-300;
const U_MAX: f64 = 1.0 - 1e-16;

/// Standard Gumbel CDF `exp(-exp(-x))`.
pub fn gumbel_cdf(x: f64) -> f64 {
    (-(-x).exp()).exp()
}

/// Standard Gumbel density `exp(-x) exp(-exp(-x))`.
pub fn gumbel_pdf(x: f64) -> f64 {
    let t = (-x).exp();
    if t.is_infinite() {
        return 0.0;
    }
    t * (-t).exp()
}

/// Inverse-CDF transform of a uniform draw.
#[inline]
pub fn gumbel_from_uniform(u: f64) -> f64 {
    let u = u.clamp(U_MIN, U_MAX);
    -(-u.ln()).ln()
}

/// Draws one standard Gumbel variate.
#[inline]
pub fn draw_gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    gumbel_from_uniform(rng.random::<f64>())
}

/// `n` seeded standard Gumbel variates.
pub fn sample_gumbel(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = seed::rng_for(seed, &[seed::STREAM_SYNTH, 0x6755_6d62]);
    (0..n).map(|_| draw_gumbel(&mut rng)).collect()
}

/// The two positions a receiver presents: followed (`psi`) and not followed (`zeta`).
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverPlacement {
    pub psi: Vec<f64>,
    pub zeta: Vec<f64>,
}

impl ReceiverPlacement {
    pub fn new(psi: Vec<f64>, zeta: Vec<f64>) -> Result<Self> {
        if psi.len() != zeta.len() {
            return Err(Error::DimensionMismatch {
                expected: psi.len(),
                got: zeta.len(),
            });
        }
        if psi.iter().chain(&zeta).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("receiver placement"));
        }
        Ok(Self { psi, zeta })
    }

    /// A placement giving sender `p` the utility gap `logit`: one of the
    /// two positions sits on `p`, the other is offset along the first axis
    /// by `sqrt(|logit|)`.
    pub fn with_logit(p: &[f64], logit: f64) -> Self {
        let mut far = p.to_vec();
        if let Some(first) = far.first_mut() {
            *first += logit.abs().sqrt();
        }
        if logit >= 0.0 {
            Self {
                psi: p.to_vec(),
                zeta: far,
            }
        } else {
            Self {
                psi: far,
                zeta: p.to_vec(),
            }
        }
    }
}

/// Reduced receiver parameters and the resulting logit for sender `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduced {
    pub q: Vec<f64>,
    pub b: f64,
    pub logit: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn sq_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// `q = 2 (psi - zeta)`, `b = |zeta|^2 - |psi|^2`, `logit = p . q + b`.
pub fn reduce_placement(p: &[f64], placement: &ReceiverPlacement) -> Result<Reduced> {
    if p.len() != placement.psi.len() {
        return Err(Error::DimensionMismatch {
            expected: placement.psi.len(),
            got: p.len(),
        });
    }
    let q: Vec<f64> = placement
        .psi
        .iter()
        .zip(&placement.zeta)
        .map(|(s, z)| 2.0 * (s - z))
        .collect();
    let b = sq_norm(&placement.zeta) - sq_norm(&placement.psi);
    let logit = dot(p, &q) + b;
    Ok(Reduced { q, b, logit })
}

/// Deterministic utility gap `u(psi) - u(zeta) = -|p - psi|^2 + |p - zeta|^2`.
pub fn utility_gap(p: &[f64], placement: &ReceiverPlacement) -> f64 {
    -sq_dist(p, &placement.psi) + sq_dist(p, &placement.zeta)
}

/// Fraction of simulated choices where the link option has the larger
/// noisy utility.
pub fn mc_choice_probability(
    p: &[f64],
    placement: &ReceiverPlacement,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if p.len() != placement.psi.len() {
        return Err(Error::DimensionMismatch {
            expected: placement.psi.len(),
            got: p.len(),
        });
    }
    if n_samples == 0 {
        return Err(Error::Validation("n_samples must be positive".into()));
    }
    let u_link = -sq_dist(p, &placement.psi);
    let u_skip = -sq_dist(p, &placement.zeta);
    let mut rng = seed::rng_for(seed, &[seed::STREAM_SYNTH, 0x6368_6f69]);
    let mut hits = 0u64;
    for _ in 0..n_samples {
        let eta = draw_gumbel(&mut rng);
        let nu = draw_gumbel(&mut rng);
        if u_link + eta > u_skip + nu {
            hits += 1;
        }
    }
    Ok(hits as f64 / n_samples as f64)
}
