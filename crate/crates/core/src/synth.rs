//! Synthetic heterogeneous networks drawn from known parameters.
//!
//! Sender ideologies come from a Gaussian mixture, receiver images and
//! biases are i.i.d. normal, and each relation's links are drawn from the
//! logistic link model, then corrupted by flipping link/no-link outcomes
//! with a per-relation probability. A flip probability close to 0.5 makes a
//! relation carry almost no information about ideology.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hetgraph::{HeteroGraph, HeteroGraphBuilder};
use crate::model::{dot, sigmoid, Matrix, ModelParams};
use crate::seed;

/// Covariance of each mixture component is this times the identity.
pub const CLUSTER_VARIANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_senders: usize,
    pub n_receivers: usize,
    pub dim: usize,
    pub cluster_means: Vec<Vec<f64>>,
    pub cluster_weights: Vec<f64>,
    pub receiver_scale: f64,
    /// One entry per relation, each in `[0, 0.5)`.
    pub noise_flip_prob: Vec<f64>,
    pub mean_degree: f64,
    pub max_multiplicity: u32,
    pub seed: u64,
    /// Defaults to `rel1`, `rel2`, ... when empty.
    pub relation_names: Vec<String>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_senders: 500,
            n_receivers: 50,
            dim: 1,
            cluster_means: vec![vec![-0.5], vec![0.5]],
            cluster_weights: vec![0.5, 0.5],
            receiver_scale: 5.0,
            noise_flip_prob: vec![0.02, 0.10, 0.25],
            mean_degree: 15.0,
            max_multiplicity: 3,
            seed: 0,
            relation_names: Vec::new(),
        }
    }
}

impl SynthSpec {
    pub fn num_relations(&self) -> usize {
        self.noise_flip_prob.len()
    }

    pub fn relation_name(&self, r: usize) -> String {
        self.relation_names
            .get(r)
            .cloned()
            .unwrap_or_else(|| format!("rel{}", r + 1))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InfeasibleSpec(m));
        if self.n_senders == 0 || self.n_receivers == 0 || self.dim == 0 {
            return bad("sizes and dimension must be positive".into());
        }
        if self.noise_flip_prob.is_empty() {
            return bad("at least one relation required".into());
        }
        if let Some(f) = self
            .noise_flip_prob
            .iter()
            .find(|f| !(0.0..0.5).contains(*f))
        {
            return bad(format!("noise_flip_prob {f} outside [0, 0.5)"));
        }
        if self.cluster_means.is_empty() || self.cluster_means.len() != self.cluster_weights.len() {
            return bad("cluster means and weights must be non-empty and aligned".into());
        }
        if self.cluster_means.iter().any(|m| m.len() != self.dim) {
            return bad("cluster mean dimension differs from dim".into());
        }
        let total: f64 = self.cluster_weights.iter().sum();
        if self.cluster_weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return bad("cluster weights must be probabilities summing to 1".into());
        }
        if !(self.receiver_scale > 0.0 && self.receiver_scale.is_finite()) {
            return bad("receiver_scale must be positive".into());
        }
        if !(self.mean_degree > 0.0) {
            return bad("mean_degree must be positive".into());
        }
        if self.mean_degree > self.n_receivers as f64 {
            return bad(format!(
                "mean_degree {} exceeds n_receivers {}",
                self.mean_degree, self.n_receivers
            ));
        }
        if self.max_multiplicity == 0 {
            return bad("max_multiplicity must be positive".into());
        }
        if !self.relation_names.is_empty() && self.relation_names.len() != self.num_relations() {
            return bad("relation_names length differs from relation count".into());
        }
        Ok(())
    }
}

/// Generated graph together with the parameters that produced it.
#[derive(Debug, Clone)]
pub struct SynthNetwork {
    pub graph: HeteroGraph,
    pub truth: ModelParams,
    /// Mixture component of each sender.
    pub clusters: Vec<usize>,
}

/// Draws ground-truth parameters and mixture assignments.
pub fn draw_truth(spec: &SynthSpec) -> Result<(ModelParams, Vec<usize>)> {
    spec.validate()?;
    let mut rng = seed::rng_for(spec.seed, &[seed::STREAM_SYNTH, 0]);
    let picker = WeightedIndex::new(&spec.cluster_weights)
        .map_err(|e| Error::InfeasibleSpec(e.to_string()))?;
    let sd = CLUSTER_VARIANCE.sqrt();
    let k = spec.dim;
    let mut ideology = Matrix::zeros(spec.n_senders, k);
    let mut clusters = Vec::with_capacity(spec.n_senders);
    for i in 0..spec.n_senders {
        let c = picker.sample(&mut rng);
        clusters.push(c);
        for (v, m) in ideology.row_mut(i).iter_mut().zip(&spec.cluster_means[c]) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = m + sd * z;
        }
    }
    let mut images = Vec::with_capacity(spec.num_relations());
    let mut biases = Vec::with_capacity(spec.num_relations());
    for _ in 0..spec.num_relations() {
        let mut q = Matrix::zeros(spec.n_receivers, k);
        for v in q.as_mut_slice() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = spec.receiver_scale * z;
        }
        let b: Vec<f64> = (0..spec.n_receivers)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                spec.receiver_scale * z
            })
            .collect();
        images.push(q);
        biases.push(b);
    }
    let truth = ModelParams {
        ideology,
        images,
        biases,
        weights: vec![1.0; spec.num_relations()],
    };
    Ok((truth, clusters))
}

/// Draws links for every relation from `truth` using the stream `edge_seed`.
///
/// For each sender the candidate receiver set is a uniform subsample sized
/// so that the expected degree is `mean_degree`; each candidate becomes a
/// link with probability `sigmoid(p . q + b)`, and that outcome is flipped
/// with the relation's noise probability.
pub fn sample_edges(spec: &SynthSpec, truth: &ModelParams, edge_seed: u64) -> Result<HeteroGraph> {
    spec.validate()?;
    let mut b = HeteroGraphBuilder::new();
    for i in 0..spec.n_senders {
        b.vocab_mut().add_sender(&format!("u{i}"));
    }
    for j in 0..spec.n_receivers {
        b.vocab_mut().add_receiver(&format!("v{j}"));
    }
    let n2 = spec.n_receivers;
    for (r, &flip) in spec.noise_flip_prob.iter().enumerate() {
        let rel = b.add_relation(&spec.relation_name(r))?;
        let q = &truth.images[r];
        let bias = &truth.biases[r];
        for i in 0..spec.n_senders {
            let mut rng = seed::rng_for(edge_seed, &[seed::STREAM_SYNTH, 1, r as u64, i as u64]);
            let p = truth.ideology.row(i);
            let probs: Vec<f64> = (0..n2)
                .map(|j| sigmoid(dot(p, q.row(j)) + bias[j]))
                .collect();
            let mean_eff = probs
                .iter()
                .map(|s| (1.0 - flip) * s + flip * (1.0 - s))
                .sum::<f64>()
                / n2 as f64;
            let n_cand = ((spec.mean_degree / mean_eff.max(1e-12)).round() as usize).clamp(1, n2);
            let mut candidates = index::sample(&mut rng, n2, n_cand).into_vec();
            candidates.sort_unstable();
            for j in candidates {
                let mut linked = rng.random::<f64>() < probs[j];
                if rng.random::<f64>() < flip {
                    linked = !linked;
                }
                if linked {
                    let count = rng.random_range(1..=spec.max_multiplicity);
                    b.add_edge_indexed(rel, i, j, count)?;
                }
            }
        }
    }
    b.build()
}

pub fn generate_network(spec: &SynthSpec) -> Result<SynthNetwork> {
    let (truth, clusters) = draw_truth(spec)?;
    let graph = sample_edges(spec, &truth, spec.seed)?;
    Ok(SynthNetwork {
        graph,
        truth,
        clusters,
    })
}

impl SynthNetwork {
    /// `+1` when the first true ideology coordinate is positive, else `-1`.
    pub fn sign_labels(&self) -> Vec<i8> {
        (0..self.truth.num_senders())
            .map(|i| if self.truth.ideology.get(i, 0) > 0.0 { 1 } else { -1 })
            .collect()
    }

    /// Ordinal labels 1..=5 from quintiles of the first true coordinate.
    pub fn ordinal_labels(&self) -> Vec<u8> {
        let n = self.truth.num_senders();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            self.truth
                .ideology
                .get(a, 0)
                .total_cmp(&self.truth.ideology.get(b, 0))
        });
        let mut labels = vec![0u8; n];
        for (rank, &i) in order.iter().enumerate() {
            labels[i] = 1 + (rank * 5 / n) as u8;
        }
        labels
    }

    /// Writes `<relation>.tsv` edge files, `relations.tsv` manifest,
    /// `truth.tsv`, `labels.csv` (sign) and `ranking_labels.csv` (quintile).
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let g = &self.graph;
        let mut manifest = String::new();
        for (r, rel) in g.relations().iter().enumerate() {
            let file = format!("{}.tsv", rel.name());
            let path = dir.join(&file);
            let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = BufWriter::new(f);
            g.write_relation(r, &mut w)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(&path, e))?;
            manifest.push_str(&format!("{}\t{}\n", rel.name(), file));
        }
        write_file(&dir.join("relations.tsv"), &manifest)?;

        let k = self.truth.dim();
        let mut truth = String::from("# id");
        for d in 1..=k {
            truth.push_str(&format!("\tp{d}"));
        }
        truth.push_str("\tcluster\n");
        for i in 0..self.truth.num_senders() {
            truth.push_str(g.vocab().sender_id(i));
            for v in self.truth.ideology.row(i) {
                truth.push_str(&format!("\t{v}"));
            }
            truth.push_str(&format!("\t{}\n", self.clusters[i]));
        }
        write_file(&dir.join("truth.tsv"), &truth)?;

        let mut labels = String::from("id,label\n");
        for (i, l) in self.sign_labels().iter().enumerate() {
            labels.push_str(&format!("{},{}\n", g.vocab().sender_id(i), l));
        }
        write_file(&dir.join("labels.csv"), &labels)?;

        let mut ranking = String::from("id,label\n");
        for (i, l) in self.ordinal_labels().iter().enumerate() {
            ranking.push_str(&format!("{},{}\n", g.vocab().sender_id(i), l));
        }
        write_file(&dir.join("ranking_labels.csv"), &ranking)
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec {
            n_senders: 60,
            n_receivers: 20,
            mean_degree: 6.0,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn same_seed_same_graph() {
        let a = generate_network(&small()).unwrap();
        let b = generate_network(&small()).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.truth, b.truth);
        let c = generate_network(&SynthSpec { seed: 1, ..small() }).unwrap();
        assert_ne!(a.graph, c.graph);
    }

    #[test]
    fn infeasible_degree_rejected() {
        let spec = SynthSpec {
            mean_degree: 21.0,
            ..small()
        };
        assert!(matches!(generate_network(&spec), Err(Error::InfeasibleSpec(_))));
    }

    #[test]
    fn invalid_flip_rejected() {
        let spec = SynthSpec {
            noise_flip_prob: vec![0.1, 0.5],
            ..small()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn degrees_near_target_and_bounded() {
        let spec = SynthSpec {
            n_senders: 300,
            ..small()
        };
        let net = generate_network(&spec).unwrap();
        for (r, rel) in net.graph.relations().iter().enumerate() {
            assert!(rel.len() <= spec.n_senders * spec.n_receivers);
            let mean = rel.len() as f64 / spec.n_senders as f64;
            assert!((mean - spec.mean_degree).abs() < 1.5, "relation {r}: {mean}");
        }
    }

    #[test]
    fn multiplicities_in_range() {
        let net = generate_network(&small()).unwrap();
        for rel in net.graph.relations() {
            assert!(rel.edges().iter().all(|e| (1..=3).contains(&e.count)));
        }
    }

    #[test]
    fn ordinal_labels_cover_quintiles() {
        let net = generate_network(&small()).unwrap();
        let labels = net.ordinal_labels();
        for l in 1..=5u8 {
            assert_eq!(labels.iter().filter(|&&x| x == l).count(), 12);
        }
    }
}
