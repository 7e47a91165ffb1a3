//! Positive link sets and uniformly sampled non-existing links.
//!
//! Negatives are drawn once per relation and held fixed for the whole
//! training run. Each active sender gets `negatives_per_pair` draws per
//! distinct positive receiver, taken without replacement from the receivers
//! it has no link to in that relation. Every sender draws from its own
//! derived ChaCha stream, so the result does not depend on iteration order
//! or scheduling.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::hetgraph::{Edge, HeteroGraph};
use crate::seed;

/// Positive and negative link lists for one relation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelationSample {
    pub positives: Vec<Edge>,
    pub negatives: Vec<Edge>,
    /// Senders that could not receive their full quota of negatives.
    pub starved_senders: usize,
}

impl RelationSample {
    /// `N_r`: summed counts over positives and negatives.
    pub fn total_count(&self) -> u64 {
        self.positives
            .iter()
            .chain(&self.negatives)
            .map(|e| u64::from(e.count))
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty() && self.negatives.is_empty()
    }

    /// Iterates `(edge, is_positive)` over positives then negatives.
    pub fn signed(&self) -> impl Iterator<Item = (&Edge, bool)> {
        self.positives
            .iter()
            .map(|e| (e, true))
            .chain(self.negatives.iter().map(|e| (e, false)))
    }

    /// True when no (sender, receiver) pair is both positive and negative.
    pub fn is_disjoint(&self) -> bool {
        let pos: HashSet<(usize, usize)> =
            self.positives.iter().map(|e| (e.sender, e.receiver)).collect();
        self.negatives
            .iter()
            .all(|e| !pos.contains(&(e.sender, e.receiver)))
    }
}

/// Per-relation training links.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SampleSet {
    relations: Vec<RelationSample>,
}

impl SampleSet {
    pub fn new(relations: Vec<RelationSample>) -> Self {
        Self { relations }
    }

    /// Positives from every relation of `g` with freshly drawn negatives.
    pub fn from_graph(g: &HeteroGraph, seed: u64, negatives_per_pair: usize) -> Result<Self> {
        let relations = (0..g.num_relations())
            .map(|r| sample_negatives(g, r, seed, negatives_per_pair))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { relations })
    }

    pub fn relations(&self) -> &[RelationSample] {
        &self.relations
    }

    pub fn relation(&self, r: usize) -> &RelationSample {
        &self.relations[r]
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn starved_senders(&self) -> usize {
        self.relations.iter().map(|r| r.starved_senders).sum()
    }

    /// Dumps as `relation \t src \t dst \t sign \t count` with sign `+`/`-`.
    pub fn write_tsv<W: Write>(&self, g: &HeteroGraph, mut out: W) -> std::io::Result<()> {
        let v = g.vocab();
        for (r, rs) in self.relations.iter().enumerate() {
            let name = g.relations()[r].name();
            for (e, positive) in rs.signed() {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}",
                    name,
                    v.sender_id(e.sender),
                    v.receiver_id(e.receiver),
                    if positive { '+' } else { '-' },
                    e.count
                )?;
            }
        }
        Ok(())
    }

    /// Reads a dump produced by [`write_tsv`](Self::write_tsv) against `g`'s vocabulary.
    pub fn read_tsv(path: &Path, g: &HeteroGraph) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut relations = vec![RelationSample::default(); g.num_relations()];
        let v = g.vocab();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message,
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(perr(format!("expected 5 fields, got {}", f.len())));
            }
            let r = g
                .relation_index(f[0])
                .ok_or_else(|| perr(format!("unknown relation '{}'", f[0])))?;
            let sender = v
                .sender_index(f[1])
                .ok_or_else(|| perr(format!("unknown sender '{}'", f[1])))?;
            let receiver = v
                .receiver_index(f[2])
                .ok_or_else(|| perr(format!("unknown receiver '{}'", f[2])))?;
            let count: u32 = f[4]
                .parse()
                .map_err(|e| perr(format!("bad count '{}': {e}", f[4])))?;
            if count == 0 {
                return Err(perr("count must be positive".into()));
            }
            let edge = Edge {
                sender,
                receiver,
                count,
            };
            match f[3] {
                "+" => relations[r].positives.push(edge),
                "-" => relations[r].negatives.push(edge),
                s => return Err(perr(format!("bad sign '{s}'"))),
            }
        }
        Ok(Self { relations })
    }
}

/// Draws the negative set for one relation and pairs it with the relation's positives.
pub fn sample_negatives(
    g: &HeteroGraph,
    relation: usize,
    seed: u64,
    negatives_per_pair: usize,
) -> Result<RelationSample> {
    if negatives_per_pair == 0 {
        return Err(Error::Validation("negatives_per_pair must be positive".into()));
    }
    let rel = g.relation(relation)?;
    let n_receivers = g.num_receivers();

    let mut neighbors: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for e in rel.edges() {
        neighbors.entry(e.sender).or_default().push(e.receiver);
    }

    let mut negatives = Vec::new();
    let mut starved = 0;
    for (&sender, adj) in &neighbors {
        let want = adj.len() * negatives_per_pair;
        let available = n_receivers - adj.len();
        let take = want.min(available);
        if take < want {
            starved += 1;
        }
        if take == 0 {
            continue;
        }
        let mut rng = seed::rng_for(
            seed,
            &[seed::STREAM_NEGATIVES, relation as u64, sender as u64],
        );
        let blocked: HashSet<usize> = adj.iter().copied().collect();
        let drawn = draw_non_neighbors(&mut rng, n_receivers, &blocked, take);
        negatives.extend(drawn.into_iter().map(|receiver| Edge {
            sender,
            receiver,
            count: 1,
        }));
    }

    Ok(RelationSample {
        positives: rel.edges().to_vec(),
        negatives,
        starved_senders: starved,
    })
}

/// `take` distinct receivers uniformly from `0..universe` minus `blocked`.
fn draw_non_neighbors<R: Rng>(
    rng: &mut R,
    universe: usize,
    blocked: &HashSet<usize>,
    take: usize,
) -> Vec<usize> {
    let available = universe - blocked.len();
    if 4 * (take + blocked.len()) <= universe {
        // Sparse neighborhood: rejection is cheap.
        let mut chosen = Vec::with_capacity(take);
        let mut seen = HashSet::with_capacity(take);
        while chosen.len() < take {
            let j = rng.random_range(0..universe);
            if !blocked.contains(&j) && seen.insert(j) {
                chosen.push(j);
            }
        }
        chosen
    } else {
        let pool: Vec<usize> = (0..universe).filter(|j| !blocked.contains(j)).collect();
        debug_assert_eq!(pool.len(), available);
        index::sample(rng, available, take)
            .into_iter()
            .map(|k| pool[k])
            .collect()
    }
}
