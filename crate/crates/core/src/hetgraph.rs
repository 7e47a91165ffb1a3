//! Directed heterogeneous multigraph with named relations.
//!
//! Nodes are interned in first-seen order. A node that sends links gets a
//! dense sender index, a node that receives links gets a dense receiver
//! index, and a node playing both roles holds one of each. Sender indices
//! address rows of the ideology matrix, receiver indices address rows of the
//! per-relation image matrices and bias vectors.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Bidirectional map between external node ids and dense indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeVocab {
    ids: Vec<String>,
    lookup: HashMap<String, usize>,
    sender_of: Vec<Option<usize>>,
    receiver_of: Vec<Option<usize>>,
    senders: Vec<usize>,
    receivers: Vec<usize>,
}

impl NodeVocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of distinct nodes across both roles.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn num_senders(&self) -> usize {
        self.senders.len()
    }

    pub fn num_receivers(&self) -> usize {
        self.receivers.len()
    }

    pub fn node(&self, id: &str) -> Option<usize> {
        self.lookup.get(id).copied()
    }

    pub fn id(&self, node: usize) -> &str {
        &self.ids[node]
    }

    pub fn is_sender(&self, node: usize) -> bool {
        self.sender_of[node].is_some()
    }

    pub fn is_receiver(&self, node: usize) -> bool {
        self.receiver_of[node].is_some()
    }

    pub fn sender_index(&self, id: &str) -> Option<usize> {
        self.node(id).and_then(|n| self.sender_of[n])
    }

    pub fn receiver_index(&self, id: &str) -> Option<usize> {
        self.node(id).and_then(|n| self.receiver_of[n])
    }

    pub fn sender_id(&self, sender: usize) -> &str {
        &self.ids[self.senders[sender]]
    }

    pub fn receiver_id(&self, receiver: usize) -> &str {
        &self.ids[self.receivers[receiver]]
    }

    pub fn sender_ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.senders.iter().map(move |&n| self.ids[n].as_str())
    }

    pub fn receiver_ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.receivers.iter().map(move |&n| self.ids[n].as_str())
    }

    fn intern(&mut self, id: &str) -> usize {
        if let Some(&n) = self.lookup.get(id) {
            return n;
        }
        let n = self.ids.len();
        self.ids.push(id.to_owned());
        self.lookup.insert(id.to_owned(), n);
        self.sender_of.push(None);
        self.receiver_of.push(None);
        n
    }

    /// Registers `id` as a sender and returns its sender index.
    pub fn add_sender(&mut self, id: &str) -> usize {
        let n = self.intern(id);
        match self.sender_of[n] {
            Some(s) => s,
            None => {
                let s = self.senders.len();
                self.senders.push(n);
                self.sender_of[n] = Some(s);
                s
            }
        }
    }

    /// Registers `id` as a receiver and returns its receiver index.
    pub fn add_receiver(&mut self, id: &str) -> usize {
        let n = self.intern(id);
        match self.receiver_of[n] {
            Some(r) => r,
            None => {
                let r = self.receivers.len();
                self.receivers.push(n);
                self.receiver_of[n] = Some(r);
                r
            }
        }
    }
}

/// One directed edge with its folded multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub sender: usize,
    pub receiver: usize,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationEdges {
    name: String,
    edges: Vec<Edge>,
}

impl RelationEdges {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Per-relation summary counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RelationStats {
    pub num_edges_distinct: usize,
    pub total_count: u64,
    pub num_active_senders: usize,
    pub num_active_receivers: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeteroGraph {
    vocab: NodeVocab,
    relations: Vec<RelationEdges>,
    out_degrees: Vec<Vec<u64>>,
}

impl HeteroGraph {
    pub fn vocab(&self) -> &NodeVocab {
        &self.vocab
    }

    pub fn relations(&self) -> &[RelationEdges] {
        &self.relations
    }

    pub fn relation(&self, relation: usize) -> Result<&RelationEdges> {
        self.relations.get(relation).ok_or(Error::OutOfBounds {
            what: "relation",
            index: relation,
            len: self.relations.len(),
        })
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn num_senders(&self) -> usize {
        self.vocab.num_senders()
    }

    pub fn num_receivers(&self) -> usize {
        self.vocab.num_receivers()
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|r| r.name == name)
    }

    pub fn relation_names(&self) -> Vec<String> {
        self.relations.iter().map(|r| r.name.clone()).collect()
    }

    /// Count-summed number of outgoing links of `sender` in `relation`.
    pub fn out_degree(&self, relation: usize, sender: usize) -> Result<u64> {
        let degrees = self.out_degrees.get(relation).ok_or(Error::OutOfBounds {
            what: "relation",
            index: relation,
            len: self.relations.len(),
        })?;
        degrees.get(sender).copied().ok_or(Error::OutOfBounds {
            what: "sender",
            index: sender,
            len: degrees.len(),
        })
    }

    pub fn relation_stats(&self) -> Vec<RelationStats> {
        self.relations
            .iter()
            .map(|rel| {
                let mut senders = vec![false; self.num_senders()];
                let mut receivers = vec![false; self.num_receivers()];
                let mut total = 0u64;
                for e in &rel.edges {
                    senders[e.sender] = true;
                    receivers[e.receiver] = true;
                    total += u64::from(e.count);
                }
                RelationStats {
                    num_edges_distinct: rel.edges.len(),
                    total_count: total,
                    num_active_senders: senders.iter().filter(|&&s| s).count(),
                    num_active_receivers: receivers.iter().filter(|&&r| r).count(),
                }
            })
            .collect()
    }

    /// Returns a graph holding only the listed relations, in the given order.
    /// The vocabulary is kept whole so parameter rows stay aligned.
    pub fn select_relations(&self, relations: &[usize]) -> Result<HeteroGraph> {
        if relations.is_empty() {
            return Err(Error::Validation("at least one relation required".into()));
        }
        let mut picked = Vec::with_capacity(relations.len());
        let mut degrees = Vec::with_capacity(relations.len());
        for &r in relations {
            let rel = self.relation(r)?;
            if picked.iter().any(|p: &RelationEdges| p.name == rel.name) {
                return Err(Error::Validation(format!(
                    "relation '{}' selected twice",
                    rel.name
                )));
            }
            picked.push(rel.clone());
            degrees.push(self.out_degrees[r].clone());
        }
        Ok(HeteroGraph {
            vocab: self.vocab.clone(),
            relations: picked,
            out_degrees: degrees,
        })
    }

    /// Writes one relation as `src \t dst \t count` lines.
    pub fn write_relation<W: Write>(&self, relation: usize, mut out: W) -> std::io::Result<()> {
        let rel = &self.relations[relation];
        for e in &rel.edges {
            writeln!(
                out,
                "{}\t{}\t{}",
                self.vocab.sender_id(e.sender),
                self.vocab.receiver_id(e.receiver),
                e.count
            )?;
        }
        Ok(())
    }
}

/// Incremental constructor used by the loader and the synthetic generator.
#[derive(Debug, Default)]
pub struct HeteroGraphBuilder {
    vocab: NodeVocab,
    relations: Vec<RelationEdges>,
    slots: Vec<HashMap<(usize, usize), usize>>,
}

impl HeteroGraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vocab_mut(&mut self) -> &mut NodeVocab {
        &mut self.vocab
    }

    pub fn add_relation(&mut self, name: &str) -> Result<usize> {
        if self.relations.iter().any(|r| r.name == name) {
            return Err(Error::Validation(format!("duplicate relation name '{name}'")));
        }
        self.relations.push(RelationEdges {
            name: name.to_owned(),
            edges: Vec::new(),
        });
        self.slots.push(HashMap::new());
        Ok(self.relations.len() - 1)
    }

    /// Adds `count` links from `src` to `dst`; repeated pairs accumulate.
    pub fn add_edge(&mut self, relation: usize, src: &str, dst: &str, count: u32) -> Result<()> {
        if count == 0 {
            return Err(Error::Validation("edge count must be positive".into()));
        }
        if relation >= self.relations.len() {
            return Err(Error::OutOfBounds {
                what: "relation",
                index: relation,
                len: self.relations.len(),
            });
        }
        let s = self.vocab.add_sender(src);
        let r = self.vocab.add_receiver(dst);
        self.push_edge(relation, s, r, count)
    }

    /// Same as [`add_edge`](Self::add_edge) with already registered indices.
    pub fn add_edge_indexed(
        &mut self,
        relation: usize,
        sender: usize,
        receiver: usize,
        count: u32,
    ) -> Result<()> {
        if count == 0 {
            return Err(Error::Validation("edge count must be positive".into()));
        }
        if sender >= self.vocab.num_senders() {
            return Err(Error::OutOfBounds {
                what: "sender",
                index: sender,
                len: self.vocab.num_senders(),
            });
        }
        if receiver >= self.vocab.num_receivers() {
            return Err(Error::OutOfBounds {
                what: "receiver",
                index: receiver,
                len: self.vocab.num_receivers(),
            });
        }
        self.push_edge(relation, sender, receiver, count)
    }

    fn push_edge(&mut self, relation: usize, sender: usize, receiver: usize, count: u32) -> Result<()> {
        let edges = &mut self.relations[relation].edges;
        match self.slots[relation].get(&(sender, receiver)) {
            Some(&pos) => {
                let e = &mut edges[pos];
                e.count = e.count.checked_add(count).ok_or_else(|| {
                    Error::Validation("edge count overflows u32".into())
                })?;
            }
            None => {
                self.slots[relation].insert((sender, receiver), edges.len());
                edges.push(Edge {
                    sender,
                    receiver,
                    count,
                });
            }
        }
        Ok(())
    }

    pub fn build(self) -> Result<HeteroGraph> {
        if self.relations.is_empty() {
            return Err(Error::Validation("graph needs at least one relation".into()));
        }
        let n_senders = self.vocab.num_senders();
        let out_degrees = self
            .relations
            .iter()
            .map(|rel| {
                let mut deg = vec![0u64; n_senders];
                for e in &rel.edges {
                    deg[e.sender] += u64::from(e.count);
                }
                deg
            })
            .collect();
        Ok(HeteroGraph {
            vocab: self.vocab,
            relations: self.relations,
            out_degrees,
        })
    }
}

/// Loads one TSV edge file per relation. Lines are `src \t dst [\t count]`;
/// blank lines and lines starting with `#` are skipped.
pub fn load_edges<P: AsRef<Path>>(paths: &[(String, P)]) -> Result<HeteroGraph> {
    let mut builder = HeteroGraphBuilder::new();
    for (name, path) in paths {
        let path = path.as_ref();
        let rel = builder.add_relation(name)?;
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (src, dst, count) = parse_edge_line(line).map_err(|message| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message,
            })?;
            if count <= 0 {
                return Err(Error::Validation(format!(
                    "{}:{}: edge count must be positive, got {count}",
                    path.display(),
                    lineno + 1
                )));
            }
            let count = u32::try_from(count).map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!("count {count} too large"),
            })?;
            builder.add_edge(rel, src, dst, count)?;
        }
    }
    builder.build()
}

fn parse_edge_line(line: &str) -> std::result::Result<(&str, &str, i64), String> {
    let fields: Vec<&str> = line.split('\t').collect();
    let (src, dst) = match fields.as_slice() {
        [src, dst] | [src, dst, _] => (*src, *dst),
        _ => return Err(format!("expected 2 or 3 tab-separated fields, got {}", fields.len())),
    };
    if src.is_empty() || dst.is_empty() {
        return Err("empty node id".into());
    }
    let count = match fields.get(2) {
        Some(c) => c
            .trim()
            .parse::<i64>()
            .map_err(|e| format!("bad count '{c}': {e}"))?,
        None => 1,
    };
    Ok((src, dst, count))
}

/// Reads a relation manifest of `relation_name \t path` lines. Relative
/// paths resolve against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<(String, PathBuf)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.splitn(2, '\t');
        let (name, file) = match (parts.next(), parts.next()) {
            (Some(n), Some(f)) if !n.is_empty() && !f.is_empty() => (n, f),
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    message: "expected 'relation<TAB>path'".into(),
                })
            }
        };
        let file = Path::new(file);
        let resolved = if file.is_absolute() {
            file.to_path_buf()
        } else {
            base.join(file)
        };
        out.push((name.to_owned(), resolved));
    }
    Ok(out)
}
