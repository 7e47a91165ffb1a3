//! Plain-text checkpoint of trained parameters together with node and
//! relation names.
//!
//! ```text
//! mlipm v1 K=<dim> R=<relations> N1=<senders> N2=<receivers>
//! R\t<relation name>         (R lines)
//! S\t<sender id>             (N1 lines)
//! V\t<receiver id>           (N2 lines)
//! P\t<p_1>..<p_K>            (N1 lines)
//! Q\t<r>\t<q_1>..<q_K>       (N2 lines per relation)
//! B\t<r>\t<b_1>..<b_N2>      (one line per relation)
//! W\t<w_1>..<w_R>
//! ```
//!
//! Reals use the shortest representation that round-trips exactly.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hetgraph::HeteroGraph;
use crate::model::{Matrix, ModelParams};

const MAGIC: &str = "mlipm v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub relation_names: Vec<String>,
    pub sender_ids: Vec<String>,
    pub receiver_ids: Vec<String>,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn new(g: &HeteroGraph, params: ModelParams) -> Result<Self> {
        if params.num_senders() != g.num_senders() {
            return Err(Error::DimensionMismatch {
                expected: g.num_senders(),
                got: params.num_senders(),
            });
        }
        if params.num_receivers() != g.num_receivers() {
            return Err(Error::DimensionMismatch {
                expected: g.num_receivers(),
                got: params.num_receivers(),
            });
        }
        if params.num_relations() != g.num_relations() {
            return Err(Error::DimensionMismatch {
                expected: g.num_relations(),
                got: params.num_relations(),
            });
        }
        Ok(Self {
            relation_names: g.relation_names(),
            sender_ids: g.vocab().sender_ids().map(str::to_owned).collect(),
            receiver_ids: g.vocab().receiver_ids().map(str::to_owned).collect(),
            params,
        })
    }

    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{MAGIC} K={} R={} N1={} N2={}",
            p.dim(),
            p.num_relations(),
            p.num_senders(),
            p.num_receivers()
        );
        for name in &self.relation_names {
            let _ = writeln!(s, "R\t{name}");
        }
        for id in &self.sender_ids {
            let _ = writeln!(s, "S\t{id}");
        }
        for id in &self.receiver_ids {
            let _ = writeln!(s, "V\t{id}");
        }
        let row = |s: &mut String, tag: &str, values: &[f64]| {
            s.push_str(tag);
            for v in values {
                let _ = write!(s, "\t{v}");
            }
            s.push('\n');
        };
        for i in 0..p.num_senders() {
            row(&mut s, "P", p.ideology.row(i));
        }
        for (r, q) in p.images.iter().enumerate() {
            for j in 0..p.num_receivers() {
                row(&mut s, &format!("Q\t{r}"), q.row(j));
            }
        }
        for (r, b) in p.biases.iter().enumerate() {
            row(&mut s, &format!("B\t{r}"), b);
        }
        row(&mut s, "W", &p.weights);
        s
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(self.to_text().as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let bad = |line: usize, message: &str| Error::Checkpoint {
            line,
            message: message.to_owned(),
        };
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty checkpoint"))?;
        let rest = header
            .strip_prefix(MAGIC)
            .ok_or_else(|| bad(1, "missing 'mlipm v1' header"))?;
        let mut dims = [None; 4];
        for field in rest.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| bad(1, "bad header field"))?;
            let slot = match key {
                "K" => 0,
                "R" => 1,
                "N1" => 2,
                "N2" => 3,
                _ => return Err(bad(1, "unknown header field")),
            };
            dims[slot] = Some(value.parse::<usize>().map_err(|_| bad(1, "bad header value"))?);
        }
        let [Some(k), Some(r_count), Some(n1), Some(n2)] = dims else {
            return Err(bad(1, "header needs K, R, N1 and N2"));
        };

        let mut next = |tag: &str| -> Result<(usize, Vec<&str>)> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| bad(0, &format!("unexpected end of file, wanted '{tag}' line")))?;
            let mut fields = line.split('\t');
            if fields.next() != Some(tag) {
                return Err(bad(no, &format!("expected '{tag}' line")));
            }
            Ok((no, fields.collect()))
        };
        let reals = |no: usize, fields: &[&str]| -> Result<Vec<f64>> {
            fields
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| bad(no, &format!("bad real '{f}'")))
                })
                .collect()
        };

        let mut names = |tag: &str, n: usize| -> Result<Vec<String>> {
            (0..n)
                .map(|_| {
                    let (no, f) = next(tag)?;
                    match f[..] {
                        [name] => Ok(name.to_owned()),
                        _ => Err(bad(no, "name line needs exactly one field")),
                    }
                })
                .collect()
        };
        let relation_names = names("R", r_count)?;
        let sender_ids = names("S", n1)?;
        let receiver_ids = names("V", n2)?;
        let mut rows = |tag: &str, index: Option<usize>, n: usize, width: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(n * width);
            for _ in 0..n {
                let (no, f) = next(tag)?;
                let values = match index {
                    Some(r) => {
                        if f.first().and_then(|x| x.parse::<usize>().ok()) != Some(r) {
                            return Err(bad(no, "relation index out of order"));
                        }
                        &f[1..]
                    }
                    None => &f[..],
                };
                if values.len() != width {
                    return Err(bad(no, "row has wrong width"));
                }
                out.extend(reals(no, values)?);
            }
            Ok(out)
        };
        let ideology = rows("P", None, n1, k)?;
        let mut images = Vec::with_capacity(r_count);
        for r in 0..r_count {
            images.push(Matrix::from_vec(n2, k, rows("Q", Some(r), n2, k)?)?);
        }
        let mut biases = Vec::with_capacity(r_count);
        for r in 0..r_count {
            biases.push(rows("B", Some(r), 1, n2)?);
        }
        let (no, f) = next("W")?;
        if f.len() != r_count {
            return Err(bad(no, "weight line has wrong width"));
        }
        let weights = reals(no, &f)?;
        if let Some((no, _)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(bad(no, "trailing content"));
        }
        let params = ModelParams {
            ideology: Matrix::from_vec(n1, k, ideology)?,
            images,
            biases,
            weights,
        };
        Ok(Self {
            relation_names,
            sender_ids,
            receiver_ids,
            params,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetgraph::HeteroGraphBuilder;

    fn graph() -> HeteroGraph {
        let mut b = HeteroGraphBuilder::new();
        let f = b.add_relation("follow").unwrap();
        let t = b.add_relation("retweet").unwrap();
        b.add_edge(f, "a", "x", 1).unwrap();
        b.add_edge(t, "b", "y", 2).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let g = graph();
        let mut params = ModelParams::random(2, 2, 2, 3, 0.7, 9);
        params.biases[1][0] = -1.0 / 3.0;
        params.weights = vec![2.0f64.sqrt(), 1.0 / 2.0f64.sqrt()];
        let ck = Checkpoint::new(&g, params).unwrap();
        let back = Checkpoint::parse(&ck.to_text()).unwrap();
        assert_eq!(back, ck);
    }

    #[test]
    fn rejects_truncated_and_malformed() {
        let g = graph();
        let ck = Checkpoint::new(&g, ModelParams::random(2, 2, 2, 1, 0.1, 0)).unwrap();
        let text = ck.to_text();
        let truncated: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
        assert!(matches!(Checkpoint::parse(&truncated), Err(Error::Checkpoint { .. })));
        let corrupted = text.replacen("W\t", "W\tnan\t", 1);
        assert!(Checkpoint::parse(&corrupted).is_err());
        assert!(Checkpoint::parse("hello").is_err());
    }

    #[test]
    fn shape_must_match_graph() {
        let g = graph();
        assert!(Checkpoint::new(&g, ModelParams::zeros(3, 2, 2, 1)).is_err());
    }
}
