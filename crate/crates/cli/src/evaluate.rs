use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use mlipm_core::eval::{self, classification_protocol, pairwise_ranking_accuracy, EvalLabels};
use mlipm_core::model::{aver_score, Matrix};
use mlipm_core::{Checkpoint, HeteroGraph};
use serde_json::json;

use crate::args::{resolve_seed, EvaluateArgs, ScoresArgs};
use crate::{manifest, usage, CliResult};

pub const METRICS: &str = "metrics.tsv";
pub const COLD_START: &str = "cold_start.csv";
pub const SCORES: &str = "scores.csv";

/// Sender ids with one row of scores each.
pub struct ScoreTable {
    pub ids: Vec<String>,
    pub values: Matrix,
}

impl ScoreTable {
    fn from_checkpoint(ck: Checkpoint) -> Self {
        Self {
            ids: ck.sender_ids,
            values: ck.params.ideology,
        }
    }

    /// Reads `id,v1,..,vK`; a first line starting with `id,` is a header.
    fn read_csv(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut ids = Vec::new();
        let mut data = Vec::new();
        let mut width = None;
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (no == 0 && line.starts_with("id,")) {
                continue;
            }
            let mut fields = line.split(',');
            let id = fields.next().unwrap_or_default().to_owned();
            let row: Vec<f64> = fields
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .with_context(|| format!("{}:{}: bad score", path.display(), no + 1))?;
            if row.is_empty() || *width.get_or_insert(row.len()) != row.len() {
                return Err(anyhow!("{}:{}: inconsistent number of scores", path.display(), no + 1).into());
            }
            ids.push(id);
            data.extend(row);
        }
        let k = width.unwrap_or(0);
        if ids.is_empty() {
            return Err(anyhow!("{}: no scores", path.display()).into());
        }
        Ok(Self {
            values: Matrix::from_vec(ids.len(), k, data)?,
            ids,
        })
    }

    fn write_csv(&self, path: &Path, header: &str) -> CliResult<()> {
        let mut s = String::new();
        let k = self.values.cols();
        s.push_str("id");
        for d in 1..=k {
            let _ = write!(s, ",{header}{d}");
        }
        s.push('\n');
        for (i, id) in self.ids.iter().enumerate() {
            s.push_str(id);
            for v in self.values.row(i) {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        fs::write(path, s).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    fn index(&self) -> HashMap<&str, usize> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
    }
}

struct Row {
    metric: String,
    value: Option<f64>,
    std: Option<f64>,
    n: usize,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), |x| x.to_string())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Task {
    Ranking,
    Classification,
    ColdStart,
}

fn parse_tasks(names: &[String]) -> CliResult<Vec<Task>> {
    names
        .iter()
        .map(|n| match n.as_str() {
            "ranking" => Ok(Task::Ranking),
            "classification" => Ok(Task::Classification),
            "cold-start" => Ok(Task::ColdStart),
            other => Err(usage(format!("unknown task '{other}'"))),
        })
        .collect()
}

struct Evaluator<'a> {
    table: &'a ScoreTable,
    index: HashMap<&'a str, usize>,
    rank_table: &'a ScoreTable,
    rank_index: HashMap<&'a str, usize>,
    args: &'a EvaluateArgs,
    seed: u64,
    ordinal: Option<HashMap<String, u8>>,
    binary: Option<HashMap<String, i8>>,
    sign: f64,
}

impl Evaluator<'_> {
    fn labeled<L: Copy>(
        index: &HashMap<&str, usize>,
        labels: &HashMap<String, L>,
        subset: Option<&HashSet<&str>>,
    ) -> Vec<(usize, L)> {
        let mut rows: Vec<(usize, L)> = labels
            .iter()
            .filter(|(id, _)| subset.is_none_or(|s| s.contains(id.as_str())))
            .filter_map(|(id, &l)| index.get(id.as_str()).map(|&i| (i, l)))
            .collect();
        rows.sort_by_key(|r| r.0);
        rows
    }

    fn ranking(&self, subset: Option<&HashSet<&str>>) -> Option<mlipm_core::Result<(f64, usize)>> {
        let labels = self.ordinal.as_ref()?;
        let rows = Self::labeled(&self.rank_index, labels, subset);
        let scores: Vec<f64> = rows
            .iter()
            .map(|&(i, _)| self.sign * self.rank_table.values.get(i, self.args.axis))
            .collect();
        let labels: Vec<i64> = rows.iter().map(|&(_, l)| i64::from(l)).collect();
        Some(pairwise_ranking_accuracy(&scores, &labels))
    }

    fn classification(
        &self,
        subset: Option<&HashSet<&str>>,
    ) -> Option<(usize, mlipm_core::Result<eval::ProtocolResult>)> {
        let labels = self.binary.as_ref()?;
        let rows = Self::labeled(&self.index, labels, subset);
        let k = self.table.values.cols();
        let mut data = Vec::with_capacity(rows.len() * k);
        for &(i, _) in &rows {
            data.extend_from_slice(self.table.values.row(i));
        }
        let y: Vec<bool> = rows.iter().map(|&(_, l)| l > 0).collect();
        let result = Matrix::from_vec(rows.len(), k, data).and_then(|x| {
            classification_protocol(&x, &y, self.args.runs, self.args.train_frac, self.args.probe_reg, self.seed)
        });
        Some((rows.len(), result))
    }

    /// Orientation of the ranking axis: anchor sign, else agreement with the labels.
    fn orient(&mut self) -> CliResult<()> {
        if let Some(anchor) = &self.args.anchor {
            let &i = self
                .rank_index
                .get(anchor.as_str())
                .with_context(|| format!("anchor '{anchor}' is not a scored sender"))?;
            self.sign = if self.rank_table.values.get(i, self.args.axis) < 0.0 { -1.0 } else { 1.0 };
        } else if let Some(labels) = &self.ordinal {
            let rows = Self::labeled(&self.rank_index, labels, None);
            let n = rows.len() as f64;
            let xs: Vec<f64> = rows.iter().map(|&(i, _)| self.rank_table.values.get(i, self.args.axis)).collect();
            let ys: Vec<f64> = rows.iter().map(|&(_, l)| f64::from(l)).collect();
            let mx = xs.iter().sum::<f64>() / n;
            let my = ys.iter().sum::<f64>() / n;
            let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            self.sign = if cov < 0.0 { -1.0 } else { 1.0 };
        }
        Ok(())
    }
}

fn load_table(args: &EvaluateArgs) -> CliResult<(ScoreTable, Vec<PathBuf>, String)> {
    if let Some(path) = &args.checkpoint {
        let ck = Checkpoint::load(path)?;
        let method = if ck.relation_names.len() == 1 { "SL-IPM" } else { "ML-IPM" };
        Ok((ScoreTable::from_checkpoint(ck), vec![path.clone()], method.to_owned()))
    } else {
        let path = args.scores.as_ref().ok_or_else(|| usage("pass --checkpoint or --scores"))?;
        let method = path
            .file_stem()
            .map_or_else(|| "scores".to_owned(), |s| s.to_string_lossy().into_owned());
        Ok((ScoreTable::read_csv(path)?, vec![path.clone()], method))
    }
}

pub fn run(args: EvaluateArgs, argv: &[String]) -> CliResult<()> {
    let tasks = parse_tasks(&args.tasks)?;
    let seed = resolve_seed(args.seed)?;
    if args.runs == 0 || !(args.train_frac > 0.0 && args.train_frac < 1.0) {
        return Err(usage("--runs must be positive and --train-frac in (0, 1)"));
    }
    let (table, mut inputs, default_method) = load_table(&args)?;
    let rank_table = match &args.ranking_checkpoint {
        Some(path) => {
            inputs.push(path.clone());
            Some(ScoreTable::from_checkpoint(Checkpoint::load(path)?))
        }
        None => None,
    };
    let rank_source = rank_table.as_ref().unwrap_or(&table);
    if args.axis >= rank_source.values.cols() {
        return Err(usage(format!(
            "--axis {} out of range for {} dimension(s)",
            args.axis,
            rank_source.values.cols()
        )));
    }
    let graph: Option<(HeteroGraph, Vec<PathBuf>)> = if tasks.contains(&Task::ColdStart) && args.graph.present() {
        Some(args.graph.load()?)
    } else {
        None
    };
    inputs.extend(args.labels.iter().cloned());
    inputs.extend(args.ranking_labels.iter().cloned());
    if let Some((_, paths)) = &graph {
        inputs.extend(paths.iter().cloned());
    }
    let config = json!({
        "tasks": args.tasks,
        "axis": args.axis,
        "anchor": args.anchor,
        "runs": args.runs,
        "train_frac": args.train_frac,
        "probe_reg": args.probe_reg,
        "cold_relation": args.cold_relation,
        "cold_thresholds": args.cold_thresholds,
    });
    manifest::write(&args.out, "evaluate", argv, seed, config, &inputs)?;

    let mut ev = Evaluator {
        index: table.index(),
        table: &table,
        rank_index: rank_source.index(),
        rank_table: rank_source,
        args: &args,
        seed,
        ordinal: args.ranking_labels.as_deref().map(EvalLabels::ordinal_from_csv).transpose()?,
        binary: args.labels.as_deref().map(EvalLabels::binary_from_csv).transpose()?,
        sign: 1.0,
    };
    ev.orient()?;

    let mut rows = Vec::new();
    for task in &tasks {
        match task {
            Task::Ranking => match ev.ranking(None) {
                None => eprintln!("warning: ranking skipped, no --ranking-labels"),
                Some(Ok((acc, n))) => rows.push(Row {
                    metric: "ranking_accuracy".into(),
                    value: Some(acc),
                    std: None,
                    n,
                }),
                Some(Err(e)) => eprintln!("warning: ranking skipped: {e}"),
            },
            Task::Classification => match ev.classification(None) {
                None => eprintln!("warning: classification skipped, no --labels"),
                Some((n, Ok(res))) => rows.push(Row {
                    metric: "classification_auc".into(),
                    value: Some(res.mean),
                    std: Some(res.std),
                    n,
                }),
                Some((_, Err(e))) => eprintln!("warning: classification skipped: {e}"),
            },
            Task::ColdStart => {}
        }
    }

    let mut cold_csv = None;
    if tasks.contains(&Task::ColdStart) {
        if let Some((extra, csv)) = cold_start_rows(&ev, graph.as_ref().map(|g| &g.0), &args, &default_method)? {
            rows.extend(extra);
            cold_csv = Some(csv);
        }
    }

    let mut tsv = String::from("metric\tvalue\tstd\tn\n");
    for r in &rows {
        let _ = writeln!(tsv, "{}\t{}\t{}\t{}", r.metric, fmt_opt(r.value), fmt_opt(r.std), r.n);
    }
    let path = args.out.join(METRICS);
    fs::write(&path, &tsv).with_context(|| format!("writing {}", path.display()))?;
    if let Some(csv) = cold_csv {
        let path = args.out.join(COLD_START);
        fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{tsv}");
    Ok(())
}

type ColdStartOutput = (Vec<Row>, String);

fn cold_start_rows(
    ev: &Evaluator,
    graph: Option<&HeteroGraph>,
    args: &EvaluateArgs,
    default_method: &str,
) -> CliResult<Option<ColdStartOutput>> {
    let Some(g) = graph else {
        eprintln!("warning: cold-start skipped, no graph given (--manifest or --edges)");
        return Ok(None);
    };
    if ev.ordinal.is_none() && ev.binary.is_none() {
        eprintln!("warning: cold-start skipped, no labels");
        return Ok(None);
    }
    let relation = match (&args.cold_relation, g.num_relations()) {
        (Some(name), _) => g
            .relation_index(name)
            .with_context(|| format!("cold-start relation '{name}' not in graph"))?,
        (None, 1) => 0,
        (None, _) => {
            eprintln!("warning: cold-start skipped, pass --cold-relation");
            return Ok(None);
        }
    };
    let method = args.method.as_deref().unwrap_or(default_method);
    let mut rows = Vec::new();
    let mut csv = String::from("threshold,metric,method,value,std,n\n");
    for &t in &args.cold_thresholds {
        let slice: HashSet<&str> = eval::cold_start_slice(g, relation, t)?
            .into_iter()
            .map(|s| g.vocab().sender_id(s))
            .collect();
        let mut push = |metric: &str, value: Option<f64>, std: Option<f64>, n: usize| {
            let _ = writeln!(csv, "{t},{metric},{method},{},{},{n}", fmt_opt(value), fmt_opt(std));
            rows.push(Row {
                metric: format!("{metric}@deg<={t}"),
                value,
                std,
                n,
            });
        };
        match ev.ranking(Some(&slice)) {
            None => {}
            Some(Ok((acc, n))) => push("ranking_accuracy", Some(acc), None, n),
            Some(Err(e)) => {
                eprintln!("warning: cold-start ranking at threshold {t}: {e}");
                push("ranking_accuracy", None, None, 0);
            }
        }
        match ev.classification(Some(&slice)) {
            None => {}
            Some((n, Ok(res))) => push("classification_auc", Some(res.mean), Some(res.std), n),
            Some((n, Err(e))) => {
                eprintln!("warning: cold-start classification at threshold {t}: {e}");
                push("classification_auc", None, None, n);
            }
        }
    }
    Ok(Some((rows, csv)))
}

/// Receiver labels aligned to the graph's receiver indices.
pub fn receiver_label_vector(g: &HeteroGraph, path: &Path) -> CliResult<Vec<Option<i8>>> {
    let labels = EvalLabels::binary_from_csv(path)?;
    Ok(g.vocab()
        .receiver_ids()
        .map(|id| labels.get(id).copied())
        .collect())
}

pub fn run_scores(args: ScoresArgs, argv: &[String]) -> CliResult<()> {
    if let Some(path) = &args.checkpoint {
        manifest::write(&args.out, "scores", argv, 0, json!({}), std::slice::from_ref(path))?;
        let table = ScoreTable::from_checkpoint(Checkpoint::load(path)?);
        table.write_csv(&args.out.join(SCORES), "p")?;
        return Ok(());
    }
    let (Some(labels_path), Some(relation)) = (&args.receiver_labels, &args.relation) else {
        return Err(usage("pass --checkpoint, or --receiver-labels with --relation and a graph"));
    };
    let (g, mut inputs) = args.graph.load()?;
    inputs.push(labels_path.clone());
    manifest::write(&args.out, "scores", argv, 0, json!({ "relation": relation }), &inputs)?;
    let r = g
        .relation_index(relation)
        .with_context(|| format!("relation '{relation}' not in graph"))?;
    let aver = aver_score(&g, &receiver_label_vector(&g, labels_path)?, r)?;
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (s, v) in aver.iter().enumerate() {
        if let Some(v) = v {
            ids.push(g.vocab().sender_id(s).to_owned());
            data.push(*v);
        }
    }
    let table = ScoreTable {
        values: Matrix::from_vec(ids.len(), 1, data)?,
        ids,
    };
    table.write_csv(&args.out.join(SCORES), "aver")?;
    Ok(())
}
