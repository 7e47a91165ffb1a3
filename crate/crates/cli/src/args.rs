use std::path::PathBuf;

use anyhow::Context;
use clap::{ArgAction, Args};
use mlipm_core::{load_edges, read_manifest, HeteroGraph, TrainConfig};

use crate::{usage, CliResult};

pub const SEED_ENV: &str = "MLIPM_SEED";

/// `--seed`, unless `MLIPM_SEED` is set.
pub fn resolve_seed(flag: u64) -> CliResult<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| usage(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(flag),
    }
}

#[derive(Args, Debug, Clone)]
pub struct GraphArgs {
    /// File of `relation<TAB>path` lines; paths are relative to the manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Extra relation as `name=path`; may be repeated.
    #[arg(long = "edges", value_name = "NAME=PATH")]
    pub edges: Vec<String>,
    /// Keep only these relations, in this order.
    #[arg(long, value_delimiter = ',')]
    pub relations: Option<Vec<String>>,
}

impl GraphArgs {
    pub fn present(&self) -> bool {
        self.manifest.is_some() || !self.edges.is_empty()
    }

    /// Relation files in load order.
    pub fn entries(&self) -> CliResult<Vec<(String, PathBuf)>> {
        let mut entries = Vec::new();
        if let Some(m) = &self.manifest {
            entries.extend(read_manifest(m)?);
        }
        for spec in &self.edges {
            let (name, path) = spec
                .split_once('=')
                .ok_or_else(|| usage(format!("--edges expects NAME=PATH, got '{spec}'")))?;
            entries.push((name.to_owned(), PathBuf::from(path)));
        }
        if entries.is_empty() {
            return Err(usage("no input graph: pass --manifest or --edges"));
        }
        if let Some(keep) = &self.relations {
            let mut chosen = Vec::with_capacity(keep.len());
            for name in keep {
                let entry = entries
                    .iter()
                    .find(|(n, _)| n == name)
                    .with_context(|| format!("relation '{name}' is not among the inputs"))?;
                chosen.push(entry.clone());
            }
            entries = chosen;
        }
        Ok(entries)
    }

    pub fn load(&self) -> CliResult<(HeteroGraph, Vec<PathBuf>)> {
        let entries = self.entries()?;
        let graph = load_edges(&entries)?;
        let mut inputs: Vec<PathBuf> = self.manifest.iter().cloned().collect();
        inputs.extend(entries.into_iter().map(|(_, p)| p));
        Ok((graph, inputs))
    }
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Ideology dimension K.
    #[arg(long, default_value_t = TrainConfig::default().dim)]
    pub dim: usize,
    /// L2 strength mu.
    #[arg(long, default_value_t = TrainConfig::default().mu)]
    pub reg: f64,
    /// Initial step size for each gradient step.
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub lr: f64,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    /// Overridden by the MLIPM_SEED environment variable when set.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sampled non-links per observed link.
    #[arg(long, default_value_t = TrainConfig::default().negatives_per_pair)]
    pub neg_per_pair: usize,
    /// Freeze all relation weights at 1.
    #[arg(long)]
    pub fixed_weights: bool,
    /// Random initializations; the highest final objective is kept.
    #[arg(long, default_value_t = TrainConfig::default().restarts)]
    pub restarts: usize,
    /// Backtrack by halving the step until the objective does not decrease.
    #[arg(long, default_value_t = TrainConfig::default().line_search, action = ArgAction::Set)]
    pub line_search: bool,
    /// Worker threads for gradient accumulation.
    #[arg(long, default_value_t = TrainConfig::default().threads)]
    pub threads: usize,
    /// Half-width of the uniform initialization of P and Q.
    #[arg(long, default_value_t = TrainConfig::default().init_scale)]
    pub init_scale: f64,
    /// Relative objective change treated as converged; 0 runs every epoch.
    #[arg(long, default_value_t = TrainConfig::default().convergence_tol)]
    pub tol: f64,
}

impl ModelArgs {
    pub fn config(&self) -> CliResult<TrainConfig> {
        let config = TrainConfig {
            dim: self.dim,
            mu: self.reg,
            learning_rate: self.lr,
            epochs: self.epochs,
            negatives_per_pair: self.neg_per_pair,
            seed: resolve_seed(self.seed)?,
            line_search: self.line_search,
            init_scale: self.init_scale,
            fixed_weights: self.fixed_weights,
            threads: self.threads,
            restarts: self.restarts,
            convergence_tol: self.tol,
        };
        config.validate().map_err(|e| usage(e.to_string()))?;
        Ok(config)
    }
}

#[derive(Args, Debug)]
pub struct TrainCmdArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output directory.
    #[arg(long, default_value = "mlipm-out")]
    pub out: PathBuf,
    /// Also write a checkpoint every N epochs.
    #[arg(long, value_name = "N")]
    pub checkpoint_every: Option<usize>,
    /// Train on a previously dumped sample file instead of drawing negatives.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Write the positive/negative sample set to `samples.tsv`.
    #[arg(long)]
    pub dump_samples: bool,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Trained checkpoint.
    #[arg(long, conflicts_with = "scores", required_unless_present = "scores")]
    pub checkpoint: Option<PathBuf>,
    /// CSV of `id,v1,..,vK` sender scores (alternative to --checkpoint).
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Binary `id,label` file (-1/1) for classification.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Ordinal `id,label` file (1..5) for ranking.
    #[arg(long)]
    pub ranking_labels: Option<PathBuf>,
    /// Tasks to run: ranking, classification, cold-start.
    #[arg(long, value_delimiter = ',', default_value = "ranking,classification,cold-start")]
    pub tasks: Vec<String>,
    /// Checkpoint used only for ranking, typically a K=1 fit. Without it the
    /// ranking reads --axis of the main scores.
    #[arg(long)]
    pub ranking_checkpoint: Option<PathBuf>,
    /// Coordinate used for ranking.
    #[arg(long, default_value_t = 0)]
    pub axis: usize,
    /// Sender whose position is made non-negative on the ranking axis.
    /// Without it the axis is oriented to agree with the ranking labels.
    #[arg(long)]
    pub anchor: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long, default_value_t = 0.7)]
    pub train_frac: f64,
    /// L2 strength of the logistic probe.
    #[arg(long, default_value_t = 1e-4)]
    pub probe_reg: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Graph for cold-start degrees.
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Relation whose out-degree defines the cold-start slices.
    #[arg(long)]
    pub cold_relation: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,10")]
    pub cold_thresholds: Vec<u64>,
    /// Method name written to the cold-start CSV.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long, default_value = "mlipm-out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct LinkArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Relations whose links are held out (default: all).
    #[arg(long, value_delimiter = ',')]
    pub target: Option<Vec<String>>,
    #[arg(long, default_value_t = 0.9)]
    pub train_frac: f64,
    /// Receiver `id,label` file (-1/1); adds the averaged-label baseline.
    #[arg(long)]
    pub receiver_labels: Option<PathBuf>,
    /// Training out-degree thresholds for cold-start rows.
    #[arg(long, value_delimiter = ',')]
    pub cold_thresholds: Vec<u64>,
    #[arg(long, default_value = "mlipm-out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 500)]
    pub senders: usize,
    #[arg(long, default_value_t = 50)]
    pub receivers: usize,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Label-flip probability of each relation.
    #[arg(long, value_delimiter = ',', default_value = "0.02,0.1,0.25")]
    pub flips: Vec<f64>,
    /// Relation names (default rel1, rel2, ...).
    #[arg(long, value_delimiter = ',')]
    pub names: Vec<String>,
    /// Mixture centres as `x1,..,xK;y1,..,yK;...`; default +-0.5 on the first axis.
    #[arg(long, allow_hyphen_values = true)]
    pub cluster_means: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub cluster_weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = mlipm_core::SynthSpec::default().receiver_scale)]
    pub receiver_scale: f64,
    #[arg(long, default_value_t = 15.0)]
    pub mean_degree: f64,
    #[arg(long, default_value_t = 3)]
    pub max_multiplicity: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "mlipm-out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Logits to check.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true,
          default_value = "-4,-3,-2,-1,0,1,2,3,4")]
    pub logits: Vec<f64>,
    /// Monte-Carlo draws per logit (at least 10000).
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.005)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report and a run manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ScoresArgs {
    /// Export sender positions from this checkpoint.
    #[arg(long, conflicts_with = "receiver_labels")]
    pub checkpoint: Option<PathBuf>,
    /// Receiver `id,label` file (-1/1): export averaged-label scores instead.
    #[arg(long, requires = "relation")]
    pub receiver_labels: Option<PathBuf>,
    /// Relation for averaged-label scores.
    #[arg(long)]
    pub relation: Option<String>,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value = "mlipm-out")]
    pub out: PathBuf,
}
