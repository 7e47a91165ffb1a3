use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;

use anyhow::Context;
use mlipm_core::eval::{self, aver_link_prediction_auc, link_prediction_auc, split_links, LinkSplit};
use mlipm_core::model::aver_score;
use mlipm_core::{optimizer, SampleSet};
use serde_json::json;

use crate::args::LinkArgs;
use crate::evaluate::receiver_label_vector;
use crate::{manifest, usage, CliResult};

pub const LINK_METRICS: &str = "link_metrics.tsv";

/// Held-out links whose (relation, sender) is in `cold`.
fn restrict(split: &LinkSplit, cold: &HashSet<(usize, usize)>) -> LinkSplit {
    LinkSplit {
        train_fraction: split.train_fraction,
        held_out: split
            .held_out
            .iter()
            .filter(|h| cold.contains(&(h.relation, h.sender)))
            .copied()
            .collect(),
    }
}

pub fn run(args: LinkArgs, argv: &[String]) -> CliResult<()> {
    let config = args.model.config()?;
    if !(args.train_frac > 0.0 && args.train_frac < 1.0) {
        return Err(usage("--train-frac must lie in (0, 1)"));
    }
    let (g, mut inputs) = args.graph.load()?;
    inputs.extend(args.receiver_labels.iter().cloned());
    let targets: Vec<usize> = match &args.target {
        None => (0..g.num_relations()).collect(),
        Some(names) => names
            .iter()
            .map(|n| {
                g.relation_index(n)
                    .with_context(|| format!("target relation '{n}' not in graph"))
            })
            .collect::<Result<_, _>>()?,
    };
    let mut cfg_json = manifest::train_config_json(&config);
    cfg_json["train_frac"] = json!(args.train_frac);
    cfg_json["targets"] = json!(targets.iter().map(|&r| g.relation_names()[r].clone()).collect::<Vec<_>>());
    cfg_json["cold_thresholds"] = json!(args.cold_thresholds);
    manifest::write(&args.out, "link-predict", argv, config.seed, cfg_json, &inputs)?;

    let samples = SampleSet::from_graph(&g, config.seed, config.negatives_per_pair)?;
    let (train, split) = split_links(&samples, &targets, args.train_frac, config.seed)?;
    let state = optimizer::train(&g, &train, &config)?;
    let method = if g.num_relations() == 1 {
        "SL-IPM"
    } else if config.fixed_weights {
        "ML-IPM-fixed"
    } else {
        "ML-IPM"
    };
    let aver = match &args.receiver_labels {
        Some(path) => Some((receiver_label_vector(&g, path)?, targets[0])),
        None => None,
    };
    let aver_scores = match &aver {
        Some((labels, r)) => Some((aver_score(&g, labels, *r)?, labels)),
        None => None,
    };

    let mut out = String::from("method\tmetric\tvalue\tn\n");
    let mut emit = |label: &str, split: &LinkSplit| {
        if let Ok(auc) = link_prediction_auc(&state.params, split) {
            let _ = writeln!(out, "{method}\t{label}\t{auc}\t{}", split.held_out.len());
        } else {
            eprintln!("warning: {label}: held-out links need both classes");
        }
        if let Some((scores, labels)) = &aver_scores {
            if let Ok(auc) = aver_link_prediction_auc(scores, labels, split) {
                let _ = writeln!(out, "AVER\t{label}\t{auc}\t{}", split.held_out.len());
            }
        }
    };
    emit("link_auc", &split);
    for &t in &args.cold_thresholds {
        let mut cold = HashSet::new();
        for &r in &targets {
            let slice = eval::cold_start_slice_samples(&train, r, g.num_senders(), t)?;
            cold.extend(slice.into_iter().map(|s| (r, s)));
        }
        emit(&format!("link_auc@deg<={t}"), &restrict(&split, &cold));
    }
    let path = args.out.join(LINK_METRICS);
    fs::write(&path, &out).with_context(|| format!("writing {}", path.display()))?;
    print!("{out}");
    Ok(())
}
