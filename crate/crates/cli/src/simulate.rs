use mlipm_core::synth::{generate_network, SynthSpec};
use serde_json::json;

use crate::args::{resolve_seed, SimulateArgs};
use crate::{manifest, usage, CliResult};

fn parse_means(text: &str, dim: usize) -> CliResult<Vec<Vec<f64>>> {
    text.split(';')
        .map(|group| {
            let v: Vec<f64> = group
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| usage(format!("bad cluster mean '{group}'")))?;
            if v.len() != dim {
                return Err(usage(format!("cluster mean '{group}' needs {dim} coordinate(s)")));
            }
            Ok(v)
        })
        .collect()
}

fn spec_from_args(args: &SimulateArgs) -> CliResult<SynthSpec> {
    let cluster_means = match &args.cluster_means {
        Some(text) => parse_means(text, args.dim)?,
        None => [-0.5, 0.5]
            .iter()
            .map(|&m| {
                let mut v = vec![0.0; args.dim];
                if let Some(first) = v.first_mut() {
                    *first = m;
                }
                v
            })
            .collect(),
    };
    let cluster_weights = args
        .cluster_weights
        .clone()
        .unwrap_or_else(|| vec![1.0 / cluster_means.len() as f64; cluster_means.len()]);
    let spec = SynthSpec {
        n_senders: args.senders,
        n_receivers: args.receivers,
        dim: args.dim,
        cluster_means,
        cluster_weights,
        receiver_scale: args.receiver_scale,
        noise_flip_prob: args.flips.clone(),
        mean_degree: args.mean_degree,
        max_multiplicity: args.max_multiplicity,
        seed: resolve_seed(args.seed)?,
        relation_names: args.names.clone(),
    };
    Ok(spec)
}

pub fn run(args: SimulateArgs, argv: &[String]) -> CliResult<()> {
    let spec = spec_from_args(&args)?;
    let config = json!({
        "senders": spec.n_senders,
        "receivers": spec.n_receivers,
        "dim": spec.dim,
        "flips": spec.noise_flip_prob,
        "names": (0..spec.num_relations()).map(|r| spec.relation_name(r)).collect::<Vec<_>>(),
        "cluster_means": spec.cluster_means,
        "cluster_weights": spec.cluster_weights,
        "receiver_scale": spec.receiver_scale,
        "mean_degree": spec.mean_degree,
        "max_multiplicity": spec.max_multiplicity,
    });
    manifest::write(&args.out, "simulate", argv, spec.seed, config, &[])?;
    let net = generate_network(&spec)?;
    net.write_to_dir(&args.out)?;
    for (name, stats) in net.graph.relation_names().iter().zip(net.graph.relation_stats()) {
        println!(
            "{name}\tedges {}\ttotal_count {}\tactive_senders {}",
            stats.num_edges_distinct, stats.total_count, stats.num_active_senders
        );
    }
    Ok(())
}
