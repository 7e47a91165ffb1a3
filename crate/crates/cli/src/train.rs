use std::fs::File;
use std::io::{BufWriter, Write};

use anyhow::Context;
use mlipm_core::{optimizer, Checkpoint, SampleSet};

use crate::args::TrainCmdArgs;
use crate::{manifest, usage, CliResult};

pub const CHECKPOINT: &str = "checkpoint.txt";
pub const LOG: &str = "train_log.tsv";
pub const SAMPLES: &str = "samples.tsv";

pub fn run(args: TrainCmdArgs, argv: &[String]) -> CliResult<()> {
    let config = args.model.config()?;
    if args.checkpoint_every == Some(0) {
        return Err(usage("--checkpoint-every must be positive"));
    }
    let (graph, mut inputs) = args.graph.load()?;
    inputs.extend(args.samples.iter().cloned());
    manifest::write(
        &args.out,
        "train",
        argv,
        config.seed,
        manifest::train_config_json(&config),
        &inputs,
    )?;

    let samples = match &args.samples {
        Some(path) => SampleSet::read_tsv(path, &graph)?,
        None => SampleSet::from_graph(&graph, config.seed, config.negatives_per_pair)?,
    };
    if samples.starved_senders() > 0 {
        eprintln!(
            "warning: {} sender(s) had fewer non-neighbors than requested negatives",
            samples.starved_senders()
        );
    }
    if args.dump_samples {
        let path = args.out.join(SAMPLES);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(f);
        samples.write_tsv(&graph, &mut w)?;
        w.flush()?;
    }

    let every = args.checkpoint_every;
    let restarts = config.restarts;
    let state = optimizer::train_with(&graph, &samples, &config, |restart, state| {
        if let Some(n) = every {
            if state.epoch % n == 0 {
                let name = if restarts > 1 {
                    format!("checkpoint-r{restart}-epoch{}.txt", state.epoch)
                } else {
                    format!("checkpoint-epoch{}.txt", state.epoch)
                };
                Checkpoint::new(&graph, state.params.clone())?.save(&args.out.join(name))?;
            }
        }
        Ok(())
    })?;

    let log_path = args.out.join(LOG);
    let f = File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
    let mut w = BufWriter::new(f);
    state.write_log(&graph.relation_names(), &mut w)?;
    w.flush()?;
    Checkpoint::new(&graph, state.params.clone())?.save(&args.out.join(CHECKPOINT))?;

    println!(
        "epochs\t{}\nconverged\t{}\nstalls\t{}\nobjective\t{}",
        state.epoch,
        state.converged,
        state.stalls,
        state.final_objective()
    );
    for (name, w) in graph.relation_names().iter().zip(&state.params.weights) {
        println!("w_{name}\t{w}");
    }
    Ok(())
}
