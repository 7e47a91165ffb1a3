//! Run manifest written before any result file: command, resolved
//! configuration, input digests, seed and tool version.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use mlipm_core::TrainConfig;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::CliResult;

pub const FILE_NAME: &str = "run_manifest.json";

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    version: &'a str,
    argv: &'a [String],
    seed: u64,
    config: Value,
    inputs: Vec<InputDigest>,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn train_config_json(c: &TrainConfig) -> Value {
    json!({
        "dim": c.dim,
        "reg": c.mu,
        "lr": c.learning_rate,
        "epochs": c.epochs,
        "seed": c.seed,
        "neg_per_pair": c.negatives_per_pair,
        "fixed_weights": c.fixed_weights,
        "restarts": c.restarts,
        "line_search": c.line_search,
        "threads": c.threads,
        "init_scale": c.init_scale,
        "tol": c.convergence_tol,
    })
}

/// Creates `dir` and writes the manifest into it.
pub fn write(
    dir: &Path,
    command: &str,
    argv: &[String],
    seed: u64,
    config: Value,
    inputs: &[PathBuf],
) -> CliResult<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let inputs = inputs
        .iter()
        .map(|p| {
            Ok(InputDigest {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let manifest = RunManifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        argv: argv.get(1..).unwrap_or(&[]),
        seed,
        config,
        inputs,
    };
    let path = dir.join(FILE_NAME);
    let text = serde_json::to_string_pretty(&manifest).context("serializing run manifest")?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
