use std::fmt::Write as _;
use std::fs;

use anyhow::Context;
use mlipm_core::choice::{mc_choice_probability, ReceiverPlacement};
use mlipm_core::model::sigmoid;
use serde_json::json;

use crate::args::{resolve_seed, VerifyArgs};
use crate::{manifest, usage, CliError, CliResult};

pub const MIN_SAMPLES: usize = 10_000;
pub const REPORT: &str = "verify_choice.tsv";

/// Sender position used for every placement; the check does not depend on it.
const SENDER: [f64; 2] = [0.3, -0.2];

pub fn run(args: VerifyArgs, argv: &[String]) -> CliResult<()> {
    if args.samples < MIN_SAMPLES {
        return Err(usage(format!("--samples must be at least {MIN_SAMPLES}")));
    }
    if !(args.tolerance >= 0.0) {
        return Err(usage("--tolerance must be non-negative"));
    }
    if args.logits.iter().any(|l| !l.is_finite()) {
        return Err(usage("--logits must be finite"));
    }
    let seed = resolve_seed(args.seed)?;
    if let Some(dir) = &args.out {
        let config = json!({
            "logits": args.logits,
            "samples": args.samples,
            "tolerance": args.tolerance,
        });
        manifest::write(dir, "verify-choice", argv, seed, config, &[])?;
    }

    let mut report = String::from("logit\tanalytic\tmonte_carlo\tabs_diff\n");
    let mut worst = 0.0f64;
    for (k, &logit) in args.logits.iter().enumerate() {
        let placement = ReceiverPlacement::with_logit(&SENDER, logit);
        let mc = mc_choice_probability(&SENDER, &placement, args.samples, seed.wrapping_add(k as u64))?;
        let analytic = sigmoid(logit);
        let diff = (mc - analytic).abs();
        worst = worst.max(diff);
        let _ = writeln!(report, "{logit}\t{analytic}\t{mc}\t{diff}");
    }
    let pass = worst < args.tolerance;
    let _ = writeln!(
        report,
        "{}\tmax_abs_diff={worst}\ttolerance={}",
        if pass { "PASS" } else { "FAIL" },
        args.tolerance
    );
    if let Some(dir) = &args.out {
        let path = dir.join(REPORT);
        fs::write(&path, &report).with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{report}");
    if pass {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "max |monte_carlo - analytic| = {worst} is not below {}",
            args.tolerance
        )))
    }
}
