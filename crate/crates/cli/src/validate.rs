use anyhow::anyhow;
use clap::Args;
use slnr_core::validation::{run_validation, ValidationLevel};

use crate::{Failure, Outcome};

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// `quick` (10^5 samples, relaxed thresholds) or `full` (10^6 samples).
    #[arg(long, default_value = "quick")]
    level: ValidationLevel,
    /// Seed for the random instances.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

pub fn execute(args: ValidateArgs) -> Outcome {
    let checks = run_validation(args.level, args.seed).map_err(|e| Failure::Runtime(anyhow!(e)))?;
    for check in &checks {
        println!("{check}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Failure::Runtime(anyhow!("{failed} of {} checks failed", checks.len())));
    }
    println!("all {} checks passed at level {}", checks.len(), args.level);
    Ok(())
}
