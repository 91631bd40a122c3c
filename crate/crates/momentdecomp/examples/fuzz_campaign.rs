//! Run a random verification campaign against the exact engine.
//!
//! Generates random joints (dense and sparse) and random chain models,
//! checks the decomposition identity and the literal-vs-collapsed agreement
//! on each, and prints the tally. Failing artifacts would be shrunk toward
//! minimal supports and reported; on a healthy build there are none.
//!
//! ```bash
//! cargo run --example fuzz_campaign
//! ```

use momentdecomp::{run_joint_trials, run_model_trials};

fn main() {
    let seed = 20_240_601;
    let tol = 1e-10;

    let joints = run_joint_trials(seed, 200, &[1, 2, 3, 4], 2, 0.3, tol);
    println!(
        "joint trials: {}/{} passed (two targets, k cycling 1..=4, 30% sparsity)",
        joints.passed, joints.trials
    );
    for f in &joints.failures {
        println!("  trial {} failed: {} (config {:?})", f.trial, f.detail, f.config);
    }

    let models = run_model_trials(seed, 100, &[1, 2, 3], 1, tol);
    println!(
        "model trials: {}/{} passed (single target, compiled then decomposed)",
        models.passed, models.trials
    );
    for f in &models.failures {
        println!("  trial {} failed: {} (config {:?})", f.trial, f.detail, f.config);
    }

    if joints.all_passed() && models.all_passed() {
        println!("\nall identities held within {tol:.0e}");
    } else {
        std::process::exit(1);
    }
}
