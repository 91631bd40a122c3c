//! Command-line front end.
//!
//! One thin binary with five subcommands: `decompose`, `verify`, `mc`,
//! `random`, and `dump-joint`. Exit codes: 0 on success, 1 when a
//! verification or consistency check fails, 2 on input or parse errors.
//! JSON output is byte-deterministic for fixed inputs and seeds.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::decomp::{
    cov_term_literal, decompose_covariance, decompose_variance, DecompReport,
};
use crate::error::{Error, Result};
use crate::fuzz::{run_joint_trials, run_model_trials, TrialOutcome};
use crate::joint::FiniteJoint;
use crate::mc::{estimate_term, estimate_total, wrap_exact, McEstimate};
use crate::model::parse_model;

/// Environment variable supplying a default seed when `--seed` is absent.
pub const SEED_ENV_VAR: &str = "MOMENTDECOMP_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "momentdecomp",
    about = "Exact and Monte Carlo decomposition of variance and covariance over hierarchical models",
    version
)]
pub struct CliConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Cov,
    Var,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputMode {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrialKind {
    Joint,
    Model,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the exact decomposition and print one row per term.
    Decompose {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        target: Target,
        #[arg(long, value_enum, default_value = "text")]
        output: OutputMode,
    },
    /// Check the decomposition identity and the literal-vs-collapsed
    /// agreement against a tolerance.
    Verify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        target: Target,
        /// Absolute tolerance for the residual and every term gap.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, value_enum, default_value = "text")]
        output: OutputMode,
    },
    /// Monte Carlo term estimates with standard errors, checked against the
    /// exact engine.
    Mc {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        target: Target,
        /// Outer sample count per term (also the full-chain sample count).
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Inner draws per outer sample for non-leaf terms.
        #[arg(long, default_value_t = 64)]
        inner: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "text")]
        output: OutputMode,
    },
    /// Random verification trials over generated joints and models.
    Random {
        /// Chain depth; cycles through 1..=4 when omitted.
        #[arg(long)]
        k: Option<usize>,
        /// Target arity for generated joints.
        #[arg(long, default_value_t = 2)]
        p: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, value_enum, default_value = "both")]
        kind: TrialKind,
        /// Directory for failing-artifact dumps.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        output: OutputMode,
    },
    /// Compile a model and print the canonical joint JSON.
    DumpJoint {
        #[arg(long)]
        model: PathBuf,
    },
}

/// Runs a parsed invocation and returns the process exit code. Errors print
/// to standard error.
pub fn run(config: CliConfig) -> i32 {
    match execute(config) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn execute(config: CliConfig) -> Result<i32> {
    match config.command {
        Command::Decompose { model, target, output } => decompose_cmd(&model, target, output),
        Command::Verify { model, target, tol, output } => verify_cmd(&model, target, tol, output),
        Command::Mc { model, target, samples, inner, seed, output } => {
            mc_cmd(&model, target, samples, inner, resolve_seed(seed)?, output)
        }
        Command::Random { k, p, trials, seed, tol, kind, out, output } => {
            random_cmd(k, p, trials, resolve_seed(seed)?, tol, kind, &out, output)
        }
        Command::DumpJoint { model } => {
            let joint = load_joint(&model)?;
            println!("{}", joint.to_json());
            Ok(0)
        }
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV_VAR) {
        Ok(text) => text.parse().map_err(|_| {
            Error::InvalidDistributionSpec(format!(
                "{SEED_ENV_VAR} must be an unsigned 64-bit integer, got `{text}`"
            ))
        }),
        Err(_) => Ok(0),
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidDistributionSpec(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    Ok(())
}

fn load_joint(path: &Path) -> Result<FiniteJoint> {
    let bytes = std::fs::read(path).map_err(|e| {
        Error::InvalidDistributionSpec(format!("cannot read {}: {e}", path.display()))
    })?;
    let model = parse_model(&bytes)?;
    let (joint, _) = model.compile()?;
    Ok(joint)
}

/// Checks the model's target arity against the requested mode; implicit
/// projection of a two-target model to one target would hide modeling
/// mistakes, so it is an error instead.
fn check_target(joint: &FiniteJoint, target: Target) -> Result<()> {
    let needed = match target {
        Target::Cov => 2,
        Target::Var => 1,
    };
    if joint.p() != needed {
        return Err(Error::Arity {
            expected: needed,
            actual: joint.p(),
        });
    }
    Ok(())
}

fn term_label(i: usize, k: usize, target: Target) -> String {
    let op = match target {
        Target::Cov => "Cov",
        Target::Var => "V",
    };
    if i <= k {
        format!("{op} at level {i} of conditional means")
    } else {
        match target {
            Target::Cov => "E of conditional covariance at the leaf".to_string(),
            Target::Var => "E of conditional variance at the leaf".to_string(),
        }
    }
}

fn decompose_report(joint: &FiniteJoint, target: Target) -> Result<DecompReport> {
    check_target(joint, target)?;
    Ok(match target {
        Target::Cov => decompose_covariance(joint)?.report(),
        Target::Var => decompose_variance(joint)?.report(),
    })
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("report serialization cannot fail")
    );
}

fn decompose_cmd(model: &Path, target: Target, output: OutputMode) -> Result<i32> {
    let joint = load_joint(model)?;
    let report = decompose_report(&joint, target)?;
    match output {
        OutputMode::Json => print_json(&report),
        OutputMode::Text => {
            let what = match target {
                Target::Cov => "covariance",
                Target::Var => "variance",
            };
            println!("{what} decomposition, k = {} level(s)", report.k);
            for (idx, value) in report.terms.iter().enumerate() {
                let share = if report.total_direct != 0.0 {
                    format!("{:>10.3}%", 100.0 * value / report.total_direct)
                } else {
                    format!("{:>11}", "-")
                };
                println!(
                    "term {:<2} {:<42} {:>22} {share}",
                    idx + 1,
                    term_label(idx + 1, report.k, target),
                    value.to_string(),
                );
            }
            println!("sum of terms  {}", report.sum_terms);
            println!("direct total  {}", report.total_direct);
            println!("residual      {}", report.residual);
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct TermCheck {
    term: usize,
    collapsed: f64,
    literal: f64,
    gap: f64,
}

#[derive(Serialize)]
struct VerifyReport {
    k: usize,
    target: String,
    tol: f64,
    terms: Vec<TermCheck>,
    total_direct: f64,
    sum_terms: f64,
    residual: f64,
    pass: bool,
}

fn verify_cmd(model: &Path, target: Target, tol: f64, output: OutputMode) -> Result<i32> {
    check_tol(tol)?;
    let joint = load_joint(model)?;
    let report = decompose_report(&joint, target)?;
    // literal evaluation runs over the two-target form
    let working = match target {
        Target::Cov => joint,
        Target::Var => joint.duplicate_target()?,
    };
    let terms: Vec<TermCheck> = report
        .terms
        .iter()
        .enumerate()
        .map(|(idx, &collapsed)| {
            let literal = cov_term_literal(&working, idx + 1)?;
            Ok(TermCheck {
                term: idx + 1,
                collapsed,
                literal,
                gap: (literal - collapsed).abs(),
            })
        })
        .collect::<Result<_>>()?;
    let pass = report.residual <= tol && terms.iter().all(|t| t.gap <= tol);
    let verify = VerifyReport {
        k: report.k,
        target: report.target.clone(),
        tol,
        terms,
        total_direct: report.total_direct,
        sum_terms: report.sum_terms,
        residual: report.residual,
        pass,
    };
    match output {
        OutputMode::Json => print_json(&verify),
        OutputMode::Text => {
            println!("identity check, k = {} level(s), tol = {tol}", verify.k);
            for t in &verify.terms {
                println!(
                    "term {:<2} collapsed {:>22} literal {:>22} gap {}",
                    t.term,
                    t.collapsed.to_string(),
                    t.literal.to_string(),
                    t.gap
                );
            }
            println!("sum of terms  {}", verify.sum_terms);
            println!("direct total  {}", verify.total_direct);
            println!("residual      {}", verify.residual);
            println!("{}", if verify.pass { "PASS" } else { "FAIL" });
        }
    }
    Ok(if pass { 0 } else { 1 })
}

#[derive(Serialize)]
struct McTermReport {
    #[serde(flatten)]
    estimate: McEstimate,
    exact: f64,
    within_3se: bool,
}

#[derive(Serialize)]
struct McReport {
    k: usize,
    target: String,
    seed: u64,
    n_outer: usize,
    n_inner: usize,
    terms: Vec<McTermReport>,
    total: McTermReport,
    pass: bool,
}

/// `|estimate - exact| <= 3 se` with a tiny absolute floor for the
/// deterministic zero-variance cases.
fn within_band(estimate: f64, exact: f64, se: f64) -> bool {
    (estimate - exact).abs() <= 3.0 * se + 1e-9
}

fn mc_cmd(
    model: &Path,
    target: Target,
    samples: usize,
    inner: usize,
    seed: u64,
    output: OutputMode,
) -> Result<i32> {
    if samples < 2 || inner < 2 {
        return Err(Error::InvalidDistributionSpec(
            "--samples and --inner must be at least 2".into(),
        ));
    }
    let joint = load_joint(model)?;
    let report = decompose_report(&joint, target)?;
    let chain = wrap_exact(&joint, seed);

    let mut terms = Vec::with_capacity(report.terms.len());
    for i in 1..=report.k + 1 {
        let estimate = estimate_term(&chain, i, samples, inner)?;
        let exact = report.terms[i - 1];
        terms.push(McTermReport {
            within_3se: within_band(estimate.estimate, exact, estimate.se),
            estimate,
            exact,
        });
    }
    let total_estimate = estimate_total(&chain, samples);
    let total = McTermReport {
        within_3se: within_band(total_estimate.estimate, report.total_direct, total_estimate.se),
        estimate: total_estimate,
        exact: report.total_direct,
    };
    let pass = terms.iter().all(|t| t.within_3se) && total.within_3se;
    let mc = McReport {
        k: report.k,
        target: report.target.clone(),
        seed,
        n_outer: samples,
        n_inner: inner,
        terms,
        total,
        pass,
    };
    match output {
        OutputMode::Json => print_json(&mc),
        OutputMode::Text => {
            println!(
                "Monte Carlo estimates, k = {} level(s), seed = {seed}, n_outer = {samples}, n_inner = {inner}",
                mc.k
            );
            for t in &mc.terms {
                println!(
                    "term {:<2} estimate {:>22} se {:>22} exact {:>22} {}",
                    t.estimate.term,
                    t.estimate.estimate.to_string(),
                    t.estimate.se.to_string(),
                    t.exact.to_string(),
                    if t.within_3se { "ok" } else { "OFF" }
                );
            }
            println!(
                "total   estimate {:>22} se {:>22} exact {:>22} {}",
                mc.total.estimate.estimate.to_string(),
                mc.total.estimate.se.to_string(),
                mc.total.exact.to_string(),
                if mc.total.within_3se { "ok" } else { "OFF" }
            );
            println!("{}", if mc.pass { "PASS" } else { "FAIL" });
        }
    }
    Ok(if pass { 0 } else { 1 })
}

#[derive(Serialize)]
struct TrialSummary {
    trials: usize,
    passed: usize,
    failed: usize,
    artifacts: Vec<String>,
}

#[derive(Serialize)]
struct RandomReport {
    seed: u64,
    tol: f64,
    joint: Option<TrialSummary>,
    model: Option<TrialSummary>,
    pass: bool,
}

fn summarize(
    outcome: &TrialOutcome,
    prefix: &str,
    out_dir: &Path,
) -> Result<TrialSummary> {
    let mut artifacts = Vec::new();
    for failure in &outcome.failures {
        std::fs::create_dir_all(out_dir).map_err(|e| {
            Error::InvalidDistributionSpec(format!(
                "cannot create {}: {e}",
                out_dir.display()
            ))
        })?;
        let name = format!("{prefix}_fail_{:04}.json", failure.trial);
        let path = out_dir.join(&name);
        std::fs::write(&path, &failure.artifact_json).map_err(|e| {
            Error::InvalidDistributionSpec(format!("cannot write {}: {e}", path.display()))
        })?;
        artifacts.push(name);
    }
    Ok(TrialSummary {
        trials: outcome.trials,
        passed: outcome.passed,
        failed: outcome.failures.len(),
        artifacts,
    })
}

#[allow(clippy::too_many_arguments)]
fn random_cmd(
    k: Option<usize>,
    p: usize,
    trials: usize,
    seed: u64,
    tol: f64,
    kind: TrialKind,
    out_dir: &Path,
    output: OutputMode,
) -> Result<i32> {
    check_tol(tol)?;
    if p != 1 && p != 2 {
        return Err(Error::InvalidDistributionSpec(format!(
            "--p must be 1 or 2, got {p}"
        )));
    }
    if let Some(k) = k {
        if !(1..=4).contains(&k) {
            return Err(Error::InvalidDistributionSpec(format!(
                "--k must be in 1..=4, got {k}"
            )));
        }
    }
    let ks: Vec<usize> = match k {
        Some(k) => vec![k],
        None => vec![1, 2, 3, 4],
    };

    let joint_outcome = matches!(kind, TrialKind::Joint | TrialKind::Both)
        .then(|| run_joint_trials(seed, trials, &ks, p, 0.3, tol));
    let model_outcome = matches!(kind, TrialKind::Model | TrialKind::Both)
        .then(|| run_model_trials(seed, trials, &ks, p, tol));

    let joint = joint_outcome
        .as_ref()
        .map(|o| summarize(o, "joint", out_dir))
        .transpose()?;
    let model = model_outcome
        .as_ref()
        .map(|o| summarize(o, "model", out_dir))
        .transpose()?;
    let pass = joint_outcome.as_ref().is_none_or(|o| o.all_passed())
        && model_outcome.as_ref().is_none_or(|o| o.all_passed());

    let report = RandomReport { seed, tol, joint, model, pass };
    match output {
        OutputMode::Json => print_json(&report),
        OutputMode::Text => {
            println!("random verification, seed = {seed}, tol = {tol}");
            if let Some(j) = &report.joint {
                println!("joint trials: {} passed, {} failed", j.passed, j.failed);
                for a in &j.artifacts {
                    println!("  failing joint dumped to {a}");
                }
            }
            if let Some(m) = &report.model {
                println!("model trials: {} passed, {} failed", m.passed, m.failed);
                for a in &m.artifacts {
                    println!("  failing model dumped to {a}");
                }
            }
            println!("{}", if report.pass { "PASS" } else { "FAIL" });
        }
    }
    Ok(if pass { 0 } else { 1 })
}
