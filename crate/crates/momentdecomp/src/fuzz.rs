//! Random joints and chain models for property-based verification.
//!
//! The generators are deliberately small-valued: supports are distinct
//! integers in `-3..=3`, so conditional means are ratios of modest sums and
//! a 1e-10 identity tolerance measures mathematics rather than float noise.
//! Everything is driven by the crate's own seeded streams; the same config
//! always yields the same artifact.

use serde::Serialize;

use crate::decomp::{
    cov_term_collapsed, cov_term_literal, decompose_covariance, decompose_variance,
    iterated_expectation,
};
use crate::error::Result;
use crate::expr::ParamExpr;
use crate::joint::{ordered_sum, FiniteJoint};
use crate::model::{ChainModel, DistSpec, LeafBody, LeafSpec, LevelSpec};
use crate::rng::Stream;

/// Bounds for one random artifact. `support_sizes` has `k + p` entries, one
/// per chain variable then per target, each in `2..=4`; full enumeration
/// stays far below 10^4 atoms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzConfig {
    pub k: usize,
    pub p: usize,
    pub support_sizes: Vec<usize>,
    pub zero_fraction: f64,
    pub seed: u64,
}

impl FuzzConfig {
    /// Draws support sizes for a `(k, p)` shape from the seed.
    pub fn sample(seed: u64, k: usize, p: usize, zero_fraction: f64) -> FuzzConfig {
        assert!((1..=4).contains(&k), "k must be in 1..=4");
        assert!(p == 1 || p == 2, "p must be 1 or 2");
        let mut s = Stream::new(seed, 0, 0);
        let support_sizes = (0..k + p).map(|_| 2 + s.next_below(3) as usize).collect();
        FuzzConfig {
            k,
            p,
            support_sizes,
            zero_fraction,
            seed,
        }
    }
}

fn distinct_ints(s: &mut Stream, count: usize) -> Vec<f64> {
    let mut pool: Vec<f64> = (-3..=3).map(f64::from).collect();
    for i in 0..count {
        let j = i + s.next_below((pool.len() - i) as u64) as usize;
        pool.swap(i, j);
    }
    pool.truncate(count);
    pool
}

/// A random joint over `x1..xk, y1[, y2]`: per-atom positive weights from
/// `k + p` uniform draws, an optional sparsity mask, then renormalization.
pub fn random_joint(cfg: &FuzzConfig) -> FiniteJoint {
    assert_eq!(
        cfg.support_sizes.len(),
        cfg.k + cfg.p,
        "need one support size per variable"
    );
    let mut s = Stream::new(cfg.seed, 1, 0);
    let supports: Vec<Vec<f64>> = cfg
        .support_sizes
        .iter()
        .map(|&size| distinct_ints(&mut s, size))
        .collect();

    let n_atoms: usize = cfg.support_sizes.iter().product();
    let mut weights = Vec::with_capacity(n_atoms);
    let mut values = Vec::with_capacity(n_atoms);
    let mut odometer = vec![0usize; supports.len()];
    for _ in 0..n_atoms {
        values.push(
            odometer
                .iter()
                .zip(&supports)
                .map(|(&i, sup)| sup[i])
                .collect::<Vec<f64>>(),
        );
        let mut w = 1.0;
        for _ in 0..supports.len() {
            w *= s.next_f64().max(f64::MIN_POSITIVE);
        }
        weights.push(w);
        for (pos, digit) in odometer.iter_mut().enumerate().rev() {
            *digit += 1;
            if *digit < supports[pos].len() {
                break;
            }
            *digit = 0;
        }
    }

    // sparsity mask; retried so at least two atoms survive
    let mut kept: Vec<bool> = vec![true; n_atoms];
    if cfg.zero_fraction > 0.0 {
        for attempt in 0..20u64 {
            let mut mask_stream = Stream::new(cfg.seed, 3, attempt);
            let mask: Vec<bool> = (0..n_atoms)
                .map(|_| mask_stream.next_f64() >= cfg.zero_fraction)
                .collect();
            if mask.iter().filter(|m| **m).count() >= 2 {
                kept = mask;
                break;
            }
        }
    }

    let total = ordered_sum(
        weights
            .iter()
            .zip(&kept)
            .map(|(w, keep)| if *keep { *w } else { 0.0 })
            .collect(),
    );
    let atoms = values
        .into_iter()
        .zip(weights)
        .zip(kept)
        .filter(|(_, keep)| *keep)
        .map(|((v, w), _)| (v, w / total))
        .collect();

    let cond_vars = (1..=cfg.k).map(|i| format!("x{i}")).collect();
    let target_vars = (1..=cfg.p).map(|i| format!("y{i}")).collect();
    FiniteJoint::new(cond_vars, target_vars, atoms).expect("generated joint is valid")
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// `min(hi, max(lo, a +/- b*parent))` with positive rounded literals, or just
/// the constant when there is no parent. Sign-normalized so the printed form
/// re-parses to the identical tree.
fn clamped_affine(s: &mut Stream, parent: Option<&str>, lo: f64, hi: f64) -> ParamExpr {
    use ParamExpr::*;
    let a = round3(lo + (hi - lo) * s.next_f64());
    let base = match parent {
        None => return Num(a.clamp(lo, hi)),
        Some(name) => {
            let b = round3(0.05 + 0.35 * s.next_f64());
            let slope = Mul(Box::new(Num(b)), Box::new(Var(name.to_string())));
            if s.next_below(2) == 0 {
                Add(Box::new(Num(a)), Box::new(slope))
            } else {
                Sub(Box::new(Num(a)), Box::new(slope))
            }
        }
    };
    Min(
        Box::new(Num(hi)),
        Box::new(Max(Box::new(Num(lo)), Box::new(base))),
    )
}

/// A random model: bernoulli/categorical levels with clamped affine
/// parameters in earlier variables, and a symbolic leaf table. Always
/// compiles; parameter clamps keep every reachable probability inside
/// `(0.05, 0.95)`.
pub fn random_chain_model(cfg: &FuzzConfig) -> ChainModel {
    use ParamExpr::*;
    let mut s = Stream::new(cfg.seed, 2, 0);
    let mut levels: Vec<LevelSpec> = Vec::with_capacity(cfg.k);
    for i in 0..cfg.k {
        let name = format!("x{}", i + 1);
        let parent = if i == 0 {
            None
        } else {
            let which = s.next_below(i as u64) as usize;
            Some(format!("x{}", which + 1))
        };
        let categorical = i > 0 && s.next_below(2) == 0;
        let dist = if categorical {
            let size = cfg.support_sizes[i];
            let values = distinct_ints(&mut s, size);
            let mut probs: Vec<ParamExpr> = (1..size)
                .map(|_| clamped_affine(&mut s, parent.as_deref(), 0.05, 0.3))
                .collect();
            let last = probs.iter().fold(Num(1.0), |acc, e| {
                Sub(Box::new(acc), Box::new(e.clone()))
            });
            probs.push(last);
            DistSpec::Categorical { values, probs }
        } else {
            DistSpec::Bernoulli {
                p: clamped_affine(&mut s, parent.as_deref(), 0.05, 0.95),
            }
        };
        levels.push(LevelSpec { name, dist });
    }

    let targets: Vec<String> = (1..=cfg.p).map(|i| format!("y{i}")).collect();
    let n_atoms = cfg.support_sizes[cfg.k];
    let raw: Vec<f64> = (0..n_atoms).map(|_| 0.05 + s.next_f64()).collect();
    let total: f64 = raw.iter().sum();
    let mut atoms = Vec::with_capacity(n_atoms);
    for w in raw {
        let values = (0..cfg.p)
            .map(|_| {
                if cfg.k > 0 && s.next_below(2) == 0 {
                    let which = s.next_below(cfg.k as u64) as usize;
                    let var = Var(format!("x{}", which + 1));
                    let c = Num(s.next_below(4) as f64);
                    if s.next_below(2) == 0 {
                        Add(Box::new(var), Box::new(c))
                    } else {
                        Sub(Box::new(var), Box::new(c))
                    }
                } else {
                    Num(s.next_below(7) as f64 - 3.0)
                }
            })
            .collect::<Vec<ParamExpr>>();
        // negative constants must print sign-normalized
        let values = values
            .into_iter()
            .map(|e| match e {
                Num(v) if v < 0.0 => Neg(Box::new(Num(-v))),
                other => other,
            })
            .collect();
        atoms.push((values, Num(w / total)));
    }

    ChainModel::new(
        levels,
        LeafSpec {
            targets,
            body: LeafBody::ExprAtoms(atoms),
        },
    )
    .expect("generated model is valid")
}

/// Worst-case gaps of the three identity families on one joint: the
/// decomposition residual, the largest literal-vs-collapsed term gap, and
/// the largest iterated-vs-direct expectation gap. Single-target joints are
/// measured through the duplicated-target route and additionally run the
/// variance decomposition (which cross-checks the operator grid internally).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentityGaps {
    pub residual: f64,
    pub tower_gap: f64,
    pub expectation_gap: f64,
}

impl IdentityGaps {
    pub fn max_gap(&self) -> f64 {
        self.residual.max(self.tower_gap).max(self.expectation_gap)
    }
}

pub fn measure_identities(joint: &FiniteJoint) -> Result<IdentityGaps> {
    let working = if joint.p() == 1 {
        decompose_variance(joint)?;
        joint.duplicate_target()?
    } else {
        joint.clone()
    };
    let d = decompose_covariance(&working)?;
    let mut tower_gap = 0.0f64;
    for i in 1..=working.k() + 1 {
        let lit = cov_term_literal(&working, i)?;
        let col = cov_term_collapsed(&working, i)?;
        tower_gap = tower_gap.max((lit - col).abs());
    }
    let mut expectation_gap = 0.0f64;
    let functions: [fn(&[f64]) -> f64; 3] =
        [|y| y[0], |y| y[0] * y[1], |y| y[0] * y[0]];
    for u in functions {
        let gap = (iterated_expectation(&working, u) - working.expect(u)).abs();
        expectation_gap = expectation_gap.max(gap);
    }
    Ok(IdentityGaps {
        residual: d.residual,
        tower_gap,
        expectation_gap,
    })
}

/// One failed trial, with the artifact serialized for replay.
#[derive(Debug, Clone, Serialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub config: FuzzConfig,
    pub artifact_json: String,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialOutcome {
    pub trials: usize,
    pub passed: usize,
    pub failures: Vec<TrialFailure>,
}

impl TrialOutcome {
    pub fn all_passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Reduces support sizes toward 2 while the failure predicate keeps firing;
/// best-effort, bounded at 100 regeneration steps.
pub fn shrink_config(cfg: &FuzzConfig, fails: &dyn Fn(&FuzzConfig) -> bool) -> FuzzConfig {
    let mut best = cfg.clone();
    let mut steps = 0;
    loop {
        let mut improved = false;
        for pos in 0..best.support_sizes.len() {
            if best.support_sizes[pos] <= 2 || steps >= 100 {
                continue;
            }
            let mut candidate = best.clone();
            candidate.support_sizes[pos] -= 1;
            steps += 1;
            if fails(&candidate) {
                best = candidate;
                improved = true;
            }
        }
        if !improved || steps >= 100 {
            return best;
        }
    }
}

/// Runs `trials` random-joint identity checks, cycling `k` through `ks`.
/// Failures are shrunk and serialized.
pub fn run_joint_trials(
    master_seed: u64,
    trials: usize,
    ks: &[usize],
    p: usize,
    zero_fraction: f64,
    tol: f64,
) -> TrialOutcome {
    let fails = |cfg: &FuzzConfig| -> bool {
        let joint = random_joint(cfg);
        match measure_identities(&joint) {
            Ok(gaps) => gaps.residual > tol || gaps.tower_gap > tol,
            Err(_) => true,
        }
    };
    let mut outcome = TrialOutcome {
        trials,
        passed: 0,
        failures: Vec::new(),
    };
    for trial in 0..trials {
        let k = ks[trial % ks.len()];
        let seed = Stream::new(master_seed, 10, trial as u64).next_u64();
        let cfg = FuzzConfig::sample(seed, k, p, zero_fraction);
        if !fails(&cfg) {
            outcome.passed += 1;
            continue;
        }
        let small = shrink_config(&cfg, &fails);
        let joint = random_joint(&small);
        let detail = match measure_identities(&joint) {
            Ok(gaps) => format!(
                "residual {:.3e}, tower gap {:.3e} exceeds tol {tol:.1e}",
                gaps.residual, gaps.tower_gap
            ),
            Err(e) => format!("identity check failed: {e}"),
        };
        outcome.failures.push(TrialFailure {
            trial,
            config: small.clone(),
            artifact_json: joint.to_json(),
            detail,
        });
    }
    outcome
}

/// Runs `trials` random-model checks: compile, then the same identity gaps
/// on the compiled joint.
pub fn run_model_trials(
    master_seed: u64,
    trials: usize,
    ks: &[usize],
    p: usize,
    tol: f64,
) -> TrialOutcome {
    let mut outcome = TrialOutcome {
        trials,
        passed: 0,
        failures: Vec::new(),
    };
    for trial in 0..trials {
        let k = ks[trial % ks.len()];
        let seed = Stream::new(master_seed, 11, trial as u64).next_u64();
        let cfg = FuzzConfig::sample(seed, k, p, 0.0);
        let model = random_chain_model(&cfg);
        let gaps = model
            .compile()
            .and_then(|(joint, _)| measure_identities(&joint));
        match gaps {
            Ok(g) if g.residual <= tol && g.tower_gap <= tol => outcome.passed += 1,
            Ok(g) => outcome.failures.push(TrialFailure {
                trial,
                config: cfg,
                artifact_json: model.to_json(),
                detail: format!(
                    "residual {:.3e}, tower gap {:.3e} exceeds tol {tol:.1e}",
                    g.residual, g.tower_gap
                ),
            }),
            Err(e) => outcome.failures.push(TrialFailure {
                trial,
                config: cfg,
                artifact_json: model.to_json(),
                detail: format!("compile or check failed: {e}"),
            }),
        }
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;

    #[test]
    fn joint_shape_matches_config() {
        let cfg = FuzzConfig {
            k: 1,
            p: 2,
            support_sizes: vec![2, 2, 2],
            zero_fraction: 0.0,
            seed: 5,
        };
        let joint = random_joint(&cfg);
        assert_eq!(joint.k(), 1);
        assert_eq!(joint.p(), 2);
        assert_eq!(joint.atoms().len(), 8);
        let mass: f64 = joint.atoms().iter().map(|a| a.prob).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_artifacts() {
        let cfg = FuzzConfig::sample(99, 3, 2, 0.25);
        assert_eq!(random_joint(&cfg), random_joint(&cfg));
        assert_eq!(random_chain_model(&cfg), random_chain_model(&cfg));
    }

    #[test]
    fn sparse_joints_still_satisfy_identities() {
        for trial in 0..50 {
            let cfg = FuzzConfig::sample(1000 + trial, 1 + (trial as usize % 4), 2, 0.5);
            let joint = random_joint(&cfg);
            let gaps = measure_identities(&joint).unwrap();
            assert!(
                gaps.residual <= 1e-10 && gaps.tower_gap <= 1e-10,
                "seed {trial}: gaps {gaps:?}"
            );
        }
    }

    #[test]
    fn random_models_compile_and_decompose() {
        for trial in 0..30 {
            let cfg = FuzzConfig::sample(7000 + trial, 1 + (trial as usize % 4), 1, 0.0);
            let model = random_chain_model(&cfg);
            let (joint, report) = model.compile().unwrap();
            assert!(report.mass_deficit < 1e-9);
            let gaps = measure_identities(&joint).unwrap();
            assert!(gaps.residual <= 1e-10, "seed {trial}: {gaps:?}");
        }
    }

    #[test]
    fn generated_models_round_trip_through_json() {
        for trial in 0..20 {
            let cfg = FuzzConfig::sample(31 + trial, 1 + (trial as usize % 4), 2, 0.0);
            let model = random_chain_model(&cfg);
            let back = parse_model(model.to_json().as_bytes()).unwrap();
            assert_eq!(model, back, "seed {trial}");
        }
    }

    #[test]
    fn shrinker_reduces_to_minimal_supports() {
        let cfg = FuzzConfig {
            k: 2,
            p: 2,
            support_sizes: vec![4, 4, 4, 4],
            zero_fraction: 0.0,
            seed: 1,
        };
        let shrunk = shrink_config(&cfg, &|_| true);
        assert_eq!(shrunk.support_sizes, vec![2, 2, 2, 2]);
    }

    #[test]
    fn trial_runners_pass_on_healthy_engine() {
        let joints = run_joint_trials(424242, 40, &[1, 2, 3, 4], 2, 0.3, 1e-10);
        assert!(joints.all_passed(), "{:?}", joints.failures);
        let models = run_model_trials(424242, 20, &[1, 2], 1, 1e-10);
        assert!(models.all_passed(), "{:?}", models.failures);
    }
}
