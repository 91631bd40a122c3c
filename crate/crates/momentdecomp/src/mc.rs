//! Seeded Monte Carlo estimation of decomposition terms.
//!
//! A [`SamplerChain`] is a model given as level samplers plus exact
//! conditional-moment oracles. Term `i <= k` is estimated in
//! Rao-Blackwellized form: sample `n_outer` prefixes of depth `i - 1`, and
//! per prefix draw `n_inner` values of the level-`i` variable, taking the
//! sample covariance (unbiased `n - 1` denominator) of the *exact*
//! conditional-mean pairs at depth `i`. Because the inner means come from an
//! oracle rather than nested simulation, each per-prefix sample covariance is
//! unbiased, and the estimator never stacks Monte Carlo noise inside Monte
//! Carlo noise. Term `k + 1` averages the oracle's leaf conditional
//! covariance over sampled full prefixes.
//!
//! The reported standard error of a term is the dispersion of the
//! per-outer-prefix values divided by `sqrt(n_outer)`; inner-loop noise is
//! absorbed into that dispersion, so the interval is valid without any
//! independence assumption between the loops.
//!
//! Randomness comes from [`Stream`](crate::rng::Stream) addressed by
//! `(seed, term, outer index)`, so every estimate is reproducible
//! bit-for-bit and outer samples could be evaluated in any order or in
//! parallel without changing the result. The oracles are artifact choices,
//! not prescribed by the decomposition identities themselves; on any finite
//! model [`wrap_exact`] supplies them from the exact tables for free.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::joint::{FiniteJoint, PrefixIndex};
use crate::rng::Stream;

/// Draws one value of a level variable given the values of the earlier ones.
pub type LevelSampler = Box<dyn Fn(&[f64], &mut Stream) -> f64 + Send + Sync>;

/// Draws a target pair given the full chain prefix. Single-target models
/// return the value twice.
pub type LeafSampler = Box<dyn Fn(&[f64], &mut Stream) -> (f64, f64) + Send + Sync>;

/// Oracle lookup: `None` means the oracle is not defined there.
pub type OracleFn = Box<dyn Fn(&[f64]) -> Option<f64> + Send + Sync>;

/// Exact conditional moments: `mean1`/`mean2` take a prefix of any depth
/// `1..=k`, `cov12` takes a full `k`-prefix.
pub struct MomentOracle {
    pub mean1: OracleFn,
    pub mean2: OracleFn,
    pub cov12: OracleFn,
}

/// A sampled hierarchical model: one sampler per level, a leaf sampler, the
/// moment oracles, and the seed that addresses every random stream.
pub struct SamplerChain {
    levels: Vec<LevelSampler>,
    leaf: LeafSampler,
    oracle: MomentOracle,
    seed: u64,
}

/// One Monte Carlo estimate. `term` is `1..=k+1`, or `0` for the plain
/// full-chain total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub term: usize,
    pub estimate: f64,
    pub se: f64,
    pub n_outer: usize,
    pub n_inner: usize,
    pub seed: u64,
}

impl SamplerChain {
    pub fn new(
        levels: Vec<LevelSampler>,
        leaf: LeafSampler,
        oracle: MomentOracle,
        seed: u64,
    ) -> SamplerChain {
        SamplerChain {
            levels,
            leaf,
            oracle,
            seed,
        }
    }

    pub fn k(&self) -> usize {
        self.levels.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn walk_prefix(&self, depth: usize, rng: &mut Stream, prefix: &mut Vec<f64>) {
        prefix.clear();
        for level in &self.levels[..depth] {
            let x = level(prefix, rng);
            prefix.push(x);
        }
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    let sd = (ss / (n - 1.0)).sqrt();
    (mean, sd / n.sqrt())
}

/// Sample covariance with the unbiased `n - 1` denominator.
fn sample_cov(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let m1 = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let m2 = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    pairs
        .iter()
        .map(|(a, b)| (a - m1) * (b - m2))
        .sum::<f64>()
        / (n - 1.0)
}

/// Estimates term `i` of the decomposition. `n_inner` is unused for the leaf
/// term `i = k + 1`.
pub fn estimate_term(
    chain: &SamplerChain,
    i: usize,
    n_outer: usize,
    n_inner: usize,
) -> Result<McEstimate> {
    let k = chain.k();
    assert!((1..=k + 1).contains(&i), "term index must be in 1..=k+1");
    assert!(n_outer >= 2, "n_outer must be at least 2");
    assert!(i == k + 1 || n_inner >= 2, "n_inner must be at least 2");

    let mut per_outer = Vec::with_capacity(n_outer);
    let mut prefix = Vec::with_capacity(k);
    let mut pairs = Vec::with_capacity(n_inner);

    for outer in 0..n_outer {
        let mut rng = Stream::new(chain.seed, i as u64, outer as u64);
        if i == k + 1 {
            chain.walk_prefix(k, &mut rng, &mut prefix);
            let cov = (chain.oracle.cov12)(&prefix).ok_or_else(|| {
                Error::OracleUndefined(format!("cov12 at full prefix {prefix:?}"))
            })?;
            per_outer.push(cov);
            continue;
        }

        chain.walk_prefix(i - 1, &mut rng, &mut prefix);
        pairs.clear();
        for _ in 0..n_inner {
            let x = (chain.levels[i - 1])(&prefix, &mut rng);
            prefix.push(x);
            let m1 = (chain.oracle.mean1)(&prefix).ok_or_else(|| {
                Error::OracleUndefined(format!("mean1 at depth {i} prefix {prefix:?}"))
            })?;
            let m2 = (chain.oracle.mean2)(&prefix).ok_or_else(|| {
                Error::OracleUndefined(format!("mean2 at depth {i} prefix {prefix:?}"))
            })?;
            prefix.pop();
            pairs.push((m1, m2));
        }
        per_outer.push(sample_cov(&pairs));
    }

    let (estimate, se) = mean_and_se(&per_outer);
    Ok(McEstimate {
        term: i,
        estimate,
        se,
        n_outer,
        n_inner: if i == k + 1 { 0 } else { n_inner },
        seed: chain.seed,
    })
}

/// Plain product-moment estimate of the total covariance from `n` full-chain
/// draws, with the delta-method standard error
/// `se = sqrt((m22 - cov^2) / n)` where `m22` is the sample central
/// cross-moment of squared deviations.
pub fn estimate_total(chain: &SamplerChain, n: usize) -> McEstimate {
    assert!(n >= 2, "n must be at least 2");
    let k = chain.k();
    let mut draws = Vec::with_capacity(n);
    let mut prefix = Vec::with_capacity(k);
    for d in 0..n {
        let mut rng = Stream::new(chain.seed, 0, d as u64);
        chain.walk_prefix(k, &mut rng, &mut prefix);
        draws.push((chain.leaf)(&prefix, &mut rng));
    }
    let nf = n as f64;
    let m1 = draws.iter().map(|d| d.0).sum::<f64>() / nf;
    let m2 = draws.iter().map(|d| d.1).sum::<f64>() / nf;
    let cov = draws
        .iter()
        .map(|(a, b)| (a - m1) * (b - m2))
        .sum::<f64>()
        / nf;
    let m22 = draws
        .iter()
        .map(|(a, b)| {
            let d = (a - m1) * (b - m2);
            d * d
        })
        .sum::<f64>()
        / nf;
    let se = ((m22 - cov * cov).max(0.0) / nf).sqrt();
    McEstimate {
        term: 0,
        estimate: cov,
        se,
        n_outer: n,
        n_inner: 0,
        seed: chain.seed,
    }
}

/// Sorted prefix-keyed lookup table with no per-lookup allocation.
struct CondTable<T> {
    entries: Vec<(Vec<f64>, T)>,
}

impl<T> CondTable<T> {
    fn get(&self, prefix: &[f64]) -> Option<&T> {
        self.entries
            .binary_search_by(|(key, _)| {
                for (a, b) in key.iter().zip(prefix.iter()) {
                    let c = a.total_cmp(b);
                    if c != std::cmp::Ordering::Equal {
                        return c;
                    }
                }
                key.len().cmp(&prefix.len())
            })
            .ok()
            .map(|i| &self.entries[i].1)
    }
}

fn draw_from(cum: &[(f64, f64)], u: f64) -> f64 {
    for &(value, c) in cum {
        if u < c {
            return value;
        }
    }
    cum.last().expect("nonempty support").0
}

/// Wraps a finite joint as a sampler chain: inverse-CDF samplers from the
/// conditional tables and exact moment oracles from the conditional means.
/// Single-target joints are wrapped in variance mode (`y1 = y2 = y`).
///
/// This is what makes Monte-Carlo-versus-exact comparisons possible on any
/// compiled model.
pub fn wrap_exact(joint: &FiniteJoint, seed: u64) -> SamplerChain {
    let k = joint.k();
    let two_targets = joint.p() == 2;
    let index = PrefixIndex::build(joint);
    let col1 = index.target_column(0);
    let col2 = if two_targets { index.target_column(1) } else { col1 };

    // level samplers: conditional inverse-CDF per parent prefix
    let mut levels: Vec<LevelSampler> = Vec::with_capacity(k);
    for depth in 0..k {
        let entries = index
            .nodes(depth)
            .iter()
            .map(|parent| {
                let mut cum = 0.0;
                let table: Vec<(f64, f64)> = index
                    .children(depth, parent)
                    .iter()
                    .map(|c| {
                        cum += c.mass / parent.mass;
                        (index.prefix_of(depth + 1, c)[depth], cum)
                    })
                    .collect();
                (index.prefix_of(depth, parent).to_vec(), table)
            })
            .collect();
        let table = CondTable { entries };
        levels.push(Box::new(move |prefix: &[f64], rng: &mut Stream| {
            let cum = table.get(prefix).expect("sampled prefix is reachable");
            draw_from(cum, rng.next_f64())
        }));
    }

    // leaf sampler: joint target table per full prefix
    let leaf_entries = index
        .nodes(k)
        .iter()
        .map(|node| {
            let mut cum = 0.0;
            let atoms: Vec<((f64, f64), f64)> = joint.atoms()[node.lo..node.hi]
                .iter()
                .map(|a| {
                    cum += a.prob / node.mass;
                    ((a.values[col1], a.values[col2]), cum)
                })
                .collect();
            (index.prefix_of(k, node).to_vec(), atoms)
        })
        .collect();
    let leaf_table = CondTable { entries: leaf_entries };
    let leaf: LeafSampler = Box::new(move |prefix: &[f64], rng: &mut Stream| {
        let atoms = leaf_table.get(prefix).expect("sampled prefix is reachable");
        let u = rng.next_f64();
        for &(pair, c) in atoms {
            if u < c {
                return pair;
            }
        }
        atoms.last().expect("nonempty leaf").0
    });

    // moment oracles: conditional means at every depth, covariance at the leaf
    let mean_tables: Arc<Vec<CondTable<(f64, f64)>>> = Arc::new(
        (1..=k)
            .map(|depth| CondTable {
                entries: index
                    .nodes(depth)
                    .iter()
                    .map(|n| {
                        (
                            index.prefix_of(depth, n).to_vec(),
                            (index.mean(n, col1), index.mean(n, col2)),
                        )
                    })
                    .collect(),
            })
            .collect(),
    );
    let cov_table = CondTable {
        entries: index
            .nodes(k)
            .iter()
            .map(|n| {
                let cov = if two_targets {
                    index.leaf_cov(n)
                } else {
                    index.leaf_var(n, 0)
                };
                (index.prefix_of(k, n).to_vec(), cov)
            })
            .collect(),
    };

    let tables1 = Arc::clone(&mean_tables);
    let mean1: OracleFn = Box::new(move |prefix: &[f64]| {
        tables1
            .get(prefix.len().checked_sub(1)?)
            .and_then(|t| t.get(prefix))
            .map(|m| m.0)
    });
    let tables2 = Arc::clone(&mean_tables);
    let mean2: OracleFn = Box::new(move |prefix: &[f64]| {
        tables2
            .get(prefix.len().checked_sub(1)?)
            .and_then(|t| t.get(prefix))
            .map(|m| m.1)
    });
    let cov12: OracleFn = Box::new(move |prefix: &[f64]| cov_table.get(prefix).copied());

    SamplerChain::new(levels, leaf, MomentOracle { mean1, mean2, cov12 }, seed)
}
