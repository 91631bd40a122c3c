//! Finite joint distributions over a conditioning chain.
//!
//! A [`FiniteJoint`] is an explicit probability table over an ordered chain
//! of conditioning variables `x1, ..., xk` (`k >= 0`) followed by one or two
//! target variables. Every exact computation in this crate reduces to sums
//! over its atoms: marginalization, conditioning on a chain prefix,
//! expectations of functions of the targets, and the conditional-mean tables
//! that the decomposition engine consumes.
//!
//! Atoms are stored in canonical order (lexicographic by value vector under
//! `f64::total_cmp`) and every reduction sums its addends in value order.
//! That makes all operations pure functions of the distribution itself:
//! permuting the input atoms, or swapping the two targets, cannot change a
//! result even in the last bit. A joint is immutable after construction and
//! safe to share across threads; no operation mutates its inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack tolerated on input probability mass before normalization.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// One support point: a value per variable (chain first, then targets) and
/// its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub values: Vec<f64>,
    pub prob: f64,
}

/// An explicit finite joint distribution over `(x1, ..., xk, y1[, y2])`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteJoint {
    cond_vars: Vec<String>,
    target_vars: Vec<String>,
    atoms: Vec<Atom>,
}

/// Maps `-0.0` to `+0.0` so that bit-level value comparisons behave like
/// numeric equality on the supports we accept.
#[inline]
pub(crate) fn canon(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

/// Sums addends in ascending `total_cmp` order.
///
/// The result is invariant under permutation of `terms`, which is what makes
/// target-swap symmetry and atom-order independence exact rather than
/// approximate.
pub(crate) fn ordered_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

fn cmp_values(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let c = x.total_cmp(y);
        if c != std::cmp::Ordering::Equal {
            return c;
        }
    }
    a.len().cmp(&b.len())
}

impl FiniteJoint {
    /// Builds a joint from raw atoms.
    ///
    /// Canonicalizes values, merges atoms with identical value vectors, drops
    /// zero-probability atoms, and normalizes the total mass. Construction
    /// fails if any probability is negative or non-finite, if any value is
    /// non-finite, or if the total mass differs from one by more than
    /// [`MASS_TOLERANCE`].
    pub fn new(
        cond_vars: Vec<String>,
        target_vars: Vec<String>,
        atoms: Vec<(Vec<f64>, f64)>,
    ) -> Result<FiniteJoint> {
        if target_vars.is_empty() || target_vars.len() > 2 {
            return Err(Error::InvalidDistributionSpec(format!(
                "need 1 or 2 target variables, got {}",
                target_vars.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in cond_vars.iter().chain(target_vars.iter()) {
            if name.is_empty() {
                return Err(Error::InvalidDistributionSpec(
                    "empty variable name".into(),
                ));
            }
            if !seen.insert(name.clone()) {
                return Err(Error::InvalidDistributionSpec(format!(
                    "duplicate variable name `{name}`"
                )));
            }
        }
        let width = cond_vars.len() + target_vars.len();

        let mut cleaned: Vec<Atom> = Vec::with_capacity(atoms.len());
        for (values, prob) in atoms {
            if values.len() != width {
                return Err(Error::InvalidDistributionSpec(format!(
                    "atom has {} values, expected {width}",
                    values.len()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDistributionSpec(
                    "non-finite value in atom".into(),
                ));
            }
            if !prob.is_finite() || prob < 0.0 {
                return Err(Error::InvalidProbability(format!(
                    "atom probability {prob} is not in [0, 1]"
                )));
            }
            cleaned.push(Atom {
                values: values.into_iter().map(canon).collect(),
                prob,
            });
        }
        cleaned.sort_by(|a, b| cmp_values(&a.values, &b.values));

        // Merge exact-bit duplicates, then drop zero-mass atoms.
        let mut merged: Vec<Atom> = Vec::with_capacity(cleaned.len());
        let mut i = 0;
        while i < cleaned.len() {
            let mut j = i + 1;
            while j < cleaned.len() && cleaned[j].values == cleaned[i].values {
                j += 1;
            }
            let prob = if j - i == 1 {
                cleaned[i].prob
            } else {
                ordered_sum(cleaned[i..j].iter().map(|a| a.prob).collect())
            };
            if prob > 0.0 {
                merged.push(Atom {
                    values: std::mem::take(&mut cleaned[i].values),
                    prob,
                });
            }
            i = j;
        }

        let mass = ordered_sum(merged.iter().map(|a| a.prob).collect());
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidMass { sum: mass });
        }
        for atom in &mut merged {
            atom.prob /= mass;
        }

        Ok(FiniteJoint {
            cond_vars,
            target_vars,
            atoms: merged,
        })
    }

    pub fn k(&self) -> usize {
        self.cond_vars.len()
    }

    /// Target arity (1 or 2).
    pub fn p(&self) -> usize {
        self.target_vars.len()
    }

    pub fn cond_vars(&self) -> &[String] {
        &self.cond_vars
    }

    pub fn target_vars(&self) -> &[String] {
        &self.target_vars
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    fn var_index(&self, name: &str) -> Result<usize> {
        self.cond_vars
            .iter()
            .chain(self.target_vars.iter())
            .position(|v| v == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Index of a target variable within an atom's value vector.
    pub(crate) fn target_value_index(&self, target: usize) -> usize {
        self.k() + target
    }

    /// Marginal distribution over `vars` (any nonempty subset of the joint's
    /// variables, in any order; the projection keeps the joint's own variable
    /// order).
    ///
    /// Kept target variables stay targets. If every kept variable belongs to
    /// the conditioning chain, the deepest kept one becomes the target so the
    /// result is itself a well-formed joint.
    pub fn marginal(&self, vars: &[&str]) -> Result<FiniteJoint> {
        assert!(!vars.is_empty(), "marginal requires a nonempty selection");
        let mut keep = vec![false; self.cond_vars.len() + self.target_vars.len()];
        for name in vars {
            keep[self.var_index(name)?] = true;
        }

        let kept_cond: Vec<String> = self
            .cond_vars
            .iter()
            .enumerate()
            .filter(|(i, _)| keep[*i])
            .map(|(_, n)| n.clone())
            .collect();
        let kept_targets: Vec<String> = self
            .target_vars
            .iter()
            .enumerate()
            .filter(|(i, _)| keep[self.k() + *i])
            .map(|(_, n)| n.clone())
            .collect();

        let (new_cond, new_targets) = if kept_targets.is_empty() {
            let mut cond = kept_cond;
            let target = cond.pop().expect("selection is nonempty");
            (cond, vec![target])
        } else {
            (kept_cond, kept_targets)
        };

        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                let values = a
                    .values
                    .iter()
                    .zip(keep.iter())
                    .filter(|(_, k)| **k)
                    .map(|(v, _)| *v)
                    .collect();
                (values, a.prob)
            })
            .collect();
        FiniteJoint::new(new_cond, new_targets, atoms)
    }

    /// Conditions on the first `prefix.len()` chain variables taking exactly
    /// the given values; returns the joint over the remaining variables.
    ///
    /// The prefix must be nonempty and no longer than the chain.
    pub fn condition(&self, prefix: &[f64]) -> Result<FiniteJoint> {
        assert!(
            !prefix.is_empty() && prefix.len() <= self.k(),
            "prefix length must be in 1..=k"
        );
        let prefix: Vec<f64> = prefix.iter().copied().map(canon).collect();
        let matching: Vec<&Atom> = self
            .atoms
            .iter()
            .filter(|a| {
                a.values[..prefix.len()]
                    .iter()
                    .zip(prefix.iter())
                    .all(|(x, y)| x.to_bits() == y.to_bits())
            })
            .collect();
        if matching.is_empty() {
            return Err(Error::ZeroProbabilityEvent(prefix));
        }
        let mass = ordered_sum(matching.iter().map(|a| a.prob).collect());
        let atoms = matching
            .iter()
            .map(|a| (a.values[prefix.len()..].to_vec(), a.prob / mass))
            .collect();
        FiniteJoint::new(
            self.cond_vars[prefix.len()..].to_vec(),
            self.target_vars.clone(),
            atoms,
        )
    }

    /// Expectation of a function of the target values: `sum p * u(y)`.
    pub fn expect<F: Fn(&[f64]) -> f64>(&self, u: F) -> f64 {
        let k = self.k();
        ordered_sum(
            self.atoms
                .iter()
                .map(|a| a.prob * u(&a.values[k..]))
                .collect(),
        )
    }

    /// Product-moment covariance of the two targets:
    /// `E(Y1*Y2) - E(Y1)*E(Y2)`.
    ///
    /// This is the direct oracle every decomposition is checked against.
    pub fn covariance_direct(&self) -> Result<f64> {
        if self.p() != 2 {
            return Err(Error::Arity {
                expected: 2,
                actual: self.p(),
            });
        }
        let e12 = self.expect(|y| y[0] * y[1]);
        let e1 = self.expect(|y| y[0]);
        let e2 = self.expect(|y| y[1]);
        Ok(e12 - e1 * e2)
    }

    /// Table of `E[target | x1..xj]` for every positive-probability
    /// `depth`-prefix. `depth = 0` yields the single unconditional mean.
    pub fn conditional_mean_table(&self, target: &str, depth: usize) -> Result<PrefixTable> {
        assert!(depth <= self.k(), "depth must be in 0..=k");
        let t = self
            .target_vars
            .iter()
            .position(|v| v == target)
            .ok_or_else(|| Error::UnknownVariable(target.to_string()))?;
        let index = PrefixIndex::build(self);
        let entries = index.nodes(depth)
            .iter()
            .map(|node| {
                (
                    index.prefix_of(depth, node).to_vec(),
                    index.mean(node, self.target_value_index(t)),
                )
            })
            .collect();
        Ok(PrefixTable { depth, entries })
    }

    /// Duplicates a single target so variance problems can run through the
    /// covariance machinery with `Y1 = Y2 = Y`.
    pub(crate) fn duplicate_target(&self) -> Result<FiniteJoint> {
        if self.p() != 1 {
            return Err(Error::Arity {
                expected: 1,
                actual: self.p(),
            });
        }
        let mut twin = format!("{}_dup", self.target_vars[0]);
        while self.cond_vars.contains(&twin) {
            twin.push('_');
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                let mut values = a.values.clone();
                values.push(*values.last().expect("target value present"));
                (values, a.prob)
            })
            .collect();
        FiniteJoint::new(
            self.cond_vars.clone(),
            vec![self.target_vars[0].clone(), twin],
            atoms,
        )
    }

    /// Canonical JSON form (stable key order, atoms in canonical order).
    pub fn to_json(&self) -> String {
        let repr = JointRepr {
            cond_vars: self.cond_vars.clone(),
            target_vars: self.target_vars.clone(),
            atoms: self.atoms.iter().map(|a| (a.values.clone(), a.prob)).collect(),
        };
        serde_json::to_string_pretty(&repr).expect("joint serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<FiniteJoint> {
        let repr: JointRepr = serde_json::from_str(text).map_err(|e| Error::Syntax {
            line: e.line(),
            col: e.column(),
            msg: e.to_string(),
        })?;
        FiniteJoint::new(repr.cond_vars, repr.target_vars, repr.atoms)
    }
}

#[derive(Serialize, Deserialize)]
struct JointRepr {
    cond_vars: Vec<String>,
    target_vars: Vec<String>,
    atoms: Vec<(Vec<f64>, f64)>,
}

/// A map from positive-probability chain prefixes of a fixed depth to reals,
/// sorted by prefix. Produced by [`FiniteJoint::conditional_mean_table`] and
/// consumed as a moment oracle by the Monte Carlo wrapper.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixTable {
    depth: usize,
    entries: Vec<(Vec<f64>, f64)>,
}

impl PrefixTable {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, prefix: &[f64]) -> Option<f64> {
        let key: Vec<f64> = prefix.iter().copied().map(canon).collect();
        self.entries
            .binary_search_by(|(p, _)| cmp_values(p, &key))
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.entries.iter().map(|(p, v)| (p.as_slice(), *v))
    }
}

/// A node in the per-depth grouping of atoms by chain prefix.
///
/// Atoms are canonically sorted, so every prefix group is one contiguous
/// range; `child_lo..child_hi` indexes the node's refinements one level down.
#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub lo: usize,
    pub hi: usize,
    pub mass: f64,
    pub child_lo: usize,
    pub child_hi: usize,
}

/// Prefix-tree view of a joint: `nodes(j)` lists every positive-probability
/// `j`-prefix with its atom range and marginal mass.
pub(crate) struct PrefixIndex<'a> {
    joint: &'a FiniteJoint,
    levels: Vec<Vec<Node>>,
}

impl<'a> PrefixIndex<'a> {
    pub fn build(joint: &'a FiniteJoint) -> PrefixIndex<'a> {
        let k = joint.k();
        let total_mass = ordered_sum(joint.atoms.iter().map(|a| a.prob).collect());
        let mut levels = vec![vec![Node {
            lo: 0,
            hi: joint.atoms.len(),
            mass: total_mass,
            child_lo: 0,
            child_hi: 0,
        }]];

        for depth in 1..=k {
            let value_at = depth - 1;
            let mut next: Vec<Node> = Vec::new();
            let parents = levels.last_mut().expect("levels nonempty");
            for parent in parents.iter_mut() {
                parent.child_lo = next.len();
                let mut lo = parent.lo;
                while lo < parent.hi {
                    let v = joint.atoms[lo].values[value_at];
                    let mut hi = lo + 1;
                    while hi < parent.hi
                        && joint.atoms[hi].values[value_at].to_bits() == v.to_bits()
                    {
                        hi += 1;
                    }
                    let mass =
                        ordered_sum(joint.atoms[lo..hi].iter().map(|a| a.prob).collect());
                    next.push(Node {
                        lo,
                        hi,
                        mass,
                        child_lo: 0,
                        child_hi: 0,
                    });
                    lo = hi;
                }
                parent.child_hi = next.len();
            }
            levels.push(next);
        }
        PrefixIndex { joint, levels }
    }

    pub fn k(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn root(&self) -> &Node {
        &self.levels[0][0]
    }

    pub fn nodes(&self, depth: usize) -> &[Node] {
        &self.levels[depth]
    }

    pub fn children(&self, depth: usize, node: &Node) -> &[Node] {
        &self.levels[depth + 1][node.child_lo..node.child_hi]
    }

    /// The prefix values identifying `node` at `depth`.
    pub fn prefix_of(&self, depth: usize, node: &Node) -> &[f64] {
        &self.joint.atoms[node.lo].values[..depth]
    }

    /// Value-vector column of target `target` (0-based).
    pub fn target_column(&self, target: usize) -> usize {
        self.joint.target_value_index(target)
    }

    /// Conditional mean of the value at column `value_index` given the node's
    /// prefix.
    pub fn mean(&self, node: &Node, value_index: usize) -> f64 {
        let weighted = ordered_sum(
            self.joint.atoms[node.lo..node.hi]
                .iter()
                .map(|a| a.prob * a.values[value_index])
                .collect(),
        );
        weighted / node.mass
    }

    /// Conditional expectation of `u` over the targets given the node's
    /// prefix.
    pub fn leaf_expect<F: Fn(&[f64]) -> f64>(&self, node: &Node, u: &F) -> f64 {
        let k = self.joint.k();
        let weighted = ordered_sum(
            self.joint.atoms[node.lo..node.hi]
                .iter()
                .map(|a| a.prob * u(&a.values[k..]))
                .collect(),
        );
        weighted / node.mass
    }

    /// Conditional covariance of the two targets given the node's prefix,
    /// computed in centered two-pass form.
    pub fn leaf_cov(&self, node: &Node) -> f64 {
        let i1 = self.joint.target_value_index(0);
        let i2 = self.joint.target_value_index(1);
        let m1 = self.mean(node, i1);
        let m2 = self.mean(node, i2);
        let centered = ordered_sum(
            self.joint.atoms[node.lo..node.hi]
                .iter()
                .map(|a| a.prob * ((a.values[i1] - m1) * (a.values[i2] - m2)))
                .collect(),
        );
        centered / node.mass
    }

    /// Conditional variance of a single target given the node's prefix.
    pub fn leaf_var(&self, node: &Node, target: usize) -> f64 {
        let i = self.joint.target_value_index(target);
        let m = self.mean(node, i);
        let centered = ordered_sum(
            self.joint.atoms[node.lo..node.hi]
                .iter()
                .map(|a| a.prob * ((a.values[i] - m) * (a.values[i] - m)))
                .collect(),
        );
        centered / node.mass
    }
}


#[cfg(test)]
mod prop_tests {
    use crate::fuzz::{random_joint, FuzzConfig};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Conditioning then averaging over every positive prefix recovers
        /// the direct expectation, at every depth.
        #[test]
        fn conditioning_commutes_with_expectation(seed in any::<u64>(), k in 1usize..=4) {
            let cfg = FuzzConfig::sample(seed, k, 2, 0.25);
            let joint = random_joint(&cfg);
            let u = |y: &[f64]| 2.0 * y[0] - y[1] * y[1];
            let direct = joint.expect(u);
            for depth in 1..=k {
                // prefix masses computed straight off the atom list
                let mut prefixes: Vec<Vec<f64>> = Vec::new();
                for atom in joint.atoms() {
                    let p = atom.values[..depth].to_vec();
                    if !prefixes.contains(&p) {
                        prefixes.push(p);
                    }
                }
                let mut total = 0.0;
                for prefix in &prefixes {
                    let mass: f64 = joint
                        .atoms()
                        .iter()
                        .filter(|a| a.values[..depth] == prefix[..])
                        .map(|a| a.prob)
                        .sum();
                    total += mass * joint.condition(prefix).unwrap().expect(u);
                }
                prop_assert!((total - direct).abs() < 1e-10, "depth {depth}: {total} vs {direct}");
            }
        }

        /// Covariance of a duplicated target equals the raw-moment variance.
        #[test]
        fn duplicated_covariance_is_variance(seed in any::<u64>(), k in 1usize..=3) {
            let cfg = FuzzConfig::sample(seed, k, 1, 0.0);
            let joint = random_joint(&cfg);
            let dup = joint.duplicate_target().unwrap();
            let var = joint.expect(|y| y[0] * y[0]) - joint.expect(|y| y[0]).powi(2);
            prop_assert!((dup.covariance_direct().unwrap() - var).abs() < 1e-12);
        }

        /// Projecting twice lands on the same distribution as projecting once.
        #[test]
        fn marginal_projection_is_idempotent(seed in any::<u64>()) {
            let cfg = FuzzConfig::sample(seed, 2, 2, 0.0);
            let joint = random_joint(&cfg);
            let two_step = joint
                .marginal(&["x1", "x2", "y1"])
                .unwrap()
                .marginal(&["x1", "y1"])
                .unwrap();
            let one_step = joint.marginal(&["x1", "y1"]).unwrap();
            prop_assert_eq!(one_step.atoms().len(), two_step.atoms().len());
            for (a, b) in one_step.atoms().iter().zip(two_step.atoms()) {
                prop_assert_eq!(&a.values, &b.values);
                prop_assert!((a.prob - b.prob).abs() < 1e-12);
            }
        }
    }
}
