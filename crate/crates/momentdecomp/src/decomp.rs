//! Multi-level decomposition of expectations, variances, and covariances.
//!
//! For a joint over a chain `x1..xk` and targets `(y1, y2)`, the total
//! covariance splits into `k + 1` terms, one per conditioning level:
//!
//! ```text
//! Cov(y1, y2) = Cov_{x1}( E[y1|x1], E[y2|x1] )
//!             + E_{x1}[ Cov_{x2|x1}( E[y1|x1,x2], E[y2|x1,x2] ) ]
//!             + ...
//!             + E_{x1}[ ... E_{xk|..}[ Cov(y1, y2 | x1..xk) ] ... ]
//! ```
//!
//! Term `i <= k` applies the covariance operator to the conditional means at
//! depth `i`; term `k + 1` averages the leaf conditional covariance. Setting
//! `y1 = y2` turns the same sum into the variance decomposition, where term
//! `i` is the row of the operator grid with `V` at level `i` and `E`
//! elsewhere.
//!
//! Each term has two evaluators. [`cov_term_collapsed`] reads conditional
//! means straight off the prefix tables, which is the cheap form. The
//! [`cov_term_literal`] form instead evaluates the printed operator nesting
//! one conditional expectation at a time; it never collapses an expectation
//! tower, so agreement between the two is a mechanical certificate of the
//! tower property on the model at hand. [`grid_term_eval`] is a third route
//! for the variance case, driven by an explicit [`OperatorGrid`].
//!
//! Residuals against the direct product-moment total are reported, never
//! clamped; judging them against a tolerance is the caller's business.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::joint::{ordered_sum, FiniteJoint, Node, PrefixIndex};

/// Terms of the variance grid agree with the duplicated-target covariance
/// terms to this absolute tolerance (they compute the same number along
/// different operator routes).
pub const GRID_AGREEMENT_TOLERANCE: f64 = 1e-10;

/// The two moment operators a grid cell can hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentOp {
    Expectation,
    Variance,
}

/// The `(k+1) x (k+1)` operator assignment behind the variance
/// decomposition: row `i` has the variance operator at level `i` and the
/// expectation operator everywhere else. Evaluating row `i` as a nested
/// conditional-operator chain yields term `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorGrid {
    k: usize,
    entries: Vec<Vec<MomentOp>>,
}

impl OperatorGrid {
    pub fn new(k: usize) -> OperatorGrid {
        let entries = (1..=k + 1)
            .map(|i| {
                (1..=k + 1)
                    .map(|j| {
                        if i == j {
                            MomentOp::Variance
                        } else {
                            MomentOp::Expectation
                        }
                    })
                    .collect()
            })
            .collect();
        OperatorGrid { k, entries }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Operator applied at level `j` when evaluating term `i` (both
    /// 1-based, `1..=k+1`).
    pub fn op(&self, i: usize, j: usize) -> MomentOp {
        self.entries[i - 1][j - 1]
    }

    /// One variance operator per row, expectation elsewhere.
    pub fn is_valid(&self) -> bool {
        self.entries.len() == self.k + 1
            && self.entries.iter().enumerate().all(|(r, row)| {
                row.len() == self.k + 1
                    && row.iter().enumerate().all(|(c, op)| {
                        (*op == MomentOp::Variance) == (r == c)
                    })
            })
    }
}

/// The `k+1` covariance terms plus the direct total and the residual between
/// them. The residual is reported as computed, never clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct CovDecomposition {
    pub terms: Vec<f64>,
    pub total_direct: f64,
    pub sum_terms: f64,
    pub residual: f64,
}

/// Variance decomposition: the covariance terms with the target duplicated.
#[derive(Debug, Clone, PartialEq)]
pub struct VarDecomposition {
    pub terms: Vec<f64>,
    pub total_direct: f64,
    pub sum_terms: f64,
    pub residual: f64,
}

/// JSON report consumed by the CLI; field order is the wire format.
#[derive(Debug, Clone, Serialize)]
pub struct DecompReport {
    pub k: usize,
    pub target: String,
    pub terms: Vec<f64>,
    pub total_direct: f64,
    pub sum_terms: f64,
    pub residual: f64,
}

impl CovDecomposition {
    pub fn report(&self) -> DecompReport {
        DecompReport {
            k: self.terms.len() - 1,
            target: "cov".into(),
            terms: self.terms.clone(),
            total_direct: self.total_direct,
            sum_terms: self.sum_terms,
            residual: self.residual,
        }
    }
}

impl VarDecomposition {
    pub fn report(&self) -> DecompReport {
        DecompReport {
            k: self.terms.len() - 1,
            target: "var".into(),
            terms: self.terms.clone(),
            total_direct: self.total_direct,
            sum_terms: self.sum_terms,
            residual: self.residual,
        }
    }
}

fn require_two_targets(joint: &FiniteJoint) -> Result<()> {
    if joint.p() != 2 {
        return Err(Error::Arity {
            expected: 2,
            actual: joint.p(),
        });
    }
    Ok(())
}

/// Weighted mean with value-ordered summation.
fn weighted_mean(pairs: &[(f64, f64)]) -> f64 {
    ordered_sum(pairs.iter().map(|(w, v)| w * v).collect())
}

/// Weighted covariance of `(a, b)` pairs in centered two-pass form.
fn weighted_cov(triples: &[(f64, f64, f64)]) -> f64 {
    let mean_a = weighted_mean(&triples.iter().map(|(w, a, _)| (*w, *a)).collect::<Vec<_>>());
    let mean_b = weighted_mean(&triples.iter().map(|(w, _, b)| (*w, *b)).collect::<Vec<_>>());
    ordered_sum(
        triples
            .iter()
            .map(|(w, a, b)| w * ((a - mean_a) * (b - mean_b)))
            .collect(),
    )
}

/// Nested expectation over the whole chain, evaluated level by level:
/// `E_{x1}[ E_{x2|x1}[ ... E[u(y) | x1..xk] ... ] ]`.
///
/// Equality with [`FiniteJoint::expect`] is the generalized law of total
/// expectation; the test suite asserts it rather than assuming it.
pub fn iterated_expectation<F: Fn(&[f64]) -> f64>(joint: &FiniteJoint, u: F) -> f64 {
    let index = PrefixIndex::build(joint);
    fn go<F: Fn(&[f64]) -> f64>(index: &PrefixIndex, node: &Node, depth: usize, u: &F) -> f64 {
        if depth == index.k() {
            return index.leaf_expect(node, u);
        }
        let pairs: Vec<(f64, f64)> = index
            .children(depth, node)
            .iter()
            .map(|c| (c.mass / node.mass, go(index, c, depth + 1, u)))
            .collect();
        weighted_mean(&pairs)
    }
    go(&index, index.root(), 0, &u)
}

/// Term `i` of the covariance decomposition, with the inner expectation
/// towers collapsed into conditional-mean lookups at depth `i`.
pub fn cov_term_collapsed(joint: &FiniteJoint, i: usize) -> Result<f64> {
    require_two_targets(joint)?;
    let index = PrefixIndex::build(joint);
    Ok(collapsed_term(&index, i))
}

fn collapsed_term(index: &PrefixIndex, i: usize) -> f64 {
    let k = index.k();
    assert!((1..=k + 1).contains(&i), "term index must be in 1..=k+1");
    if i == k + 1 {
        // E over full prefixes of the leaf conditional covariance
        return ordered_sum(
            index
                .nodes(k)
                .iter()
                .map(|n| n.mass * index.leaf_cov(n))
                .collect(),
        );
    }
    let col1 = index.target_column(0);
    let col2 = index.target_column(1);
    let outer: Vec<f64> = index
        .nodes(i - 1)
        .iter()
        .map(|w| {
            let triples: Vec<(f64, f64, f64)> = index
                .children(i - 1, w)
                .iter()
                .map(|c| (c.mass / w.mass, index.mean(c, col1), index.mean(c, col2)))
                .collect();
            w.mass * weighted_cov(&triples)
        })
        .collect();
    ordered_sum(outer)
}

/// Term `i` evaluated as the literal nested operator chain: conditional
/// expectations applied one level at a time above and below the covariance
/// operator, with no tower collapsing anywhere.
pub fn cov_term_literal(joint: &FiniteJoint, i: usize) -> Result<f64> {
    require_two_targets(joint)?;
    let index = PrefixIndex::build(joint);
    let k = index.k();
    assert!((1..=k + 1).contains(&i), "term index must be in 1..=k+1");
    Ok(literal_outer(
        &index,
        index.root(),
        0,
        i,
        index.target_column(0),
        index.target_column(1),
    ))
}

fn literal_outer(
    index: &PrefixIndex,
    node: &Node,
    depth: usize,
    i: usize,
    col1: usize,
    col2: usize,
) -> f64 {
    let k = index.k();
    if depth + 1 == i {
        if i == k + 1 {
            return index.leaf_cov(node);
        }
        let triples: Vec<(f64, f64, f64)> = index
            .children(depth, node)
            .iter()
            .map(|c| {
                (
                    c.mass / node.mass,
                    literal_inner(index, c, depth + 1, col1),
                    literal_inner(index, c, depth + 1, col2),
                )
            })
            .collect();
        return weighted_cov(&triples);
    }
    let pairs: Vec<(f64, f64)> = index
        .children(depth, node)
        .iter()
        .map(|c| {
            (
                c.mass / node.mass,
                literal_outer(index, c, depth + 1, i, col1, col2),
            )
        })
        .collect();
    weighted_mean(&pairs)
}

/// `E_{x_{d+1}|..}[ ... E[y | x1..xk] ... ]` by literal recursion down to the
/// leaf mean.
fn literal_inner(index: &PrefixIndex, node: &Node, depth: usize, col: usize) -> f64 {
    if depth == index.k() {
        return index.mean(node, col);
    }
    let pairs: Vec<(f64, f64)> = index
        .children(depth, node)
        .iter()
        .map(|c| (c.mass / node.mass, literal_inner(index, c, depth + 1, col)))
        .collect();
    weighted_mean(&pairs)
}

/// Full covariance decomposition: all `k+1` collapsed terms, the direct
/// product-moment total, and their residual.
pub fn decompose_covariance(joint: &FiniteJoint) -> Result<CovDecomposition> {
    require_two_targets(joint)?;
    let index = PrefixIndex::build(joint);
    let terms: Vec<f64> = (1..=joint.k() + 1).map(|i| collapsed_term(&index, i)).collect();
    let total_direct = joint.covariance_direct()?;
    let sum_terms: f64 = terms.iter().sum();
    Ok(CovDecomposition {
        residual: (total_direct - sum_terms).abs(),
        terms,
        total_direct,
        sum_terms,
    })
}

/// Variance decomposition of a single-target joint.
///
/// Runs the covariance decomposition with the target duplicated (so the
/// variance reduction is structural, not reimplemented) and cross-checks
/// every term against the operator-grid evaluation of the same level. The
/// two routes must agree within [`GRID_AGREEMENT_TOLERANCE`]; a violation is
/// an engine bug, hence a panic rather than an error.
pub fn decompose_variance(joint: &FiniteJoint) -> Result<VarDecomposition> {
    if joint.p() != 1 {
        return Err(Error::Arity {
            expected: 1,
            actual: joint.p(),
        });
    }
    let doubled = joint.duplicate_target()?;
    let cov = decompose_covariance(&doubled)?;
    let grid = OperatorGrid::new(joint.k());
    for i in 1..=joint.k() + 1 {
        let via_grid = grid_term_eval(joint, &grid, i)?;
        let via_cov = cov.terms[i - 1];
        assert!(
            (via_grid - via_cov).abs() <= GRID_AGREEMENT_TOLERANCE,
            "operator-grid term {i} = {via_grid} disagrees with duplicated-target term {via_cov}"
        );
    }
    Ok(VarDecomposition {
        terms: cov.terms,
        total_direct: cov.total_direct,
        sum_terms: cov.sum_terms,
        residual: cov.residual,
    })
}

/// Evaluates row `i` of the operator grid as a literal nested chain: at each
/// level the row's operator (expectation or variance) is applied to the
/// value of the level below.
pub fn grid_term_eval(joint: &FiniteJoint, grid: &OperatorGrid, i: usize) -> Result<f64> {
    if joint.p() != 1 {
        return Err(Error::Arity {
            expected: 1,
            actual: joint.p(),
        });
    }
    assert!(
        grid.k() == joint.k(),
        "grid built for k = {}, joint has k = {}",
        grid.k(),
        joint.k()
    );
    assert!(
        (1..=joint.k() + 1).contains(&i),
        "term index must be in 1..=k+1"
    );
    let index = PrefixIndex::build(joint);
    Ok(grid_eval(&index, index.root(), 0, grid, i))
}

fn grid_eval(index: &PrefixIndex, node: &Node, depth: usize, grid: &OperatorGrid, i: usize) -> f64 {
    let level = depth + 1;
    if level == index.k() + 1 {
        return match grid.op(i, level) {
            MomentOp::Expectation => index.mean(node, index.target_column(0)),
            MomentOp::Variance => index.leaf_var(node, 0),
        };
    }
    let pairs: Vec<(f64, f64)> = index
        .children(depth, node)
        .iter()
        .map(|c| (c.mass / node.mass, grid_eval(index, c, depth + 1, grid, i)))
        .collect();
    match grid.op(i, level) {
        MomentOp::Expectation => weighted_mean(&pairs),
        MomentOp::Variance => weighted_cov(
            &pairs
                .iter()
                .map(|(w, v)| (*w, *v, *v))
                .collect::<Vec<_>>(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    /// x1 ~ Bernoulli(1/2), (y1, y2) = (x1, 1 - x1).
    fn complement_pair() -> FiniteJoint {
        FiniteJoint::new(
            names(&["x1"]),
            names(&["y1", "y2"]),
            vec![
                (vec![0.0, 0.0, 1.0], 0.5),
                (vec![1.0, 1.0, 0.0], 0.5),
            ],
        )
        .unwrap()
    }

    /// x1 ~ Bernoulli(1/2), x2 | x1 ~ Bernoulli(1/4 + x1/2), y = x1 + x2.
    fn two_level_sum() -> FiniteJoint {
        FiniteJoint::new(
            names(&["x1", "x2"]),
            names(&["y"]),
            vec![
                (vec![0.0, 0.0, 0.0], 0.375),
                (vec![0.0, 1.0, 1.0], 0.125),
                (vec![1.0, 0.0, 1.0], 0.125),
                (vec![1.0, 1.0, 2.0], 0.375),
            ],
        )
        .unwrap()
    }

    /// A k = 1, p = 2 joint with genuine leaf covariance.
    fn leafy() -> FiniteJoint {
        FiniteJoint::new(
            names(&["x1"]),
            names(&["y1", "y2"]),
            vec![
                (vec![0.0, 0.0, 0.0], 0.20),
                (vec![0.0, 1.0, 1.0], 0.20),
                (vec![0.0, 1.0, 0.0], 0.10),
                (vec![1.0, 0.0, 1.0], 0.15),
                (vec![1.0, 1.0, 0.0], 0.15),
                (vec![1.0, 2.0, 2.0], 0.20),
            ],
        )
        .unwrap()
    }

    #[test]
    fn iterated_expectation_normalization() {
        assert!((iterated_expectation(&two_level_sum(), |_| 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn iterated_expectation_matches_direct() {
        let joint = two_level_sum();
        assert!((iterated_expectation(&joint, |y| y[0]) - 1.0).abs() < 1e-12);
        for u in [|y: &[f64]| y[0], |y: &[f64]| y[0] * y[0], |y: &[f64]| 2.5 * y[0] - 1.0] {
            let direct = joint.expect(u);
            assert!((iterated_expectation(&joint, u) - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn iterated_expectation_with_empty_chain() {
        let joint = FiniteJoint::new(
            vec![],
            names(&["y"]),
            vec![(vec![1.0], 0.25), (vec![5.0], 0.75)],
        )
        .unwrap();
        assert_eq!(iterated_expectation(&joint, |y| y[0]), joint.expect(|y| y[0]));
    }

    #[test]
    fn complement_pair_terms() {
        let joint = complement_pair();
        let d = decompose_covariance(&joint).unwrap();
        assert!((d.terms[0] + 0.25).abs() < 1e-12);
        assert!(d.terms[1].abs() < 1e-15);
        assert!((d.total_direct + 0.25).abs() < 1e-12);
        assert!(d.residual <= 1e-12);
    }

    #[test]
    fn two_level_sum_variance_terms() {
        let joint = two_level_sum();
        let d = decompose_variance(&joint).unwrap();
        assert_eq!(d.terms.len(), 3);
        assert!((d.terms[0] - 0.5625).abs() < 1e-12);
        assert!((d.terms[1] - 0.1875).abs() < 1e-12);
        assert!(d.terms[2].abs() < 1e-15);
        assert!((d.total_direct - 0.75).abs() < 1e-12);
        assert!(d.residual <= 1e-12);
    }

    #[test]
    fn literal_equals_collapsed() {
        for joint in [complement_pair(), leafy()] {
            for i in 1..=joint.k() + 1 {
                let lit = cov_term_literal(&joint, i).unwrap();
                let col = cov_term_collapsed(&joint, i).unwrap();
                assert!(
                    (lit - col).abs() < 1e-10,
                    "term {i}: literal {lit} vs collapsed {col}"
                );
            }
        }
    }

    #[test]
    fn grid_rows_match_variance_terms() {
        let joint = two_level_sum();
        let grid = OperatorGrid::new(joint.k());
        assert!(grid.is_valid());
        let expected = [0.5625, 0.1875, 0.0];
        for i in 1..=3 {
            let row = grid_term_eval(&joint, &grid, i).unwrap();
            assert!((row - expected[i - 1]).abs() < 1e-12, "row {i} = {row}");
        }
    }

    #[test]
    fn independence_kills_outer_terms() {
        // x1 independent of (y1, y2)
        let mut atoms = Vec::new();
        for (x, px) in [(0.0, 0.5), (1.0, 0.5)] {
            for (y1, y2, py) in [(0.0, 0.0, 0.4), (0.0, 1.0, 0.1), (1.0, 0.0, 0.1), (1.0, 1.0, 0.4)] {
                atoms.push((vec![x, y1, y2], px * py));
            }
        }
        let joint = FiniteJoint::new(names(&["x1"]), names(&["y1", "y2"]), atoms).unwrap();
        let d = decompose_covariance(&joint).unwrap();
        assert!(d.terms[0].abs() < 1e-12);
        assert!((d.terms[1] - d.total_direct).abs() < 1e-12);
    }

    #[test]
    fn swapping_targets_is_exactly_symmetric() {
        let joint = leafy();
        let swapped_atoms = joint
            .atoms()
            .iter()
            .map(|a| {
                (
                    vec![a.values[0], a.values[2], a.values[1]],
                    a.prob,
                )
            })
            .collect();
        let swapped = FiniteJoint::new(
            names(&["x1"]),
            names(&["y2", "y1"]),
            swapped_atoms,
        )
        .unwrap();
        let d1 = decompose_covariance(&joint).unwrap();
        let d2 = decompose_covariance(&swapped).unwrap();
        for (a, b) in d1.terms.iter().zip(&d2.terms) {
            assert_eq!(a.to_bits(), b.to_bits(), "terms must match bit-for-bit");
        }
        assert_eq!(d1.total_direct.to_bits(), d2.total_direct.to_bits());
    }

    #[test]
    fn classical_two_term_law_at_k1() {
        let joint = leafy();
        let d = decompose_covariance(&joint).unwrap();

        // independent route through public conditioning ops
        let xs = [0.0, 1.0];
        let mass = |x: f64| -> f64 {
            joint
                .atoms()
                .iter()
                .filter(|a| a.values[0] == x)
                .map(|a| a.prob)
                .sum()
        };
        let mut within = 0.0;
        let mut m1 = Vec::new();
        let mut m2 = Vec::new();
        for &x in &xs {
            let cond = joint.condition(&[x]).unwrap();
            within += mass(x) * cond.covariance_direct().unwrap();
            m1.push(cond.expect(|y| y[0]));
            m2.push(cond.expect(|y| y[1]));
        }
        let e1: f64 = xs.iter().enumerate().map(|(i, &x)| mass(x) * m1[i]).sum();
        let e2: f64 = xs.iter().enumerate().map(|(i, &x)| mass(x) * m2[i]).sum();
        let e12: f64 = xs.iter().enumerate().map(|(i, &x)| mass(x) * m1[i] * m2[i]).sum();
        let between = e12 - e1 * e2;

        assert!((d.terms[0] - between).abs() < 1e-10);
        assert!((d.terms[1] - within).abs() < 1e-10);
    }

    #[test]
    fn three_term_expansion_at_k2() {
        let joint = two_level_sum();
        let d = decompose_variance(&joint).unwrap();

        // independent route: enumerate prefixes with public ops only
        let p = |prefix: &[f64]| -> f64 {
            joint
                .atoms()
                .iter()
                .filter(|a| {
                    prefix
                        .iter()
                        .enumerate()
                        .all(|(i, v)| a.values[i] == *v)
                })
                .map(|a| a.prob)
                .sum()
        };
        let mean_given = |prefix: &[f64]| -> f64 {
            joint.condition(prefix).unwrap().expect(|y| y[0])
        };
        let var_given = |prefix: &[f64]| -> f64 {
            let c = joint.condition(prefix).unwrap();
            c.expect(|y| y[0] * y[0]) - c.expect(|y| y[0]).powi(2)
        };

        let xs = [0.0, 1.0];
        // E E [V(y | x1, x2)]
        let mut inner_noise = 0.0;
        // E_x1 [ V_{x2|x1} ( E[y|x1,x2] ) ]
        let mut mid = 0.0;
        // V_x1 ( E_{x2|x1} E[y|x1,x2] )
        let mut outer_means = Vec::new();
        for &x1 in &xs {
            let px1 = p(&[x1]);
            let mut cond_mean_sq = 0.0;
            let mut cond_mean = 0.0;
            for &x2 in &xs {
                let w = p(&[x1, x2]) / px1;
                inner_noise += px1 * w * var_given(&[x1, x2]);
                let m = mean_given(&[x1, x2]);
                cond_mean += w * m;
                cond_mean_sq += w * m * m;
            }
            mid += px1 * (cond_mean_sq - cond_mean * cond_mean);
            outer_means.push((px1, cond_mean));
        }
        let em: f64 = outer_means.iter().map(|(w, m)| w * m).sum();
        let em2: f64 = outer_means.iter().map(|(w, m)| w * m * m).sum();
        let outer = em2 - em * em;

        assert!((d.terms[0] - outer).abs() < 1e-10);
        assert!((d.terms[1] - mid).abs() < 1e-10);
        assert!((d.terms[2] - inner_noise).abs() < 1e-10);
    }

    #[test]
    fn variance_terms_are_nonnegative() {
        let d = decompose_variance(&two_level_sum()).unwrap();
        for t in &d.terms {
            assert!(*t >= -1e-10);
        }
    }

    #[test]
    fn empty_chain_decomposes_to_the_direct_moment() {
        let joint = FiniteJoint::new(
            vec![],
            names(&["y1", "y2"]),
            vec![
                (vec![0.0, 1.0], 0.3),
                (vec![1.0, 0.0], 0.3),
                (vec![1.0, 1.0], 0.4),
            ],
        )
        .unwrap();
        let d = decompose_covariance(&joint).unwrap();
        assert_eq!(d.terms.len(), 1);
        assert!((d.terms[0] - d.total_direct).abs() < 1e-12);
        assert!(d.residual <= 1e-12);

        let single = FiniteJoint::new(
            vec![],
            names(&["y"]),
            vec![(vec![0.0], 0.5), (vec![2.0], 0.5)],
        )
        .unwrap();
        let v = decompose_variance(&single).unwrap();
        assert!((v.terms[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn arity_errors() {
        assert!(matches!(
            decompose_covariance(&two_level_sum()),
            Err(Error::Arity { expected: 2, actual: 1 })
        ));
        assert!(matches!(
            decompose_variance(&complement_pair()),
            Err(Error::Arity { expected: 1, actual: 2 })
        ));
    }

    #[test]
    fn report_has_stable_shape() {
        let d = decompose_variance(&two_level_sum()).unwrap();
        let json = serde_json::to_string(&d.report()).unwrap();
        assert!(json.starts_with("{\"k\":2,\"target\":\"var\""));
    }

    #[test]
    #[should_panic(expected = "term index must be in 1..=k+1")]
    fn grid_row_out_of_range_panics() {
        let joint = two_level_sum();
        let grid = OperatorGrid::new(joint.k());
        let _ = grid_term_eval(&joint, &grid, 4);
    }

    #[test]
    #[should_panic(expected = "term index must be in 1..=k+1")]
    fn term_index_zero_panics() {
        let _ = cov_term_collapsed(&complement_pair(), 0);
    }
}
