//! Declarative chain models and their exact compilation.
//!
//! A [`ChainModel`] describes a hierarchy `x1 -> x2 -> ... -> xk -> targets`
//! level by level: each level carries a finite distribution whose parameters
//! are [`ParamExpr`] strings over the *earlier* variables, and the leaf
//! describes the conditional distribution of the one or two targets given
//! the whole chain. Compilation enumerates every positive-probability path,
//! multiplying conditional probabilities down the chain, and produces an
//! explicit [`FiniteJoint`].
//!
//! The on-disk format is JSON:
//!
//! ```json
//! {
//!   "levels": [
//!     {"name": "x1", "dist": {"kind": "bernoulli", "p": "0.5"}},
//!     {"name": "x2", "dist": {"kind": "bernoulli", "p": "0.25 + 0.5*x1"}}
//!   ],
//!   "leaf": {"targets": ["y"], "expr_atoms": [[["x1 + x2"], "1"]]}
//! }
//! ```
//!
//! A leaf is exactly one of:
//! - `"cases"`: an explicit atom table per reachable prefix, each entry
//!   `{"when": {"x1": 0, ...}, "atoms": [[[y1, y2], prob], ...]}`;
//! - `"expr_atoms"`: one symbolic atom table `[[[value exprs...], prob expr],
//!   ...]` evaluated at every reachable prefix;
//! - `"independent"`: one distribution spec per target, compiled to the
//!   product table.
//!
//! Unknown JSON keys are rejected.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::ParamExpr;
use crate::joint::{canon, ordered_sum, FiniteJoint};

/// Default cap on the number of enumerated atoms.
pub const DEFAULT_ATOM_CAP: usize = 10_000_000;

/// Tolerance on a conditional distribution's probability sum.
const DIST_SUM_TOLERANCE: f64 = 1e-9;

/// A finite distribution for one chain level (or one independent leaf
/// target), with expression-valued parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum DistSpec {
    Categorical { values: Vec<f64>, probs: Vec<ParamExpr> },
    Bernoulli { p: ParamExpr },
    Binomial { n: u32, p: ParamExpr },
}

/// One conditioning level: a variable name plus its conditional distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSpec {
    pub name: String,
    pub dist: DistSpec,
}

/// A leaf case: the full chain prefix it applies to and the atom table of
/// target values for that prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafCase {
    /// Prefix values in level order.
    pub when: Vec<f64>,
    pub atoms: Vec<(Vec<f64>, f64)>,
}

/// The conditional distribution of the targets given the full chain.
#[derive(Debug, Clone, PartialEq)]
pub enum LeafBody {
    Cases(Vec<LeafCase>),
    ExprAtoms(Vec<(Vec<ParamExpr>, ParamExpr)>),
    Independent(Vec<DistSpec>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafSpec {
    pub targets: Vec<String>,
    pub body: LeafBody,
}

/// A validated k-level hierarchical model.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    levels: Vec<LevelSpec>,
    leaf: LeafSpec,
}

/// What compilation produced, next to the joint itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompileReport {
    /// Atoms in the compiled joint (after merging and zero-dropping).
    pub atom_count: usize,
    /// `|1 - sum of enumerated probabilities|` before normalization.
    pub mass_deficit: f64,
}

/// Parses and validates a JSON chain model.
pub fn parse_model(bytes: &[u8]) -> Result<ChainModel> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::Syntax {
        line: 1,
        col: 1,
        msg: "input is not valid UTF-8".into(),
    })?;
    let repr: ModelRepr = serde_json::from_str(text).map_err(|e| Error::Syntax {
        line: e.line(),
        col: e.column(),
        msg: e.to_string(),
    })?;
    ChainModel::from_repr(repr)
}

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_expr_in(text: &str, context: &str) -> Result<ParamExpr> {
    ParamExpr::parse(text).map_err(|e| match e {
        Error::Syntax { line, col, msg } => Error::Syntax {
            line,
            col,
            msg: format!("{msg} (in {context} expression `{text}`)"),
        },
        other => other,
    })
}

impl ChainModel {
    pub fn new(levels: Vec<LevelSpec>, leaf: LeafSpec) -> Result<ChainModel> {
        let model = ChainModel { levels, leaf };
        model.validate()?;
        Ok(model)
    }

    pub fn levels(&self) -> &[LevelSpec] {
        &self.levels
    }

    pub fn leaf(&self) -> &LeafSpec {
        &self.leaf
    }

    pub fn k(&self) -> usize {
        self.levels.len()
    }

    fn validate(&self) -> Result<()> {
        let mut names: Vec<&str> = Vec::new();
        for (i, level) in self.levels.iter().enumerate() {
            if !is_identifier(&level.name) || level.name == "min" || level.name == "max" {
                return Err(Error::InvalidDistributionSpec(format!(
                    "level name `{}` is not a valid identifier",
                    level.name
                )));
            }
            if names.contains(&level.name.as_str()) {
                return Err(Error::InvalidDistributionSpec(format!(
                    "duplicate level name `{}`",
                    level.name
                )));
            }
            validate_dist_shape(&level.dist, &format!("level `{}`", level.name))?;
            check_references(&level.dist, &names, &format!("level `{}`", level.name))?;
            let _ = i;
            names.push(&level.name);
        }

        let targets = &self.leaf.targets;
        if targets.is_empty() || targets.len() > 2 {
            return Err(Error::InvalidDistributionSpec(format!(
                "leaf must have 1 or 2 targets, got {}",
                targets.len()
            )));
        }
        for t in targets {
            if !is_identifier(t) || t == "min" || t == "max" {
                return Err(Error::InvalidDistributionSpec(format!(
                    "target name `{t}` is not a valid identifier"
                )));
            }
            if names.contains(&t.as_str()) {
                return Err(Error::InvalidDistributionSpec(format!(
                    "target `{t}` collides with a level name"
                )));
            }
        }
        if targets.len() == 2 && targets[0] == targets[1] {
            return Err(Error::InvalidDistributionSpec(
                "target names must be distinct".into(),
            ));
        }

        match &self.leaf.body {
            LeafBody::Cases(cases) => {
                if cases.is_empty() {
                    return Err(Error::InvalidDistributionSpec(
                        "leaf `cases` must not be empty".into(),
                    ));
                }
                let mut seen: Vec<&[f64]> = Vec::new();
                for case in cases {
                    if case.when.len() != self.levels.len() {
                        return Err(Error::InvalidDistributionSpec(
                            "leaf case `when` must bind every level variable".into(),
                        ));
                    }
                    if seen.iter().any(|w| {
                        w.iter().zip(&case.when).all(|(a, b)| a.to_bits() == b.to_bits())
                    }) {
                        return Err(Error::InvalidDistributionSpec(format!(
                            "duplicate leaf case for prefix {:?}",
                            case.when
                        )));
                    }
                    seen.push(&case.when);
                    validate_leaf_atoms(&case.atoms, targets.len())?;
                }
            }
            LeafBody::ExprAtoms(atoms) => {
                if atoms.is_empty() {
                    return Err(Error::InvalidDistributionSpec(
                        "leaf `expr_atoms` must not be empty".into(),
                    ));
                }
                for (values, prob) in atoms {
                    if values.len() != targets.len() {
                        return Err(Error::InvalidDistributionSpec(format!(
                            "leaf atom has {} values for {} targets",
                            values.len(),
                            targets.len()
                        )));
                    }
                    for expr in values.iter().chain(std::iter::once(prob)) {
                        check_expr_references(expr, &names, "leaf")?;
                    }
                }
            }
            LeafBody::Independent(dists) => {
                if dists.len() != targets.len() {
                    return Err(Error::InvalidDistributionSpec(format!(
                        "`independent` needs one distribution per target ({} != {})",
                        dists.len(),
                        targets.len()
                    )));
                }
                for dist in dists {
                    validate_dist_shape(dist, "leaf")?;
                    check_references(dist, &names, "leaf")?;
                }
            }
        }
        Ok(())
    }

    /// Compiles with the default atom cap.
    pub fn compile(&self) -> Result<(FiniteJoint, CompileReport)> {
        self.compile_with_cap(DEFAULT_ATOM_CAP)
    }

    /// Enumerates every positive-probability chain path, validating each
    /// conditional distribution at each reachable prefix, and multiplies
    /// conditional probabilities into atom weights.
    pub fn compile_with_cap(&self, cap: usize) -> Result<(FiniteJoint, CompileReport)> {
        let mut atoms: Vec<(Vec<f64>, f64)> = Vec::new();
        let mut prefix: Vec<f64> = Vec::new();
        self.enumerate(0, 1.0, &mut prefix, &mut atoms, cap)?;

        let mass = ordered_sum(atoms.iter().map(|(_, p)| *p).collect());
        let mass_deficit = (1.0 - mass).abs();
        let joint = FiniteJoint::new(
            self.levels.iter().map(|l| l.name.clone()).collect(),
            self.leaf.targets.clone(),
            atoms,
        )?;
        let report = CompileReport {
            atom_count: joint.atoms().len(),
            mass_deficit,
        };
        Ok((joint, report))
    }

    fn enumerate(
        &self,
        depth: usize,
        path_prob: f64,
        prefix: &mut Vec<f64>,
        atoms: &mut Vec<(Vec<f64>, f64)>,
        cap: usize,
    ) -> Result<()> {
        if depth == self.levels.len() {
            let table = self.leaf_table(prefix)?;
            for (values, prob) in table {
                if atoms.len() >= cap {
                    return Err(Error::SupportExplosion { cap });
                }
                if prob == 0.0 {
                    continue;
                }
                let mut full = prefix.clone();
                full.extend(values);
                atoms.push((full, path_prob * prob));
            }
            return Ok(());
        }

        let level = &self.levels[depth];
        let support = eval_dist(
            &level.dist,
            &|name| self.lookup(prefix, name),
            &format!("level `{}` at prefix {:?}", level.name, prefix),
        )?;
        for (value, prob) in support {
            if prob == 0.0 {
                continue;
            }
            prefix.push(value);
            self.enumerate(depth + 1, path_prob * prob, prefix, atoms, cap)?;
            prefix.pop();
        }
        Ok(())
    }

    fn lookup(&self, prefix: &[f64], name: &str) -> Option<f64> {
        self.levels[..prefix.len()]
            .iter()
            .position(|l| l.name == name)
            .map(|i| prefix[i])
    }

    /// The leaf atom table for one full prefix.
    fn leaf_table(&self, prefix: &[f64]) -> Result<Vec<(Vec<f64>, f64)>> {
        match &self.leaf.body {
            LeafBody::Cases(cases) => {
                let case = cases
                    .iter()
                    .find(|c| {
                        c.when
                            .iter()
                            .zip(prefix)
                            .all(|(a, b)| canon(*a).to_bits() == b.to_bits())
                    })
                    .ok_or_else(|| {
                        Error::InvalidDistributionSpec(format!(
                            "no leaf case matches reachable prefix {prefix:?}"
                        ))
                    })?;
                Ok(case.atoms.clone())
            }
            LeafBody::ExprAtoms(symbolic) => {
                let lookup = |name: &str| self.lookup(prefix, name);
                let mut out = Vec::with_capacity(symbolic.len());
                let mut probs = Vec::with_capacity(symbolic.len());
                for (value_exprs, prob_expr) in symbolic {
                    let values = value_exprs
                        .iter()
                        .map(|e| e.eval(&lookup))
                        .collect::<Result<Vec<f64>>>()?;
                    let prob = prob_expr.eval(&lookup)?;
                    if !(0.0..=1.0 + DIST_SUM_TOLERANCE).contains(&prob) {
                        return Err(Error::InvalidProbability(format!(
                            "leaf atom probability {prob} at prefix {prefix:?}"
                        )));
                    }
                    probs.push(prob);
                    out.push((values, prob));
                }
                check_sum(&probs, &format!("leaf at prefix {prefix:?}"))?;
                Ok(out)
            }
            LeafBody::Independent(dists) => {
                let lookup = |name: &str| self.lookup(prefix, name);
                let mut tables = Vec::with_capacity(dists.len());
                for dist in dists {
                    tables.push(eval_dist(
                        dist,
                        &lookup,
                        &format!("leaf at prefix {prefix:?}"),
                    )?);
                }
                match tables.len() {
                    1 => Ok(tables.pop().expect("one table").into_iter()
                        .map(|(v, p)| (vec![v], p))
                        .collect()),
                    2 => {
                        let second = tables.pop().expect("two tables");
                        let first = tables.pop().expect("two tables");
                        let mut out = Vec::with_capacity(first.len() * second.len());
                        for &(v1, p1) in &first {
                            for &(v2, p2) in &second {
                                out.push((vec![v1, v2], p1 * p2));
                            }
                        }
                        Ok(out)
                    }
                    _ => unreachable!("validated to 1 or 2 targets"),
                }
            }
        }
    }

    /// Serializes back to the JSON model format (expressions pretty-printed).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_repr()).expect("model serialization cannot fail")
    }

    fn from_repr(repr: ModelRepr) -> Result<ChainModel> {
        let levels = repr
            .levels
            .into_iter()
            .map(|l| {
                Ok(LevelSpec {
                    dist: dist_from_repr(l.dist, &format!("level `{}`", l.name))?,
                    name: l.name,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let LeafRepr { targets, cases, expr_atoms, independent } = repr.leaf;
        let mut bodies = Vec::new();
        if let Some(cases) = cases {
            let level_names: Vec<&String> = levels.iter().map(|l| &l.name).collect();
            let typed = cases
                .into_iter()
                .map(|c| {
                    let mut when = Vec::with_capacity(level_names.len());
                    if c.when.len() != level_names.len() {
                        return Err(Error::InvalidDistributionSpec(
                            "leaf case `when` must bind every level variable".into(),
                        ));
                    }
                    for name in &level_names {
                        match c.when.get(name.as_str()) {
                            Some(v) => when.push(canon(*v)),
                            None => {
                                return Err(Error::InvalidDistributionSpec(format!(
                                    "leaf case `when` is missing level `{name}`"
                                )))
                            }
                        }
                    }
                    Ok(LeafCase { when, atoms: c.atoms })
                })
                .collect::<Result<Vec<_>>>()?;
            bodies.push(LeafBody::Cases(typed));
        }
        if let Some(atoms) = expr_atoms {
            let typed = atoms
                .into_iter()
                .map(|(values, prob)| {
                    let values = values
                        .iter()
                        .map(|v| parse_expr_in(v, "leaf value"))
                        .collect::<Result<Vec<_>>>()?;
                    Ok((values, parse_expr_in(&prob, "leaf probability")?))
                })
                .collect::<Result<Vec<_>>>()?;
            bodies.push(LeafBody::ExprAtoms(typed));
        }
        if let Some(dists) = independent {
            let typed = dists
                .into_iter()
                .map(|d| dist_from_repr(d, "leaf"))
                .collect::<Result<Vec<_>>>()?;
            bodies.push(LeafBody::Independent(typed));
        }
        if bodies.len() != 1 {
            return Err(Error::InvalidDistributionSpec(
                "leaf must have exactly one of `cases`, `expr_atoms`, `independent`".into(),
            ));
        }
        ChainModel::new(
            levels,
            LeafSpec {
                targets,
                body: bodies.pop().expect("one body"),
            },
        )
    }

    fn to_repr(&self) -> ModelRepr {
        let levels = self
            .levels
            .iter()
            .map(|l| LevelRepr {
                name: l.name.clone(),
                dist: dist_to_repr(&l.dist),
            })
            .collect();
        let mut leaf = LeafRepr {
            targets: self.leaf.targets.clone(),
            cases: None,
            expr_atoms: None,
            independent: None,
        };
        match &self.leaf.body {
            LeafBody::Cases(cases) => {
                leaf.cases = Some(
                    cases
                        .iter()
                        .map(|c| CaseRepr {
                            when: self
                                .levels
                                .iter()
                                .map(|l| l.name.clone())
                                .zip(c.when.iter().copied())
                                .collect(),
                            atoms: c.atoms.clone(),
                        })
                        .collect(),
                );
            }
            LeafBody::ExprAtoms(atoms) => {
                leaf.expr_atoms = Some(
                    atoms
                        .iter()
                        .map(|(values, prob)| {
                            (
                                values.iter().map(|e| e.to_string()).collect(),
                                prob.to_string(),
                            )
                        })
                        .collect(),
                );
            }
            LeafBody::Independent(dists) => {
                leaf.independent = Some(dists.iter().map(dist_to_repr).collect());
            }
        }
        ModelRepr {
            levels,
            leaf,
        }
    }
}

fn validate_dist_shape(dist: &DistSpec, context: &str) -> Result<()> {
    match dist {
        DistSpec::Categorical { values, probs } => {
            if values.is_empty() {
                return Err(Error::InvalidDistributionSpec(format!(
                    "{context}: categorical support is empty"
                )));
            }
            if values.len() != probs.len() {
                return Err(Error::InvalidDistributionSpec(format!(
                    "{context}: {} values but {} probabilities",
                    values.len(),
                    probs.len()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDistributionSpec(format!(
                    "{context}: non-finite categorical value"
                )));
            }
            for (i, a) in values.iter().enumerate() {
                for b in &values[i + 1..] {
                    if canon(*a).to_bits() == canon(*b).to_bits() {
                        return Err(Error::InvalidDistributionSpec(format!(
                            "{context}: duplicate categorical value {a}"
                        )));
                    }
                }
            }
        }
        DistSpec::Bernoulli { .. } | DistSpec::Binomial { .. } => {}
    }
    Ok(())
}

fn check_references(dist: &DistSpec, defined: &[&str], context: &str) -> Result<()> {
    let exprs: Vec<&ParamExpr> = match dist {
        DistSpec::Categorical { probs, .. } => probs.iter().collect(),
        DistSpec::Bernoulli { p } | DistSpec::Binomial { p, .. } => vec![p],
    };
    for expr in exprs {
        check_expr_references(expr, defined, context)?;
    }
    Ok(())
}

fn check_expr_references(expr: &ParamExpr, defined: &[&str], context: &str) -> Result<()> {
    for name in expr.variables() {
        if !defined.contains(&name.as_str()) {
            return Err(Error::UnknownVariableReference {
                name,
                context: context.to_string(),
            });
        }
    }
    Ok(())
}

fn validate_leaf_atoms(atoms: &[(Vec<f64>, f64)], arity: usize) -> Result<()> {
    if atoms.is_empty() {
        return Err(Error::InvalidDistributionSpec(
            "leaf case has no atoms".into(),
        ));
    }
    let mut probs = Vec::with_capacity(atoms.len());
    for (values, prob) in atoms {
        if values.len() != arity {
            return Err(Error::InvalidDistributionSpec(format!(
                "leaf atom has {} values for {arity} targets",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDistributionSpec(
                "non-finite value in leaf atom".into(),
            ));
        }
        if !prob.is_finite() || *prob < 0.0 || *prob > 1.0 + DIST_SUM_TOLERANCE {
            return Err(Error::InvalidProbability(format!(
                "leaf atom probability {prob}"
            )));
        }
        probs.push(*prob);
    }
    check_sum(&probs, "leaf case")
}

fn check_sum(probs: &[f64], context: &str) -> Result<()> {
    let sum = ordered_sum(probs.to_vec());
    if (sum - 1.0).abs() > DIST_SUM_TOLERANCE {
        return Err(Error::InvalidProbability(format!(
            "{context}: probabilities sum to {sum}"
        )));
    }
    Ok(())
}

/// Evaluates a distribution spec at one prefix into `(value, prob)` pairs,
/// validating the probabilities.
fn eval_dist(
    dist: &DistSpec,
    lookup: &dyn Fn(&str) -> Option<f64>,
    context: &str,
) -> Result<Vec<(f64, f64)>> {
    let check_unit = |p: f64, what: &str| -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(format!(
                "{context}: {what} evaluates to {p}, outside [0, 1]"
            )));
        }
        Ok(p)
    };
    match dist {
        DistSpec::Bernoulli { p } => {
            let p = check_unit(p.eval(lookup)?, "bernoulli p")?;
            Ok(vec![(0.0, 1.0 - p), (1.0, p)])
        }
        DistSpec::Categorical { values, probs } => {
            let evaluated = probs
                .iter()
                .map(|e| check_unit(e.eval(lookup)?, "categorical probability"))
                .collect::<Result<Vec<f64>>>()?;
            check_sum(&evaluated, context)?;
            Ok(values.iter().map(|v| canon(*v)).zip(evaluated).collect())
        }
        DistSpec::Binomial { n, p } => {
            let n = *n;
            let p = check_unit(p.eval(lookup)?, "binomial p")?;
            let mut out = Vec::with_capacity(n as usize + 1);
            if p == 0.0 {
                out.push((0.0, 1.0));
            } else if p == 1.0 {
                out.push((n as f64, 1.0));
            } else {
                // multiplicative recurrence: pmf(j+1) = pmf(j) * (n-j)/(j+1) * p/(1-p)
                let ratio = p / (1.0 - p);
                let mut pmf = (1.0 - p).powi(n as i32);
                for j in 0..=n {
                    out.push((j as f64, pmf));
                    if j < n {
                        pmf *= (n - j) as f64 / (j + 1) as f64 * ratio;
                    }
                }
            }
            Ok(out)
        }
    }
}

fn dist_from_repr(repr: DistRepr, context: &str) -> Result<DistSpec> {
    Ok(match repr {
        DistRepr::Categorical { values, probs } => DistSpec::Categorical {
            values,
            probs: probs
                .iter()
                .map(|p| parse_expr_in(p, context))
                .collect::<Result<Vec<_>>>()?,
        },
        DistRepr::Bernoulli { p } => DistSpec::Bernoulli {
            p: parse_expr_in(&p, context)?,
        },
        DistRepr::Binomial { n, p } => DistSpec::Binomial {
            n,
            p: parse_expr_in(&p, context)?,
        },
    })
}

fn dist_to_repr(dist: &DistSpec) -> DistRepr {
    match dist {
        DistSpec::Categorical { values, probs } => DistRepr::Categorical {
            values: values.clone(),
            probs: probs.iter().map(|e| e.to_string()).collect(),
        },
        DistSpec::Bernoulli { p } => DistRepr::Bernoulli { p: p.to_string() },
        DistSpec::Binomial { n, p } => DistRepr::Binomial {
            n: *n,
            p: p.to_string(),
        },
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRepr {
    levels: Vec<LevelRepr>,
    leaf: LeafRepr,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelRepr {
    name: String,
    dist: DistRepr,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum DistRepr {
    Categorical { values: Vec<f64>, probs: Vec<String> },
    Bernoulli { p: String },
    Binomial { n: u32, p: String },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LeafRepr {
    targets: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cases: Option<Vec<CaseRepr>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expr_atoms: Option<Vec<(Vec<String>, String)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    independent: Option<Vec<DistRepr>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseRepr {
    when: BTreeMap<String, f64>,
    atoms: Vec<(Vec<f64>, f64)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom_map(joint: &FiniteJoint) -> Vec<(Vec<f64>, f64)> {
        joint
            .atoms()
            .iter()
            .map(|a| (a.values.clone(), a.prob))
            .collect()
    }

    #[test]
    fn minimal_bernoulli_model_parses() {
        let text = br#"{
            "levels": [{"name": "x1", "dist": {"kind": "bernoulli", "p": "0.5"}}],
            "leaf": {"targets": ["y"], "expr_atoms": [[["x1"], "1"]]}
        }"#;
        let model = parse_model(text).unwrap();
        assert_eq!(model.k(), 1);
    }

    #[test]
    fn forward_reference_is_rejected() {
        let text = br#"{
            "levels": [
                {"name": "x1", "dist": {"kind": "bernoulli", "p": "0.5 * x2"}},
                {"name": "x2", "dist": {"kind": "bernoulli", "p": "0.5"}}
            ],
            "leaf": {"targets": ["y"], "expr_atoms": [[["x1"], "1"]]}
        }"#;
        match parse_model(text) {
            Err(Error::UnknownVariableReference { name, .. }) => assert_eq!(name, "x2"),
            other => panic!("expected forward-reference error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = br#"{
            "levels": [{"name": "x1", "dist": {"kind": "bernoulli", "p": "0.5"}}],
            "leaf": {"targets": ["y"], "expr_atoms": [[["x1"], "1"]]},
            "extra": 1
        }"#;
        assert!(matches!(parse_model(text), Err(Error::Syntax { .. })));
    }

    #[test]
    fn malformed_json_reports_position() {
        match parse_model(b"{\n  \"levels\": [,]\n}") {
            Err(Error::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn compile_complement_pair() {
        let text = br#"{
            "levels": [{"name": "x1", "dist": {"kind": "bernoulli", "p": "0.5"}}],
            "leaf": {"targets": ["y1", "y2"], "expr_atoms": [[["x1", "1 - x1"], "1"]]}
        }"#;
        let model = parse_model(text).unwrap();
        let (joint, report) = model.compile().unwrap();
        assert_eq!(report.atom_count, 2);
        assert!(report.mass_deficit < 1e-9);
        assert_eq!(
            atom_map(&joint),
            vec![
                (vec![0.0, 0.0, 1.0], 0.5),
                (vec![1.0, 1.0, 0.0], 0.5),
            ]
        );
    }

    #[test]
    fn compile_two_level_sum() {
        let text = br#"{
            "levels": [
                {"name": "x1", "dist": {"kind": "bernoulli", "p": "0.5"}},
                {"name": "x2", "dist": {"kind": "bernoulli", "p": "0.25 + 0.5*x1"}}
            ],
            "leaf": {"targets": ["y"], "expr_atoms": [[["x1 + x2"], "1"]]}
        }"#;
        let model = parse_model(text).unwrap();
        let (joint, _) = model.compile().unwrap();
        assert_eq!(joint.cond_vars(), &["x1".to_string(), "x2".to_string()]);
        assert_eq!(
            atom_map(&joint),
            vec![
                (vec![0.0, 0.0, 0.0], 0.375),
                (vec![0.0, 1.0, 1.0], 0.125),
                (vec![1.0, 0.0, 1.0], 0.125),
                (vec![1.0, 1.0, 2.0], 0.375),
            ]
        );
    }

    #[test]
    fn out_of_range_parameter_is_invalid() {
        let text = br#"{
            "levels": [{"name": "x1", "dist": {"kind": "bernoulli", "p": "1.2"}}],
            "leaf": {"targets": ["y"], "expr_atoms": [[["x1"], "1"]]}
        }"#;
        let model = parse_model(text).unwrap();
        assert!(matches!(
            model.compile(),
            Err(Error::InvalidProbability(_))
        ));
    }

    #[test]
    fn atom_cap_triggers_support_explosion() {
        let text = br#"{
            "levels": [{"name": "x1", "dist": {"kind": "binomial", "n": 8, "p": "0.5"}}],
            "leaf": {"targets": ["y"], "expr_atoms": [[["x1"], "1"]]}
        }"#;
        let model = parse_model(text).unwrap();
        assert!(matches!(
            model.compile_with_cap(3),
            Err(Error::SupportExplosion { cap: 3 })
        ));
    }

    #[test]
    fn binomial_pmf_recurrence() {
        let text = br#"{
            "levels": [{"name": "x1", "dist": {"kind": "binomial", "n": 3, "p": "0.5"}}],
            "leaf": {"targets": ["y"], "expr_atoms": [[["x1"], "1"]]}
        }"#;
        let (joint, _) = parse_model(text).unwrap().compile().unwrap();
        let probs: Vec<f64> = joint.atoms().iter().map(|a| a.prob).collect();
        let expected = [0.125, 0.375, 0.375, 0.125];
        for (got, want) in probs.iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn binomial_degenerate_p() {
        let text = br#"{
            "levels": [{"name": "x1", "dist": {"kind": "binomial", "n": 5, "p": "0"}}],
            "leaf": {"targets": ["y"], "expr_atoms": [[["x1"], "1"]]}
        }"#;
        let (joint, _) = parse_model(text).unwrap().compile().unwrap();
        assert_eq!(joint.atoms().len(), 1);
        assert_eq!(joint.atoms()[0].values, vec![0.0, 0.0]);
    }

    #[test]
    fn cases_leaf_compiles_and_detects_missing_prefix() {
        let good = br#"{
            "levels": [{"name": "x1", "dist": {"kind": "bernoulli", "p": "0.5"}}],
            "leaf": {"targets": ["y1", "y2"], "cases": [
                {"when": {"x1": 0}, "atoms": [[[0, 0], 0.5], [[1, 1], 0.5]]},
                {"when": {"x1": 1}, "atoms": [[[0, 1], 0.25], [[1, 0], 0.75]]}
            ]}
        }"#;
        let (joint, report) = parse_model(good).unwrap().compile().unwrap();
        assert_eq!(report.atom_count, 4);
        assert!((joint.atoms()[0].prob - 0.25).abs() < 1e-15);

        let missing = br#"{
            "levels": [{"name": "x1", "dist": {"kind": "bernoulli", "p": "0.5"}}],
            "leaf": {"targets": ["y1", "y2"], "cases": [
                {"when": {"x1": 0}, "atoms": [[[0, 0], 1.0]]}
            ]}
        }"#;
        assert!(matches!(
            parse_model(missing).unwrap().compile(),
            Err(Error::InvalidDistributionSpec(_))
        ));
    }

    #[test]
    fn independent_leaf_is_the_product_table() {
        let text = br#"{
            "levels": [{"name": "x1", "dist": {"kind": "bernoulli", "p": "0.5"}}],
            "leaf": {"targets": ["y1", "y2"], "independent": [
                {"kind": "bernoulli", "p": "0.25 + 0.5*x1"},
                {"kind": "bernoulli", "p": "0.5"}
            ]}
        }"#;
        let (joint, _) = parse_model(text).unwrap().compile().unwrap();
        // given x1 = 0: P(y1=1) = 0.25 independent of y2
        let given0 = joint.condition(&[0.0]).unwrap();
        assert!((given0.covariance_direct().unwrap()).abs() < 1e-15);
        let p11: f64 = given0
            .atoms()
            .iter()
            .filter(|a| a.values == vec![1.0, 1.0])
            .map(|a| a.prob)
            .sum();
        assert!((p11 - 0.125).abs() < 1e-15);
    }

    #[test]
    fn constant_parameters_give_product_distribution() {
        let text = br#"{
            "levels": [
                {"name": "x1", "dist": {"kind": "categorical", "values": [0, 1, 2], "probs": ["0.2", "0.3", "0.5"]}},
                {"name": "x2", "dist": {"kind": "bernoulli", "p": "0.25"}}
            ],
            "leaf": {"targets": ["y"], "expr_atoms": [[["1"], "1"]]}
        }"#;
        let (joint, _) = parse_model(text).unwrap().compile().unwrap();
        let p1 = [0.2, 0.3, 0.5];
        let p2 = [0.75, 0.25];
        for atom in joint.atoms() {
            let want = p1[atom.values[0] as usize] * p2[atom.values[1] as usize];
            assert!((atom.prob - want).abs() < 1e-15);
        }
    }

    #[test]
    fn leaf_case_probabilities_must_sum_to_one() {
        let text = br#"{
            "levels": [{"name": "x1", "dist": {"kind": "bernoulli", "p": "0.5"}}],
            "leaf": {"targets": ["y"], "cases": [
                {"when": {"x1": 0}, "atoms": [[[0], 0.5]]},
                {"when": {"x1": 1}, "atoms": [[[1], 1.0]]}
            ]}
        }"#;
        assert!(matches!(
            parse_model(text),
            Err(Error::InvalidProbability(_))
        ));
    }

    #[test]
    fn model_json_round_trip() {
        let text = br#"{
            "levels": [
                {"name": "x1", "dist": {"kind": "bernoulli", "p": "0.5"}},
                {"name": "x2", "dist": {"kind": "categorical", "values": [-1, 1], "probs": ["min(0.9, 0.5 + 0.2*x1)", "1 - min(0.9, 0.5 + 0.2*x1)"]}}
            ],
            "leaf": {"targets": ["y"], "expr_atoms": [[["x1 - x2"], "1"]]}
        }"#;
        let model = parse_model(text).unwrap();
        let back = parse_model(model.to_json().as_bytes()).unwrap();
        assert_eq!(model, back);
    }
}
