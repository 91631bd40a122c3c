//! Exact and Monte Carlo decomposition of variance and covariance over
//! k-level hierarchical discrete models.
//!
//! For a chain `x1 -> x2 -> ... -> xk` feeding one or two target variables,
//! the total variance (or covariance) of the targets splits into `k + 1`
//! additive terms, one per conditioning level: term `i` applies the variance
//! or covariance operator at level `i` and conditional expectations
//! everywhere else, and term `k + 1` is the noise left below the full chain.
//! This crate computes every term exactly on finite models, re-derives each
//! term along independent operator routes as a numerical certificate, and
//! estimates the same terms by seeded Monte Carlo when enumeration is not
//! an option.
//!
//! ```
//! use momentdecomp::{decompose_variance, parse_model};
//!
//! let model = parse_model(br#"{
//!     "levels": [
//!         {"name": "x1", "dist": {"kind": "bernoulli", "p": "0.5"}},
//!         {"name": "x2", "dist": {"kind": "bernoulli", "p": "0.25 + 0.5*x1"}}
//!     ],
//!     "leaf": {"targets": ["y"], "expr_atoms": [[["x1 + x2"], "1"]]}
//! }"#).unwrap();
//! let (joint, _report) = model.compile().unwrap();
//!
//! let d = decompose_variance(&joint).unwrap();
//! assert_eq!(d.terms.len(), 3);               // one term per level + leaf noise
//! assert!((d.terms[0] - 0.5625).abs() < 1e-12);
//! assert!((d.terms[1] - 0.1875).abs() < 1e-12);
//! assert!(d.residual <= 1e-12);               // terms sum to the direct variance
//! ```
//!
//! The `examples/` directory has one runnable program per capability:
//! exact variance and covariance decomposition, the literal operator grid,
//! tower-property certification, Monte Carlo estimation with hand-written
//! samplers, and a random verification campaign. The `momentdecomp` binary
//! exposes the same machinery over model files.

pub mod cli;
pub mod decomp;
pub mod error;
pub mod expr;
pub mod fuzz;
pub mod joint;
pub mod mc;
pub mod model;
pub mod rng;

pub use decomp::{
    cov_term_collapsed, cov_term_literal, decompose_covariance, decompose_variance,
    grid_term_eval, iterated_expectation, CovDecomposition, DecompReport, MomentOp,
    OperatorGrid, VarDecomposition,
};
pub use error::{Error, Result};
pub use expr::ParamExpr;
pub use fuzz::{
    measure_identities, random_chain_model, random_joint, run_joint_trials, run_model_trials,
    FuzzConfig, IdentityGaps,
};
pub use joint::{Atom, FiniteJoint, PrefixTable};
pub use mc::{
    estimate_term, estimate_total, wrap_exact, LeafSampler, LevelSampler, McEstimate,
    MomentOracle, SamplerChain,
};
pub use model::{
    parse_model, ChainModel, CompileReport, DistSpec, LeafBody, LeafCase, LeafSpec, LevelSpec,
};
pub use rng::Stream;
