//! Certify the expectation tower and the collapsed evaluators numerically.
//!
//! Two cross-checks on a three-level chain:
//!
//! 1. evaluating `E[u(y)]` as nested conditional expectations, one level at
//!    a time, agrees with the direct probability-weighted sum;
//! 2. every covariance term computed from the literal nested operator chain
//!    agrees with the collapsed conditional-mean form.
//!
//! The second check is the mechanical witness that collapsing an expectation
//! tower is sound on this model: the literal evaluator never uses the tower
//! identity, the collapsed one uses it everywhere.
//!
//! ```bash
//! cargo run --example tower_property
//! ```

use momentdecomp::{
    cov_term_collapsed, cov_term_literal, iterated_expectation, random_joint, FuzzConfig,
};

fn main() {
    // a reproducible random three-level joint with two targets
    let cfg = FuzzConfig::sample(2718, 3, 2, 0.2);
    let joint = random_joint(&cfg);
    println!(
        "random joint: k = {}, {} atoms, supports {:?}\n",
        joint.k(),
        joint.atoms().len(),
        cfg.support_sizes
    );

    println!("expectation tower:");
    type TargetFn = fn(&[f64]) -> f64;
    let functions: [(&str, TargetFn); 3] = [
        ("y1", |y| y[0]),
        ("y1*y2", |y| y[0] * y[1]),
        ("y1^2", |y| y[0] * y[0]),
    ];
    for (label, u) in functions {
        let nested = iterated_expectation(&joint, u);
        let direct = joint.expect(u);
        println!(
            "  E[{label:<5}] nested {nested:+.12}   direct {direct:+.12}   gap {:.2e}",
            (nested - direct).abs()
        );
    }

    println!("\nliteral vs collapsed covariance terms:");
    for i in 1..=joint.k() + 1 {
        let literal = cov_term_literal(&joint, i).unwrap();
        let collapsed = cov_term_collapsed(&joint, i).unwrap();
        println!(
            "  term {i}: literal {literal:+.12}   collapsed {collapsed:+.12}   gap {:.2e}",
            (literal - collapsed).abs()
        );
    }
}
