//! Attribute the variance of a hierarchical outcome to its levels.
//!
//! A two-level claims model: a risk class drives an exposure flag, and the
//! loss count depends on both. The decomposition splits Var(loss) into one
//! component per level plus the residual noise below the full chain, and the
//! components provably sum to the direct variance.
//!
//! ```bash
//! cargo run --example variance_decomposition
//! ```

use momentdecomp::{decompose_variance, parse_model};

fn main() {
    let model = parse_model(
        br#"{
        "levels": [
            {"name": "risk_class", "dist": {"kind": "categorical", "values": [0, 1, 2], "probs": ["0.5", "0.3", "0.2"]}},
            {"name": "exposed", "dist": {"kind": "bernoulli", "p": "min(0.9, 0.15 + 0.3*risk_class)"}}
        ],
        "leaf": {
            "targets": ["losses"],
            "expr_atoms": [
                [["risk_class"], "0.6 - 0.2*exposed"],
                [["risk_class + 1"], "0.3"],
                [["risk_class + 2"], "0.1 + 0.2*exposed"]
            ]
        }
    }"#,
    )
    .expect("model parses");

    let (joint, report) = model.compile().expect("model compiles");
    println!(
        "compiled {} atoms over ({}) -> ({}), mass deficit {:.2e}\n",
        report.atom_count,
        joint.cond_vars().join(", "),
        joint.target_vars().join(", "),
        report.mass_deficit
    );

    let d = decompose_variance(&joint).expect("single-target model");
    let labels = [
        "V over risk_class of E[losses | risk_class]",
        "E[ V over exposed of E[losses | risk_class, exposed] ]",
        "E[ V(losses | risk_class, exposed) ]",
    ];
    for (i, (term, label)) in d.terms.iter().zip(labels).enumerate() {
        println!(
            "term {}  {label:<55} {term:.6}  ({:.1}%)",
            i + 1,
            100.0 * term / d.total_direct
        );
    }
    println!("\nsum of terms   {:.6}", d.sum_terms);
    println!("direct Var     {:.6}", d.total_direct);
    println!("residual       {:.2e}", d.residual);
}
