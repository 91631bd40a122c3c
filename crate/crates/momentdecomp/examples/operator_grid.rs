//! Evaluate the variance decomposition through the operator grid.
//!
//! For a chain of depth k, the grid assigns each of the k+1 terms a row of
//! operators: variance at the term's level, expectation everywhere else.
//! Reading a row left to right reproduces the printed nesting; evaluating it
//! gives the term. The rows sum to the total variance.
//!
//! ```bash
//! cargo run --example operator_grid
//! ```

use momentdecomp::{grid_term_eval, parse_model, MomentOp, OperatorGrid};

fn main() {
    let model = parse_model(
        br#"{
        "levels": [
            {"name": "x1", "dist": {"kind": "bernoulli", "p": "0.5"}},
            {"name": "x2", "dist": {"kind": "bernoulli", "p": "0.25 + 0.5*x1"}},
            {"name": "x3", "dist": {"kind": "bernoulli", "p": "max(0.1, 0.8 - 0.3*x2)"}}
        ],
        "leaf": {
            "targets": ["y"],
            "expr_atoms": [
                [["x1 + x2 + x3"], "0.7"],
                [["x1 - x3"], "0.3"]
            ]
        }
    }"#,
    )
    .expect("model parses");
    let (joint, _) = model.compile().expect("model compiles");

    let k = joint.k();
    let grid = OperatorGrid::new(k);
    let chain = ["x1", "x2|x1", "x3|x1,x2", "y|x1,x2,x3"];

    let mut sum = 0.0;
    for i in 1..=k + 1 {
        let row: Vec<String> = (1..=k + 1)
            .map(|j| {
                let tag = match grid.op(i, j) {
                    MomentOp::Variance => "V",
                    MomentOp::Expectation => "E",
                };
                format!("{tag}_{{{}}}", chain[j - 1])
            })
            .collect();
        let value = grid_term_eval(&joint, &grid, i).unwrap();
        sum += value;
        println!("row {i}:  {:<60} = {value:+.9}", row.join(" "));
    }

    let total = joint.expect(|y| y[0] * y[0]) - joint.expect(|y| y[0]).powi(2);
    println!("\nsum of rows    {sum:+.9}");
    println!("direct Var(y)  {total:+.9}");
    println!("residual       {:.2e}", (sum - total).abs());
}
