//! Bring your own samplers: estimation without an enumerated joint.
//!
//! The sampler-chain interface only needs draw functions and exact
//! conditional-moment oracles, so a model can be specified by formulas
//! instead of tables. Here: x1 ~ Bernoulli(0.3) and y | x1 ~
//! Bernoulli(0.2 + 0.6 x1), in variance mode (both targets are y).
//!
//! With m(x1) = 0.2 + 0.6 x1:
//!   - level term:  Var(m(X1)) = 0.36 * 0.3 * 0.7         = 0.0756
//!   - leaf term:   E[m(X1)(1 - m(X1))] = 0.16             = 0.1600
//!   - total:       Var(Y) = 0.38 * 0.62                   = 0.2356
//!
//! ```bash
//! cargo run --example custom_samplers
//! ```

use momentdecomp::{
    estimate_term, estimate_total, LeafSampler, LevelSampler, MomentOracle, SamplerChain, Stream,
};

fn mean_given(x1: f64) -> f64 {
    0.2 + 0.6 * x1
}

fn main() {
    let levels: Vec<LevelSampler> = vec![Box::new(|_prefix: &[f64], rng: &mut Stream| {
        f64::from(rng.next_f64() < 0.3)
    })];
    let leaf: LeafSampler = Box::new(|prefix: &[f64], rng: &mut Stream| {
        let y = f64::from(rng.next_f64() < mean_given(prefix[0]));
        (y, y)
    });
    let oracle = MomentOracle {
        mean1: Box::new(|prefix: &[f64]| Some(mean_given(prefix[0]))),
        mean2: Box::new(|prefix: &[f64]| Some(mean_given(prefix[0]))),
        cov12: Box::new(|prefix: &[f64]| {
            let m = mean_given(prefix[0]);
            Some(m * (1.0 - m))
        }),
    };
    let chain = SamplerChain::new(levels, leaf, oracle, 424242);

    let truth = [0.0756, 0.16];
    for (i, want) in truth.iter().enumerate() {
        let e = estimate_term(&chain, i + 1, 20_000, 64).unwrap();
        println!(
            "term {}: estimate {:+.6} +- {:.6}   analytic {want:+.6}",
            i + 1,
            e.estimate,
            e.se
        );
    }
    let total = estimate_total(&chain, 50_000);
    println!(
        "total:  estimate {:+.6} +- {:.6}   analytic {:+.6}",
        total.estimate, total.se, 0.2356
    );
}
