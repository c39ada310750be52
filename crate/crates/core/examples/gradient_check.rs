//! Compares the hand-derived gradients of the joint loss with central
//! finite differences on random micro-instances, per parameter tensor.
//!
//! cargo run --release --example gradient_check [instances]

use prgc::training::{check_gradients, micro_instance, LossWeights};
use prgc::types::TaggingMode;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> prgc::Result<()> {
    let count: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(6);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let weights = LossWeights {
        alpha: 1.0,
        beta: 0.7,
        gamma: 1.3,
    };
    for i in 0..count {
        let mode = if i % 2 == 0 {
            TaggingMode::Dual
        } else {
            TaggingMode::Single
        };
        let (model, p) = micro_instance(&mut rng, mode)?;
        let check = check_gradients(&model, &p.ids, &p.gold, weights, 1e-5, 1e-7)?;
        println!(
            "instance {i} ({mode}, n={}, d={}, n_r={}): {} entries, max rel error {:.2e}",
            p.ids.len(),
            model.encoder.config.dim,
            model.relations.len(),
            check.entries(),
            check.max_rel_error()
        );
        for t in &check.tensors {
            println!(
                "    {:<28} {:>4} {:.2e}",
                t.name, t.entries, t.max_rel_error
            );
        }
    }
    Ok(())
}
