//! Train a small policy on random programs and decode with it.
use slotwise::corpus::{gen_random, GenParams};
use slotwise::optimizer::{policy_optimize, train, DecodeMode, TrainConfig};

fn main() -> anyhow::Result<()> {
    let corpus = gen_random(&GenParams {
        count: 100,
        depth: (1, 3),
        width: (1, 3),
        seed: 1,
        ..Default::default()
    })?;
    let cfg = TrainConfig {
        lr: 0.05,
        episodes: 800,
        seed: 1,
        ..Default::default()
    };
    let (policy, log) = train(&corpus, &cfg)?;
    println!(
        "mean terminal reward: first 100 {:.2}, last 100 {:.2}",
        log.mean_first(100),
        log.mean_last(100)
    );
    let out = policy_optimize(&corpus[0], &policy, &cfg.env, DecodeMode::Greedy);
    println!("{} -> {}: {}", out.cost_initial, out.cost_final, out.program);
    println!("{} weight lines", policy.to_text().lines().count());
    Ok(())
}
