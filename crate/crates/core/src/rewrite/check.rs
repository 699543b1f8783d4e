//! Randomized soundness check of the catalog.
//!
//! Random programs are walked through random rewrites; every applied rewrite
//! is compared against its predecessor on the program's output prefix.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{apply_program, catalog, match_sites};
use crate::corpus::{gen_random, GenParams};
use crate::semantics::equiv_prefix;

/// Per-rule tally of a soundness run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RuleTally {
    pub rule: String,
    pub applied: usize,
    pub failures: usize,
    /// Printed source and result of the first failure.
    pub example: Option<(String, String)>,
}

const WALK: usize = 8;
const BINDINGS: usize = 10;

/// Runs `trials` random walks. Indexed like the catalog.
pub fn check_rules(trials: usize, seed: u64) -> Vec<RuleTally> {
    let cat = catalog();
    let mut tally: Vec<RuleTally> = cat
        .rules()
        .iter()
        .map(|r| RuleTally {
            rule: r.name().to_string(),
            ..Default::default()
        })
        .collect();
    let params = GenParams {
        count: trials,
        depth: (1, 4),
        width: (1, 4),
        seed,
        ..Default::default()
    };
    let programs = gen_random(&params).expect("static parameters are valid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for start in programs {
        let mut p = start;
        for _ in 0..WALK {
            let options: Vec<_> = cat
                .rules()
                .iter()
                .flat_map(|r| match_sites(r, p.body()).into_iter().map(move |s| (r, s)))
                .collect();
            let Some((rule, site)) = options.choose(&mut rng) else { break };
            let Ok(next) = apply_program(rule, &p, site) else { continue };
            let t = &mut tally[rule.index()];
            t.applied += 1;
            let ok = equiv_prefix(&p, &next, p.output_width(), BINDINGS, rng.gen())
                .map(|r| r.equivalent)
                .unwrap_or(false);
            if !ok {
                t.failures += 1;
                t.example.get_or_insert((p.to_string(), next.to_string()));
            }
            p = next;
        }
    }
    tally
}
