//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). It exits non-zero when a
//! criterion fails, except for checks listed in `KNOWN_DEVIATIONS`, which
//! still print FAIL but are documented as unattainable.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use slotwise::canon::{canon_key, canon_tokens};
use slotwise::corpus::{gen_bench, gen_random, load_dataset_str, BenchSpec, GenParams, Kernel};
use slotwise::cost::{metrics, total_cost, CostTable, Weights};
use slotwise::env::{final_reward, step_reward, Action, Env, EnvConfig};
use slotwise::keys::{components, naf, plan_keys, KeyPlan};
use slotwise::optimizer::{
    beam, greedy, policy_optimize, rule_head_gradient, rule_head_objective, sample_episode, train,
    DecodeMode, Policy, SearchConfig, TrainConfig,
};
use slotwise::report::{run_suite, suite_csv, without_wall_time, Strategy, SuiteConfig};
use slotwise::rewrite::{apply_program, catalog};
use slotwise::semantics::equiv_prefix;
use slotwise::Program;

use common::*;

/// Sub-checks that cannot pass as stated; see the project notes.
const KNOWN_DEVIATIONS: &[&str] = &["6c"];

struct Check {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn check(id: &'static str, pass: bool, detail: impl Into<String>) -> Check {
    Check {
        id,
        pass,
        detail: detail.into(),
    }
}

fn criterion_1() -> Vec<Check> {
    let table = CostTable::toy();
    let w = Weights::new(1.0, 0.0, 0.0);
    let cases = [
        ("1a", "ten-product circuit", prog(TEN_PRODUCTS), 9.1),
        ("1b", "two-slot hand plan", two_slot_plan(), 8.1),
        ("1c", "three-slot hand plan", three_slot_plan(), 10.1),
    ];
    cases
        .into_iter()
        .map(|(id, name, p, want)| {
            let got = total_cost(p.body(), &table, &w);
            check(id, (got - want).abs() <= 1e-9, format!("{name} toy cost {got} (want {want})"))
        })
        .collect()
}

fn criterion_2() -> Vec<Check> {
    let results: Vec<(String, usize, usize)> = catalog()
        .rules()
        .par_iter()
        .map(|rule| {
            let inst = rule_instances(rule, 200, 40_000, 0xC0FFEE ^ rule.index() as u64);
            let mut failures = 0;
            for (i, (p, site)) in inst.iter().enumerate() {
                let q = match apply_program(rule, p, site) {
                    Ok(q) => q,
                    Err(_) => {
                        failures += 1;
                        continue;
                    }
                };
                let ok = equiv_prefix(p, &q, p.output_width(), 10, i as u64)
                    .map(|r| r.equivalent)
                    .unwrap_or(false);
                if !ok {
                    failures += 1;
                }
            }
            (rule.name().to_string(), inst.len(), failures)
        })
        .collect();
    let short: Vec<&(String, usize, usize)> = results.iter().filter(|r| r.1 < 200).collect();
    let failed: Vec<&(String, usize, usize)> = results.iter().filter(|r| r.2 > 0).collect();
    let total: usize = results.iter().map(|r| r.1).sum();
    vec![
        check(
            "2a",
            short.is_empty(),
            format!(
                "{} rules with >= 200 instances ({} instances total){}",
                results.len() - short.len(),
                total,
                if short.is_empty() {
                    String::new()
                } else {
                    format!("; short: {:?}", short)
                }
            ),
        ),
        check(
            "2b",
            failed.is_empty(),
            format!("equivalence failures: {:?}", failed),
        ),
    ]
}

fn semantic_kernels() -> Vec<BenchSpec> {
    let mut specs = Vec::new();
    for k in [Kernel::DotProduct, Kernel::Hamming, Kernel::L2] {
        for n in [4, 8, 16] {
            specs.push(BenchSpec::new(k, n));
        }
    }
    for k in [Kernel::BoxBlur, Kernel::Gx, Kernel::Gy, Kernel::RobertsCross] {
        specs.push(BenchSpec::new(k, 3));
    }
    specs.push(BenchSpec::new(Kernel::MatMul, 3));
    specs.push(BenchSpec::new(Kernel::Max, 3));
    specs.push(BenchSpec::tree(100, 100, 4, 1));
    specs.push(BenchSpec::tree(100, 50, 4, 2));
    specs.push(BenchSpec::tree(50, 50, 5, 3));
    specs
}

fn criterion_3() -> Vec<Check> {
    let cfg = SearchConfig::default();
    let specs = semantic_kernels();
    let failures: Vec<String> = specs
        .par_iter()
        .flat_map(|s| {
            let p = gen_bench(s).unwrap();
            let outs = [("greedy", greedy(&p, &cfg)), ("beam8", beam(&p, 8, &cfg))];
            outs.into_iter()
                .filter_map(|(name, o)| {
                    let ok = equiv_prefix(&p, &o.program, p.output_width(), 50, 7)
                        .map(|r| r.equivalent)
                        .unwrap_or(false);
                    (!ok).then(|| format!("{}/{name}", s.id()))
                })
                .collect::<Vec<_>>()
        })
        .collect();
    vec![check(
        "3",
        failures.is_empty(),
        format!("{} kernels x 2 strategies; failures: {:?}", specs.len(), failures),
    )]
}

fn criterion_4() -> Vec<Check> {
    let cfg = SearchConfig::default();
    [(4usize, "4a"), (8, "4b"), (16, "4c")]
        .par_iter()
        .map(|&(n, id)| {
            let p = gen_bench(&BenchSpec::new(Kernel::DotProduct, n)).unwrap();
            let out = beam(&p, 16, &cfg);
            let m = metrics(&out.program);
            let lg = n.ilog2() as usize;
            let muls = m.ct_ct_mul + m.ct_pt_mul;
            let ok = muls == 1
                && m.rotations <= lg + 1
                && m.vec_add <= lg + 1
                && m.mult_depth == 1
                && equiv_prefix(&p, &out.program, 1, 20, 0).unwrap().equivalent;
            check(
                id,
                ok,
                format!(
                    "dot-product-{n}: mul={muls} rot={} add={} mult_depth={} cost {} -> {}",
                    m.rotations, m.vec_add, m.mult_depth, out.cost_initial, out.cost_final
                ),
            )
        })
        .collect()
}

/// Shared random corpus for criteria 5 (search) and friends.
fn search_corpus(count: usize, seed: u64) -> Vec<Program> {
    gen_random(&GenParams {
        count,
        depth: (1, 5),
        width: (1, 8),
        seed,
        ..Default::default()
    })
    .unwrap()
}

fn criterion_5() -> Vec<Check> {
    let cfg = SearchConfig::default();
    let corpus = search_corpus(500, 2024);
    let rows: Vec<(f64, f64, f64)> = corpus
        .par_iter()
        .map(|p| {
            let g = greedy(p, &cfg);
            let b = beam(p, 8, &cfg);
            (g.cost_initial, g.cost_final, b.cost_final)
        })
        .collect();
    let greedy_ok = rows.iter().all(|(c0, g, _)| g <= c0);
    let beam_le = rows.iter().filter(|(_, g, b)| b <= g).count();
    let beam_never_worse_than_input = rows.iter().all(|(c0, _, b)| b <= c0);
    vec![
        check(
            "5a",
            greedy_ok,
            format!("greedy final <= initial on {}/{}", rows.iter().filter(|r| r.1 <= r.0).count(), rows.len()),
        ),
        check(
            "5b",
            beam_le * 100 >= rows.len() * 95 && beam_never_worse_than_input,
            format!(
                "beam(8) <= greedy on {beam_le}/{} ({:.1}%)",
                rows.len(),
                100.0 * beam_le as f64 / rows.len() as f64
            ),
        ),
    ]
}

fn criterion_6() -> Vec<Check> {
    let expected: [(i64, &[i64]); 13] = [
        (1, &[1]),
        (2, &[2]),
        (3, &[-1, 4]),
        (4, &[4]),
        (5, &[1, 4]),
        (6, &[-2, 8]),
        (7, &[-1, 8]),
        (9, &[1, 8]),
        (10, &[2, 8]),
        (12, &[-4, 16]),
        (11, &[-1, -4, 16]),
        (13, &[1, -4, 16]),
        (15, &[-1, 16]),
    ];
    let naf_ok = expected.iter().all(|(s, want)| {
        let got: BTreeSet<i64> = naf(*s).unwrap().into_iter().collect();
        got == want.iter().copied().collect()
    });
    let gamma_ok = components(12, 16).unwrap() == vec![-4] && components(15, 16).unwrap() == vec![-1];
    let chi: BTreeSet<i64> = expected.iter().map(|(s, _)| *s).collect();
    let plan = plan_keys(&chi, 16, 9);
    let plan_detail = match &plan {
        Ok(p) => format!("greedy plan: {} keys {:?}, omega {:?}", p.keys.len(), p.keys, p.omega),
        Err(e) => format!("greedy plan failed: {e}"),
    };
    let plan_ok = plan.as_ref().is_ok_and(|p| p.keys.len() <= 9 && p.is_valid());
    let omega: BTreeSet<i64> = [1, 2, 3, 4, 5, 6, 7, 9, 12, 15].into_iter().collect();
    let want: BTreeSet<i64> = [10, 11, 13, 1, 2, 4, -1, -4, 8].into_iter().collect();
    // beta large enough to inspect the key set the reference omega produces
    let fixture = KeyPlan::with_omega(&chi, 16, 64, &omega).unwrap();
    vec![
        check("6a", naf_ok && gamma_ok, "NAF of the 13 reference steps, reduced components"),
        check("6b", plan_ok, plan_detail),
        check(
            "6c",
            fixture.keys == want,
            format!(
                "reference omega gives keys {:?} ({}); stated set omits -2 from NAF(6) = -2 + 8",
                fixture.keys,
                fixture.keys.len()
            ),
        ),
    ]
}

fn criterion_7() -> Vec<Check> {
    let unit = (step_reward(100.0, 80.0) - 0.2).abs() < 1e-12
        && (final_reward(100.0, 80.0) - 20.0).abs() < 1e-12
        && step_reward(0.0, 0.0) == 0.0
        && final_reward(0.0, 3.0) == 0.0;
    // telescoping over random rewrite-only episodes with positive costs
    let env = Env::new(EnvConfig {
        max_steps: 1000,
        ..Default::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for p in search_corpus(60, 5) {
        let mut s = env.reset(&p);
        let mut prod = 1.0;
        for _ in 0..20 {
            let mask = env.action_mask(&s).unwrap();
            let legal: Vec<(usize, usize)> = mask
                .counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(r, &c)| (r, c))
                .collect();
            if legal.is_empty() {
                break;
            }
            let (rule, c) = legal[rng.gen_range(0..legal.len())];
            let before = s.last_cost;
            let out = env
                .step(&mut s, Action::Rewrite { rule, site: rng.gen_range(0..c) })
                .unwrap();
            if before == 0.0 {
                break;
            }
            prod *= 1.0 - out.reward;
        }
        if s.initial_cost > 0.0 && s.last_cost > 0.0 {
            worst = worst.max((prod - s.last_cost / s.initial_cost).abs());
        }
    }
    vec![
        check("7a", unit, "R_step and R_final, including zero-cost cases"),
        check("7b", worst <= 1e-9, format!("telescoping max error {worst:e}")),
    ]
}

fn criterion_8() -> Vec<Check> {
    let base = gen_random(&GenParams {
        count: 10_000,
        depth: (1, 6),
        width: (1, 8),
        seed: 88,
        ..Default::default()
    })
    .unwrap();
    let bad = base
        .par_iter()
        .enumerate()
        .filter(|(i, p)| {
            let mut rng = ChaCha8Rng::seed_from_u64(*i as u64);
            let a = alpha_variant(p, &mut rng);
            let c = constant_variant(p, &mut rng);
            canon_tokens(p) != canon_tokens(&a) || canon_tokens(p) != canon_tokens(&c)
        })
        .count();
    // k alpha-copies of m distinct programs
    let mut distinct = Vec::new();
    let mut keys = BTreeSet::new();
    for p in search_corpus(400, 9) {
        if keys.insert(canon_key(&p)) {
            distinct.push(p);
        }
        if distinct.len() == 50 {
            break;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut lines = Vec::new();
    for p in &distinct {
        for _ in 0..4 {
            lines.push(alpha_variant(p, &mut rng).to_string());
        }
    }
    let ds = load_dataset_str(&lines.join("\n"), &[]);
    vec![
        check("8a", bad == 0, format!("10000 variant pairs, {bad} token mismatches")),
        check(
            "8b",
            ds.programs.len() == distinct.len(),
            format!("4 copies of {} programs -> {} survivors", distinct.len(), ds.programs.len()),
        ),
    ]
}

fn identity_corpus(names: &[&str]) -> Vec<Program> {
    names.iter().map(|n| prog(&format!("(Vec (* {n} 1))"))).collect()
}

fn criterion_9() -> Vec<Check> {
    let corpus = gen_random(&GenParams {
        count: 200,
        depth: (1, 4),
        width: (1, 4),
        seed: 9,
        ..Default::default()
    })
    .unwrap();
    let cfg = TrainConfig {
        lr: 0.05,
        episodes: 4000,
        seed: 9,
        ..Default::default()
    };
    let (_, log) = train(&corpus, &cfg).unwrap();
    let (first, last) = (log.mean_first(100), log.mean_last(100));

    let train_set = identity_corpus(&["x", "y", "z", "w", "u", "v"]);
    let held_out = identity_corpus(&["alpha", "beta", "k9", "m_1", "t"]);
    let id_cfg = TrainConfig {
        lr: 0.05,
        episodes: 400,
        seed: 1,
        ..Default::default()
    };
    let (pol, _) = train(&train_set, &id_cfg).unwrap();
    let solved = held_out
        .iter()
        .filter(|p| {
            let out = policy_optimize(p, &pol, &EnvConfig::default(), DecodeMode::Greedy);
            out.cost_final == 0.0 && out.steps() == 1
        })
        .count();

    // finite-difference check of the rule head on a fixed batch
    let env = Env::new(EnvConfig::default());
    let mut pol = Policy::uniform();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for w in pol.rule_w.iter_mut() {
        *w = rng.gen_range(-0.1..0.1);
    }
    let mut steps = Vec::new();
    for p in corpus.iter().take(6) {
        steps.extend(sample_episode(&env, &pol, p, &mut rng).steps);
    }
    let adv: Vec<f64> = (0..steps.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g = rule_head_gradient(&pol, &steps, &adv);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let nonzero: Vec<usize> = (0..g.len()).filter(|&i| g[i].abs() > 1e-6).collect();
    for &i in nonzero.iter().step_by((nonzero.len() / 40).max(1)) {
        let mut plus = pol.clone();
        plus.rule_w[i] += h;
        let mut minus = pol.clone();
        minus.rule_w[i] -= h;
        let fd = (rule_head_objective(&plus, &steps, &adv) - rule_head_objective(&minus, &steps, &adv))
            / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / g[i].abs().max(fd.abs()));
    }
    vec![
        check(
            "9a",
            last > first,
            format!("mean terminal reward first 100 = {first:.2}, last 100 = {last:.2} ({} episodes)", log.terminal_rewards.len()),
        ),
        check(
            "9b",
            solved == held_out.len(),
            format!("identity corpus: {solved}/{} held-out solved in 1 step", held_out.len()),
        ),
        check(
            "9c",
            worst <= 1e-4 && !nonzero.is_empty(),
            format!("gradient check max relative error {worst:e}"),
        ),
    ]
}

fn criterion_10() -> Vec<Check> {
    let specs = [
        BenchSpec::new(Kernel::DotProduct, 4),
        BenchSpec::new(Kernel::DotProduct, 8),
        BenchSpec::new(Kernel::Hamming, 4),
        BenchSpec::new(Kernel::BoxBlur, 3),
        BenchSpec::new(Kernel::LinearRegression, 4),
        BenchSpec::tree(100, 50, 4, 5),
    ];
    let cfg = SuiteConfig {
        strategies: vec![
            Strategy::None,
            Strategy::Greedy,
            Strategy::Beam(4),
            Strategy::Random { samples: 4, seed: 3 },
        ],
        seed: 10,
        ..Default::default()
    };
    let a = without_wall_time(&suite_csv(&run_suite(&specs, &cfg)));
    let b = without_wall_time(&suite_csv(&run_suite(&specs, &cfg)));
    vec![check("10", a == b, format!("{} rows, identical modulo wall time: {}", a.lines().count() - 1, a == b))]
}

type Criterion = (&'static str, fn() -> Vec<Check>, Duration);

fn main() {
    // `cargo test -- --list` style probes pass extra flags; run anyway
    let criteria: [Criterion; 10] = [
        ("toy costs", criterion_1, Duration::from_secs(1)),
        ("rule soundness", criterion_2, Duration::from_secs(120)),
        ("semantic safety", criterion_3, Duration::from_secs(300)),
        ("dot-product shape", criterion_4, Duration::from_secs(120)),
        ("cost monotonicity", criterion_5, Duration::from_secs(300)),
        ("NAF planner", criterion_6, Duration::from_secs(1)),
        ("reward formulas", criterion_7, Duration::from_secs(1)),
        ("canonical tokens", criterion_8, Duration::from_secs(30)),
        ("policy learning", criterion_9, Duration::from_secs(600)),
        ("determinism", criterion_10, Duration::from_secs(300)),
    ];
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut unexpected = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        let checks = run();
        let took = start.elapsed();
        let pass = checks.iter().all(|c| c.pass) && took <= *budget;
        println!(
            "criterion {n:>2} {:<18} {}  ({:.2}s, budget {}s)",
            name,
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs()
        );
        for c in &checks {
            let known = KNOWN_DEVIATIONS.contains(&c.id);
            println!(
                "    {:<3} {}{}  {}",
                c.id,
                if c.pass { "pass" } else { "fail" },
                if !c.pass && known { " (known deviation)" } else { "" },
                c.detail
            );
            if !c.pass && !known {
                unexpected += 1;
            }
        }
        if took > *budget {
            println!("    over time budget");
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} unexpected acceptance failure(s)");
        std::process::exit(1);
    }
}
