//! Drive the rewrite environment by hand: take the rewrite with the best
//! one-step reward until nothing improves, then END.
use slotwise::env::{Action, Env, EnvConfig};
use slotwise::ir::parse_program;

fn main() -> anyhow::Result<()> {
    let env = Env::new(EnvConfig::default());
    let p = parse_program("(Vec (+ (* a 1) (* b 0)) (- c c))")?;
    let mut s = env.reset(&p);
    loop {
        let mask = env.action_mask(&s)?;
        let mut best = (Action::End, 0.0);
        for (rule, &n) in mask.counts.iter().enumerate() {
            for site in 0..n {
                let a = Action::Rewrite { rule, site };
                let r = env.step(&mut s.clone(), a)?.reward;
                if r > best.1 {
                    best = (a, r);
                }
            }
        }
        let out = env.step(&mut s, best.0)?;
        let t = s.trace.last().expect("one entry per step");
        println!("{:>2} {:<24} reward {:>8.4} cost {}", t.step, t.rule_name, t.reward, t.cost_after);
        if out.done {
            break;
        }
    }
    println!("{}", s.program);
    Ok(())
}
