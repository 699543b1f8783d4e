//! Greedy against beam search on the dot product of eight elements.
use slotwise::corpus::{gen_bench, BenchSpec, Kernel};
use slotwise::cost::metrics;
use slotwise::optimizer::{beam, greedy, SearchConfig};

fn main() -> anyhow::Result<()> {
    let p = gen_bench(&BenchSpec::new(Kernel::DotProduct, 8))?;
    let cfg = SearchConfig::default();
    for (name, out) in [("greedy", greedy(&p, &cfg)), ("beam16", beam(&p, 16, &cfg))] {
        let m = metrics(&out.program);
        println!(
            "{name:>7}: cost {} -> {} in {} steps; muls {} rots {} adds {}",
            out.cost_initial,
            out.cost_final,
            out.steps(),
            m.ct_ct_mul,
            m.rotations,
            m.vec_add
        );
    }
    Ok(())
}
