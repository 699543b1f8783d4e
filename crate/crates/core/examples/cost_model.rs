//! Price the same computation in scalar and vectorized form.
use slotwise::cost::{metrics_with, CostTable, Weights};
use slotwise::ir::parse_program;

fn main() -> anyhow::Result<()> {
    let naive = parse_program("(Vec (+ (* a b) (* c d)))")?;
    let packed = parse_program(
        "(program (inputs (ct a) (ct c) (ct b) (ct d)) (output-width 1) \
         (VecAdd (VecMul (Vec a c) (Vec b d)) (<< (VecMul (Vec a c) (Vec b d)) 1)))",
    )?;
    for (table, name) in [(CostTable::default(), "default"), (CostTable::toy(), "toy")] {
        let w = Weights::default();
        let a = metrics_with(&naive, &table, &w);
        let b = metrics_with(&packed, &table, &w);
        println!("{name:>8}: naive {:>7.1}  packed {:>7.1}", a.total, b.total);
    }
    // the shared product is priced once
    let m = metrics_with(&packed, &CostTable::default(), &Weights::default());
    println!("ct-ct muls {} rotations {} additions {}", m.ct_ct_mul, m.rotations, m.vec_add);
    Ok(())
}
