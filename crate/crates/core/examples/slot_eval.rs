//! Evaluate programs slot by slot and check that a rewrite kept the
//! observable prefix.
use slotwise::ir::parse_program;
use slotwise::semantics::{equiv_prefix, eval, Binding, DEFAULT_MODULUS};

fn main() -> anyhow::Result<()> {
    let naive = parse_program("(Vec (+ (* a b) (* c d)))")?;
    let packed = parse_program(
        "(program (inputs (ct a) (ct b) (ct c) (ct d)) (output-width 1) \
         (VecAdd (VecMul (Vec a c) (Vec b d)) (<< (VecMul (Vec a c) (Vec b d)) 1)))",
    )?;
    let b = Binding::new(DEFAULT_MODULUS)
        .with("a", 2)
        .with("b", 3)
        .with("c", 4)
        .with("d", 5);
    println!("naive  {:?}", eval(&naive, &b)?.slots());
    println!("packed {:?}", eval(&packed, &b)?.slots());
    let r = equiv_prefix(&naive, &packed, 1, 50, 7)?;
    println!("prefix-equivalent on 50 random bindings: {}", r.equivalent);
    Ok(())
}
