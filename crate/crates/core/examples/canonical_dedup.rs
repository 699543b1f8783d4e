//! Canonical keys ignore variable names and constant values, which makes
//! them a dedup key for training data.
use slotwise::canon::{canon_key, canon_tokens};
use slotwise::corpus::load_dataset_str;
use slotwise::ir::parse_program;

fn main() -> anyhow::Result<()> {
    let p = parse_program("(Vec (+ (* x 7) (* y 7)) (- x 1))")?;
    println!("tokens: {}", canon_tokens(&p));
    println!("key:    {}", canon_key(&p));

    let file = "(Vec (+ (* x 7) (* y 7)) (- x 1))\n\
                (Vec (+ (* u 3) (* v 3)) (- u 1))\n\
                (Vec (+ (* u 3) (* v 4)) (- u 1))\n";
    let ds = load_dataset_str(file, &[]);
    println!("{} kept, {} duplicates", ds.programs.len(), ds.duplicates);
    Ok(())
}
