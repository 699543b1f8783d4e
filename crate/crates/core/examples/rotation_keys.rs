//! Fit the rotation steps of a program into a small key budget.
use std::collections::BTreeSet;

use slotwise::keys::{naf, plan_keys};

fn main() -> anyhow::Result<()> {
    for s in [3, 7, 11, 13] {
        println!("NAF({s}) = {:?}", naf(s)?);
    }
    let chi: BTreeSet<i64> = [1, 2, 3, 4, 5, 6, 7, 9, 10, 11, 12, 13, 15].into();
    let plan = plan_keys(&chi, 16, 9)?;
    print!("{plan}");
    assert!(plan.is_valid());
    Ok(())
}
