//! Enumerate the rule sites of a program and apply one rewrite by hand.
use slotwise::ir::parse_program;
use slotwise::rewrite::{apply_program, catalog, match_sites};

fn main() -> anyhow::Result<()> {
    let p = parse_program("(Vec (+ (* a b) (* a c)) (+ x y))")?;
    let cat = catalog();
    println!("{} rules ({})", cat.len(), cat.version());
    for rule in cat.rules() {
        let sites = match_sites(rule, p.body());
        if !sites.is_empty() {
            println!("{:<28} {} site(s) [{}]", rule.name(), sites.len(), rule.contract());
        }
    }
    let rule = cat.by_name("comm-factor").expect("factoring rule");
    let site = &match_sites(rule, p.body())[0];
    println!("{}", apply_program(rule, &p, site)?);
    Ok(())
}
