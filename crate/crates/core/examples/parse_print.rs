//! Parse a program, inspect its types, and print it back.
use slotwise::ir::{parse_program, print_program};

fn main() -> anyhow::Result<()> {
    let src = "(program (inputs (ct a) (pt w)) (output-width 1) \
               (VecAdd (Vec (* a w) 0) (<< (Vec (* a w) 0) 1)))";
    let p = parse_program(src)?;
    println!("width {} (output {})", p.width(), p.output_width());
    for i in p.inputs() {
        println!("input {} : {}", i.name, i.kind.tag());
    }
    println!("size {} depth {}", p.body().size(), p.body().depth());
    let printed = print_program(&p);
    assert_eq!(parse_program(&printed)?, p);
    println!("{printed}");
    Ok(())
}
