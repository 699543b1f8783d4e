use super::{Expr, ExprKind, Program, VarKind};

fn write_expr(e: &Expr, out: &mut String) {
    use ExprKind::*;
    let list = |head: &str, kids: &[&Expr], out: &mut String| {
        out.push('(');
        out.push_str(head);
        for k in kids {
            out.push(' ');
            write_expr(k, out);
        }
        out.push(')');
    };
    match e.kind() {
        Var { name, .. } => out.push_str(name),
        Const(v) => out.push_str(&v.to_string()),
        Neg(c) => list("-", &[c], out),
        Add(l, r) => list("+", &[l, r], out),
        Sub(l, r) => list("-", &[l, r], out),
        Mul(l, r) => list("*", &[l, r], out),
        Vec(cs) => {
            let kids: std::vec::Vec<&Expr> = cs.iter().collect();
            list("Vec", &kids, out)
        }
        VecNeg(c) => list("VecNeg", &[c], out),
        VecAdd(l, r) => list("VecAdd", &[l, r], out),
        VecSub(l, r) => list("VecSub", &[l, r], out),
        VecMul(l, r) => list("VecMul", &[l, r], out),
        Rot(c, s) => {
            out.push_str("(<< ");
            write_expr(c, out);
            out.push(' ');
            out.push_str(&s.to_string());
            out.push(')');
        }
    }
}

pub fn print_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(e, &mut out);
    out
}

/// Header-free when the bare form parses back to the same program.
fn is_bare(p: &Program) -> bool {
    if p.output_width() != p.width() {
        return false;
    }
    let free = p.body().free_vars();
    free.len() == p.inputs().len()
        && free
            .iter()
            .zip(p.inputs())
            .all(|((n, k), d)| *n == d.name && *k == VarKind::Cipher && d.kind == VarKind::Cipher)
}

pub fn print_program(p: &Program) -> String {
    if is_bare(p) {
        return print_expr(p.body());
    }
    let mut out = String::from("(program (inputs");
    for d in p.inputs() {
        out.push_str(&format!(" ({} {})", d.kind.tag(), d.name));
    }
    out.push_str(&format!(") (output-width {}) ", p.output_width()));
    write_expr(p.body(), &mut out);
    out.push(')');
    out
}
