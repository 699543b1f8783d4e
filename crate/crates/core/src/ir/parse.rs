use std::sync::Arc;

use super::{Expr, ExprKind, Input, IrError, Program, VarKind};

#[derive(Debug, Clone)]
enum Sexp {
    Atom { text: String, offset: usize },
    List { items: Vec<Sexp>, offset: usize },
}

impl Sexp {
    fn offset(&self) -> usize {
        match self {
            Sexp::Atom { offset, .. } | Sexp::List { offset, .. } => *offset,
        }
    }

    fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom { text, .. } => Some(text),
            Sexp::List { .. } => None,
        }
    }
}

fn syntax(offset: usize, message: impl Into<String>) -> IrError {
    IrError::Syntax {
        offset,
        message: message.into(),
    }
}

fn read_all(text: &str) -> Result<Vec<Sexp>, IrError> {
    let bytes = text.as_bytes();
    let mut stack: Vec<(usize, Vec<Sexp>)> = Vec::new();
    let mut top: Vec<Sexp> = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b';' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'(' => {
                stack.push((i, Vec::new()));
                i += 1;
            }
            b')' => {
                let (offset, items) = stack
                    .pop()
                    .ok_or_else(|| syntax(i, "unexpected `)`"))?;
                let list = Sexp::List { items, offset };
                match stack.last_mut() {
                    Some((_, parent)) => parent.push(list),
                    None => top.push(list),
                }
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && !matches!(bytes[i], b'(' | b')' | b';')
                {
                    i += 1;
                }
                let atom = Sexp::Atom {
                    text: text[start..i].to_string(),
                    offset: start,
                };
                match stack.last_mut() {
                    Some((_, parent)) => parent.push(atom),
                    None => top.push(atom),
                }
            }
        }
    }
    if let Some((offset, _)) = stack.last() {
        return Err(syntax(*offset, "unbalanced `(`"));
    }
    Ok(top)
}

fn parse_int(text: &str, offset: usize) -> Result<Option<i64>, IrError> {
    let digits = text.strip_prefix('-').unwrap_or(text);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Ok(None);
    }
    text.parse::<i64>()
        .map(Some)
        .map_err(|_| syntax(offset, format!("integer literal `{text}` exceeds 64 bits")))
}

fn is_identifier(text: &str) -> bool {
    let mut chars = text.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

struct Lowering<'a> {
    declared: Option<&'a [Input]>,
}

impl Lowering<'_> {
    fn lower(&self, s: &Sexp) -> Result<Expr, IrError> {
        match s {
            Sexp::Atom { text, offset } => {
                if let Some(v) = parse_int(text, *offset)? {
                    return Ok(Expr::constant(v));
                }
                if !is_identifier(text) {
                    return Err(syntax(*offset, format!("bad token `{text}`")));
                }
                let kind = match self.declared {
                    None => VarKind::Cipher,
                    Some(inputs) => inputs
                        .iter()
                        .find(|d| &*d.name == text.as_str())
                        .map(|d| d.kind)
                        .ok_or_else(|| IrError::type_err(format!("undeclared variable `{text}`")))?,
                };
                Ok(Expr::var(text, kind))
            }
            Sexp::List { items, offset } => {
                let (head, args) = items
                    .split_first()
                    .ok_or_else(|| syntax(*offset, "empty list"))?;
                let op = head
                    .atom()
                    .ok_or_else(|| syntax(head.offset(), "operator must be a symbol"))?;
                self.lower_op(op, args, *offset)
            }
        }
    }

    fn lower_args(&self, args: &[Sexp]) -> Result<Vec<Expr>, IrError> {
        args.iter()
            .enumerate()
            .map(|(i, a)| self.lower(a).map_err(|e| e.under(i)))
            .collect()
    }

    fn lower_op(&self, op: &str, args: &[Sexp], offset: usize) -> Result<Expr, IrError> {
        let arity = |expected: usize| -> Result<(), IrError> {
            if args.len() == expected {
                Ok(())
            } else {
                Err(IrError::Arity {
                    op: op.to_string(),
                    expected,
                    found: args.len(),
                })
            }
        };
        match op {
            "+" | "*" | "VecAdd" | "VecSub" | "VecMul" => {
                arity(2)?;
                let mut kids = self.lower_args(args)?;
                let r = kids.pop().unwrap();
                let l = kids.pop().unwrap();
                let kind = match op {
                    "+" => ExprKind::Add(l, r),
                    "*" => ExprKind::Mul(l, r),
                    "VecAdd" => ExprKind::VecAdd(l, r),
                    "VecSub" => ExprKind::VecSub(l, r),
                    _ => ExprKind::VecMul(l, r),
                };
                Expr::new(kind)
            }
            "-" => match args.len() {
                1 => {
                    let c = self.lower(&args[0]).map_err(|e| e.under(0))?;
                    if c.ty().is_scalar() {
                        Expr::neg(c)
                    } else {
                        Expr::vec_neg(c)
                    }
                }
                2 => {
                    let mut kids = self.lower_args(args)?;
                    let r = kids.pop().unwrap();
                    let l = kids.pop().unwrap();
                    Expr::sub(l, r)
                }
                n => Err(IrError::Arity {
                    op: "-".into(),
                    expected: 2,
                    found: n,
                }),
            },
            "VecNeg" => {
                arity(1)?;
                let c = self.lower(&args[0]).map_err(|e| e.under(0))?;
                Expr::vec_neg(c)
            }
            "Vec" => {
                if args.is_empty() {
                    return Err(IrError::Arity {
                        op: "Vec".into(),
                        expected: 1,
                        found: 0,
                    });
                }
                let kids = self.lower_args(args)?;
                Expr::pack(kids)
            }
            "<<" | ">>" => {
                arity(2)?;
                let c = self.lower(&args[0]).map_err(|e| e.under(0))?;
                let step_text = args[1]
                    .atom()
                    .ok_or_else(|| syntax(args[1].offset(), "rotation step must be an integer"))?;
                let step = parse_int(step_text, args[1].offset())?
                    .filter(|s| *s >= 0)
                    .ok_or_else(|| {
                        syntax(args[1].offset(), "rotation step must be a non-negative integer")
                    })? as u64;
                let width = c.width().ok_or_else(|| IrError::Type {
                    path: vec![0],
                    message: format!("`{op}` expects a vector operand, found scalar"),
                })? as u64;
                let left = if op == "<<" {
                    step % width
                } else {
                    (width - step % width) % width
                };
                Expr::rot(c, left as usize)
            }
            other => Err(syntax(offset, format!("unknown operator `{other}`"))),
        }
    }
}

/// Parses one expression with every free variable taken as a ciphertext.
pub fn parse_expr(text: &str) -> Result<Expr, IrError> {
    let forms = read_all(text)?;
    match forms.as_slice() {
        [one] => Lowering { declared: None }.lower(one),
        [] => Err(syntax(0, "empty input")),
        [_, second, ..] => Err(syntax(second.offset(), "trailing input after expression")),
    }
}

fn parse_header(items: &[Sexp], offset: usize) -> Result<Program, IrError> {
    let mut inputs: Option<Vec<Input>> = None;
    let mut output_width: Option<usize> = None;
    let mut body: Option<&Sexp> = None;
    for item in items {
        let head = match item {
            Sexp::List { items, .. } => items.first().and_then(Sexp::atom),
            Sexp::Atom { .. } => None,
        };
        match (head, item) {
            (Some("inputs"), Sexp::List { items: decls, .. }) => {
                let mut list = Vec::new();
                for d in &decls[1..] {
                    let Sexp::List { items: pair, offset } = d else {
                        return Err(syntax(d.offset(), "expected `(ct name)` or `(pt name)`"));
                    };
                    let kind = match pair.first().and_then(Sexp::atom) {
                        Some("ct") => VarKind::Cipher,
                        Some("pt") => VarKind::Plain,
                        _ => return Err(syntax(*offset, "input kind must be `ct` or `pt`")),
                    };
                    let name = match pair.get(1).and_then(Sexp::atom) {
                        Some(n) if pair.len() == 2 && is_identifier(n) => n,
                        _ => return Err(syntax(*offset, "malformed input declaration")),
                    };
                    list.push(Input {
                        name: Arc::from(name),
                        kind,
                    });
                }
                inputs = Some(list);
            }
            (Some("output-width"), Sexp::List { items: ow, offset }) => {
                let k = ow
                    .get(1)
                    .and_then(Sexp::atom)
                    .and_then(|t| t.parse::<usize>().ok())
                    .filter(|_| ow.len() == 2)
                    .ok_or_else(|| syntax(*offset, "malformed `output-width`"))?;
                output_width = Some(k);
            }
            _ => {
                if body.is_some() {
                    return Err(syntax(item.offset(), "program has more than one body"));
                }
                body = Some(item);
            }
        }
    }
    let inputs = inputs.ok_or_else(|| syntax(offset, "program lacks `(inputs ...)`"))?;
    let body = body.ok_or_else(|| syntax(offset, "program lacks a body"))?;
    let expr = Lowering {
        declared: Some(&inputs),
    }
    .lower(body)?;
    let width = expr
        .width()
        .ok_or_else(|| IrError::type_err("program body must be vector-valued"))?;
    Program::new(inputs, expr, output_width.unwrap_or(width))
}

/// Parses either a `(program ...)` form or a bare expression. A bare scalar
/// expression is packed into a width-1 `Vec`.
pub fn parse_program(text: &str) -> Result<Program, IrError> {
    let forms = read_all(text)?;
    let form = match forms.as_slice() {
        [one] => one,
        [] => return Err(syntax(0, "empty input")),
        [_, second, ..] => {
            return Err(syntax(second.offset(), "trailing input after expression"))
        }
    };
    if let Sexp::List { items, offset } = form {
        if items.first().and_then(Sexp::atom) == Some("program") {
            return parse_header(&items[1..], *offset);
        }
    }
    let expr = Lowering { declared: None }.lower(form)?;
    let body = if expr.ty().is_scalar() {
        Expr::pack(vec![expr])?
    } else {
        expr
    };
    Program::from_body(body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::Ty;

    #[test]
    fn scalar_wrapped_in_vec() {
        let p = parse_program("(+ a b)").unwrap();
        let expected = Expr::pack(vec![Expr::add(Expr::cipher("a"), Expr::cipher("b")).unwrap()]).unwrap();
        assert_eq!(p.body(), &expected);
        assert_eq!(p.output_width(), 1);
    }

    #[test]
    fn two_slot_vec() {
        let p = parse_program("(Vec (+ a b) (+ c d))").unwrap();
        assert_eq!(p.body().ty(), Ty::Vector(2));
        let slots = p.body().as_pack().unwrap();
        assert!(slots.iter().all(|s| matches!(s.kind(), ExprKind::Add(..))));
    }

    #[test]
    fn nested_vec_is_type_error() {
        let err = parse_program("(Vec (Vec a))").unwrap_err();
        assert!(matches!(err, IrError::Type { ref path, .. } if path == &vec![0]), "{err}");
    }

    #[test]
    fn unbalanced_parens() {
        assert!(matches!(parse_program("(Vec (+ a b)"), Err(IrError::Syntax { .. })));
        assert!(matches!(parse_program("(Vec a))"), Err(IrError::Syntax { .. })));
    }

    #[test]
    fn unknown_operator() {
        let err = parse_program("(Vec (/ a b))").unwrap_err();
        assert!(err.to_string().contains("unknown operator"), "{err}");
    }

    #[test]
    fn arity_checked() {
        let err = parse_program("(Vec (+ a b c))").unwrap_err();
        assert_eq!(
            err,
            IrError::Arity {
                op: "+".into(),
                expected: 2,
                found: 3
            }
        );
    }

    #[test]
    fn right_rotation_normalized() {
        let p = parse_program("(>> (Vec a b c d) 1)").unwrap();
        assert!(matches!(p.body().kind(), ExprKind::Rot(_, 3)));
    }

    #[test]
    fn unary_minus_by_kind() {
        let p = parse_program("(- (Vec (- a)))").unwrap();
        assert!(matches!(p.body().kind(), ExprKind::VecNeg(_)));
        let inner = p.body().children()[0].as_pack().unwrap()[0].clone();
        assert!(matches!(inner.kind(), ExprKind::Neg(_)));
    }

    #[test]
    fn header_form() {
        let src = "; dot product\n(program (inputs (ct a) (pt w)) (output-width 1)\n  (Vec (* a w) a))";
        let p = parse_program(src).unwrap();
        assert_eq!(p.inputs().len(), 2);
        assert_eq!(p.inputs()[1].kind, VarKind::Plain);
        assert_eq!(p.output_width(), 1);
        assert_eq!(p.width(), 2);
    }

    #[test]
    fn header_rejects_undeclared() {
        let err = parse_program("(program (inputs (ct a)) (Vec b))").unwrap_err();
        assert!(err.to_string().contains("undeclared"), "{err}");
    }

    #[test]
    fn constant_overflow() {
        assert!(matches!(
            parse_program("(Vec 99999999999999999999)"),
            Err(IrError::Syntax { .. })
        ));
        assert_eq!(
            parse_program("(Vec -7)").unwrap().body().as_pack().unwrap()[0].as_const(),
            Some(-7)
        );
    }
}
