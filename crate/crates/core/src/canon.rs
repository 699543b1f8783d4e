//! Identifier- and constant-canonical tokenization.
//!
//! A single left-to-right pass renames the first distinct variable to `v0`,
//! the next to `v1`, and so on. Constants other than 0 and 1 become `c0`,
//! `c1`, ... with equal values sharing a token; 0 and 1 stay literal.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::ir::{Expr, ExprKind, Program};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Token {
    Open,
    Close,
    Op(&'static str),
    Var(usize),
    Const(usize),
    Zero,
    One,
    /// Rotation step, kept verbatim.
    Step(usize),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Open => write!(f, "("),
            Token::Close => write!(f, ")"),
            Token::Op(s) => write!(f, "{s}"),
            Token::Var(i) => write!(f, "v{i}"),
            Token::Const(i) => write!(f, "c{i}"),
            Token::Zero => write!(f, "0"),
            Token::One => write!(f, "1"),
            Token::Step(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct TokenSeq {
    pub tokens: Vec<Token>,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut prev_open = true;
        for t in &self.tokens {
            let space = !prev_open && *t != Token::Close;
            if space {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
            prev_open = *t == Token::Open;
        }
        Ok(())
    }
}

#[derive(Default)]
struct Renamer {
    vars: HashMap<Arc<str>, usize>,
    consts: HashMap<i64, usize>,
    tokens: Vec<Token>,
    /// Nodes visited; lets tests confirm the pass is linear.
    visits: usize,
}

impl Renamer {
    fn visit(&mut self, e: &Expr) {
        self.visits += 1;
        let op = match e.kind() {
            ExprKind::Var { name, .. } => {
                let next = self.vars.len();
                let id = *self.vars.entry(name.clone()).or_insert(next);
                self.tokens.push(Token::Var(id));
                return;
            }
            ExprKind::Const(0) => return self.tokens.push(Token::Zero),
            ExprKind::Const(1) => return self.tokens.push(Token::One),
            ExprKind::Const(v) => {
                let next = self.consts.len();
                let id = *self.consts.entry(*v).or_insert(next);
                self.tokens.push(Token::Const(id));
                return;
            }
            ExprKind::Neg(_) => "-",
            ExprKind::Add(..) => "+",
            ExprKind::Sub(..) => "-",
            ExprKind::Mul(..) => "*",
            ExprKind::Vec(_) => "Vec",
            ExprKind::VecNeg(_) => "VecNeg",
            ExprKind::VecAdd(..) => "VecAdd",
            ExprKind::VecSub(..) => "VecSub",
            ExprKind::VecMul(..) => "VecMul",
            ExprKind::Rot(..) => "<<",
        };
        self.tokens.push(Token::Open);
        self.tokens.push(Token::Op(op));
        for c in e.children() {
            self.visit(c);
        }
        if let ExprKind::Rot(_, s) = e.kind() {
            self.tokens.push(Token::Step(*s));
        }
        self.tokens.push(Token::Close);
    }
}

/// Canonical tokens of an expression plus the number of nodes visited.
pub fn expr_tokens_counted(e: &Expr) -> (TokenSeq, usize) {
    let mut r = Renamer::default();
    r.visit(e);
    (TokenSeq { tokens: r.tokens }, r.visits)
}

pub fn expr_tokens(e: &Expr) -> TokenSeq {
    expr_tokens_counted(e).0
}

pub fn canon_tokens(p: &Program) -> TokenSeq {
    expr_tokens(p.body())
}

/// Stable text key; equal iff the token sequences are equal.
pub fn canon_key(p: &Program) -> String {
    let mut key = canon_tokens(p).to_string();
    if p.output_width() != p.width() {
        key.push_str(&format!(" |{}", p.output_width()));
    }
    key
}

/// `canon_key` extended with the ct/pt kind of each variable in
/// first-occurrence order.
pub fn canon_key_with_kinds(p: &Program) -> String {
    let mut key = canon_key(p);
    key.push_str(" #");
    for (_, kind) in p.body().free_vars() {
        key.push_str(kind.tag());
    }
    key
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{parse_expr, parse_program};

    fn toks(src: &str) -> String {
        expr_tokens(&parse_expr(src).unwrap()).to_string()
    }

    #[test]
    fn alpha_renaming() {
        assert_eq!(toks("(+ a (+ b c))"), "(+ v0 (+ v1 v2))");
        assert_eq!(toks("(+ x (+ y z))"), "(+ v0 (+ v1 v2))");
    }

    #[test]
    fn zero_and_one_literal() {
        assert_eq!(toks("(* a 1)"), "(* v0 1)");
        assert_eq!(toks("(+ 0 a)"), "(+ 0 v0)");
    }

    #[test]
    fn equal_constants_share_token() {
        assert_eq!(toks("(* 5 (+ a 5))"), "(* c0 (+ v0 c0))");
        assert_eq!(toks("(* 5 (+ a 7))"), "(* c0 (+ v0 c1))");
    }

    #[test]
    fn dataset_alpha_variants_collide() {
        let a = parse_program("(Vec (+ x (* y z)))").unwrap();
        let b = parse_program("(Vec (+ a (* b c)))").unwrap();
        assert_eq!(canon_key(&a), canon_key(&b));
    }

    #[test]
    fn syntactic_not_semantic() {
        let a = parse_program("(Vec (+ a b) (+ b a))").unwrap();
        let b = parse_program("(Vec (+ a b) (+ a b))").unwrap();
        assert_ne!(canon_key(&a), canon_key(&b));
    }

    #[test]
    fn rotation_steps_kept() {
        assert_eq!(toks("(<< (Vec a b c) 2)"), "(<< (Vec v0 v1 v2) 2)");
    }

    #[test]
    fn kinds_extend_key() {
        let a = parse_program("(program (inputs (ct a) (pt b)) (Vec (* a b)))").unwrap();
        let b = parse_program("(Vec (* a b))").unwrap();
        assert_eq!(canon_key(&a), canon_key(&b));
        assert_ne!(canon_key_with_kinds(&a), canon_key_with_kinds(&b));
    }
}
