//! Fixtures and generators shared by the integration tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slotwise::ir::{parse_program, BinOp, Expr, ExprKind, Program, VarKind};
use slotwise::rewrite::{match_sites, Rule, Site};

/// Motivating expression: nine multiplications (v3*v4 used twice) and one
/// addition.
pub const TEN_PRODUCTS: &str = "(Vec (* (+ (* (* v1 v2) (* v3 v4)) (* (* v3 v4) (* v5 v6))) \
                       (* (* v7 v8) (* v9 v10))))";

/// The same computation with v3*v4 factored out.
pub const TEN_PRODUCTS_FACTORED: &str = "(Vec (* (* (* v3 v4) (+ (* v1 v2) (* v5 v6))) (* (* v7 v8) (* v9 v10))))";

/// First hand vectorization: 2-slot vectors, 6 multiplications, 1 addition,
/// 2 rotations.
pub fn two_slot_plan() -> Program {
    let m1 = "(VecMul (Vec v1 v5) (Vec v2 v6))";
    let a = format!("(VecAdd {m1} (<< {m1} 1))");
    let m2 = "(VecMul (Vec v3 0) (Vec v4 0))";
    let five = format!("(VecMul {a} {m2})");
    let m3 = "(VecMul (Vec v7 v9) (Vec v8 v10))";
    let eight = format!("(VecMul {m3} (<< {m3} 1))");
    header(&format!("(VecMul {five} {eight})"), 1)
}

/// Second hand vectorization: 3-slot vectors, 7 multiplications, 1
/// addition, 3 rotations.
pub fn three_slot_plan() -> Program {
    let m1 = "(VecMul (Vec v1 v5 v6) (Vec v2 1 1))";
    let four = format!("(VecMul (<< {m1} 1) (<< {m1} 2))");
    let five = format!("(VecAdd {m1} {four})");
    let six = "(VecMul (Vec v3 0 0) (Vec v4 0 0))";
    let seven = format!("(VecMul {five} {six})");
    let m89 = "(VecMul (Vec v7 v9 0) (Vec v8 v10 0))";
    let ten = format!("(VecMul {m89} (<< {m89} 1))");
    header(&format!("(VecMul {seven} {ten})"), 1)
}

fn header(body: &str, k: usize) -> Program {
    let inputs: String = (1..=10).map(|i| format!(" (ct v{i})")).collect();
    parse_program(&format!("(program (inputs{inputs}) (output-width {k}) {body})")).unwrap()
}

pub fn prog(s: &str) -> Program {
    parse_program(s).unwrap_or_else(|e| panic!("{s}: {e}"))
}

/// Rebuilds `e` with every leaf passed through `f`.
pub fn map_leaves(e: &Expr, f: &mut dyn FnMut(&Expr) -> Expr) -> Expr {
    if e.is_leaf() {
        return f(e);
    }
    let kids: Vec<Expr> = e.children().into_iter().map(|c| map_leaves(c, f)).collect();
    e.with_children(kids).unwrap()
}

/// Renames variables through a random injective map onto fresh names.
pub fn alpha_variant(p: &Program, rng: &mut ChaCha8Rng) -> Program {
    let names: Vec<String> = p.inputs().iter().map(|i| i.name.to_string()).collect();
    let mut fresh: Vec<String> = (0..names.len()).map(|i| format!("r{i}")).collect();
    fresh.shuffle(rng);
    let body = map_leaves(p.body(), &mut |leaf| match leaf.kind() {
        ExprKind::Var { name, kind } => {
            let i = names.iter().position(|n| **n == **name).unwrap();
            Expr::var(&fresh[i], *kind)
        }
        _ => leaf.clone(),
    });
    let inputs = p
        .inputs()
        .iter()
        .map(|i| slotwise::ir::Input {
            name: fresh[names.iter().position(|n| **n == *i.name).unwrap()]
                .as_str()
                .into(),
            kind: i.kind,
        })
        .collect();
    Program::new(inputs, body, p.output_width()).unwrap()
}

/// Replaces constants other than 0 and 1 through a random injective map,
/// keeping which constants are equal.
pub fn constant_variant(p: &Program, rng: &mut ChaCha8Rng) -> Program {
    let mut map: Vec<(i64, i64)> = Vec::new();
    let body = map_leaves(p.body(), &mut |leaf| match leaf.as_const() {
        Some(c) if c != 0 && c != 1 => {
            if let Some(&(_, d)) = map.iter().find(|(k, _)| *k == c) {
                return Expr::constant(d);
            }
            let d = loop {
                let d = rng.gen_range(2..1000);
                if !map.iter().any(|(_, v)| *v == d) {
                    break d;
                }
            };
            map.push((c, d));
            Expr::constant(d)
        }
        _ => leaf.clone(),
    });
    p.with_body(body).unwrap()
}

/// Random terms with a small leaf pool and frequent 0/1 constants, so that
/// repeated operands, identities and same-operator chains are common.
pub struct TermGen {
    pub rng: ChaCha8Rng,
}

impl TermGen {
    pub fn new(seed: u64) -> Self {
        TermGen {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn op(&mut self) -> BinOp {
        *[BinOp::Add, BinOp::Sub, BinOp::Mul].choose(&mut self.rng).unwrap()
    }

    pub fn leaf(&mut self) -> Expr {
        match self.rng.gen_range(0..10) {
            0 => Expr::constant(0),
            1 => Expr::constant(1),
            2 => Expr::constant(self.rng.gen_range(2..6)),
            3 => Expr::plain(["p", "q"].choose(&mut self.rng).unwrap()),
            _ => Expr::cipher(["a", "b", "c", "d"].choose(&mut self.rng).unwrap()),
        }
    }

    pub fn scalar(&mut self, depth: u32) -> Expr {
        if depth == 0 || self.rng.gen_bool(0.25) {
            return self.leaf();
        }
        if self.rng.gen_bool(0.1) {
            return Expr::neg(self.scalar(depth - 1)).unwrap();
        }
        let op = self.op();
        let l = self.scalar(depth - 1);
        let r = self.scalar(depth - 1);
        Expr::scalar_binary(op, l, r).unwrap()
    }

    pub fn pack(&mut self, w: usize, depth: u32) -> Expr {
        if self.rng.gen_bool(0.1) {
            return Expr::splat(self.rng.gen_range(0..2), w);
        }
        Expr::pack((0..w).map(|_| self.scalar(depth)).collect()).unwrap()
    }

    pub fn vector(&mut self, w: usize, depth: u32) -> Expr {
        if depth == 0 || self.rng.gen_bool(0.2) {
            let d = self.rng.gen_range(0..=depth.min(2));
            return self.pack(w, d);
        }
        match self.rng.gen_range(0..10) {
            0 => Expr::vec_neg(self.vector(w, depth - 1)).unwrap(),
            1 | 2 => {
                let s = self.rng.gen_range(0..w.max(1));
                Expr::rot(self.vector(w, depth - 1), s).unwrap()
            }
            _ => {
                let op = self.op();
                let l = self.vector(w, depth - 1);
                let r = self.vector(w, depth - 1);
                Expr::vector_binary(op, l, r).unwrap()
            }
        }
    }

    /// Slot-homogeneous or mixed packs that the vectorization rules need.
    pub fn packed_ops(&mut self, w: usize) -> Expr {
        let op = self.op();
        let neg = self.rng.gen_bool(0.2);
        let mixed = self.rng.gen_bool(0.3);
        let slots = (0..w)
            .map(|_| {
                if mixed && self.rng.gen_bool(0.4) {
                    return self.scalar(1);
                }
                if neg {
                    Expr::neg(self.scalar(1)).unwrap()
                } else {
                    let l = self.scalar(1);
                    let r = self.scalar(1);
                    Expr::scalar_binary(op, l, r).unwrap()
                }
            })
            .collect();
        Expr::pack(slots).unwrap()
    }

    /// Root packs of sums for the reduce rules.
    pub fn reduction(&mut self, products: bool) -> Expr {
        let w = self.rng.gen_range(1..=3);
        let m = *[2usize, 4, 8, 16].choose(&mut self.rng).unwrap();
        let slots = (0..w)
            .map(|_| {
                let k = self.rng.gen_range(1..=m);
                let terms: Vec<Expr> = (0..k)
                    .map(|_| {
                        if products {
                            Expr::mul(self.scalar(1), self.scalar(1)).unwrap()
                        } else {
                            self.scalar(2)
                        }
                    })
                    .collect();
                terms.into_iter().reduce(|a, b| Expr::add(a, b).unwrap()).unwrap()
            })
            .collect();
        Expr::pack(slots).unwrap()
    }

    /// A program likely to contain a site of `rule`.
    pub fn candidate(&mut self, rule: &Rule) -> Program {
        let name = rule.name();
        let body = if name.starts_with("rotation-reduce") {
            self.reduction(true)
        } else if name.starts_with("sum-reduce") {
            self.reduction(false)
        } else if name.contains("vectorize") {
            let w = self.rng.gen_range(1..=10);
            self.packed_ops(w)
        } else {
            let w = self.rng.gen_range(1..=4);
            match self.rng.gen_bool(0.5).then(|| self.instantiate(rule.pattern(), w)) {
                Some(Some(e)) => e,
                _ => {
                    let d = self.rng.gen_range(1..=4);
                    self.vector(w, d)
                }
            }
        };
        Program::from_body(body).unwrap()
    }
}

/// Minimal S-expression reader for rule patterns.
#[derive(Debug)]
enum Sx {
    Atom(String),
    List(Vec<Sx>),
}

fn read_sx(tokens: &[String], pos: &mut usize) -> Option<Sx> {
    let t = tokens.get(*pos)?;
    *pos += 1;
    if t == "(" {
        let mut items = Vec::new();
        while tokens.get(*pos)? != ")" {
            items.push(read_sx(tokens, pos)?);
        }
        *pos += 1;
        Some(Sx::List(items))
    } else if t == ")" {
        None
    } else {
        Some(Sx::Atom(t.clone()))
    }
}

impl TermGen {
    /// Random instance of a rule's left-hand side: each `?name` becomes a
    /// random term (the same one at every occurrence). Vector patterns use
    /// width `w`. Scalar instances are wrapped in a one-slot `Vec`.
    pub fn instantiate(&mut self, pattern: &str, w: usize) -> Option<Expr> {
        let lhs = pattern.split("=>").next()?.trim();
        if lhs.contains("..") {
            return None;
        }
        let tokens: Vec<String> = lhs
            .replace('(', " ( ")
            .replace(')', " ) ")
            .split_whitespace()
            .map(str::to_string)
            .collect();
        let mut pos = 0;
        let sx = read_sx(&tokens, &mut pos)?;
        let vector = lhs.contains("Vec") || lhs.contains("<<");
        let mut env: Vec<(String, Expr)> = Vec::new();
        let e = self.build(&sx, vector, w, &mut env)?;
        if vector {
            Some(e)
        } else {
            Expr::pack(vec![e]).ok()
        }
    }

    fn build(&mut self, sx: &Sx, vector: bool, w: usize, env: &mut Vec<(String, Expr)>) -> Option<Expr> {
        match sx {
            Sx::Atom(a) if a.starts_with('?') => {
                if let Some((_, e)) = env.iter().find(|(n, _)| n == a) {
                    return Some(e.clone());
                }
                let e = if vector {
                    let d = self.rng.gen_range(0..=2);
                    self.vector(w, d)
                } else {
                    let d = self.rng.gen_range(0..=2);
                    self.scalar(d)
                };
                env.push((a.clone(), e.clone()));
                Some(e)
            }
            Sx::Atom(a) => {
                let v: i64 = a.parse().ok()?;
                Some(if vector { Expr::splat(v, w) } else { Expr::constant(v) })
            }
            Sx::List(items) => {
                let Sx::Atom(head) = items.first()? else { return None };
                if head == "<<" {
                    let [_, v, Sx::Atom(s)] = items.as_slice() else { return None };
                    let v = self.build(v, true, w, env)?;
                    let step = match s.parse::<usize>() {
                        Ok(k) => k,
                        Err(_) => {
                            let key = format!("step:{s}");
                            match env.iter().find(|(n, _)| *n == key) {
                                Some((_, e)) => e.as_const()? as usize,
                                None => {
                                    let k = self.rng.gen_range(0..w.max(1));
                                    env.push((key, Expr::constant(k as i64)));
                                    k
                                }
                            }
                        }
                    };
                    return Expr::rot(v, step).ok();
                }
                let args: Vec<Expr> = items[1..]
                    .iter()
                    .map(|x| self.build(x, vector, w, env))
                    .collect::<Option<_>>()?;
                let op = match head.trim_start_matches("Vec") {
                    "+" | "Add" => BinOp::Add,
                    "-" | "Sub" => BinOp::Sub,
                    "*" | "Mul" => BinOp::Mul,
                    "Neg" => return Expr::vec_neg(args.into_iter().next()?).ok(),
                    _ => return None,
                };
                match (args.len(), vector) {
                    (1, false) if op == BinOp::Sub => Expr::neg(args[0].clone()).ok(),
                    (2, false) => Expr::scalar_binary(op, args[0].clone(), args[1].clone()).ok(),
                    (2, true) => Expr::vector_binary(op, args[0].clone(), args[1].clone()).ok(),
                    _ => None,
                }
            }
        }
    }
}

/// Up to `count` (program, site) instances of `rule`, at most two per
/// generated program, within `attempts` generated programs.
pub fn rule_instances(rule: &Rule, count: usize, attempts: usize, seed: u64) -> Vec<(Program, Site)> {
    let mut g = TermGen::new(seed);
    let mut out = Vec::new();
    for _ in 0..attempts {
        if out.len() >= count {
            break;
        }
        let p = g.candidate(rule);
        let sites = match_sites(rule, p.body());
        for s in sites.into_iter().take(2) {
            out.push((p.clone(), s));
        }
    }
    out.truncate(count);
    out
}

pub fn var_kinds(p: &Program) -> Vec<VarKind> {
    p.inputs().iter().map(|i| i.kind).collect()
}
