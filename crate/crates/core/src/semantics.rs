//! Reference interpreter over integer slots modulo a plaintext prime `t`.
//!
//! This is the soundness oracle: two programs are accepted as equivalent when
//! their leading output slots agree on randomly sampled bindings.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ir::{Expr, ExprKind, Program};

pub const DEFAULT_MODULUS: u64 = 65537;
pub const DEFAULT_TRIALS: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Scalar(u64),
    Slots(Vec<u64>),
}

impl Value {
    pub fn slots(&self) -> Vec<u64> {
        match self {
            Value::Scalar(v) => vec![*v],
            Value::Slots(s) => s.clone(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("programs declare different inputs")]
    IncompatibleInputs,
    #[error("prefix {k} exceeds program width {width}")]
    PrefixTooWide { k: usize, width: usize },
    #[error("modulus must be at least 2")]
    BadModulus,
}

/// Variable values and the slot modulus.
#[derive(Clone, Debug)]
pub struct Binding {
    values: HashMap<Arc<str>, u64>,
    modulus: u64,
}

impl Binding {
    pub fn new(modulus: u64) -> Binding {
        Binding {
            values: HashMap::new(),
            modulus,
        }
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn set(&mut self, name: &str, value: i64) -> &mut Self {
        let v = value.rem_euclid(self.modulus as i64) as u64;
        self.values.insert(Arc::from(name), v);
        self
    }

    pub fn with(mut self, name: &str, value: i64) -> Self {
        self.set(name, value);
        self
    }

    pub fn get(&self, name: &str) -> Option<u64> {
        self.values.get(name).copied()
    }

    /// Uniform residues for every declared input of `p`.
    pub fn random(p: &Program, modulus: u64, rng: &mut impl Rng) -> Binding {
        let mut b = Binding::new(modulus);
        for input in p.inputs() {
            b.values.insert(input.name.clone(), rng.gen_range(0..modulus));
        }
        b
    }

    /// Parses `name=value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, modulus: u64) -> Result<Binding, String> {
        let mut b = Binding::new(modulus);
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected name=value", no + 1))?;
            let value: i64 = value
                .trim()
                .parse()
                .map_err(|_| format!("line {}: bad integer `{}`", no + 1, value.trim()))?;
            b.set(name.trim(), value);
        }
        Ok(b)
    }
}

struct Interp<'a> {
    binding: &'a Binding,
    t: u64,
    memo: HashMap<Expr, Value>,
}

impl Interp<'_> {
    fn add(&self, a: u64, b: u64) -> u64 {
        ((a as u128 + b as u128) % self.t as u128) as u64
    }

    fn sub(&self, a: u64, b: u64) -> u64 {
        ((a as u128 + self.t as u128 - b as u128) % self.t as u128) as u64
    }

    fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.t as u128) as u64
    }

    fn scalar(&mut self, e: &Expr) -> Result<u64, EvalError> {
        match self.eval(e)? {
            Value::Scalar(v) => Ok(v),
            Value::Slots(_) => unreachable!("typed tree"),
        }
    }

    fn slots(&mut self, e: &Expr) -> Result<Vec<u64>, EvalError> {
        match self.eval(e)? {
            Value::Slots(v) => Ok(v),
            Value::Scalar(_) => unreachable!("typed tree"),
        }
    }

    fn zip(&mut self, l: &Expr, r: &Expr, f: fn(&Self, u64, u64) -> u64) -> Result<Value, EvalError> {
        let a = self.slots(l)?;
        let b = self.slots(r)?;
        Ok(Value::Slots(a.iter().zip(&b).map(|(x, y)| f(self, *x, *y)).collect()))
    }

    fn eval(&mut self, e: &Expr) -> Result<Value, EvalError> {
        if let Some(v) = self.memo.get(e) {
            return Ok(v.clone());
        }
        use ExprKind::*;
        let v = match e.kind() {
            Var { name, .. } => Value::Scalar(
                self.binding
                    .get(name)
                    .ok_or_else(|| EvalError::UnboundVariable(name.to_string()))?,
            ),
            Const(c) => Value::Scalar(c.rem_euclid(self.t as i64) as u64),
            Neg(c) => {
                let x = self.scalar(c)?;
                Value::Scalar(self.sub(0, x))
            }
            Add(l, r) => {
                let (a, b) = (self.scalar(l)?, self.scalar(r)?);
                Value::Scalar(self.add(a, b))
            }
            Sub(l, r) => {
                let (a, b) = (self.scalar(l)?, self.scalar(r)?);
                Value::Scalar(self.sub(a, b))
            }
            Mul(l, r) => {
                let (a, b) = (self.scalar(l)?, self.scalar(r)?);
                Value::Scalar(self.mul(a, b))
            }
            Vec(cs) => {
                let mut out = std::vec::Vec::with_capacity(cs.len());
                for c in cs {
                    out.push(self.scalar(c)?);
                }
                Value::Slots(out)
            }
            VecNeg(c) => {
                let xs = self.slots(c)?;
                Value::Slots(xs.iter().map(|x| self.sub(0, *x)).collect())
            }
            VecAdd(l, r) => self.zip(l, r, Self::add)?,
            VecSub(l, r) => self.zip(l, r, Self::sub)?,
            VecMul(l, r) => self.zip(l, r, Self::mul)?,
            Rot(c, s) => {
                let mut xs = self.slots(c)?;
                let w = xs.len();
                xs.rotate_left(s % w);
                Value::Slots(xs)
            }
        };
        self.memo.insert(e.clone(), v.clone());
        Ok(v)
    }
}

/// Evaluates an expression; shared subtrees are evaluated once.
pub fn eval_expr(e: &Expr, b: &Binding) -> Result<Value, EvalError> {
    if b.modulus < 2 {
        return Err(EvalError::BadModulus);
    }
    Interp {
        binding: b,
        t: b.modulus,
        memo: HashMap::new(),
    }
    .eval(e)
}

pub fn eval(p: &Program, b: &Binding) -> Result<Value, EvalError> {
    for input in p.inputs() {
        if b.get(&input.name).is_none() {
            return Err(EvalError::UnboundVariable(input.name.to_string()));
        }
    }
    eval_expr(p.body(), b)
}

/// Outcome of a randomized prefix-equivalence check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivReport {
    pub equivalent: bool,
    /// First failing binding as sorted `(name, value)` pairs, with both prefixes.
    pub counterexample: Option<Counterexample>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub binding: Vec<(String, u64)>,
    pub left: Vec<u64>,
    pub right: Vec<u64>,
}

fn same_inputs(a: &Program, b: &Program) -> bool {
    let mut x: Vec<_> = a.inputs().iter().map(|i| (&i.name, i.kind)).collect();
    let mut y: Vec<_> = b.inputs().iter().map(|i| (&i.name, i.kind)).collect();
    x.sort();
    y.sort();
    x == y
}

/// Compares the first `k` slots of two programs over `trials` bindings drawn
/// uniformly from `[0, t)`. Deterministic for a given seed.
pub fn equiv_prefix_mod(
    p1: &Program,
    p2: &Program,
    k: usize,
    trials: usize,
    seed: u64,
    modulus: u64,
) -> Result<EquivReport, EvalError> {
    if !same_inputs(p1, p2) {
        return Err(EvalError::IncompatibleInputs);
    }
    let width = p1.width().min(p2.width());
    if k > width {
        return Err(EvalError::PrefixTooWide { k, width });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let b = Binding::random(p1, modulus, &mut rng);
        let l = eval(p1, &b)?.slots();
        let r = eval(p2, &b)?.slots();
        if l[..k] != r[..k] {
            let mut binding: Vec<(String, u64)> = p1
                .inputs()
                .iter()
                .map(|i| (i.name.to_string(), b.get(&i.name).unwrap()))
                .collect();
            binding.sort();
            return Ok(EquivReport {
                equivalent: false,
                counterexample: Some(Counterexample {
                    binding,
                    left: l[..k].to_vec(),
                    right: r[..k].to_vec(),
                }),
            });
        }
    }
    Ok(EquivReport {
        equivalent: true,
        counterexample: None,
    })
}

pub fn equiv_prefix(
    p1: &Program,
    p2: &Program,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<EquivReport, EvalError> {
    equiv_prefix_mod(p1, p2, k, trials, seed, DEFAULT_MODULUS)
}
