//! FHE-aware cost model.
//!
//! The total cost is `w_ops * C_ops + w_depth * depth + w_mult * mult_depth`.
//! `C_ops` and all operation counts are taken over the expression DAG: a
//! structurally repeated subtree is computed once in a straight-line FHE
//! program, so it is priced once.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::ir::{Expr, ExprKind, Program};

/// Price of each operation class. `Vec` constructors and leaves are free.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostTable {
    pub vec_add_sub: f64,
    pub vec_mul: f64,
    pub rotation: f64,
    pub scalar_add_sub: f64,
    pub scalar_mul: f64,
}

impl Default for CostTable {
    fn default() -> Self {
        CostTable {
            vec_add_sub: 1.0,
            vec_mul: 100.0,
            rotation: 50.0,
            scalar_add_sub: 250.0,
            scalar_mul: 250.0,
        }
    }
}

impl CostTable {
    /// Relative latencies used to compare the two hand vectorizations of the
    /// motivating example: multiplications and rotations 1, additions 0.1.
    pub fn toy() -> Self {
        CostTable {
            vec_add_sub: 0.1,
            vec_mul: 1.0,
            rotation: 1.0,
            scalar_add_sub: 0.1,
            scalar_mul: 1.0,
        }
    }

    fn price(&self, e: &Expr) -> f64 {
        use ExprKind::*;
        match e.kind() {
            Var { .. } | Const(_) | Vec(_) => 0.0,
            Neg(_) | Add(..) | Sub(..) => self.scalar_add_sub,
            Mul(..) => self.scalar_mul,
            VecNeg(_) | VecAdd(..) | VecSub(..) => self.vec_add_sub,
            VecMul(..) => self.vec_mul,
            Rot(..) => self.rotation,
        }
    }
}

impl FromStr for CostTable {
    type Err = String;

    /// `default`, `toy`, or comma-separated `key=value` overrides of the
    /// default table. `scalar_op` sets both scalar prices.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "default" => return Ok(CostTable::default()),
            "toy" => return Ok(CostTable::toy()),
            _ => {}
        }
        let mut t = CostTable::default();
        for part in s.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got `{part}`"))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| format!("bad number in `{part}`"))?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("cost must be finite and >= 0 in `{part}`"));
            }
            match k.trim() {
                "vec_add_sub" => t.vec_add_sub = v,
                "vec_mul" => t.vec_mul = v,
                "rotation" => t.rotation = v,
                "scalar_add_sub" => t.scalar_add_sub = v,
                "scalar_mul" => t.scalar_mul = v,
                "scalar_op" => {
                    t.scalar_add_sub = v;
                    t.scalar_mul = v;
                }
                other => return Err(format!("unknown cost class `{other}`")),
            }
        }
        Ok(t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Weights {
    pub ops: f64,
    pub depth: f64,
    pub mult: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            ops: 1.0,
            depth: 1.0,
            mult: 1.0,
        }
    }
}

impl Weights {
    pub fn new(ops: f64, depth: f64, mult: f64) -> Self {
        Weights { ops, depth, mult }
    }
}

impl FromStr for Weights {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad weight `{p}`")))
            .collect::<Result<_, _>>()?;
        match parts.as_slice() {
            [a, b, c] if parts.iter().all(|w| *w >= 0.0 && w.is_finite()) => {
                Ok(Weights::new(*a, *b, *c))
            }
            _ => Err("weights are three non-negative numbers: ops,depth,mult".to_string()),
        }
    }
}

/// Unique subtrees of `e`, each listed once, parents after children.
pub fn dag_nodes(e: &Expr) -> Vec<Expr> {
    fn go(e: &Expr, seen: &mut HashSet<Expr>, out: &mut Vec<Expr>) {
        if seen.contains(e) {
            return;
        }
        for c in e.children() {
            go(c, seen, out);
        }
        seen.insert(e.clone());
        out.push(e.clone());
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    go(e, &mut seen, &mut out);
    out
}

pub fn depth(e: &Expr) -> u32 {
    e.depth()
}

pub fn mult_depth(e: &Expr) -> u32 {
    e.mult_depth()
}

/// `C_ops`: summed class prices over the unique nodes of `e`.
pub fn op_cost(e: &Expr, table: &CostTable) -> f64 {
    dag_nodes(e).iter().map(|n| table.price(n)).sum()
}

pub fn total_cost(e: &Expr, table: &CostTable, w: &Weights) -> f64 {
    w.ops * op_cost(e, table) + w.depth * e.depth() as f64 + w.mult * e.mult_depth() as f64
}

/// Cost, depths and per-class operation counts.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CostReport {
    pub c_ops: f64,
    pub depth: u32,
    pub mult_depth: u32,
    pub total: f64,
    pub vec_add: usize,
    pub vec_sub: usize,
    pub vec_neg: usize,
    /// Multiplications whose operands both depend on ciphertexts.
    pub ct_ct_mul: usize,
    /// Multiplications with exactly one ciphertext-dependent operand.
    pub ct_pt_mul: usize,
    pub rotations: usize,
    pub scalar_ops: usize,
}

impl CostReport {
    pub const CSV_HEADER: &'static str =
        "c_ops,depth,mult_depth,total,vec_add,ct_ct_mul,ct_pt_mul,rotations,scalar_ops,vec_sub,vec_neg";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.c_ops,
            self.depth,
            self.mult_depth,
            self.total,
            self.vec_add,
            self.ct_ct_mul,
            self.ct_pt_mul,
            self.rotations,
            self.scalar_ops,
            self.vec_sub,
            self.vec_neg
        )
    }
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.csv_row())
    }
}

pub fn expr_metrics(e: &Expr, table: &CostTable, w: &Weights) -> CostReport {
    let mut r = CostReport {
        depth: e.depth(),
        mult_depth: e.mult_depth(),
        ..Default::default()
    };
    for n in dag_nodes(e) {
        r.c_ops += table.price(&n);
        use ExprKind::*;
        match n.kind() {
            Neg(_) | Add(..) | Sub(..) => r.scalar_ops += 1,
            VecAdd(..) => r.vec_add += 1,
            VecSub(..) => r.vec_sub += 1,
            VecNeg(_) => r.vec_neg += 1,
            Rot(..) => r.rotations += 1,
            Var { .. } | Const(_) | Vec(_) => {}
            Mul(..) | VecMul(..) => {
                if matches!(n.kind(), Mul(..)) {
                    r.scalar_ops += 1;
                }
                let kids = n.children();
                match (kids[0].has_cipher(), kids[1].has_cipher()) {
                    (true, true) => r.ct_ct_mul += 1,
                    (true, false) | (false, true) => r.ct_pt_mul += 1,
                    (false, false) => {}
                }
            }
        }
    }
    r.total = w.ops * r.c_ops + w.depth * r.depth as f64 + w.mult * r.mult_depth as f64;
    r
}

pub fn metrics_with(p: &Program, table: &CostTable, w: &Weights) -> CostReport {
    expr_metrics(p.body(), table, w)
}

/// Metrics under the default table and unit weights.
pub fn metrics(p: &Program) -> CostReport {
    metrics_with(p, &CostTable::default(), &Weights::default())
}
