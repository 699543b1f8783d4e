//! Benchmark suite runner and CSV comparison.
//!
//! Suite CSV columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `kernel` | benchmark id, e.g. `dot-product-8` |
//! | `strategy` | `none`, `greedy`, `beam<W>`, `random`, `policy` |
//! | `depth`, `mult_depth` | circuit depth and multiplicative depth |
//! | `ct_ct_mul`, `ct_pt_mul` | cipher-cipher and cipher-plain multiplications |
//! | `rotations`, `vec_add`, `vec_sub`, `vec_neg` | vector operation counts |
//! | `scalar_ops` | remaining scalar operations |
//! | `cost_initial`, `cost_final` | total cost before and after |
//! | `steps_taken` | rewrites applied |
//! | `wall_time_ms` | optimizer time only; nothing is executed under encryption |
//! | `error` | empty, or why the row failed |
//!
//! Counts are over the optimized program's DAG.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{gen_bench, BenchSpec};
use crate::cost::metrics_with;
use crate::ir::Program;
use crate::optimizer::{
    beam, greedy, policy_optimize, random_search, DecodeMode, Outcome, Policy, SearchConfig,
};
use crate::semantics::{equiv_prefix, DEFAULT_TRIALS};

pub const CSV_HEADER: &str = "kernel,strategy,depth,mult_depth,ct_ct_mul,ct_pt_mul,rotations,\
vec_add,vec_sub,vec_neg,scalar_ops,cost_initial,cost_final,steps_taken,wall_time_ms,error";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no (kernel, strategy) rows in common")]
    KeyMismatch,
    #[error("malformed CSV: {0}")]
    Malformed(String),
}

#[derive(Clone, Debug)]
pub enum Strategy {
    /// Reports the naive program.
    None,
    Greedy,
    Beam(usize),
    Random { samples: usize, seed: u64 },
    Policy { policy: Box<Policy>, mode: DecodeMode },
}

impl Strategy {
    pub fn name(&self) -> String {
        match self {
            Strategy::None => "none".into(),
            Strategy::Greedy => "greedy".into(),
            Strategy::Beam(w) => format!("beam{w}"),
            Strategy::Random { .. } => "random".into(),
            Strategy::Policy { .. } => "policy".into(),
        }
    }

    pub fn run(&self, p: &Program, cfg: &SearchConfig) -> Outcome {
        match self {
            Strategy::None => {
                let c = cfg.env.cost(p);
                Outcome {
                    program: p.clone(),
                    cost_initial: c,
                    cost_final: c,
                    trace: Vec::new(),
                }
            }
            Strategy::Greedy => greedy(p, cfg),
            Strategy::Beam(w) => beam(p, *w, cfg),
            Strategy::Random { samples, seed } => random_search(p, *samples, *seed, cfg),
            Strategy::Policy { policy, mode } => policy_optimize(p, policy, &cfg.env, *mode),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub search: SearchConfig,
    pub strategies: Vec<Strategy>,
    /// Directory for the optimized programs, one file per row.
    pub out_dir: Option<PathBuf>,
    /// Seed of the equivalence check run on every row.
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            search: SearchConfig::default(),
            strategies: vec![Strategy::Greedy],
            out_dir: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ReportRow {
    pub kernel: String,
    pub strategy: String,
    pub depth: u32,
    pub mult_depth: u32,
    pub ct_ct_mul: usize,
    pub ct_pt_mul: usize,
    pub rotations: usize,
    pub vec_add: usize,
    pub vec_sub: usize,
    pub vec_neg: usize,
    pub scalar_ops: usize,
    pub cost_initial: f64,
    pub cost_final: f64,
    pub steps_taken: usize,
    pub wall_time_ms: u128,
    pub error: String,
    pub program: Option<Program>,
}

impl ReportRow {
    pub fn csv_line(&self) -> String {
        // the error text is free-form; keep the row splittable
        let error = self.error.replace([',', '\n'], ";");
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.kernel,
            self.strategy,
            self.depth,
            self.mult_depth,
            self.ct_ct_mul,
            self.ct_pt_mul,
            self.rotations,
            self.vec_add,
            self.vec_sub,
            self.vec_neg,
            self.scalar_ops,
            self.cost_initial,
            self.cost_final,
            self.steps_taken,
            self.wall_time_ms,
            error
        )
    }

    pub fn failed(&self) -> bool {
        !self.error.is_empty()
    }
}

fn run_row(spec: &BenchSpec, strategy: &Strategy, cfg: &SuiteConfig) -> ReportRow {
    let mut row = ReportRow {
        kernel: spec.id(),
        strategy: strategy.name(),
        ..Default::default()
    };
    let naive = match gen_bench(spec) {
        Ok(p) => p,
        Err(e) => {
            row.error = e.to_string();
            return row;
        }
    };
    let start = Instant::now();
    let out = strategy.run(&naive, &cfg.search);
    row.wall_time_ms = start.elapsed().as_millis();
    let m = metrics_with(&out.program, &cfg.search.env.table, &cfg.search.env.weights);
    row.depth = m.depth;
    row.mult_depth = m.mult_depth;
    row.ct_ct_mul = m.ct_ct_mul;
    row.ct_pt_mul = m.ct_pt_mul;
    row.rotations = m.rotations;
    row.vec_add = m.vec_add;
    row.vec_sub = m.vec_sub;
    row.vec_neg = m.vec_neg;
    row.scalar_ops = m.scalar_ops;
    row.cost_initial = out.cost_initial;
    row.cost_final = out.cost_final;
    row.steps_taken = out.steps();
    match equiv_prefix(&naive, &out.program, naive.output_width(), DEFAULT_TRIALS, cfg.seed) {
        Ok(r) if r.equivalent => {}
        Ok(_) => row.error = "optimized program is not equivalent to the source".into(),
        Err(e) => row.error = e.to_string(),
    }
    row.program = Some(out.program);
    row
}

/// One row per (kernel, strategy), kernels outermost, in input order. Rows
/// run in parallel; failures land in the `error` column.
pub fn run_suite(specs: &[BenchSpec], cfg: &SuiteConfig) -> Vec<ReportRow> {
    let jobs: Vec<(&BenchSpec, &Strategy)> = specs
        .iter()
        .flat_map(|s| cfg.strategies.iter().map(move |t| (s, t)))
        .collect();
    let mut rows: Vec<ReportRow> = jobs.par_iter().map(|(s, t)| run_row(s, t, cfg)).collect();
    if let Some(dir) = &cfg.out_dir {
        let written = std::fs::create_dir_all(dir);
        for row in &mut rows {
            let Some(p) = &row.program else { continue };
            let path = dir.join(format!("{}.{}.sexp", row.kernel, row.strategy));
            if let Err(e) = written
                .as_ref()
                .map_err(|e| e.to_string())
                .and_then(|_| std::fs::write(&path, format!("{p}\n")).map_err(|e| e.to_string()))
            {
                if row.error.is_empty() {
                    row.error = format!("writing {}: {e}", path.display());
                }
            }
        }
    }
    rows
}

pub fn suite_csv(rows: &[ReportRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_line());
        s.push('\n');
    }
    s
}

/// Drops the `wall_time_ms` column, the only nondeterministic one.
pub fn without_wall_time(csv: &str) -> String {
    let idx = CSV_HEADER.split(',').position(|c| c == "wall_time_ms").unwrap();
    csv.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            if f.len() > idx {
                f.remove(idx);
            }
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn geomean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some((values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp())
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRatio {
    pub metric: String,
    /// Geometric mean of b / a; `None` when no row had two non-zero cells.
    pub ratio: Option<f64>,
    pub rows: usize,
    /// Row pairs skipped because a cell was zero.
    pub excluded: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub shared_rows: usize,
    pub metrics: Vec<MetricRatio>,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "shared rows: {}", self.shared_rows)?;
        writeln!(f, "metric,geomean_ratio_b_over_a,rows,excluded_zero")?;
        for m in &self.metrics {
            let r = m.ratio.map(|r| format!("{r:.6}")).unwrap_or_else(|| "n/a".into());
            writeln!(f, "{},{},{},{}", m.metric, r, m.rows, m.excluded)?;
        }
        if self.metrics.iter().any(|m| m.excluded > 0) {
            writeln!(f, "note: pairs with a zero cell are left out of that metric")?;
        }
        Ok(())
    }
}

type Table = (Vec<String>, HashMap<(String, String), Vec<String>>, Vec<(String, String)>);

fn parse_csv(text: &str) -> Result<Table, ReportError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| ReportError::Malformed("empty file".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ReportError::Malformed(format!("missing column {name}")))
    };
    let (ki, si) = (col("kernel")?, col("strategy")?);
    let mut rows = HashMap::new();
    let mut order = Vec::new();
    for l in lines {
        let f: Vec<String> = l.split(',').map(str::to_string).collect();
        if f.len() != header.len() {
            return Err(ReportError::Malformed(format!("row has {} fields: {l}", f.len())));
        }
        let key = (f[ki].clone(), f[si].clone());
        order.push(key.clone());
        rows.insert(key, f);
    }
    Ok((header, rows, order))
}

/// Per-metric geometric-mean ratio b / a over the (kernel, strategy) rows
/// present in both files.
pub fn compare(csv_a: &str, csv_b: &str) -> Result<Comparison, ReportError> {
    let (ha, ra, order) = parse_csv(csv_a)?;
    let (hb, rb, _) = parse_csv(csv_b)?;
    let shared: Vec<&(String, String)> = order.iter().filter(|k| rb.contains_key(*k)).collect();
    if shared.is_empty() {
        return Err(ReportError::KeyMismatch);
    }
    let mut metrics = Vec::new();
    for (ia, name) in ha.iter().enumerate() {
        if matches!(name.as_str(), "kernel" | "strategy" | "error") {
            continue;
        }
        let Some(ib) = hb.iter().position(|h| h == name) else {
            continue;
        };
        let mut ratios = Vec::new();
        let mut excluded = 0;
        for key in &shared {
            let a: Option<f64> = ra[*key][ia].parse().ok();
            let b: Option<f64> = rb[*key][ib].parse().ok();
            match (a, b) {
                (Some(a), Some(b)) if a != 0.0 && b != 0.0 => ratios.push(b / a),
                _ => excluded += 1,
            }
        }
        metrics.push(MetricRatio {
            metric: name.clone(),
            ratio: geomean(&ratios),
            rows: ratios.len(),
            excluded,
        });
    }
    Ok(Comparison {
        shared_rows: shared.len(),
        metrics,
    })
}
