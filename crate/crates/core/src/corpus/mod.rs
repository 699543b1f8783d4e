//! Program sources: a seeded random generator, a line-per-program dataset
//! loader, and the benchmark kernels.

mod bench;

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::canon::canon_key;
use crate::ir::{parse_program, BinOp, Expr, Program, VarKind};

pub use bench::{gen_bench, BenchSpec, Kernel};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    FileUnreadable {
        path: String,
        source: std::io::Error,
    },
    #[error("unsupported benchmark: {0}")]
    UnsupportedSpec(String),
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
}

/// Relative weights of the node kinds the generator draws from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpMix {
    pub add: f64,
    pub sub: f64,
    pub mul: f64,
    pub neg: f64,
    /// Vector operation versus a `Vec` constructor at vector positions.
    pub vector: f64,
    pub constructor: f64,
    pub rotation: f64,
    /// Chance that a leaf is a constant rather than a variable.
    pub constant_leaf: f64,
    /// Chance that a variable is plaintext.
    pub plain_var: f64,
}

impl Default for OpMix {
    fn default() -> Self {
        OpMix {
            add: 1.0,
            sub: 0.5,
            mul: 1.0,
            neg: 0.1,
            vector: 0.4,
            constructor: 1.0,
            rotation: 0.15,
            constant_leaf: 0.15,
            plain_var: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    pub count: usize,
    pub depth: (u32, u32),
    pub width: (usize, usize),
    pub mix: OpMix,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            count: 100,
            depth: (1, 15),
            width: (1, 32),
            mix: OpMix::default(),
            seed: 0,
        }
    }
}

const VAR_POOL: usize = 16;
/// Non-designated slots and side operands stay this shallow so that sizes
/// grow roughly linearly with depth.
const SIDE_DEPTH: u32 = 2;

struct Gen<'a> {
    rng: ChaCha8Rng,
    mix: &'a OpMix,
}

impl Gen<'_> {
    fn leaf(&mut self) -> Expr {
        if self.rng.gen_bool(self.mix.constant_leaf) {
            return Expr::constant(self.rng.gen_range(0..10));
        }
        let name = format!("x{}", self.rng.gen_range(0..VAR_POOL));
        // a name keeps one kind within a program
        let idx: usize = name[1..].parse().unwrap();
        let plain = (idx as f64) < self.mix.plain_var * VAR_POOL as f64;
        Expr::var(&name, if plain { VarKind::Plain } else { VarKind::Cipher })
    }

    fn side_depth(&mut self, d: u32) -> u32 {
        self.rng.gen_range(0..=d.min(SIDE_DEPTH))
    }

    fn binop(&mut self) -> BinOp {
        let m = self.mix;
        let total = m.add + m.sub + m.mul;
        let x = self.rng.gen::<f64>() * total;
        if x < m.add {
            BinOp::Add
        } else if x < m.add + m.sub {
            BinOp::Sub
        } else {
            BinOp::Mul
        }
    }

    /// Scalar expression of depth exactly `d`.
    fn scalar(&mut self, d: u32) -> Expr {
        if d == 0 {
            return self.leaf();
        }
        let p_neg = self.mix.neg / (self.mix.neg + self.mix.add + self.mix.sub + self.mix.mul);
        if self.rng.gen_bool(p_neg) {
            return Expr::neg(self.scalar(d - 1)).expect("scalar child");
        }
        let op = self.binop();
        let deep = self.scalar(d - 1);
        let sd = self.side_depth(d - 1);
        let side = self.scalar(sd);
        let (l, r) = if self.rng.gen_bool(0.5) { (deep, side) } else { (side, deep) };
        Expr::scalar_binary(op, l, r).expect("scalar operands")
    }

    fn pack(&mut self, d: u32, w: usize) -> Expr {
        let deep = self.rng.gen_range(0..w);
        let slots = (0..w)
            .map(|i| {
                if i == deep {
                    self.scalar(d)
                } else {
                    let sd = self.side_depth(d);
                    self.scalar(sd)
                }
            })
            .collect();
        Expr::pack(slots).expect("scalar slots")
    }

    /// Vector expression of width `w` and depth exactly `d`.
    fn vector(&mut self, d: u32, w: usize) -> Expr {
        if d == 0 {
            return self.pack(0, w);
        }
        let m = self.mix;
        let rot = if w > 1 { m.rotation } else { 0.0 };
        let x = self.rng.gen::<f64>() * (m.vector + m.constructor + rot);
        if x < m.constructor {
            return self.pack(d, w);
        }
        if x < m.constructor + rot {
            let step = self.rng.gen_range(1..w);
            return Expr::rot(self.vector(d - 1, w), step).expect("vector child");
        }
        if self.rng.gen_bool(m.neg / (m.neg + 1.0)) {
            return Expr::vec_neg(self.vector(d - 1, w)).expect("vector child");
        }
        let op = self.binop();
        let deep = self.vector(d - 1, w);
        let sd = self.side_depth(d - 1);
        let side = self.vector(sd, w);
        let (l, r) = if self.rng.gen_bool(0.5) { (deep, side) } else { (side, deep) };
        Expr::vector_binary(op, l, r).expect("vector operands")
    }
}

/// Random programs balanced over the (depth, width) grid: program `i` uses
/// grid cell `i mod cells` of a seed-shuffled cell order, so every cell is
/// hit equally often up to one.
pub fn gen_random(p: &GenParams) -> Result<Vec<Program>, CorpusError> {
    let (d0, d1) = p.depth;
    let (w0, w1) = p.width;
    if d0 > d1 || w0 > w1 || w0 == 0 {
        return Err(CorpusError::InvalidParams(format!(
            "depth {d0}..={d1}, width {w0}..={w1}"
        )));
    }
    let mut master = ChaCha8Rng::seed_from_u64(p.seed);
    let mut cells: Vec<(u32, usize)> = (d0..=d1)
        .flat_map(|d| (w0..=w1).map(move |w| (d, w)))
        .collect();
    cells.shuffle(&mut master);
    let mut out = Vec::with_capacity(p.count);
    for i in 0..p.count {
        let (d, w) = cells[i % cells.len()];
        let mut g = Gen {
            rng: ChaCha8Rng::seed_from_u64(master.gen()),
            mix: &p.mix,
        };
        loop {
            let body = g.vector(d, w);
            // exact depth can be missed only through a zero-width corner;
            // such samples are drawn again
            if body.depth() != d {
                continue;
            }
            if let Ok(prog) = Program::from_body(body) {
                out.push(prog);
                break;
            }
        }
    }
    Ok(out)
}

/// Loaded dataset plus counts of dropped lines.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub programs: Vec<Program>,
    pub malformed: usize,
    pub duplicates: usize,
    pub excluded: usize,
}

/// Parses one program per line. Blank lines and `;` comments are skipped;
/// unparsable lines, duplicates up to renaming, and programs matching an
/// exclusion entry are dropped and counted.
pub fn load_dataset_str(text: &str, exclusion: &[Program]) -> Dataset {
    let excluded: HashSet<String> = exclusion.iter().map(canon_key).collect();
    let mut seen = HashSet::new();
    let mut ds = Dataset::default();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        let Ok(p) = parse_program(line) else {
            ds.malformed += 1;
            continue;
        };
        let key = canon_key(&p);
        if excluded.contains(&key) {
            ds.excluded += 1;
        } else if !seen.insert(key) {
            ds.duplicates += 1;
        } else {
            ds.programs.push(p);
        }
    }
    ds
}

pub fn load_dataset(path: &Path, exclusion: &[Program]) -> Result<Dataset, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::FileUnreadable {
        path: path.display().to_string(),
        source,
    })?;
    Ok(load_dataset_str(&text, exclusion))
}
