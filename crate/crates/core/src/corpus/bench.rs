//! Benchmark kernels in their naive scalar form: one `Vec` whose slots are
//! the per-output scalar formulas.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::CorpusError;
use crate::ir::{BinOp, Expr, Input, Program, VarKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kernel {
    DotProduct,
    Hamming,
    L2,
    LinearRegression,
    PolyRegression,
    BoxBlur,
    Gx,
    Gy,
    RobertsCross,
    MatMul,
    Max,
    Sort,
    /// Random tree: fullness and majority-operator percentages.
    Tree { fullness: u8, homogeneity: u8 },
}

impl Kernel {
    pub const NAMES: [&'static str; 13] = [
        "dot-product",
        "hamming-distance",
        "l2-distance",
        "linear-regression",
        "polynomial-regression",
        "box-blur",
        "gx",
        "gy",
        "roberts-cross",
        "matmul",
        "max",
        "sort",
        "tree",
    ];

    fn base_name(&self) -> &'static str {
        use Kernel::*;
        match self {
            DotProduct => "dot-product",
            Hamming => "hamming-distance",
            L2 => "l2-distance",
            LinearRegression => "linear-regression",
            PolyRegression => "polynomial-regression",
            BoxBlur => "box-blur",
            Gx => "gx",
            Gy => "gy",
            RobertsCross => "roberts-cross",
            MatMul => "matmul",
            Max => "max",
            Sort => "sort",
            Tree { .. } => "tree",
        }
    }

    fn size_range(&self) -> (usize, usize) {
        use Kernel::*;
        match self {
            DotProduct | Hamming | L2 => (1, 64),
            LinearRegression | PolyRegression => (1, 32),
            BoxBlur | Gx | Gy => (1, 8),
            RobertsCross => (2, 8),
            MatMul => (1, 4),
            Max | Sort => (2, 4),
            Tree { .. } => (1, 8),
        }
    }
}

/// A kernel and its size. For grids `n` is the side length, for trees the
/// depth. `seed` only affects trees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BenchSpec {
    pub kernel: Kernel,
    pub n: usize,
    pub seed: u64,
}

impl BenchSpec {
    pub fn new(kernel: Kernel, n: usize) -> BenchSpec {
        BenchSpec { kernel, n, seed: 0 }
    }

    pub fn tree(fullness: u8, homogeneity: u8, depth: usize, seed: u64) -> BenchSpec {
        BenchSpec {
            kernel: Kernel::Tree {
                fullness,
                homogeneity,
            },
            n: depth,
            seed,
        }
    }

    /// Kernel name with its parameters, e.g. `dot-product-8` or
    /// `tree-100-50-5`.
    pub fn id(&self) -> String {
        self.to_string()
    }

    /// Parses a kernel name (`dot-product`, `tree-100-50`, ...) with a
    /// separate size.
    pub fn parse(name: &str, n: usize) -> Result<BenchSpec, CorpusError> {
        let unsupported = || CorpusError::UnsupportedSpec(name.to_string());
        if let Some(rest) = name.strip_prefix("tree-") {
            let parts: Vec<&str> = rest.split('-').collect();
            let [x, y] = parts[..] else {
                return Err(unsupported());
            };
            let x: u8 = x.parse().map_err(|_| unsupported())?;
            let y: u8 = y.parse().map_err(|_| unsupported())?;
            return Ok(BenchSpec::tree(x, y, n, 0));
        }
        use Kernel::*;
        let kernel = match name {
            "dot-product" => DotProduct,
            "hamming-distance" | "hamming" => Hamming,
            "l2-distance" | "l2" => L2,
            "linear-regression" => LinearRegression,
            "polynomial-regression" => PolyRegression,
            "box-blur" => BoxBlur,
            "gx" => Gx,
            "gy" => Gy,
            "roberts-cross" => RobertsCross,
            "matmul" => MatMul,
            "max" => Max,
            "sort" => Sort,
            _ => return Err(unsupported()),
        };
        Ok(BenchSpec::new(kernel, n))
    }
}

impl fmt::Display for BenchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kernel {
            Kernel::Tree {
                fullness,
                homogeneity,
            } => write!(f, "tree-{fullness}-{homogeneity}-{}", self.n),
            k => write!(f, "{}-{}", k.base_name(), self.n),
        }
    }
}

/// Accepts ids produced by `Display`: the size is the last dash field.
impl FromStr for BenchSpec {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, n) = s
            .rsplit_once('-')
            .ok_or_else(|| CorpusError::UnsupportedSpec(s.to_string()))?;
        let n = n
            .parse()
            .map_err(|_| CorpusError::UnsupportedSpec(s.to_string()))?;
        BenchSpec::parse(name, n)
    }
}

/// Collects declared inputs in first-use order while building formulas.
#[derive(Default)]
struct Inputs(Vec<Input>);

impl Inputs {
    fn var(&mut self, name: &str, kind: VarKind) -> Expr {
        if !self.0.iter().any(|i| &*i.name == name) {
            self.0.push(Input {
                name: name.into(),
                kind,
            });
        }
        Expr::var(name, kind)
    }

    fn ct(&mut self, name: &str) -> Expr {
        self.var(name, VarKind::Cipher)
    }

    fn pt(&mut self, name: &str) -> Expr {
        self.var(name, VarKind::Plain)
    }
}

fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
    Expr::scalar_binary(op, l, r).expect("scalar operands")
}

fn add(l: Expr, r: Expr) -> Expr {
    bin(BinOp::Add, l, r)
}

fn sub(l: Expr, r: Expr) -> Expr {
    bin(BinOp::Sub, l, r)
}

fn mul(l: Expr, r: Expr) -> Expr {
    bin(BinOp::Mul, l, r)
}

fn c(v: i64) -> Expr {
    Expr::constant(v)
}

/// Left-nested sum; an empty sum is the constant 0.
fn sum(terms: Vec<Expr>) -> Expr {
    terms.into_iter().reduce(add).unwrap_or_else(|| c(0))
}

/// Weighted sum where weight 1 terms stay bare and other weights become a
/// constant factor.
fn weighted(terms: Vec<(i64, Expr)>) -> Expr {
    sum(terms
        .into_iter()
        .map(|(w, e)| if w == 1 { e } else { mul(c(w), e) })
        .collect())
}

fn pixel(inp: &mut Inputs, r: usize, c: usize) -> Expr {
    inp.ct(&format!("p{r}_{c}"))
}

/// Zero-padded 3x3 stencil: weights indexed by (dr + 1, dc + 1). Positive
/// and negative parts are summed separately and subtracted once.
fn stencil(inp: &mut Inputs, n: usize, k: [[i64; 3]; 3]) -> Vec<Expr> {
    let mut slots = Vec::with_capacity(n * n);
    for r in 0..n {
        for col in 0..n {
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            for (dr, row) in k.iter().enumerate() {
                for (dc, &w) in row.iter().enumerate() {
                    let (rr, cc) = (r as i64 + dr as i64 - 1, col as i64 + dc as i64 - 1);
                    if w == 0 || rr < 0 || cc < 0 || rr >= n as i64 || cc >= n as i64 {
                        continue;
                    }
                    let p = pixel(inp, rr as usize, cc as usize);
                    if w > 0 {
                        pos.push((w, p));
                    } else {
                        neg.push((-w, p));
                    }
                }
            }
            slots.push(match (pos.is_empty(), neg.is_empty()) {
                (_, true) => weighted(pos),
                (true, false) => Expr::neg(weighted(neg)).expect("scalar"),
                (false, false) => sub(weighted(pos), weighted(neg)),
            });
        }
    }
    slots
}

/// 2-bit unsigned numbers as (high, low) bit pairs.
type Bits = (Expr, Expr);

fn not(x: &Expr) -> Expr {
    sub(c(1), x.clone())
}

/// `a > b` for 2-bit numbers, arithmetized:
/// `a1(1-b1) + eq(a1,b1) a0(1-b0)` with `eq(x,y) = 1 - x - y + 2xy`.
fn greater(a: &Bits, b: &Bits) -> Expr {
    let hi = mul(a.0.clone(), not(&b.0));
    let eq = add(
        sub(sub(c(1), a.0.clone()), b.0.clone()),
        mul(c(2), mul(a.0.clone(), b.0.clone())),
    );
    let lo = mul(a.1.clone(), not(&b.1));
    add(hi, mul(eq, lo))
}

/// `g ? x : y` bitwise, as `g x + (1 - g) y`.
fn select(g: &Expr, x: &Bits, y: &Bits) -> Bits {
    let pick = |x: &Expr, y: &Expr| add(mul(g.clone(), x.clone()), mul(not(g), y.clone()));
    (pick(&x.0, &y.0), pick(&x.1, &y.1))
}

fn numbers(inp: &mut Inputs, n: usize) -> Vec<Bits> {
    (0..n)
        .map(|i| (inp.ct(&format!("x{i}h")), inp.ct(&format!("x{i}l"))))
        .collect()
}

fn tree(
    inp: &mut Inputs,
    rng: &mut ChaCha8Rng,
    depth: usize,
    fullness: f64,
    homogeneity: f64,
    major: BinOp,
) -> Expr {
    if depth == 0 {
        let i = inp.0.len();
        return inp.ct(&format!("t{i}"));
    }
    let minor = if major == BinOp::Add { BinOp::Mul } else { BinOp::Add };
    let op = if rng.gen_bool(homogeneity) { major } else { minor };
    let full = rng.gen_bool(fullness);
    let left_deep = rng.gen_bool(0.5);
    let (l, r) = if full {
        let l = tree(inp, rng, depth - 1, fullness, homogeneity, major);
        (l, tree(inp, rng, depth - 1, fullness, homogeneity, major))
    } else if left_deep {
        let l = tree(inp, rng, depth - 1, fullness, homogeneity, major);
        (l, tree(inp, rng, 0, fullness, homogeneity, major))
    } else {
        let l = tree(inp, rng, 0, fullness, homogeneity, major);
        (l, tree(inp, rng, depth - 1, fullness, homogeneity, major))
    };
    bin(op, l, r)
}

/// Builds the naive program of a benchmark kernel.
pub fn gen_bench(b: &BenchSpec) -> Result<Program, CorpusError> {
    let (lo, hi) = b.kernel.size_range();
    if b.n < lo || b.n > hi {
        return Err(CorpusError::UnsupportedSpec(format!(
            "{b}: size must be in {lo}..={hi}"
        )));
    }
    let n = b.n;
    let mut inp = Inputs::default();
    let pairs = |inp: &mut Inputs, i: usize| (inp.ct(&format!("a{i}")), inp.ct(&format!("b{i}")));
    let slots: Vec<Expr> = match b.kernel {
        Kernel::DotProduct => {
            let terms = (0..n).map(|i| {
                let (a, b) = pairs(&mut inp, i);
                mul(a, b)
            });
            vec![sum(terms.collect())]
        }
        Kernel::Hamming => {
            let terms = (0..n).map(|i| {
                let (a, b) = pairs(&mut inp, i);
                sub(add(a.clone(), b.clone()), mul(c(2), mul(a, b)))
            });
            vec![sum(terms.collect())]
        }
        Kernel::L2 => {
            let terms = (0..n).map(|i| {
                let (a, b) = pairs(&mut inp, i);
                let d = sub(a, b);
                mul(d.clone(), d)
            });
            vec![sum(terms.collect())]
        }
        Kernel::LinearRegression | Kernel::PolyRegression => {
            let w1 = inp.pt("w1");
            let w0 = inp.pt("w0");
            let w2 = (b.kernel == Kernel::PolyRegression).then(|| inp.pt("w2"));
            (0..n)
                .map(|i| {
                    let x = inp.ct(&format!("x{i}"));
                    let y = inp.ct(&format!("y{i}"));
                    let mut pred = add(mul(w1.clone(), x.clone()), w0.clone());
                    if let Some(w2) = &w2 {
                        pred = add(mul(w2.clone(), mul(x.clone(), x)), pred);
                    }
                    sub(y, pred)
                })
                .collect()
        }
        Kernel::BoxBlur => stencil(&mut inp, n, [[1, 1, 1], [1, 1, 1], [1, 1, 1]]),
        Kernel::Gx => stencil(&mut inp, n, [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]),
        Kernel::Gy => stencil(&mut inp, n, [[-1, -2, -1], [0, 0, 0], [1, 2, 1]]),
        Kernel::RobertsCross => {
            let mut slots = Vec::new();
            for r in 0..n - 1 {
                for col in 0..n - 1 {
                    let gx = sub(pixel(&mut inp, r, col), pixel(&mut inp, r + 1, col + 1));
                    let gy = sub(pixel(&mut inp, r + 1, col), pixel(&mut inp, r, col + 1));
                    slots.push(add(mul(gx.clone(), gx), mul(gy.clone(), gy)));
                }
            }
            slots
        }
        Kernel::MatMul => {
            let mut slots = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    let terms = (0..n)
                        .map(|k| {
                            let a = inp.ct(&format!("a{i}_{k}"));
                            let b = inp.ct(&format!("b{k}_{j}"));
                            mul(a, b)
                        })
                        .collect();
                    slots.push(sum(terms));
                }
            }
            slots
        }
        Kernel::Max => {
            let xs = numbers(&mut inp, n);
            let mut m = xs[0].clone();
            for x in &xs[1..] {
                let g = greater(x, &m);
                m = select(&g, x, &m);
            }
            vec![m.0, m.1]
        }
        Kernel::Sort => {
            // bubble network of compare-exchange steps, ascending
            let mut xs = numbers(&mut inp, n);
            for pass in 0..n {
                for i in 0..n - 1 - pass.min(n - 1) {
                    let g = greater(&xs[i], &xs[i + 1]);
                    let low = select(&g, &xs[i + 1], &xs[i]);
                    let high = select(&g, &xs[i], &xs[i + 1]);
                    xs[i] = low;
                    xs[i + 1] = high;
                }
            }
            xs.into_iter().flat_map(|(h, l)| [h, l]).collect()
        }
        Kernel::Tree {
            fullness,
            homogeneity,
        } => {
            if fullness > 100 || homogeneity > 100 {
                return Err(CorpusError::UnsupportedSpec(b.to_string()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(b.seed);
            let major = if rng.gen_bool(0.5) { BinOp::Add } else { BinOp::Mul };
            vec![tree(
                &mut inp,
                &mut rng,
                n,
                fullness as f64 / 100.0,
                homogeneity as f64 / 100.0,
                major,
            )]
        }
    };
    let width = slots.len();
    let body = Expr::pack(slots).expect("scalar slots");
    Program::new(inp.0, body, width).map_err(|e| CorpusError::UnsupportedSpec(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::metrics;
    use crate::semantics::{eval, Binding};

    #[test]
    fn dot_product_counts() {
        let p = gen_bench(&BenchSpec::new(Kernel::DotProduct, 4)).unwrap();
        let m = metrics(&p);
        assert_eq!(m.mult_depth, 1);
        assert_eq!(p.body().mult_depth(), 1);
        let mut muls = 0;
        let mut adds = 0;
        p.body().walk(&mut |_, e| match e.as_scalar_binary() {
            Some((BinOp::Mul, ..)) => muls += 1,
            Some((BinOp::Add, ..)) => adds += 1,
            _ => {}
        });
        assert_eq!((muls, adds), (4, 3));
    }

    #[test]
    fn hamming_counts_differing_bits() {
        let p = gen_bench(&BenchSpec::new(Kernel::Hamming, 4)).unwrap();
        for x in 0..16u32 {
            for y in 0..16u32 {
                let mut b = Binding::new(65537);
                for i in 0..4 {
                    b.set(&format!("a{i}"), ((x >> i) & 1) as i64);
                    b.set(&format!("b{i}"), ((y >> i) & 1) as i64);
                }
                let v = eval(&p, &b).unwrap().slots()[0];
                assert_eq!(v, (x ^ y).count_ones() as u64);
            }
        }
    }

    #[test]
    fn dense_homogeneous_tree() {
        let p = gen_bench(&BenchSpec::tree(100, 100, 5, 7)).unwrap();
        let root = &p.body().as_pack().unwrap()[0];
        assert_eq!(root.depth(), 5);
        assert_eq!(root.size(), 63);
        let mut ops = std::collections::HashSet::new();
        root.walk(&mut |_, e| {
            if let Some((op, ..)) = e.as_scalar_binary() {
                ops.insert(op);
            }
        });
        assert_eq!(ops.len(), 1);
    }

    #[test]
    fn ids_round_trip() {
        for s in [
            BenchSpec::new(Kernel::DotProduct, 8),
            BenchSpec::tree(100, 50, 5, 0),
            BenchSpec::new(Kernel::RobertsCross, 3),
        ] {
            assert_eq!(s.id().parse::<BenchSpec>().unwrap(), s);
        }
        assert!(gen_bench(&BenchSpec::new(Kernel::MatMul, 9)).is_err());
        assert!("conv-3".parse::<BenchSpec>().is_err());
    }

    #[test]
    fn every_kernel_builds() {
        for name in Kernel::NAMES {
            let name = if name == "tree" { "tree-50-50" } else { name };
            let n = if name == "roberts-cross" || name == "max" || name == "sort" { 3 } else { 2 };
            let p = gen_bench(&BenchSpec::parse(name, n).unwrap()).unwrap();
            assert_eq!(p.output_width(), p.width());
        }
    }
}
