//! Typed expression trees over scalar values and fixed-width slot vectors.
//!
//! Nodes are immutable and reference counted, so rewriting a subtree shares
//! every untouched sibling with the original. Each node caches its type,
//! a structural hash, its size and both depth measures.

mod parse;
mod print;

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

pub use parse::{parse_expr, parse_program};
pub use print::{print_expr, print_program};

/// Whether a program input is encrypted or travels in the clear.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    Cipher,
    Plain,
}

impl VarKind {
    pub fn tag(self) -> &'static str {
        match self {
            VarKind::Cipher => "ct",
            VarKind::Plain => "pt",
        }
    }
}

/// Type of an expression node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ty {
    Scalar,
    Vector(usize),
}

impl Ty {
    pub fn width(self) -> Option<usize> {
        match self {
            Ty::Scalar => None,
            Ty::Vector(w) => Some(w),
        }
    }

    pub fn is_scalar(self) -> bool {
        matches!(self, Ty::Scalar)
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Scalar => write!(f, "scalar"),
            Ty::Vector(w) => write!(f, "vector<{w}>"),
        }
    }
}

/// Binary arithmetic operators, shared by the scalar and the vector forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
}

impl BinOp {
    pub const ALL: [BinOp; 3] = [BinOp::Add, BinOp::Sub, BinOp::Mul];

    pub fn scalar_token(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
        }
    }

    pub fn vector_token(self) -> &'static str {
        match self {
            BinOp::Add => "VecAdd",
            BinOp::Sub => "VecSub",
            BinOp::Mul => "VecMul",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
        }
    }

    /// Right identity: `x op id == x`.
    pub fn identity(self) -> i64 {
        match self {
            BinOp::Add | BinOp::Sub => 0,
            BinOp::Mul => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExprKind {
    Var { name: Arc<str>, kind: VarKind },
    Const(i64),
    Neg(Expr),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Vec(Vec<Expr>),
    VecNeg(Expr),
    VecAdd(Expr, Expr),
    VecSub(Expr, Expr),
    VecMul(Expr, Expr),
    /// Cyclic left rotation; the step is kept reduced modulo the width.
    Rot(Expr, usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IrError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("type error at {}: {message}", format_path(path))]
    Type { path: Vec<usize>, message: String },
    #[error("arity error: `{op}` expects {expected} operand(s), found {found}")]
    Arity {
        op: String,
        expected: usize,
        found: usize,
    },
}

fn format_path(path: &[usize]) -> String {
    if path.is_empty() {
        "root".to_string()
    } else {
        let parts: Vec<String> = path.iter().map(|i| i.to_string()).collect();
        format!("path [{}]", parts.join("."))
    }
}

impl IrError {
    pub(crate) fn type_err(message: impl Into<String>) -> Self {
        IrError::Type {
            path: Vec::new(),
            message: message.into(),
        }
    }

    /// Prefix the error path with the child index it was found under.
    pub(crate) fn under(self, index: usize) -> Self {
        match self {
            IrError::Type { mut path, message } => {
                path.insert(0, index);
                IrError::Type { path, message }
            }
            other => other,
        }
    }
}

struct Node {
    kind: ExprKind,
    ty: Ty,
    hash: u64,
    size: usize,
    depth: u32,
    mult_depth: u32,
    has_cipher: bool,
}

/// Shared handle to an immutable, well-typed expression node.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.hash == other.0.hash && self.0.kind == other.0.kind)
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_expr(self))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_expr(self))
    }
}

fn expect_scalar(e: &Expr, index: usize, op: &str) -> Result<(), IrError> {
    if e.ty().is_scalar() {
        Ok(())
    } else {
        Err(IrError::Type {
            path: vec![index],
            message: format!("`{op}` expects a scalar operand, found {}", e.ty()),
        })
    }
}

fn expect_vector(e: &Expr, index: usize, op: &str) -> Result<usize, IrError> {
    match e.ty() {
        Ty::Vector(w) => Ok(w),
        Ty::Scalar => Err(IrError::Type {
            path: vec![index],
            message: format!("`{op}` expects a vector operand, found scalar"),
        }),
    }
}

/// Type of a node built from already typed children.
pub fn infer(kind: &ExprKind) -> Result<Ty, IrError> {
    use ExprKind::*;
    match kind {
        Var { .. } | Const(_) => Ok(Ty::Scalar),
        Neg(c) => expect_scalar(c, 0, "-").map(|_| Ty::Scalar),
        Add(l, r) | Sub(l, r) | Mul(l, r) => {
            let op = kind_token(kind);
            expect_scalar(l, 0, op)?;
            expect_scalar(r, 1, op)?;
            Ok(Ty::Scalar)
        }
        Vec(children) => {
            if children.is_empty() {
                return Err(IrError::type_err("`Vec` needs at least one element"));
            }
            for (i, c) in children.iter().enumerate() {
                if !c.ty().is_scalar() {
                    return Err(IrError::Type {
                        path: vec![i],
                        message: "nested vector inside `Vec`".to_string(),
                    });
                }
            }
            Ok(Ty::Vector(children.len()))
        }
        VecNeg(c) => expect_vector(c, 0, "VecNeg").map(Ty::Vector),
        VecAdd(l, r) | VecSub(l, r) | VecMul(l, r) => {
            let op = kind_token(kind);
            let lw = expect_vector(l, 0, op)?;
            let rw = expect_vector(r, 1, op)?;
            if lw != rw {
                return Err(IrError::type_err(format!(
                    "`{op}` width mismatch: {lw} vs {rw}"
                )));
            }
            Ok(Ty::Vector(lw))
        }
        Rot(c, _) => expect_vector(c, 0, "<<").map(Ty::Vector),
    }
}

fn kind_token(kind: &ExprKind) -> &'static str {
    use ExprKind::*;
    match kind {
        Var { .. } => "var",
        Const(_) => "const",
        Neg(_) => "-",
        Add(..) => "+",
        Sub(..) => "-",
        Mul(..) => "*",
        Vec(_) => "Vec",
        VecNeg(_) => "VecNeg",
        VecAdd(..) => "VecAdd",
        VecSub(..) => "VecSub",
        VecMul(..) => "VecMul",
        Rot(..) => "<<",
    }
}

impl Expr {
    /// Builds a node, checking operand types.
    pub fn new(kind: ExprKind) -> Result<Expr, IrError> {
        let ty = infer(&kind)?;
        let kind = match kind {
            ExprKind::Rot(c, step) => {
                let w = c.ty().width().unwrap_or(1);
                ExprKind::Rot(c, step % w)
            }
            k => k,
        };
        let mut hasher = DefaultHasher::new();
        std::mem::discriminant(&kind).hash(&mut hasher);
        let mut size = 1usize;
        let mut depth = 0u32;
        let mut mult_depth = 0u32;
        let mut has_cipher = false;
        match &kind {
            ExprKind::Var { name, kind } => {
                name.hash(&mut hasher);
                kind.hash(&mut hasher);
                has_cipher = *kind == VarKind::Cipher;
            }
            ExprKind::Const(v) => v.hash(&mut hasher),
            ExprKind::Rot(_, step) => step.hash(&mut hasher),
            ExprKind::Vec(children) => children.len().hash(&mut hasher),
            _ => {}
        }
        for c in kind_children(&kind) {
            hasher.write_u64(c.0.hash);
            size += c.0.size;
            depth = depth.max(c.0.depth);
            mult_depth = mult_depth.max(c.0.mult_depth);
            has_cipher |= c.0.has_cipher;
        }
        if is_operator(&kind) {
            depth += 1;
        }
        if matches!(kind, ExprKind::Mul(..) | ExprKind::VecMul(..)) {
            mult_depth += 1;
        }
        Ok(Expr(Arc::new(Node {
            kind,
            ty,
            hash: hasher.finish(),
            size,
            depth,
            mult_depth,
            has_cipher,
        })))
    }

    pub fn var(name: &str, kind: VarKind) -> Expr {
        Expr::new(ExprKind::Var {
            name: Arc::from(name),
            kind,
        })
        .expect("leaves always type-check")
    }

    pub fn cipher(name: &str) -> Expr {
        Expr::var(name, VarKind::Cipher)
    }

    pub fn plain(name: &str) -> Expr {
        Expr::var(name, VarKind::Plain)
    }

    pub fn constant(value: i64) -> Expr {
        Expr::new(ExprKind::Const(value)).expect("leaves always type-check")
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(child: Expr) -> Result<Expr, IrError> {
        Expr::new(ExprKind::Neg(child))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(l: Expr, r: Expr) -> Result<Expr, IrError> {
        Expr::new(ExprKind::Add(l, r))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(l: Expr, r: Expr) -> Result<Expr, IrError> {
        Expr::new(ExprKind::Sub(l, r))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(l: Expr, r: Expr) -> Result<Expr, IrError> {
        Expr::new(ExprKind::Mul(l, r))
    }

    pub fn scalar_binary(op: BinOp, l: Expr, r: Expr) -> Result<Expr, IrError> {
        match op {
            BinOp::Add => Expr::add(l, r),
            BinOp::Sub => Expr::sub(l, r),
            BinOp::Mul => Expr::mul(l, r),
        }
    }

    pub fn vector_binary(op: BinOp, l: Expr, r: Expr) -> Result<Expr, IrError> {
        match op {
            BinOp::Add => Expr::new(ExprKind::VecAdd(l, r)),
            BinOp::Sub => Expr::new(ExprKind::VecSub(l, r)),
            BinOp::Mul => Expr::new(ExprKind::VecMul(l, r)),
        }
    }

    pub fn pack(children: Vec<Expr>) -> Result<Expr, IrError> {
        Expr::new(ExprKind::Vec(children))
    }

    /// A `Vec` holding `width` copies of one constant.
    pub fn splat(value: i64, width: usize) -> Expr {
        Expr::pack(vec![Expr::constant(value); width]).expect("constants are scalar")
    }

    pub fn vec_neg(child: Expr) -> Result<Expr, IrError> {
        Expr::new(ExprKind::VecNeg(child))
    }

    pub fn vec_add(l: Expr, r: Expr) -> Result<Expr, IrError> {
        Expr::new(ExprKind::VecAdd(l, r))
    }

    pub fn vec_sub(l: Expr, r: Expr) -> Result<Expr, IrError> {
        Expr::new(ExprKind::VecSub(l, r))
    }

    pub fn vec_mul(l: Expr, r: Expr) -> Result<Expr, IrError> {
        Expr::new(ExprKind::VecMul(l, r))
    }

    pub fn rot(child: Expr, step: usize) -> Result<Expr, IrError> {
        Expr::new(ExprKind::Rot(child, step))
    }

    pub fn kind(&self) -> &ExprKind {
        &self.0.kind
    }

    pub fn ty(&self) -> Ty {
        self.0.ty
    }

    pub fn width(&self) -> Option<usize> {
        self.0.ty.width()
    }

    /// Number of nodes in the tree (shared subtrees counted per occurrence).
    pub fn size(&self) -> usize {
        self.0.size
    }

    /// Longest count of operator nodes on a root-to-leaf path.
    pub fn depth(&self) -> u32 {
        self.0.depth
    }

    /// Longest count of multiplication nodes on a root-to-leaf path.
    pub fn mult_depth(&self) -> u32 {
        self.0.mult_depth
    }

    /// True if some leaf below is a ciphertext variable.
    pub fn has_cipher(&self) -> bool {
        self.0.has_cipher
    }

    pub fn structural_hash(&self) -> u64 {
        self.0.hash
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn children(&self) -> Vec<&Expr> {
        kind_children(&self.0.kind)
    }

    pub fn num_children(&self) -> usize {
        kind_children(&self.0.kind).len()
    }

    pub fn is_const(&self, value: i64) -> bool {
        matches!(self.0.kind, ExprKind::Const(v) if v == value)
    }

    pub fn as_const(&self) -> Option<i64> {
        match self.0.kind {
            ExprKind::Const(v) => Some(v),
            _ => None,
        }
    }

    /// A `Vec` whose every element is the constant `value`.
    pub fn is_splat(&self, value: i64) -> bool {
        match &self.0.kind {
            ExprKind::Vec(cs) => cs.iter().all(|c| c.is_const(value)),
            _ => false,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.0.kind, ExprKind::Var { .. } | ExprKind::Const(_))
    }

    /// Scalar binary node view.
    pub fn as_scalar_binary(&self) -> Option<(BinOp, &Expr, &Expr)> {
        match &self.0.kind {
            ExprKind::Add(l, r) => Some((BinOp::Add, l, r)),
            ExprKind::Sub(l, r) => Some((BinOp::Sub, l, r)),
            ExprKind::Mul(l, r) => Some((BinOp::Mul, l, r)),
            _ => None,
        }
    }

    /// Element-wise vector binary node view.
    pub fn as_vector_binary(&self) -> Option<(BinOp, &Expr, &Expr)> {
        match &self.0.kind {
            ExprKind::VecAdd(l, r) => Some((BinOp::Add, l, r)),
            ExprKind::VecSub(l, r) => Some((BinOp::Sub, l, r)),
            ExprKind::VecMul(l, r) => Some((BinOp::Mul, l, r)),
            _ => None,
        }
    }

    pub fn as_pack(&self) -> Option<&[Expr]> {
        match &self.0.kind {
            ExprKind::Vec(cs) => Some(cs),
            _ => None,
        }
    }

    /// Same operator, new children. Leaves ignore `children`.
    pub fn with_children(&self, children: Vec<Expr>) -> Result<Expr, IrError> {
        use ExprKind::*;
        let mut it = children.into_iter();
        let mut next = || {
            it.next()
                .ok_or_else(|| IrError::type_err("missing child in rebuild"))
        };
        let kind = match &self.0.kind {
            Var { .. } | Const(_) => return Ok(self.clone()),
            Neg(_) => Neg(next()?),
            Add(..) => Add(next()?, next()?),
            Sub(..) => Sub(next()?, next()?),
            Mul(..) => Mul(next()?, next()?),
            VecNeg(_) => VecNeg(next()?),
            VecAdd(..) => VecAdd(next()?, next()?),
            VecSub(..) => VecSub(next()?, next()?),
            VecMul(..) => VecMul(next()?, next()?),
            Rot(_, s) => Rot(next()?, *s),
            Vec(cs) => {
                let n = cs.len();
                let mut out = std::vec::Vec::with_capacity(n);
                for _ in 0..n {
                    out.push(next()?);
                }
                Vec(out)
            }
        };
        Expr::new(kind)
    }

    /// Subtree at a child-index path.
    pub fn at(&self, path: &[usize]) -> Option<&Expr> {
        let mut cur = self;
        for &i in path {
            cur = *cur.children().get(i)?;
        }
        Some(cur)
    }

    /// Replaces the subtree at `path`, rebuilding only the ancestors.
    pub fn replace_at(&self, path: &[usize], replacement: Expr) -> Result<Expr, IrError> {
        match path.split_first() {
            None => Ok(replacement),
            Some((&i, rest)) => {
                let kids = self.children();
                let child = kids
                    .get(i)
                    .ok_or_else(|| IrError::type_err(format!("no child {i}")))?;
                let new_child = child.replace_at(rest, replacement)?;
                let rebuilt: Vec<Expr> = kids
                    .iter()
                    .enumerate()
                    .map(|(j, c)| if j == i { new_child.clone() } else { (*c).clone() })
                    .collect();
                self.with_children(rebuilt).map_err(|e| e.under(i))
            }
        }
    }

    /// Pre-order walk with child-index paths.
    pub fn walk<F: FnMut(&[usize], &Expr)>(&self, f: &mut F) {
        let mut path = Vec::new();
        self.walk_inner(&mut path, f);
    }

    fn walk_inner<F: FnMut(&[usize], &Expr)>(&self, path: &mut Vec<usize>, f: &mut F) {
        f(path, self);
        for (i, c) in self.children().into_iter().enumerate() {
            path.push(i);
            c.walk_inner(path, f);
            path.pop();
        }
    }

    /// Free variables in first-occurrence (pre-order) order.
    pub fn free_vars(&self) -> Vec<(Arc<str>, VarKind)> {
        let mut seen: Vec<(Arc<str>, VarKind)> = Vec::new();
        self.walk(&mut |_, e| {
            if let ExprKind::Var { name, kind } = e.kind() {
                if !seen.iter().any(|(n, _)| n == name) {
                    seen.push((name.clone(), *kind));
                }
            }
        });
        seen
    }
}

fn kind_children(kind: &ExprKind) -> Vec<&Expr> {
    use ExprKind::*;
    match kind {
        Var { .. } | Const(_) => std::vec::Vec::new(),
        Neg(c) | VecNeg(c) | Rot(c, _) => vec![c],
        Add(l, r) | Sub(l, r) | Mul(l, r) | VecAdd(l, r) | VecSub(l, r) | VecMul(l, r) => {
            vec![l, r]
        }
        Vec(cs) => cs.iter().collect(),
    }
}

fn is_operator(kind: &ExprKind) -> bool {
    !matches!(
        kind,
        ExprKind::Var { .. } | ExprKind::Const(_) | ExprKind::Vec(_)
    )
}

/// Declared input of a program.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Input {
    pub name: Arc<str>,
    pub kind: VarKind,
}

/// A vector-valued expression together with its input declarations and the
/// number of leading slots that carry the result.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Program {
    inputs: Vec<Input>,
    body: Expr,
    output_width: usize,
}

impl Program {
    pub fn new(inputs: Vec<Input>, body: Expr, output_width: usize) -> Result<Program, IrError> {
        let width = body
            .width()
            .ok_or_else(|| IrError::type_err("program body must be vector-valued"))?;
        if output_width == 0 || output_width > width {
            return Err(IrError::type_err(format!(
                "output width {output_width} outside 1..={width}"
            )));
        }
        for (i, a) in inputs.iter().enumerate() {
            if inputs[..i].iter().any(|b| b.name == a.name) {
                return Err(IrError::type_err(format!("input `{}` declared twice", a.name)));
            }
        }
        for (name, kind) in body.free_vars() {
            match inputs.iter().find(|d| d.name == name) {
                None => {
                    return Err(IrError::type_err(format!("undeclared variable `{name}`")))
                }
                Some(d) if d.kind != kind => {
                    return Err(IrError::type_err(format!(
                        "variable `{name}` used as {} but declared {}",
                        kind.tag(),
                        d.kind.tag()
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(Program {
            inputs,
            body,
            output_width,
        })
    }

    /// Program whose inputs are the body's free variables, result spanning
    /// the whole width.
    pub fn from_body(body: Expr) -> Result<Program, IrError> {
        let inputs = body
            .free_vars()
            .into_iter()
            .map(|(name, kind)| Input { name, kind })
            .collect();
        let width = body
            .width()
            .ok_or_else(|| IrError::type_err("program body must be vector-valued"))?;
        Program::new(inputs, body, width)
    }

    pub fn inputs(&self) -> &[Input] {
        &self.inputs
    }

    pub fn body(&self) -> &Expr {
        &self.body
    }

    pub fn output_width(&self) -> usize {
        self.output_width
    }

    pub fn width(&self) -> usize {
        self.body.width().expect("validated vector body")
    }

    /// Same declarations and output width, new body. Widening bodies
    /// (prefix-contract rewrites) keep the original output width.
    pub fn with_body(&self, body: Expr) -> Result<Program, IrError> {
        Program::new(self.inputs.clone(), body, self.output_width)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_program(self))
    }
}
