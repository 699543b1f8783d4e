use crate::ir::{BinOp, Expr, ExprKind, IrError};

use super::{Catalog, Category, Contract, Rule};

const ISO_WIDTHS: std::ops::RangeInclusive<usize> = 1..=8;
const REDUCE_TERMS: [usize; 4] = [2, 4, 8, 16];

fn sbin(e: &Expr, op: BinOp) -> Option<(&Expr, &Expr)> {
    match e.as_scalar_binary() {
        Some((o, l, r)) if o == op => Some((l, r)),
        _ => None,
    }
}

fn vbin(e: &Expr, op: BinOp) -> Option<(&Expr, &Expr)> {
    match e.as_vector_binary() {
        Some((o, l, r)) if o == op => Some((l, r)),
        _ => None,
    }
}

fn neg_child(e: &Expr) -> Option<&Expr> {
    match e.kind() {
        ExprKind::Neg(c) => Some(c),
        _ => None,
    }
}

fn vneg_child(e: &Expr) -> Option<&Expr> {
    match e.kind() {
        ExprKind::VecNeg(c) => Some(c),
        _ => None,
    }
}

fn bin(vector: bool, op: BinOp, l: Expr, r: Expr) -> Result<Expr, IrError> {
    if vector {
        Expr::vector_binary(op, l, r)
    } else {
        Expr::scalar_binary(op, l, r)
    }
}

fn view(vector: bool, e: &Expr, op: BinOp) -> Option<(&Expr, &Expr)> {
    if vector {
        vbin(e, op)
    } else {
        sbin(e, op)
    }
}

fn is_identity_operand(vector: bool, e: &Expr, value: i64) -> bool {
    if vector {
        e.is_splat(value)
    } else {
        e.is_const(value)
    }
}

/// Neutral/absorbing constant of the same type as `like`.
fn constant_like(like: &Expr, value: i64) -> Expr {
    match like.width() {
        Some(w) => Expr::splat(value, w),
        None => Expr::constant(value),
    }
}

fn op_tokens(vector: bool, op: BinOp) -> &'static str {
    if vector {
        op.vector_token()
    } else {
        op.scalar_token()
    }
}

fn prefix(vector: bool) -> &'static str {
    if vector {
        "vec-"
    } else {
        ""
    }
}

fn vectorize_rules(out: &mut Vec<Rule>) {
    for op in BinOp::ALL {
        for w in ISO_WIDTHS {
            out.push(Rule::new(
                format!("iso-vectorize-{}-{w}", op.name()),
                Category::Vectorize,
                Contract::Full,
                format!(
                    "(Vec ({t} ?a0 ?b0) .. x{w}) => ({v} (Vec ?a0 ..) (Vec ?b0 ..))",
                    t = op.scalar_token(),
                    v = op.vector_token()
                ),
                move |e| {
                    e.as_pack().is_some_and(|cs| {
                        cs.len() == w && cs.iter().all(|c| sbin(c, op).is_some())
                    })
                },
                move |e| {
                    let cs = e.as_pack().unwrap_or_default();
                    let (ls, rs): (Vec<Expr>, Vec<Expr>) = cs
                        .iter()
                        .filter_map(|c| sbin(c, op))
                        .map(|(l, r)| (l.clone(), r.clone()))
                        .unzip();
                    Expr::vector_binary(op, Expr::pack(ls)?, Expr::pack(rs)?)
                },
            ));
        }
    }
    for w in ISO_WIDTHS {
        out.push(Rule::new(
            format!("iso-vectorize-neg-{w}"),
            Category::Vectorize,
            Contract::Full,
            format!("(Vec (- ?a0) .. x{w}) => (VecNeg (Vec ?a0 ..))"),
            move |e| {
                e.as_pack()
                    .is_some_and(|cs| cs.len() == w && cs.iter().all(|c| neg_child(c).is_some()))
            },
            |e| {
                let cs: Vec<Expr> = e
                    .as_pack()
                    .unwrap_or_default()
                    .iter()
                    .filter_map(neg_child)
                    .cloned()
                    .collect();
                Expr::vec_neg(Expr::pack(cs)?)
            },
        ));
    }
    for op in BinOp::ALL {
        out.push(Rule::new(
            format!("non-iso-vectorize-{}", op.name()),
            Category::Vectorize,
            Contract::Full,
            format!(
                "(Vec ({t} ?a ?b) ?x ..) => ({v} (Vec ?a ?x ..) (Vec ?b {id} ..))",
                t = op.scalar_token(),
                v = op.vector_token(),
                id = op.identity()
            ),
            move |e| {
                e.as_pack().is_some_and(|cs| {
                    let hits = cs.iter().filter(|c| sbin(c, op).is_some()).count();
                    hits >= 2 && (hits < cs.len() || cs.len() > *ISO_WIDTHS.end())
                })
            },
            move |e| {
                let cs = e.as_pack().unwrap_or_default();
                let mut ls = Vec::with_capacity(cs.len());
                let mut rs = Vec::with_capacity(cs.len());
                for c in cs {
                    match sbin(c, op) {
                        Some((l, r)) => {
                            ls.push(l.clone());
                            rs.push(r.clone());
                        }
                        None => {
                            ls.push(c.clone());
                            rs.push(Expr::constant(op.identity()));
                        }
                    }
                }
                Expr::vector_binary(op, Expr::pack(ls)?, Expr::pack(rs)?)
            },
        ));
    }
}

/// Algebraic identities shared by the scalar and element-wise vector forms.
fn ring_rules(out: &mut Vec<Rule>, vector: bool) {
    let cat = if vector {
        Category::VectorAlgebra
    } else {
        Category::Algebra
    };
    let p = prefix(vector);
    for op in [BinOp::Add, BinOp::Mul] {
        let t = op_tokens(vector, op);
        out.push(Rule::new(
            format!("{p}{}-commutativity", op.name()),
            cat,
            Contract::Full,
            format!("({t} ?a ?b) => ({t} ?b ?a)"),
            move |e| view(vector, e, op).is_some(),
            move |e| {
                let (l, r) = view(vector, e, op).expect("matched");
                bin(vector, op, r.clone(), l.clone())
            },
        ));
        out.push(Rule::new(
            format!("{p}{}-assoc-left", op.name()),
            cat,
            Contract::Full,
            format!("({t} ?a ({t} ?b ?c)) => ({t} ({t} ?a ?b) ?c)"),
            move |e| view(vector, e, op).is_some_and(|(_, r)| view(vector, r, op).is_some()),
            move |e| {
                let (a, r) = view(vector, e, op).expect("matched");
                let (b, c) = view(vector, r, op).expect("matched");
                bin(vector, op, bin(vector, op, a.clone(), b.clone())?, c.clone())
            },
        ));
        out.push(Rule::new(
            format!("{p}{}-assoc-right", op.name()),
            cat,
            Contract::Full,
            format!("({t} ({t} ?a ?b) ?c) => ({t} ?a ({t} ?b ?c))"),
            move |e| view(vector, e, op).is_some_and(|(l, _)| view(vector, l, op).is_some()),
            move |e| {
                let (l, c) = view(vector, e, op).expect("matched");
                let (a, b) = view(vector, l, op).expect("matched");
                bin(vector, op, a.clone(), bin(vector, op, b.clone(), c.clone())?)
            },
        ));
    }

    let mul = op_tokens(vector, BinOp::Mul);
    for inner in [BinOp::Add, BinOp::Sub] {
        let t = op_tokens(vector, inner);
        out.push(Rule::new(
            format!("{p}distribute-mul-{}", inner.name()),
            cat,
            Contract::Full,
            format!("({mul} ?a ({t} ?b ?c)) => ({t} ({mul} ?a ?b) ({mul} ?a ?c))"),
            move |e| view(vector, e, BinOp::Mul).is_some_and(|(_, r)| view(vector, r, inner).is_some()),
            move |e| {
                let (a, r) = view(vector, e, BinOp::Mul).expect("matched");
                let (b, c) = view(vector, r, inner).expect("matched");
                bin(
                    vector,
                    inner,
                    bin(vector, BinOp::Mul, a.clone(), b.clone())?,
                    bin(vector, BinOp::Mul, a.clone(), c.clone())?,
                )
            },
        ));
        let name = match inner {
            BinOp::Add => format!("{p}comm-factor"),
            op => format!("{p}{}-factor", op.name()),
        };
        out.push(Rule::new(
            name,
            cat,
            Contract::Full,
            format!("({t} ({mul} ?a ?b) ({mul} ?a ?c)) => ({mul} ?a ({t} ?b ?c))"),
            move |e| {
                view(vector, e, inner).is_some_and(|(l, r)| {
                    match (view(vector, l, BinOp::Mul), view(vector, r, BinOp::Mul)) {
                        (Some((a1, _)), Some((a2, _))) => a1 == a2,
                        _ => false,
                    }
                })
            },
            move |e| {
                let (l, r) = view(vector, e, inner).expect("matched");
                let (a, b) = view(vector, l, BinOp::Mul).expect("matched");
                let (_, c) = view(vector, r, BinOp::Mul).expect("matched");
                bin(
                    vector,
                    BinOp::Mul,
                    a.clone(),
                    bin(vector, inner, b.clone(), c.clone())?,
                )
            },
        ));
    }
    if !vector {
        out.push(Rule::new(
            "comm-factor-right",
            cat,
            Contract::Full,
            "(+ (* ?b ?a) (* ?c ?a)) => (* (+ ?b ?c) ?a)",
            |e| {
                sbin(e, BinOp::Add).is_some_and(|(l, r)| {
                    match (sbin(l, BinOp::Mul), sbin(r, BinOp::Mul)) {
                        (Some((_, a1)), Some((_, a2))) => a1 == a2,
                        _ => false,
                    }
                })
            },
            |e| {
                let (l, r) = sbin(e, BinOp::Add).expect("matched");
                let (b, a) = sbin(l, BinOp::Mul).expect("matched");
                let (c, _) = sbin(r, BinOp::Mul).expect("matched");
                Expr::mul(Expr::add(b.clone(), c.clone())?, a.clone())
            },
        ));
    }

    // identities: (op x id) => x, (op id x) => x
    let identities: [(&str, BinOp, i64, bool); 5] = [
        ("add-zero", BinOp::Add, 0, false),
        ("zero-add", BinOp::Add, 0, true),
        ("sub-zero", BinOp::Sub, 0, false),
        ("mul-one", BinOp::Mul, 1, false),
        ("one-mul", BinOp::Mul, 1, true),
    ];
    for (name, op, id, on_left) in identities {
        let t = op_tokens(vector, op);
        let pat = if on_left {
            format!("({t} {id} ?x) => ?x")
        } else {
            format!("({t} ?x {id}) => ?x")
        };
        out.push(Rule::new(
            format!("{p}{name}"),
            cat,
            Contract::Full,
            pat,
            move |e| {
                view(vector, e, op).is_some_and(|(l, r)| {
                    is_identity_operand(vector, if on_left { l } else { r }, id)
                })
            },
            move |e| {
                let (l, r) = view(vector, e, op).expect("matched");
                Ok(if on_left { r.clone() } else { l.clone() })
            },
        ));
    }
    for (name, on_left) in [("mul-zero", false), ("zero-mul", true)] {
        let pat = if on_left {
            format!("({mul} 0 ?x) => 0")
        } else {
            format!("({mul} ?x 0) => 0")
        };
        out.push(Rule::new(
            format!("{p}{name}"),
            cat,
            Contract::Full,
            pat,
            move |e| {
                view(vector, e, BinOp::Mul).is_some_and(|(l, r)| {
                    is_identity_operand(vector, if on_left { l } else { r }, 0)
                })
            },
            |e| Ok(constant_like(e, 0)),
        ));
    }
    let neg = if vector { "VecNeg" } else { "-" };
    out.push(Rule::new(
        format!("{p}neg-neg"),
        cat,
        Contract::Full,
        format!("({neg} ({neg} ?x)) => ?x"),
        move |e| {
            let inner = if vector { vneg_child(e) } else { neg_child(e) };
            inner.is_some_and(|c| if vector { vneg_child(c).is_some() } else { neg_child(c).is_some() })
        },
        move |e| {
            let c = e.children()[0].children()[0].clone();
            Ok(c)
        },
    ));
    let sub = op_tokens(vector, BinOp::Sub);
    out.push(Rule::new(
        format!("{p}sub-self"),
        cat,
        Contract::Full,
        format!("({sub} ?x ?x) => 0"),
        move |e| view(vector, e, BinOp::Sub).is_some_and(|(l, r)| l == r),
        |e| Ok(constant_like(e, 0)),
    ));
}

fn fold(op: BinOp, a: i64, b: i64) -> Option<i64> {
    match op {
        BinOp::Add => a.checked_add(b),
        BinOp::Sub => a.checked_sub(b),
        BinOp::Mul => a.checked_mul(b),
    }
}

fn folded(e: &Expr) -> Option<i64> {
    if let Some(c) = neg_child(e) {
        return c.as_const()?.checked_neg();
    }
    let (op, l, r) = e.as_scalar_binary()?;
    fold(op, l.as_const()?, r.as_const()?)
}

fn is_plain(e: &Expr) -> bool {
    e.ty().is_scalar() && !e.has_cipher()
}

fn scalar_extras(out: &mut Vec<Rule>) {
    out.push(Rule::new(
        "const-fold",
        Category::Algebra,
        Contract::Full,
        "(op ?c1 ?c2) => c, (- ?c) => -c  [constants, no i64 overflow]",
        |e| folded(e).is_some(),
        |e| Ok(Expr::constant(folded(e).expect("matched"))),
    ));
    out.push(Rule::new(
        "pt-consolidate",
        Category::Algebra,
        Contract::Full,
        "(* ?p (* ?q ?x)) => (* (* ?p ?q) ?x)  [?p ?q plaintext-only, ?x ciphertext]",
        |e| {
            sbin(e, BinOp::Mul).is_some_and(|(p, r)| {
                is_plain(p)
                    && sbin(r, BinOp::Mul).is_some_and(|(q, x)| is_plain(q) && x.has_cipher())
            })
        },
        |e| {
            let (p, r) = sbin(e, BinOp::Mul).expect("matched");
            let (q, x) = sbin(r, BinOp::Mul).expect("matched");
            Expr::mul(Expr::mul(p.clone(), q.clone())?, x.clone())
        },
    ));
}

fn balance_rules(out: &mut Vec<Rule>) {
    for vector in [true, false] {
        for op in [BinOp::Mul, BinOp::Add] {
            let t = op_tokens(vector, op);
            let p = prefix(vector);
            out.push(Rule::new(
                format!("balance-{p}{}-right-chain", op.name()),
                Category::Balance,
                Contract::Full,
                format!("({t} ?x ({t} ?y ({t} ?z ?w))) => ({t} ({t} ?x ?y) ({t} ?z ?w))"),
                move |e| {
                    view(vector, e, op).is_some_and(|(_, r)| {
                        view(vector, r, op).is_some_and(|(_, rr)| view(vector, rr, op).is_some())
                    })
                },
                move |e| {
                    let (x, r) = view(vector, e, op).expect("matched");
                    let (y, rr) = view(vector, r, op).expect("matched");
                    let (z, w) = view(vector, rr, op).expect("matched");
                    bin(
                        vector,
                        op,
                        bin(vector, op, x.clone(), y.clone())?,
                        bin(vector, op, z.clone(), w.clone())?,
                    )
                },
            ));
            out.push(Rule::new(
                format!("balance-{p}{}-left-chain", op.name()),
                Category::Balance,
                Contract::Full,
                format!("({t} ({t} ({t} ?x ?y) ?z) ?w) => ({t} ({t} ?x ?y) ({t} ?z ?w))"),
                move |e| {
                    view(vector, e, op).is_some_and(|(l, _)| {
                        view(vector, l, op).is_some_and(|(ll, _)| view(vector, ll, op).is_some())
                    })
                },
                move |e| {
                    let (l, w) = view(vector, e, op).expect("matched");
                    let (ll, z) = view(vector, l, op).expect("matched");
                    let (x, y) = view(vector, ll, op).expect("matched");
                    bin(
                        vector,
                        op,
                        bin(vector, op, x.clone(), y.clone())?,
                        bin(vector, op, z.clone(), w.clone())?,
                    )
                },
            ));
        }
    }
}

fn rot_parts(e: &Expr) -> Option<(&Expr, usize)> {
    match e.kind() {
        ExprKind::Rot(c, s) => Some((c, *s)),
        _ => None,
    }
}

fn rotation_rules(out: &mut Vec<Rule>) {
    out.push(Rule::new(
        "rot-fuse",
        Category::Rotation,
        Contract::Full,
        "(<< (<< ?v a) b) => (<< ?v (a+b mod w))",
        |e| rot_parts(e).is_some_and(|(c, _)| rot_parts(c).is_some()),
        |e| {
            let (c, b) = rot_parts(e).expect("matched");
            let (v, a) = rot_parts(c).expect("matched");
            Expr::rot(v.clone(), a + b)
        },
    ));
    out.push(Rule::new(
        "rot-zero",
        Category::Rotation,
        Contract::Full,
        "(<< ?v 0) => ?v",
        |e| rot_parts(e).is_some_and(|(_, s)| s == 0),
        |e| Ok(e.children()[0].clone()),
    ));
    for op in [BinOp::Add, BinOp::Mul] {
        let t = op.vector_token();
        out.push(Rule::new(
            format!("rot-distribute-{}", op.name()),
            Category::Rotation,
            Contract::Full,
            format!("(<< ({t} ?a ?b) s) => ({t} (<< ?a s) (<< ?b s))"),
            move |e| rot_parts(e).is_some_and(|(c, _)| vbin(c, op).is_some()),
            move |e| {
                let (c, s) = rot_parts(e).expect("matched");
                let (a, b) = vbin(c, op).expect("matched");
                Expr::vector_binary(op, Expr::rot(a.clone(), s)?, Expr::rot(b.clone(), s)?)
            },
        ));
        out.push(Rule::new(
            format!("rot-factor-{}", op.name()),
            Category::Rotation,
            Contract::Full,
            format!("({t} (<< ?a s) (<< ?b s)) => (<< ({t} ?a ?b) s)"),
            move |e| {
                vbin(e, op).is_some_and(|(l, r)| match (rot_parts(l), rot_parts(r)) {
                    (Some((_, s1)), Some((_, s2))) => s1 == s2,
                    _ => false,
                })
            },
            move |e| {
                let (l, r) = vbin(e, op).expect("matched");
                let (a, s) = rot_parts(l).expect("matched");
                let (b, _) = rot_parts(r).expect("matched");
                Expr::rot(Expr::vector_binary(op, a.clone(), b.clone())?, s)
            },
        ));
    }
    out.push(Rule::new(
        "rot-vec-permute",
        Category::Rotation,
        Contract::Full,
        "(<< (Vec ?x0 ?x1 ..) s) => (Vec ?xs ?xs+1 ..)",
        |e| rot_parts(e).is_some_and(|(c, _)| c.as_pack().is_some()),
        |e| {
            let (c, s) = rot_parts(e).expect("matched");
            let mut cs = c.as_pack().expect("matched").to_vec();
            cs.rotate_left(s);
            Expr::pack(cs)
        },
    ));
}

fn flatten(e: &Expr, op: BinOp, out: &mut Vec<Expr>) {
    match sbin(e, op) {
        Some((l, r)) => {
            flatten(l, op, out);
            flatten(r, op, out);
        }
        None => out.push(e.clone()),
    }
}

/// Per-slot summands when the widest slot has between m/2+1 and m terms.
fn reduce_terms(e: &Expr, m: usize, products: bool) -> Option<Vec<Vec<Expr>>> {
    let slots = e.as_pack()?;
    let mut terms = Vec::with_capacity(slots.len());
    let mut widest = 0;
    for s in slots {
        let mut t = Vec::new();
        flatten(s, BinOp::Add, &mut t);
        if products && !t.iter().all(|x| sbin(x, BinOp::Mul).is_some()) {
            return None;
        }
        widest = widest.max(t.len());
        terms.push(t);
    }
    (widest > m / 2 && widest <= m).then_some(terms)
}

/// Packs term j of slot i at index j*W + i, then folds with log2(m)
/// rotate-and-add stages so slot i ends up holding the sum of its terms.
fn build_reduce(e: &Expr, m: usize, products: bool) -> Result<Expr, IrError> {
    let terms = reduce_terms(e, m, products)
        .ok_or_else(|| IrError::type_err("reduce rule applied off-pattern"))?;
    let w = terms.len();
    let n = w * m;
    let zero = Expr::constant(0);
    let mut v = if products {
        let mut ls = vec![zero.clone(); n];
        let mut rs = vec![zero.clone(); n];
        for (i, slot) in terms.iter().enumerate() {
            for (j, t) in slot.iter().enumerate() {
                let (l, r) = sbin(t, BinOp::Mul).expect("checked products");
                ls[j * w + i] = l.clone();
                rs[j * w + i] = r.clone();
            }
        }
        Expr::vec_mul(Expr::pack(ls)?, Expr::pack(rs)?)?
    } else {
        let mut xs = vec![zero.clone(); n];
        for (i, slot) in terms.iter().enumerate() {
            for (j, t) in slot.iter().enumerate() {
                xs[j * w + i] = t.clone();
            }
        }
        Expr::pack(xs)?
    };
    let mut shift = n / 2;
    while shift >= w {
        v = Expr::vec_add(v.clone(), Expr::rot(v, shift)?)?;
        shift /= 2;
    }
    Ok(v)
}

fn reduce_rules(out: &mut Vec<Rule>) {
    for m in REDUCE_TERMS {
        out.push(Rule::new(
            format!("rotation-reduce-{m}"),
            Category::Reduce,
            Contract::Prefix,
            format!(
                "(Vec (+ (* ?a0 ?b0) (* ?a1 ?b1) ..) ..) [<= {m} products/slot] => \
                 V = (VecMul (Vec ?a..) (Vec ?b..)), then (VecAdd V (<< V k)) for k = W*{m}/2 .. W"
            ),
            move |e| reduce_terms(e, m, true).is_some(),
            move |e| build_reduce(e, m, true),
        ));
    }
    for m in REDUCE_TERMS {
        out.push(Rule::new(
            format!("sum-reduce-{m}"),
            Category::Reduce,
            Contract::Prefix,
            format!(
                "(Vec (+ ?t0 ?t1 ..) ..) [<= {m} terms/slot] => \
                 V = (Vec ?t..), then (VecAdd V (<< V k)) for k = W*{m}/2 .. W"
            ),
            move |e| reduce_terms(e, m, false).is_some(),
            move |e| build_reduce(e, m, false),
        ));
    }
}

/// Every rule in catalog order. Indices are positions in this list.
pub fn build_catalog() -> Catalog {
    let mut rules = Vec::new();
    vectorize_rules(&mut rules);
    ring_rules(&mut rules, false);
    scalar_extras(&mut rules);
    ring_rules(&mut rules, true);
    balance_rules(&mut rules);
    rotation_rules(&mut rules);
    reduce_rules(&mut rules);
    Catalog::from_rules(rules)
}
