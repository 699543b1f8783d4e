//! Fixed-length feature maps for the policy heads.

use crate::env::step_reward;
use crate::ir::{Expr, ExprKind, Program};

/// State features before the per-rule match counts.
pub const STATE_BASE_DIM: usize = 15;
/// Site features before the per-rule block.
pub const SITE_BASE_DIM: usize = 5;

const MATCH_CLIP: f64 = 4.0;

fn squash(x: usize) -> f64 {
    (1.0 + x as f64).ln() / 5.0
}

/// Op-class counts, shape, cost, step fraction, clipped per-rule match
/// counts and a bias term. Length is `STATE_BASE_DIM + counts.len()`.
pub fn state_features(
    p: &Program,
    cost: f64,
    step: usize,
    max_steps: usize,
    counts: &[usize],
) -> Vec<f64> {
    let mut class = [0usize; 10];
    p.body().walk(&mut |_, e| {
        let i = match e.kind() {
            ExprKind::Var { .. } => 0,
            ExprKind::Const(_) => 1,
            ExprKind::Neg(_) => 2,
            ExprKind::Add(..) | ExprKind::Sub(..) => 3,
            ExprKind::Mul(..) => 4,
            ExprKind::Vec(_) => 5,
            ExprKind::VecNeg(_) => 6,
            ExprKind::VecAdd(..) | ExprKind::VecSub(..) => 7,
            ExprKind::VecMul(..) => 8,
            ExprKind::Rot(..) => 9,
        };
        class[i] += 1;
    });
    let body = p.body();
    let mut f = Vec::with_capacity(STATE_BASE_DIM + counts.len());
    f.extend(class.iter().map(|&c| squash(c)));
    f.push(body.depth() as f64 / 20.0);
    f.push(body.mult_depth() as f64 / 10.0);
    f.push((1.0 + cost.max(0.0)).ln() / 10.0);
    f.push(if max_steps == 0 { 0.0 } else { step as f64 / max_steps as f64 });
    f.push(1.0);
    f.extend(counts.iter().map(|&c| (c as f64).min(MATCH_CLIP) / MATCH_CLIP));
    f
}

/// Features of one match site for `rule`: subtree size and depth, path
/// length, the immediate reward of rewriting there, and a bias, followed by
/// a copy of those five values in the block owned by `rule` (zero
/// elsewhere). The block makes site preferences rule specific.
pub fn site_features(
    subtree: &Expr,
    path_len: usize,
    cost_before: f64,
    cost_after: f64,
    rule: usize,
    num_rules: usize,
) -> Vec<f64> {
    let base = [
        squash(subtree.size()),
        subtree.depth() as f64 / 20.0,
        path_len as f64 / 20.0,
        step_reward(cost_before, cost_after).clamp(-1.0, 1.0),
        1.0,
    ];
    let mut f = vec![0.0; SITE_BASE_DIM * (1 + num_rules)];
    f[..SITE_BASE_DIM].copy_from_slice(&base);
    let off = SITE_BASE_DIM * (1 + rule);
    f[off..off + SITE_BASE_DIM].copy_from_slice(&base);
    f
}
