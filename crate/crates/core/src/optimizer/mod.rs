//! Search strategies over the rewrite environment.
//!
//! All strategies remember the cheapest program they have visited and return
//! it, so exploratory cost increases never make the result worse than the
//! input.

mod features;
mod policy;
mod train;

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::canon::canon_key_with_kinds;
use crate::env::{step_reward, EnvConfig, TraceStep};
use crate::ir::Program;
use crate::rewrite::{apply_program, catalog, match_sites};

pub use features::{site_features, state_features, SITE_BASE_DIM, STATE_BASE_DIM};
pub use policy::{
    policy_optimize, sample_episode, DecodeMode, Episode, EpisodeStep, Policy, PolicyError,
    LOCATION_CAP,
};
pub use train::{
    rule_head_gradient, rule_head_objective, train, train_continue, TrainConfig, TrainError,
    TrainLog, UpdateMode,
};

pub const DEFAULT_BEAM_WIDTH: usize = 8;
pub const DEFAULT_EXPANSION_CAP: usize = 64;
pub const DEFAULT_PATIENCE: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchConfig {
    pub env: EnvConfig,
    /// Children kept per expanded state, best immediate reward first.
    pub expansion_cap: usize,
    /// Beam levels without improvement of the best cost before stopping.
    pub patience: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            env: EnvConfig::default(),
            expansion_cap: DEFAULT_EXPANSION_CAP,
            patience: DEFAULT_PATIENCE,
        }
    }
}

/// Result of an optimization run.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub program: Program,
    pub cost_initial: f64,
    pub cost_final: f64,
    /// Rewrites leading from the input to `program`.
    pub trace: Vec<TraceStep>,
}

impl Outcome {
    fn unchanged(p: &Program, cost: f64) -> Outcome {
        Outcome {
            program: p.clone(),
            cost_initial: cost,
            cost_final: cost,
            trace: Vec::new(),
        }
    }

    pub fn steps(&self) -> usize {
        self.trace.len()
    }
}

/// A program reachable in one rewrite.
#[derive(Clone, Debug)]
pub struct Successor {
    pub rule: usize,
    pub site: usize,
    pub program: Program,
    pub cost: f64,
}

/// Every one-step rewrite of `p`, in (rule index, site ordinal) order.
pub fn successors(p: &Program, env: &EnvConfig) -> Vec<Successor> {
    let mut out = Vec::new();
    for rule in catalog().rules() {
        for site in match_sites(rule, p.body()) {
            if let Ok(next) = apply_program(rule, p, &site) {
                let cost = env.cost(&next);
                out.push(Successor {
                    rule: rule.index(),
                    site: site.ordinal,
                    program: next,
                    cost,
                });
            }
        }
    }
    out
}

fn trace_step(step: usize, s: &Successor, before: f64) -> TraceStep {
    TraceStep {
        step,
        rule: Some(s.rule),
        rule_name: catalog().get(s.rule).map(|r| r.name().to_string()).unwrap_or_default(),
        site: Some(s.site),
        reward: step_reward(before, s.cost),
        cost_after: s.cost,
    }
}

/// Repeatedly applies the rewrite with the largest immediate reward; stops
/// when no rewrite improves the cost. Ties go to the lower rule index, then
/// the lower site ordinal.
pub fn greedy(p: &Program, cfg: &SearchConfig) -> Outcome {
    let c0 = cfg.env.cost(p);
    let mut out = Outcome::unchanged(p, c0);
    for step in 1..=cfg.env.max_steps {
        let cur = out.cost_final;
        let mut best: Option<Successor> = None;
        let mut best_reward = 0.0;
        for s in successors(&out.program, &cfg.env) {
            let r = step_reward(cur, s.cost);
            if r > best_reward {
                best_reward = r;
                best = Some(s);
            }
        }
        let Some(s) = best else { break };
        out.trace.push(trace_step(step, &s, cur));
        out.cost_final = s.cost;
        out.program = s.program;
    }
    out
}

#[derive(Clone)]
struct BeamNode {
    program: Program,
    cost: f64,
    trace: Vec<TraceStep>,
}

/// Keeps the `width` cheapest distinct states per level. Each state expands
/// into at most `expansion_cap` children chosen by immediate reward; states
/// seen before (up to variable renaming) are dropped.
pub fn beam(p: &Program, width: usize, cfg: &SearchConfig) -> Outcome {
    let width = width.max(1);
    let c0 = cfg.env.cost(p);
    let mut visited: HashSet<String> = HashSet::new();
    visited.insert(canon_key_with_kinds(p));
    let mut frontier = vec![BeamNode {
        program: p.clone(),
        cost: c0,
        trace: Vec::new(),
    }];
    let mut best = frontier[0].clone();
    let mut stale = 0;
    for level in 1..=cfg.env.max_steps {
        let mut children: Vec<BeamNode> = Vec::new();
        for node in &frontier {
            let mut succ = successors(&node.program, &cfg.env);
            // stable: equal costs keep (rule, site) order
            succ.sort_by(|a, b| a.cost.total_cmp(&b.cost));
            succ.truncate(cfg.expansion_cap);
            for s in succ {
                if !visited.insert(canon_key_with_kinds(&s.program)) {
                    continue;
                }
                let mut trace = node.trace.clone();
                trace.push(trace_step(level, &s, node.cost));
                children.push(BeamNode {
                    program: s.program,
                    cost: s.cost,
                    trace,
                });
            }
        }
        if children.is_empty() {
            break;
        }
        children.sort_by(|a, b| a.cost.total_cmp(&b.cost));
        children.truncate(width);
        if children[0].cost < best.cost {
            best = children[0].clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
        frontier = children;
    }
    Outcome {
        program: best.program,
        cost_initial: c0,
        cost_final: best.cost,
        trace: best.trace,
    }
}

/// Uniformly random legal rewrites, `samples` rollouts of up to
/// `max_steps` each; the cheapest program seen wins.
pub fn random_search(p: &Program, samples: usize, seed: u64, cfg: &SearchConfig) -> Outcome {
    let c0 = cfg.env.cost(p);
    let mut best = Outcome::unchanged(p, c0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples.max(1) {
        let mut cur = Outcome::unchanged(p, c0);
        for step in 1..=cfg.env.max_steps {
            let succ = successors(&cur.program, &cfg.env);
            // END competes with every rewrite
            if succ.is_empty() || rng.gen_range(0..=succ.len()) == succ.len() {
                break;
            }
            let s = succ.choose(&mut rng).expect("non-empty").clone();
            cur.trace.push(trace_step(step, &s, cur.cost_final));
            cur.cost_final = s.cost;
            cur.program = s.program;
            if cur.cost_final < best.cost_final {
                best = cur.clone();
            }
        }
    }
    best
}
