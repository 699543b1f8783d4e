//! Linear two-head policy: a masked softmax over rules (plus END) and a
//! softmax over the match sites of the chosen rule.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::features::{site_features, state_features, SITE_BASE_DIM, STATE_BASE_DIM};
use super::Outcome;
use crate::env::{Action, Env, EnvConfig, EnvState, TraceStep};
use crate::ir::Program;
use crate::rewrite::{apply_program, catalog, match_sites};

/// Only the first sites (pre-order) of a rule are offered to the location
/// head.
pub const LOCATION_CAP: usize = 32;

const FORMAT_TAG: &str = "slotwise-policy 1";

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed policy file: {0}")]
    Format(String),
    #[error("policy was trained for catalog {found}, current catalog is {expected}")]
    CatalogMismatch { expected: String, found: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    pub catalog_version: String,
    pub num_rules: usize,
    /// Row-major `state_dim x (num_rules + 1)`; the last column is END.
    pub rule_w: Vec<f64>,
    pub loc_w: Vec<f64>,
    /// Normalization applied to state features before the rule head.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Default for Policy {
    fn default() -> Self {
        Policy::uniform()
    }
}

pub(crate) fn softmax_masked(logits: &[f64], legal: impl Fn(usize) -> bool) -> Vec<f64> {
    let max = logits
        .iter()
        .enumerate()
        .filter(|(i, _)| legal(*i))
        .map(|(_, &l)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits
        .iter()
        .enumerate()
        .map(|(i, &l)| if legal(i) { (l - max).exp() } else { 0.0 })
        .collect();
    let z: f64 = p.iter().sum();
    for x in &mut p {
        *x /= z;
    }
    p
}

fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

impl Policy {
    /// All-zero weights: uniform over legal actions. Sized for the built-in
    /// catalog.
    pub fn uniform() -> Policy {
        let c = catalog();
        let num_rules = c.len();
        let state_dim = STATE_BASE_DIM + num_rules;
        Policy {
            catalog_version: c.version().to_string(),
            num_rules,
            rule_w: vec![0.0; state_dim * (num_rules + 1)],
            loc_w: vec![0.0; SITE_BASE_DIM * (num_rules + 1)],
            mean: vec![0.0; state_dim],
            std: vec![1.0; state_dim],
        }
    }

    pub fn state_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn num_actions(&self) -> usize {
        self.num_rules + 1
    }

    pub fn end_action(&self) -> usize {
        self.num_rules
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Logits of the rule head on a normalized state.
    pub fn rule_logits(&self, xn: &[f64]) -> Vec<f64> {
        let a = self.num_actions();
        let mut out = vec![0.0; a];
        for (i, &x) in xn.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &self.rule_w[i * a..(i + 1) * a];
            for (o, w) in out.iter_mut().zip(row) {
                *o += x * w;
            }
        }
        out
    }

    /// Rule distribution over `num_rules + 1` actions. Rules without sites
    /// get probability zero; END is always legal.
    pub fn rule_probs(&self, raw_state: &[f64], counts: &[usize]) -> Vec<f64> {
        let logits = self.rule_logits(&self.normalize(raw_state));
        let end = self.end_action();
        softmax_masked(&logits, |i| i == end || counts.get(i).is_some_and(|&c| c > 0))
    }

    pub fn site_probs(&self, sites: &[Vec<f64>]) -> Vec<f64> {
        let scores: Vec<f64> = sites
            .iter()
            .map(|f| f.iter().zip(&self.loc_w).map(|(a, b)| a * b).sum())
            .collect();
        softmax_masked(&scores, |_| true)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let row = |s: &mut String, name: &str, v: &[f64]| {
            s.push_str(name);
            for x in v {
                write!(s, " {x}").unwrap();
            }
            s.push('\n');
        };
        writeln!(s, "{FORMAT_TAG}").unwrap();
        writeln!(s, "catalog {}", self.catalog_version).unwrap();
        writeln!(s, "dims {} {} {}", self.num_rules, self.state_dim(), self.loc_w.len()).unwrap();
        row(&mut s, "mean", &self.mean);
        row(&mut s, "std", &self.std);
        row(&mut s, "rule_w", &self.rule_w);
        row(&mut s, "loc_w", &self.loc_w);
        s
    }

    /// Parses a weights file and checks it against the built-in catalog.
    pub fn from_text(text: &str) -> Result<Policy, PolicyError> {
        let bad = |m: &str| PolicyError::Format(m.to_string());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some(FORMAT_TAG) {
            return Err(bad("missing header"));
        }
        let version = lines
            .next()
            .and_then(|l| l.strip_prefix("catalog "))
            .ok_or_else(|| bad("missing catalog line"))?
            .trim()
            .to_string();
        let expected = catalog().version();
        if version != expected {
            return Err(PolicyError::CatalogMismatch {
                expected: expected.to_string(),
                found: version,
            });
        }
        let dims: Vec<usize> = lines
            .next()
            .and_then(|l| l.strip_prefix("dims "))
            .ok_or_else(|| bad("missing dims line"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("bad dimension")))
            .collect::<Result<_, _>>()?;
        let [num_rules, state_dim, site_dim] = dims[..] else {
            return Err(bad("dims needs three values"));
        };
        let mut vector = |name: &str, len: usize| -> Result<Vec<f64>, PolicyError> {
            let line = lines.next().ok_or_else(|| bad(&format!("missing {name}")))?;
            let rest = line
                .strip_prefix(name)
                .ok_or_else(|| bad(&format!("expected {name}")))?;
            let v: Vec<f64> = rest
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad(&format!("bad number in {name}"))))
                .collect::<Result<_, _>>()?;
            if v.len() != len {
                return Err(bad(&format!("{name} has {} values, expected {len}", v.len())));
            }
            Ok(v)
        };
        let mean = vector("mean", state_dim)?;
        let std = vector("std", state_dim)?;
        let rule_w = vector("rule_w", state_dim * (num_rules + 1))?;
        let loc_w = vector("loc_w", site_dim)?;
        let p = Policy {
            catalog_version: version,
            num_rules,
            rule_w,
            loc_w,
            mean,
            std,
        };
        if p.num_rules != catalog().len()
            || p.state_dim() != STATE_BASE_DIM + p.num_rules
            || site_dim != SITE_BASE_DIM * (p.num_rules + 1)
        {
            return Err(bad("dimensions do not match the catalog"));
        }
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Policy, PolicyError> {
        Policy::from_text(&std::fs::read_to_string(path)?)
    }
}

/// One decision of an episode, with everything needed to recompute its
/// probabilities under different weights.
#[derive(Clone, Debug)]
pub struct EpisodeStep {
    /// Raw (unnormalized) state features.
    pub state: Vec<f64>,
    pub counts: Vec<usize>,
    /// Chosen rule, or `num_rules` for END.
    pub rule: usize,
    /// Features of the offered sites; empty for END.
    pub sites: Vec<Vec<f64>>,
    pub site: usize,
    pub reward: f64,
}

#[derive(Clone, Debug)]
pub struct Episode {
    pub steps: Vec<EpisodeStep>,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Percentage cost reduction at the end of the episode.
    pub terminal_reward: f64,
    pub trace: Vec<TraceStep>,
    pub program: Program,
    /// Cheapest program visited and the trace prefix that reaches it.
    pub best: Program,
    pub best_cost: f64,
    pub best_len: usize,
}

struct Candidates {
    features: Vec<Vec<f64>>,
}

fn site_candidates(state: &EnvState, env: &Env, rule: usize, num_rules: usize) -> Candidates {
    let r = env.catalog().get(rule).expect("legal rule");
    let mut features = Vec::new();
    for site in match_sites(r, state.program.body()).into_iter().take(LOCATION_CAP) {
        let after = apply_program(r, &state.program, &site)
            .map(|p| env.config.cost(&p))
            .unwrap_or(state.last_cost);
        let sub = state.program.body().at(&site.path).expect("site path");
        features.push(site_features(
            sub,
            site.path.len(),
            state.last_cost,
            after,
            rule,
            num_rules,
        ));
    }
    Candidates { features }
}

fn run_episode(
    env: &Env,
    policy: &Policy,
    p: &Program,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Episode {
    let mut state = env.reset(p);
    let mut steps = Vec::new();
    let (mut best, mut best_cost, mut best_len) = (p.clone(), state.initial_cost, 0);
    while !state.done {
        let mask = env.action_mask(&state).expect("episode running");
        let x = state_features(
            &state.program,
            state.last_cost,
            state.step_count,
            env.config.max_steps,
            &mask.counts,
        );
        let probs = policy.rule_probs(&x, &mask.counts);
        let rule = match rng.as_deref_mut() {
            Some(r) => sample_index(&probs, r),
            None => argmax(&probs),
        };
        let (action, sites, site) = if rule == policy.end_action() {
            (Action::End, Vec::new(), 0)
        } else {
            let c = site_candidates(&state, env, rule, policy.num_rules);
            let q = policy.site_probs(&c.features);
            let site = match rng.as_deref_mut() {
                Some(r) => sample_index(&q, r),
                None => argmax(&q),
            };
            (Action::Rewrite { rule, site }, c.features, site)
        };
        let out = env.step(&mut state, action).expect("masked action is legal");
        if state.last_cost < best_cost {
            best = state.program.clone();
            best_cost = state.last_cost;
            best_len = state.trace.len();
        }
        steps.push(EpisodeStep {
            state: x,
            counts: mask.counts,
            rule,
            sites,
            site,
            reward: out.reward,
        });
    }
    Episode {
        steps,
        initial_cost: state.initial_cost,
        final_cost: state.last_cost,
        terminal_reward: crate::env::final_reward(state.initial_cost, state.last_cost),
        trace: state.trace,
        program: state.program,
        best,
        best_cost,
        best_len,
    }
}

/// Samples one episode from the policy.
pub fn sample_episode(env: &Env, policy: &Policy, p: &Program, rng: &mut ChaCha8Rng) -> Episode {
    run_episode(env, policy, p, Some(rng))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeMode {
    /// Most likely rule and site at every step.
    Greedy,
    /// Best of `samples` sampled episodes.
    Sample { samples: usize, seed: u64 },
}

/// Runs the policy on `p` and returns the cheapest program it visits.
pub fn policy_optimize(p: &Program, policy: &Policy, cfg: &EnvConfig, mode: DecodeMode) -> Outcome {
    let env = Env::new(*cfg);
    let episodes = match mode {
        DecodeMode::Greedy => vec![run_episode(&env, policy, p, None)],
        DecodeMode::Sample { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..samples.max(1))
                .map(|_| run_episode(&env, policy, p, Some(&mut rng)))
                .collect()
        }
    };
    let ep = episodes
        .into_iter()
        .min_by(|a, b| a.best_cost.total_cmp(&b.best_cost))
        .expect("at least one episode");
    let trace = ep
        .trace
        .into_iter()
        .take(ep.best_len)
        .filter(|t| t.rule.is_some())
        .collect();
    Outcome {
        program: ep.best,
        cost_initial: ep.initial_cost,
        cost_final: ep.best_cost,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;

    #[test]
    fn uniform_policy_spreads_over_legal_actions() {
        let pol = Policy::uniform();
        let mut counts = vec![0; pol.num_rules];
        counts[3] = 2;
        counts[7] = 1;
        let x = vec![0.5; pol.state_dim()];
        let p = pol.rule_probs(&x, &counts);
        assert!((p[3] - 1.0 / 3.0).abs() < 1e-12);
        assert!((p[pol.end_action()] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(p[0], 0.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn text_round_trip() {
        let mut pol = Policy::uniform();
        pol.rule_w[5] = 0.125;
        pol.loc_w[2] = -3.5e-7;
        pol.std[0] = 2.0;
        let back = Policy::from_text(&pol.to_text()).unwrap();
        assert_eq!(back, pol);
    }

    #[test]
    fn rejects_other_catalog() {
        let text = Policy::uniform().to_text().replace("catalog catalog-1", "catalog catalog-0");
        assert!(matches!(
            Policy::from_text(&text),
            Err(PolicyError::CatalogMismatch { .. })
        ));
    }

    #[test]
    fn episodes_are_seeded_and_never_worse() {
        let env = Env::new(EnvConfig::default());
        let p = parse_program("(Vec (+ (* a 1) b) (* c d))").unwrap();
        let pol = Policy::uniform();
        let a = sample_episode(&env, &pol, &p, &mut ChaCha8Rng::seed_from_u64(3));
        let b = sample_episode(&env, &pol, &p, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a.trace, b.trace);
        let out = policy_optimize(
            &p,
            &pol,
            &EnvConfig::default(),
            DecodeMode::Sample { samples: 3, seed: 1 },
        );
        assert!(out.cost_final <= out.cost_initial);
    }
}
