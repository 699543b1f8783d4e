//! Policy-gradient training: REINFORCE with a moving-average baseline, or
//! PPO-clip over the same batches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use super::features::state_features;
use super::policy::{sample_episode, softmax_masked, Episode, EpisodeStep, Policy};
use crate::env::{Env, EnvConfig};
use crate::ir::Program;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UpdateMode {
    Reinforce,
    PpoClip { epsilon: f64, epochs: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub gamma: f64,
    pub episodes: usize,
    /// Episodes sampled concurrently per update.
    pub envs: usize,
    pub baseline_decay: f64,
    pub entropy_bonus: f64,
    pub seed: u64,
    pub mode: UpdateMode,
    pub env: EnvConfig,
    /// Keep a copy of the policy every this many updates (0 disables).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            gamma: 0.99,
            episodes: 1000,
            envs: 8,
            baseline_decay: 0.95,
            entropy_bonus: 0.01,
            seed: 0,
            mode: UpdateMode::Reinforce,
            env: EnvConfig::default(),
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        // lr = 0 is allowed: it is the frozen-policy control run
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return bad("baseline decay must be in [0, 1)");
        }
        if self.envs == 0 {
            return bad("need at least one environment");
        }
        if let UpdateMode::PpoClip { epsilon, epochs } = self.mode {
            if epsilon.is_nan() || epsilon <= 0.0 || epochs == 0 {
                return bad("PPO needs epsilon > 0 and at least one epoch");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrainLog {
    /// Percentage cost reduction of every training episode, in order.
    pub terminal_rewards: Vec<f64>,
    pub checkpoints: Vec<Policy>,
}

impl TrainLog {
    pub fn mean_first(&self, n: usize) -> f64 {
        mean(&self.terminal_rewards[..n.min(self.terminal_rewards.len())])
    }

    pub fn mean_last(&self, n: usize) -> f64 {
        let k = self.terminal_rewards.len();
        mean(&self.terminal_rewards[k - n.min(k)..])
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Discounted returns `G_t = sum_k gamma^k r_{t+k}`.
fn returns(steps: &[EpisodeStep], gamma: f64) -> Vec<f64> {
    let mut g = vec![0.0; steps.len()];
    let mut acc = 0.0;
    for (t, s) in steps.iter().enumerate().rev() {
        acc = s.reward + gamma * acc;
        g[t] = acc;
    }
    g
}

/// `sum_t A_t log pi(rule_t | s_t)` over a fixed batch.
pub fn rule_head_objective(policy: &Policy, steps: &[EpisodeStep], advantages: &[f64]) -> f64 {
    steps
        .iter()
        .zip(advantages)
        .map(|(s, a)| a * policy.rule_probs(&s.state, &s.counts)[s.rule].ln())
        .sum()
}

/// Analytic gradient of [`rule_head_objective`] with respect to the rule
/// head weights (same layout as `Policy::rule_w`).
pub fn rule_head_gradient(policy: &Policy, steps: &[EpisodeStep], advantages: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; policy.rule_w.len()];
    for (s, &a) in steps.iter().zip(advantages) {
        add_rule_grad(policy, s, a, 0.0, &mut g);
    }
    g
}

/// Adds `scale * grad log pi(rule)` plus `entropy * grad H` to `g`.
fn add_rule_grad(policy: &Policy, s: &EpisodeStep, scale: f64, entropy: f64, g: &mut [f64]) {
    let xn = policy.normalize(&s.state);
    let end = policy.end_action();
    let logits = policy.rule_logits(&xn);
    let p = softmax_masked(&logits, |i| i == end || s.counts.get(i).is_some_and(|&c| c > 0));
    let h: f64 = p.iter().filter(|&&q| q > 0.0).map(|q| -q * q.ln()).sum();
    let na = policy.num_actions();
    let dz: Vec<f64> = (0..na)
        .map(|j| {
            let onehot = if j == s.rule { 1.0 } else { 0.0 };
            let ent = if p[j] > 0.0 { -p[j] * (p[j].ln() + h) } else { 0.0 };
            scale * (onehot - p[j]) + entropy * ent
        })
        .collect();
    for (i, &x) in xn.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (gj, d) in g[i * na..(i + 1) * na].iter_mut().zip(&dz) {
            *gj += x * d;
        }
    }
}

fn site_log_prob(policy: &Policy, s: &EpisodeStep) -> f64 {
    if s.sites.is_empty() {
        0.0
    } else {
        policy.site_probs(&s.sites)[s.site].ln()
    }
}

fn add_site_grad(policy: &Policy, s: &EpisodeStep, scale: f64, g: &mut [f64]) {
    if s.sites.is_empty() {
        return;
    }
    let q = policy.site_probs(&s.sites);
    for (k, f) in s.sites.iter().enumerate() {
        let coef = scale * ((if k == s.site { 1.0 } else { 0.0 }) - q[k]);
        if coef == 0.0 {
            continue;
        }
        for (gi, x) in g.iter_mut().zip(f) {
            *gi += coef * x;
        }
    }
}

fn joint_log_prob(policy: &Policy, s: &EpisodeStep) -> f64 {
    policy.rule_probs(&s.state, &s.counts)[s.rule].ln() + site_log_prob(policy, s)
}

/// Mean and spread of the state features over the corpus start states.
fn fit_normalization(policy: &mut Policy, corpus: &[Program], env: &Env) {
    let dim = policy.state_dim();
    let rows: Vec<Vec<f64>> = corpus
        .par_iter()
        .map(|p| {
            let counts = env.catalog().match_counts(p.body());
            state_features(p, env.config.cost(p), 0, env.config.max_steps, &counts)
        })
        .collect();
    let n = rows.len() as f64;
    for i in 0..dim {
        let m = rows.iter().map(|r| r[i]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[i] - m).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        // constant columns (the bias among them) pass through unchanged
        if sd < 1e-6 {
            policy.mean[i] = 0.0;
            policy.std[i] = 1.0;
        } else {
            policy.mean[i] = m;
            policy.std[i] = sd;
        }
    }
}

/// Trains a fresh policy on `corpus`.
pub fn train(corpus: &[Program], cfg: &TrainConfig) -> Result<(Policy, TrainLog), TrainError> {
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    cfg.validate()?;
    let mut policy = Policy::uniform();
    fit_normalization(&mut policy, corpus, &Env::new(cfg.env));
    train_continue(policy, corpus, cfg)
}

/// Continues training an existing policy; normalization stays fixed.
pub fn train_continue(
    mut policy: Policy,
    corpus: &[Program],
    cfg: &TrainConfig,
) -> Result<(Policy, TrainLog), TrainError> {
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    cfg.validate()?;
    let env = Env::new(cfg.env);
    let mut log = TrainLog::default();
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut baseline: Option<f64> = None;
    let mut done = 0;
    let mut updates = 0;
    while done < cfg.episodes {
        let n = cfg.envs.min(cfg.episodes - done);
        let jobs: Vec<(usize, u64)> = (0..n)
            .map(|_| (master.gen_range(0..corpus.len()), master.gen()))
            .collect();
        let episodes: Vec<Episode> = jobs
            .par_iter()
            .map(|&(i, seed)| {
                sample_episode(&env, &policy, &corpus[i], &mut ChaCha8Rng::seed_from_u64(seed))
            })
            .collect();
        done += n;

        let mut steps: Vec<&EpisodeStep> = Vec::new();
        let mut rets: Vec<f64> = Vec::new();
        for ep in &episodes {
            log.terminal_rewards.push(ep.terminal_reward);
            steps.extend(ep.steps.iter());
            rets.extend(returns(&ep.steps, cfg.gamma));
        }
        let b = baseline.unwrap_or_else(|| mean(&rets));
        let adv: Vec<f64> = rets.iter().map(|g| g - b).collect();
        let scale = 1.0 / n as f64;

        match cfg.mode {
            UpdateMode::Reinforce => {
                let mut gr = vec![0.0; policy.rule_w.len()];
                let mut gl = vec![0.0; policy.loc_w.len()];
                for (s, a) in steps.iter().zip(&adv) {
                    add_rule_grad(&policy, s, a * scale, cfg.entropy_bonus * scale, &mut gr);
                    add_site_grad(&policy, s, a * scale, &mut gl);
                }
                step_weights(&mut policy, &gr, &gl, cfg.lr);
            }
            UpdateMode::PpoClip { epsilon, epochs } => {
                let old: Vec<f64> = steps.iter().map(|s| joint_log_prob(&policy, s)).collect();
                for _ in 0..epochs {
                    let mut gr = vec![0.0; policy.rule_w.len()];
                    let mut gl = vec![0.0; policy.loc_w.len()];
                    for ((s, a), lp_old) in steps.iter().zip(&adv).zip(&old) {
                        let ratio = (joint_log_prob(&policy, s) - lp_old).exp();
                        let clipped = (*a > 0.0 && ratio > 1.0 + epsilon)
                            || (*a < 0.0 && ratio < 1.0 - epsilon);
                        let coef = if clipped { 0.0 } else { a * ratio * scale };
                        add_rule_grad(&policy, s, coef, cfg.entropy_bonus * scale, &mut gr);
                        add_site_grad(&policy, s, coef, &mut gl);
                    }
                    step_weights(&mut policy, &gr, &gl, cfg.lr);
                }
            }
        }
        let batch_mean = mean(&rets);
        baseline = Some(match baseline {
            None => batch_mean,
            Some(b) => cfg.baseline_decay * b + (1.0 - cfg.baseline_decay) * batch_mean,
        });
        updates += 1;
        if cfg.checkpoint_every > 0 && updates % cfg.checkpoint_every == 0 {
            log.checkpoints.push(policy.clone());
        }
    }
    Ok((policy, log))
}

fn step_weights(policy: &mut Policy, gr: &[f64], gl: &[f64], lr: f64) {
    if lr == 0.0 {
        return;
    }
    for (w, g) in policy.rule_w.iter_mut().zip(gr) {
        *w += lr * g;
    }
    for (w, g) in policy.loc_w.iter_mut().zip(gl) {
        *w += lr * g;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;

    fn corpus() -> Vec<Program> {
        ["(Vec (* x 1))", "(Vec (+ a b) (+ c d))", "(Vec (* p 1) (- q 0))"]
            .iter()
            .map(|s| parse_program(s).unwrap())
            .collect()
    }

    #[test]
    fn rejects_empty_corpus_and_bad_gamma() {
        assert_eq!(
            train(&[], &TrainConfig::default()).unwrap_err(),
            TrainError::EmptyCorpus
        );
        let cfg = TrainConfig {
            gamma: 0.0,
            ..Default::default()
        };
        assert!(matches!(train(&corpus(), &cfg), Err(TrainError::InvalidConfig(_))));
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let cfg = TrainConfig {
            lr: 0.0,
            episodes: 16,
            ..Default::default()
        };
        let start = Policy::uniform();
        let (p, log) = train_continue(start.clone(), &corpus(), &cfg).unwrap();
        assert_eq!(p, start);
        assert_eq!(log.terminal_rewards.len(), 16);
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainConfig {
            lr: 0.05,
            episodes: 24,
            ..Default::default()
        };
        let (a, _) = train(&corpus(), &cfg).unwrap();
        let (b, _) = train(&corpus(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ppo_mode_runs() {
        let cfg = TrainConfig {
            lr: 0.05,
            episodes: 16,
            mode: UpdateMode::PpoClip {
                epsilon: 0.2,
                epochs: 2,
            },
            ..Default::default()
        };
        let (p, _) = train(&corpus(), &cfg).unwrap();
        assert!(p.rule_w.iter().all(|w| w.is_finite()));
    }

    #[test]
    fn site_gradient_matches_finite_differences() {
        let env = Env::new(EnvConfig::default());
        let mut policy = Policy::uniform();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for w in policy.loc_w.iter_mut() {
            *w = rng.gen_range(-0.5..0.5);
        }
        let steps: Vec<EpisodeStep> = corpus()
            .iter()
            .flat_map(|p| sample_episode(&env, &policy, p, &mut rng).steps)
            .filter(|s| s.sites.len() > 1)
            .collect();
        assert!(!steps.is_empty());
        let objective = |p: &Policy| steps.iter().map(|s| site_log_prob(p, s)).sum::<f64>();
        let mut g = vec![0.0; policy.loc_w.len()];
        for s in &steps {
            add_site_grad(&policy, s, 1.0, &mut g);
        }
        let h = 1e-5;
        for (i, &gi) in g.iter().enumerate() {
            let mut up = policy.clone();
            up.loc_w[i] += h;
            let mut down = policy.clone();
            down.loc_w[i] -= h;
            let fd = (objective(&up) - objective(&down)) / (2.0 * h);
            let err = (fd - gi).abs() / fd.abs().max(gi.abs()).max(1e-8);
            assert!(err <= 1e-4 || (fd - gi).abs() < 1e-9, "weight {i}: {fd} vs {gi}");
        }
    }
}
