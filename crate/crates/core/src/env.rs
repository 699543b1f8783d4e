//! Rewrite environment: a program is the state, an action picks a rule and
//! one of its match sites (or ends the episode), and rewards are relative
//! cost improvements.

use thiserror::Error;

use crate::cost::{total_cost, CostTable, Weights};
use crate::ir::Program;
use crate::rewrite::{apply_ordinal, catalog, Catalog};

pub const DEFAULT_MAX_STEPS: usize = 75;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvConfig {
    pub table: CostTable,
    pub weights: Weights,
    pub max_steps: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            table: CostTable::default(),
            weights: Weights::default(),
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

impl EnvConfig {
    pub fn cost(&self, p: &Program) -> f64 {
        total_cost(p.body(), &self.table, &self.weights)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Rewrite { rule: usize, site: usize },
    End,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("episode already finished")]
    EpisodeDone,
    #[error("illegal action: rule {rule} site {site}")]
    IllegalAction { rule: usize, site: usize },
}

/// One applied action.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    /// `None` for END.
    pub rule: Option<usize>,
    pub rule_name: String,
    pub site: Option<usize>,
    pub reward: f64,
    pub cost_after: f64,
}

impl TraceStep {
    pub const CSV_HEADER: &'static str = "step,rule_name,site,reward,cost_after";

    pub fn csv_line(&self) -> String {
        let site = self.site.map(|s| s.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{}",
            self.step, self.rule_name, site, self.reward, self.cost_after
        )
    }
}

#[derive(Clone, Debug)]
pub struct EnvState {
    pub program: Program,
    pub step_count: usize,
    pub initial_cost: f64,
    pub last_cost: f64,
    pub done: bool,
    pub trace: Vec<TraceStep>,
}

/// Per-rule site counts; END is always legal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionMask {
    pub counts: Vec<usize>,
}

impl ActionMask {
    pub fn is_legal(&self, a: Action) -> bool {
        match a {
            Action::End => true,
            Action::Rewrite { rule, site } => self.counts.get(rule).is_some_and(|&n| site < n),
        }
    }

    pub fn total_sites(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn any_rewrite(&self) -> bool {
        self.counts.iter().any(|&c| c > 0)
    }
}

/// `(C_t - C_{t+1}) / C_t`, zero when the current cost is zero.
pub fn step_reward(cost_before: f64, cost_after: f64) -> f64 {
    if cost_before == 0.0 {
        0.0
    } else {
        (cost_before - cost_after) / cost_before
    }
}

/// Percentage reduction over the episode, zero for a zero initial cost.
pub fn final_reward(initial_cost: f64, final_cost: f64) -> f64 {
    if initial_cost == 0.0 {
        0.0
    } else {
        100.0 * (initial_cost - final_cost) / initial_cost
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
}

pub struct Env {
    pub config: EnvConfig,
    catalog: &'static Catalog,
}

impl Env {
    pub fn new(config: EnvConfig) -> Env {
        Env {
            config,
            catalog: catalog(),
        }
    }

    pub fn catalog(&self) -> &'static Catalog {
        self.catalog
    }

    pub fn reset(&self, p: &Program) -> EnvState {
        let c = self.config.cost(p);
        EnvState {
            program: p.clone(),
            step_count: 0,
            initial_cost: c,
            last_cost: c,
            done: false,
            trace: Vec::new(),
        }
    }

    pub fn action_mask(&self, s: &EnvState) -> Result<ActionMask, EnvError> {
        if s.done {
            return Err(EnvError::EpisodeDone);
        }
        Ok(ActionMask {
            counts: self.catalog.match_counts(s.program.body()),
        })
    }

    pub fn step(&self, s: &mut EnvState, a: Action) -> Result<StepOutcome, EnvError> {
        if s.done {
            return Err(EnvError::EpisodeDone);
        }
        match a {
            Action::End => {
                let reward = final_reward(s.initial_cost, s.last_cost);
                s.done = true;
                s.trace.push(TraceStep {
                    step: s.step_count,
                    rule: None,
                    rule_name: "END".into(),
                    site: None,
                    reward,
                    cost_after: s.last_cost,
                });
                Ok(StepOutcome { reward, done: true })
            }
            Action::Rewrite { rule, site } => {
                let illegal = EnvError::IllegalAction { rule, site };
                let r = self.catalog.get(rule).ok_or(illegal.clone())?;
                let next = apply_ordinal(r, &s.program, site).map_err(|_| illegal)?;
                let cost = self.config.cost(&next);
                let mut reward = step_reward(s.last_cost, cost);
                s.program = next;
                s.last_cost = cost;
                s.step_count += 1;
                if s.step_count >= self.config.max_steps {
                    s.done = true;
                    reward += final_reward(s.initial_cost, cost);
                }
                s.trace.push(TraceStep {
                    step: s.step_count,
                    rule: Some(rule),
                    rule_name: r.name().to_string(),
                    site: Some(site),
                    reward,
                    cost_after: cost,
                });
                Ok(StepOutcome {
                    reward,
                    done: s.done,
                })
            }
        }
    }
}
