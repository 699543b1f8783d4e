//! Rotation key budgeting.
//!
//! Every distinct rotation step normally needs its own key. A step can
//! instead be realized by chaining rotations along its non-adjacent form
//! (NAF), so a few shared power-of-two keys can replace many per-step keys.
//! Negative components are right rotations and are separate keys.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::ir::{Expr, ExprKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeyError {
    #[error("rotation step must be positive, got {0}")]
    NonPositiveStep(i64),
    #[error("step {step} is outside [1, {}]", .slots - 1)]
    StepOutOfRange { step: i64, slots: i64 },
    #[error("slot count must be at least 2, got {0}")]
    BadSlots(i64),
    #[error("budget must be at least 1")]
    BadBudget,
    #[error("no plan fits: {needed} keys needed, budget is {beta}")]
    BudgetInfeasible { needed: usize, beta: usize },
    #[error("step {0} is not part of the plan")]
    UnknownStep(i64),
}

/// NAF digits of `s`, least significant first. Each digit is -1, 0 or 1
/// and no two adjacent digits are both non-zero.
pub fn naf_digits(s: i64) -> Result<Vec<i8>, KeyError> {
    if s < 1 {
        return Err(KeyError::NonPositiveStep(s));
    }
    let mut digits = Vec::new();
    let mut k = s as i128;
    while k != 0 {
        if k & 1 == 1 {
            let d = 2 - (k & 3) as i8; // k mod 4 = 1 -> 1, 3 -> -1
            digits.push(d);
            k -= d as i128;
        } else {
            digits.push(0);
        }
        k /= 2;
    }
    Ok(digits)
}

/// The NAF of `s` as signed powers of two, smallest magnitude first:
/// `naf(11) = [-1, -4, 16]`.
pub fn naf(s: i64) -> Result<Vec<i64>, KeyError> {
    Ok(naf_digits(s)?
        .iter()
        .enumerate()
        .filter(|(_, &d)| d != 0)
        .map(|(i, &d)| d as i64 * (1i64 << i))
        .collect())
}

/// NAF components reduced cyclically into `(-n, n)`; components that wrap
/// to zero are dropped.
pub fn components(s: i64, n: i64) -> Result<Vec<i64>, KeyError> {
    Ok(naf(s)?
        .into_iter()
        .map(|c| c.signum() * (c.abs() % n))
        .filter(|&c| c != 0)
        .collect())
}

/// Default budget `2 * ceil(log2 n)`.
pub fn default_beta(n: i64) -> usize {
    let n = n.max(2) as u64;
    2 * (64 - (n - 1).leading_zeros()) as usize
}

/// Distinct left-rotation steps used by an expression.
pub fn rotation_steps(e: &Expr) -> BTreeSet<i64> {
    let mut out = BTreeSet::new();
    e.walk(&mut |_, node| {
        if let ExprKind::Rot(_, s) = node.kind() {
            out.insert(*s as i64);
        }
    });
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyPlan {
    pub chi: BTreeSet<i64>,
    pub n: i64,
    pub beta: usize,
    /// Steps realized through their NAF components.
    pub omega: BTreeSet<i64>,
    /// Steps that keep a dedicated key.
    pub chi_f: BTreeSet<i64>,
    pub gamma: BTreeMap<i64, Vec<i64>>,
    pub gamma_tot: BTreeSet<i64>,
    pub keys: BTreeSet<i64>,
    /// Rotations applied to realize each step of `chi`.
    pub realization: BTreeMap<i64, Vec<i64>>,
}

fn check_steps(chi: &BTreeSet<i64>, n: i64) -> Result<(), KeyError> {
    if n < 2 {
        return Err(KeyError::BadSlots(n));
    }
    match chi.iter().find(|&&s| s < 1 || s >= n) {
        Some(&s) if s < 1 => Err(KeyError::NonPositiveStep(s)),
        Some(&s) => Err(KeyError::StepOutOfRange { step: s, slots: n }),
        None => Ok(()),
    }
}

fn key_set(chi: &BTreeSet<i64>, omega: &BTreeSet<i64>, gamma: &BTreeMap<i64, Vec<i64>>) -> BTreeSet<i64> {
    let mut keys: BTreeSet<i64> = chi.difference(omega).copied().collect();
    for s in omega {
        keys.extend(gamma[s].iter().copied());
    }
    keys
}

impl KeyPlan {
    /// Builds the plan that decomposes exactly the steps in `omega`.
    /// Fails with `BudgetInfeasible` when the resulting key set exceeds
    /// `beta`.
    pub fn with_omega(
        chi: &BTreeSet<i64>,
        n: i64,
        beta: usize,
        omega: &BTreeSet<i64>,
    ) -> Result<KeyPlan, KeyError> {
        check_steps(chi, n)?;
        if beta == 0 {
            return Err(KeyError::BadBudget);
        }
        if let Some(&s) = omega.difference(chi).next() {
            return Err(KeyError::UnknownStep(s));
        }
        let mut gamma = BTreeMap::new();
        for &s in omega {
            gamma.insert(s, components(s, n)?);
        }
        let keys = key_set(chi, omega, &gamma);
        if keys.len() > beta {
            return Err(KeyError::BudgetInfeasible {
                needed: keys.len(),
                beta,
            });
        }
        let gamma_tot: BTreeSet<i64> = gamma.values().flatten().copied().collect();
        let chi_f: BTreeSet<i64> = chi.difference(omega).copied().collect();
        let realization = chi
            .iter()
            .map(|&s| {
                let r = if keys.contains(&s) {
                    vec![s]
                } else {
                    gamma[&s].clone()
                };
                (s, r)
            })
            .collect();
        Ok(KeyPlan {
            chi: chi.clone(),
            n,
            beta,
            omega: omega.clone(),
            chi_f,
            gamma,
            gamma_tot,
            keys,
            realization,
        })
    }

    /// Rotations needed to realize step `s`.
    pub fn realization_cost(&self, s: i64) -> Result<usize, KeyError> {
        self.realization
            .get(&s)
            .map(Vec::len)
            .ok_or(KeyError::UnknownStep(s))
    }

    /// Checks the plan invariants; used by tests and the CLI.
    pub fn is_valid(&self) -> bool {
        let recomposes = self.realization.iter().all(|(&s, parts)| {
            parts.iter().all(|c| self.keys.contains(c))
                && parts.iter().sum::<i64>().rem_euclid(self.n) == s.rem_euclid(self.n)
        });
        self.keys.len() <= self.beta
            && self.omega.is_disjoint(&self.chi_f)
            && self.omega.union(&self.chi_f).copied().collect::<BTreeSet<_>>() == self.chi
            && self.realization.len() == self.chi.len()
            && recomposes
    }
}

/// Chooses which steps to decompose so that at most `beta` keys remain.
///
/// With slack the identity plan is returned. Otherwise steps move one at a
/// time from dedicated keys to NAF realization, each time picking the step
/// whose move leaves the fewest keys (larger step on ties), until the budget
/// holds.
pub fn plan_keys(chi: &BTreeSet<i64>, n: i64, beta: usize) -> Result<KeyPlan, KeyError> {
    check_steps(chi, n)?;
    if beta == 0 {
        return Err(KeyError::BadBudget);
    }
    let mut gamma = BTreeMap::new();
    for &s in chi {
        gamma.insert(s, components(s, n)?);
    }
    let mut omega = BTreeSet::new();
    let mut keys = key_set(chi, &omega, &gamma);
    while keys.len() > beta {
        let mut best: Option<(usize, i64)> = None;
        // descending, so the first minimum is the larger step
        for &s in chi.iter().rev().filter(|s| !omega.contains(s)) {
            let mut trial = omega.clone();
            trial.insert(s);
            let k = key_set(chi, &trial, &gamma).len();
            if best.is_none_or(|(bk, _)| k < bk) {
                best = Some((k, s));
            }
        }
        let Some((_, s)) = best else {
            return Err(KeyError::BudgetInfeasible {
                needed: keys.len(),
                beta,
            });
        };
        omega.insert(s);
        keys = key_set(chi, &omega, &gamma);
    }
    KeyPlan::with_omega(chi, n, beta, &omega)
}

impl fmt::Display for KeyPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |s: &mut dyn Iterator<Item = &i64>| {
            s.map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        };
        writeln!(f, "slots: {}", self.n)?;
        writeln!(f, "beta: {}", self.beta)?;
        writeln!(f, "chi: {}", list(&mut self.chi.iter()))?;
        writeln!(f, "omega: {}", list(&mut self.omega.iter()))?;
        writeln!(f, "chi_f: {}", list(&mut self.chi_f.iter()))?;
        writeln!(f, "gamma_tot: {}", list(&mut self.gamma_tot.iter()))?;
        writeln!(f, "keys: {}", list(&mut self.keys.iter()))?;
        writeln!(f, "key_count: {}", self.keys.len())?;
        for (s, parts) in &self.realization {
            writeln!(f, "step {s}: {} ({} rotations)", list(&mut parts.iter()), parts.len())?;
        }
        Ok(())
    }
}
