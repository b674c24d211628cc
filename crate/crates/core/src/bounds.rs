//! Probability bounds: per reach task `min(1, γ + cT)`, per initial
//! proposition a sum over accepting runs of products of task bounds, and the
//! complementary satisfaction bound.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decomposition::{AcceptingRun, Decomposition, ReachTask};
use crate::formula::Alphabet;
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BoundsError {
    #[error("no bound for task ({}, {}, {}, T={})", .0.source, .0.via, .0.target, .0.horizon)]
    MissingTask(ReachTask),
    #[error("run {0:?} has no tasks")]
    EmptyRun(Vec<usize>),
}

/// `min(1, γ + cT)`, clamped to `[0, 1]`.
pub fn reach_bound<T: Scalar>(gamma: T, c: T, horizon: usize) -> T {
    (gamma + c * T::from_usize_lossy(horizon))
        .min(T::one())
        .max(T::zero())
}

/// `1 - upper`, clamped to `[0, 1]`.
pub fn satisfaction_lower_bound<T: Scalar>(upper: T) -> T {
    (T::one() - upper).min(T::one()).max(T::zero())
}

/// Bound for one reach task; `gamma`/`c` are absent when no certificate was
/// found and the bound is the pessimistic 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TaskBound<T> {
    pub task: ReachTask,
    pub gamma: Option<T>,
    pub c: Option<T>,
    pub bound: T,
}

impl<T: Scalar> TaskBound<T> {
    pub fn certified(task: ReachTask, gamma: T, c: T) -> Self {
        Self {
            task,
            gamma: Some(gamma),
            c: Some(c),
            bound: reach_bound(gamma, c, task.horizon),
        }
    }

    pub fn pessimistic(task: ReachTask) -> Self {
        Self {
            task,
            gamma: None,
            c: None,
            bound: T::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RunContribution<T> {
    pub run: Vec<usize>,
    pub value: T,
}

/// Upper bound on the probability of violating the specification from
/// states labeled `p`, with the contributing runs.
pub fn violation_bound<T: Scalar>(
    runs: &BTreeSet<AcceptingRun>,
    tasks: &BTreeMap<AcceptingRun, BTreeSet<ReachTask>>,
    bounds: &BTreeMap<ReachTask, T>,
) -> Result<(T, Vec<RunContribution<T>>), BoundsError> {
    let mut total = T::zero();
    let mut parts = Vec::new();
    for run in runs {
        let value = if run.len() <= 2 {
            // The first step already reaches an accepting state.
            T::one()
        } else {
            let ts = tasks
                .get(run)
                .filter(|t| !t.is_empty())
                .ok_or_else(|| BoundsError::EmptyRun(run.0.clone()))?;
            let mut prod = T::one();
            for t in ts {
                prod *= *bounds.get(t).ok_or(BoundsError::MissingTask(*t))?;
            }
            prod
        };
        total += value;
        parts.push(RunContribution {
            run: run.0.clone(),
            value,
        });
    }
    Ok((total.min(T::one()), parts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PropositionBound<T> {
    pub prop: usize,
    pub name: String,
    /// Upper bound on violating the specification.
    pub upper: T,
    /// Lower bound on satisfying it; `1 - upper`.
    pub lower: T,
    pub runs: Vec<RunContribution<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SpecificationBound<T> {
    pub per_prop: Vec<PropositionBound<T>>,
}

impl<T: Scalar> SpecificationBound<T> {
    /// One entry per proposition of the alphabet.
    pub fn compute(
        dec: &Decomposition,
        alphabet: &Alphabet,
        bounds: &BTreeMap<ReachTask, T>,
    ) -> Result<Self, BoundsError> {
        let empty = BTreeSet::new();
        let mut per_prop = Vec::new();
        for p in 0..alphabet.len() {
            let (upper, runs) = if dec.vacuous {
                (T::one(), Vec::new())
            } else {
                violation_bound(dec.by_initial.get(&p).unwrap_or(&empty), &dec.tasks, bounds)?
            };
            per_prop.push(PropositionBound {
                prop: p,
                name: alphabet.name(p).to_string(),
                upper,
                lower: satisfaction_lower_bound(upper),
                runs,
            });
        }
        Ok(Self { per_prop })
    }

    pub fn get(&self, p: usize) -> Option<&PropositionBound<T>> {
        self.per_prop.iter().find(|b| b.prop == p)
    }
}

/// Task bounds from per-group `(γ, c)`; groups without a certificate give 1.
pub fn task_bounds<T: Scalar>(
    dec: &Decomposition,
    certified: &[Option<(T, T)>],
) -> BTreeMap<ReachTask, TaskBound<T>> {
    let mut out = BTreeMap::new();
    for (g, group) in dec.groups.iter().enumerate() {
        for t in &group.tasks {
            let b = match certified.get(g).copied().flatten() {
                Some((gamma, c)) => TaskBound::certified(*t, gamma, c),
                None => TaskBound::pessimistic(*t),
            };
            out.insert(*t, b);
        }
    }
    out
}
