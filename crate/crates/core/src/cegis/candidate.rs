//! Candidate coefficients from the sample constraints. Each sample needs
//! `B ≥ 0`, the region bounds that apply to it, and the drift bound for at
//! least one input; that disjunction is resolved by a DPLL-style search
//! whose leaves are linear programs.

use crate::lp::{lp_feasible, LinearConstraint, LpError, LpOptions, LpOutcome};
use crate::Scalar;

use super::samples::{Sample, SampleSet};
use super::{CegisConfig, CegisError, CegisProblem};

#[derive(Debug, Clone, PartialEq)]
pub enum Candidate<T> {
    /// Coefficients and the input chosen for every sample.
    Found {
        p: Vec<T>,
        assignment: Vec<usize>,
    },
    Infeasible(String),
    BudgetExhausted,
}

/// Returns the candidate and the number of LP solves spent.
pub fn synthesize_candidate<T: Scalar>(
    problem: &CegisProblem<T>,
    samples: &SampleSet<T>,
    gamma: T,
    c: T,
    cfg: &CegisConfig,
) -> Result<(Candidate<T>, usize), CegisError> {
    let r = problem.template.len();
    if samples.is_empty() {
        return Ok((
            Candidate::Found {
                p: vec![T::zero(); r],
                assignment: vec![],
            },
            0,
        ));
    }
    let mut search = Search::new(samples.samples(), gamma, c, cfg, r);
    let out = search.run();
    Ok((out, search.calls))
}

enum Stop {
    Budget,
}

struct Search<'a, T> {
    samples: &'a [Sample<T>],
    base: Vec<LinearConstraint<T>>,
    c: T,
    opts: LpOptions<T>,
    r: usize,
    calls: usize,
    budget: usize,
    numerical_failures: usize,
}

impl<'a, T: Scalar> Search<'a, T> {
    fn new(samples: &'a [Sample<T>], gamma: T, c: T, cfg: &CegisConfig, r: usize) -> Self {
        let mut base = Vec::new();
        for s in samples {
            base.push(LinearConstraint::ge(s.basis.clone(), T::zero()));
            if s.in_source {
                base.push(LinearConstraint::le(s.basis.clone(), gamma));
            }
            if s.in_target {
                base.push(LinearConstraint::ge(s.basis.clone(), T::one()));
            }
        }
        let opts = LpOptions {
            p_max: T::lit(cfg.p_max),
            margin: T::lit(cfg.eps_num),
            tol: T::lit(cfg.eps_num),
            max_pivots: 0,
            depth: T::lit(cfg.lp_depth),
        };
        Self {
            samples,
            base,
            c,
            opts,
            r,
            calls: 0,
            budget: cfg.search_budget,
            numerical_failures: 0,
        }
    }

    fn run(&mut self) -> Candidate<T> {
        let none = vec![None; self.samples.len()];
        match self.lp(&none, None) {
            Err(Stop::Budget) => return Candidate::BudgetExhausted,
            Ok(None) => {
                return Candidate::Infeasible("region constraints alone are infeasible".into())
            }
            Ok(Some(_)) => {}
        }
        // Warm start: last accepted input for every sample that has one.
        let warm: Vec<Option<usize>> = self.samples.iter().map(|s| s.pref).collect();
        if warm.iter().any(Option::is_some) {
            match self.lp(&warm, None) {
                Err(Stop::Budget) => return Candidate::BudgetExhausted,
                Ok(Some(p)) => {
                    if let Some(found) = self.complete(&warm, &p) {
                        return found;
                    }
                }
                Ok(None) => {}
            }
        }
        match self.dfs(none) {
            Err(Stop::Budget) => Candidate::BudgetExhausted,
            Ok(Some(found)) => found,
            Ok(None) => Candidate::Infeasible(format!(
                "no input assignment over {} samples is feasible ({} LP solves{})",
                self.samples.len(),
                self.calls,
                if self.numerical_failures > 0 {
                    format!(
                        ", {} numerical failures counted as infeasible",
                        self.numerical_failures
                    )
                } else {
                    String::new()
                }
            )),
        }
    }

    fn excess(&self, s: usize, u: usize, p: &[T]) -> T {
        dot(&self.samples[s].drift[u], p) - self.c
    }

    fn best_input(&self, s: usize, p: &[T]) -> (usize, T) {
        (0..self.samples[s].drift.len())
            .map(|u| (u, self.excess(s, u, p)))
            .fold((0, T::infinity()), |a, b| if b.1 < a.1 { b } else { a })
    }

    /// `Found` when every unassigned sample is already satisfied at `p`.
    fn complete(&self, assigned: &[Option<usize>], p: &[T]) -> Option<Candidate<T>> {
        let mut assignment = Vec::with_capacity(assigned.len());
        for (s, a) in assigned.iter().enumerate() {
            match a {
                Some(u) => assignment.push(*u),
                None => {
                    let (u, e) = self.best_input(s, p);
                    if e > T::zero() {
                        return None;
                    }
                    assignment.push(u);
                }
            }
        }
        Some(Candidate::Found {
            p: p.to_vec(),
            assignment,
        })
    }

    fn lp(
        &mut self,
        assigned: &[Option<usize>],
        extra: Option<(usize, usize)>,
    ) -> Result<Option<Vec<T>>, Stop> {
        if self.calls >= self.budget {
            return Err(Stop::Budget);
        }
        self.calls += 1;
        let mut rows = self.base.clone();
        for (s, u) in assigned
            .iter()
            .enumerate()
            .filter_map(|(s, a)| a.map(|u| (s, u)))
            .chain(extra)
        {
            rows.push(LinearConstraint::le(
                self.samples[s].drift[u].clone(),
                self.c,
            ));
        }
        match lp_feasible(self.r, &rows, &self.opts) {
            Ok(LpOutcome::Feasible(p)) => Ok(Some(p)),
            Ok(LpOutcome::Infeasible { .. }) => Ok(None),
            Err(LpError::NumericalFailure(_) | LpError::IterationLimit(_)) => {
                self.numerical_failures += 1;
                Ok(None)
            }
            Err(e) => unreachable!("rows are well formed: {e}"),
        }
    }

    fn dfs(&mut self, mut assigned: Vec<Option<usize>>) -> Result<Option<Candidate<T>>, Stop> {
        loop {
            let Some(p) = self.lp(&assigned, None)? else {
                return Ok(None);
            };
            if let Some(found) = self.complete(&assigned, &p) {
                return Ok(Some(found));
            }
            // Most violated unassigned sample.
            let (s, _) = (0..self.samples.len())
                .filter(|&s| assigned[s].is_none())
                .map(|s| (s, self.best_input(s, &p).1))
                .fold((usize::MAX, T::neg_infinity()), |a, b| {
                    if b.1 > a.1 {
                        b
                    } else {
                        a
                    }
                });
            let mut options = Vec::new();
            for u in 0..self.samples[s].drift.len() {
                if self.lp(&assigned, Some((s, u)))?.is_some() {
                    options.push(u);
                }
            }
            match options.len() {
                0 => return Ok(None),
                1 => {
                    assigned[s] = Some(options[0]);
                    continue;
                }
                _ => {}
            }
            let pref = self.samples[s].pref;
            options.sort_by(|&a, &b| {
                let key = |u: usize| (Some(u) != pref, self.excess(s, u, &p));
                let (ka, kb) = (key(a), key(b));
                ka.0.cmp(&kb.0)
                    .then(ka.1.partial_cmp(&kb.1).unwrap_or(std::cmp::Ordering::Equal))
            });
            for u in options {
                let mut next = assigned.clone();
                next[s] = Some(u);
                if let Some(found) = self.dfs(next)? {
                    return Ok(Some(found));
                }
            }
            return Ok(None);
        }
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}
