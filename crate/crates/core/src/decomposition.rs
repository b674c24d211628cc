//! Splits a DFA for the negated specification into reachability tasks.
//!
//! Accepting runs are bounded walks without immediate repetition; every
//! consecutive triple of a run becomes a [`ReachTask`] with a horizon, and tasks
//! sharing a source edge and successor set are merged into one [`TaskGroup`]
//! that a single barrier certificate serves.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::Dfa;

pub const DEFAULT_RUN_BUDGET: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecompositionError {
    #[error("no edge from q{from} to q{to}")]
    NoEdge { from: usize, to: usize },
    #[error("trace length bound N must be at least 1")]
    ZeroLength,
    #[error("run has {len} states, at least 2 are required")]
    RunTooShort { len: usize },
    #[error("more than {budget} accepting runs")]
    RunBudgetExceeded { budget: usize },
}

/// State sequence `(q0, …, qn)` with q0 ∈ Q0, qn ∈ F and no immediate repeats.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AcceptingRun(pub Vec<usize>);

impl AcceptingRun {
    pub fn states(&self) -> &[usize] {
        &self.0
    }

    /// Number of states `|q|`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// ν = (q, q′, q″, T).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReachTask {
    pub source: usize,
    pub via: usize,
    pub target: usize,
    pub horizon: usize,
}

/// (q, q′, Δ(q′)) where Δ(q′) excludes q′ itself.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PartitionKey {
    pub source: usize,
    pub via: usize,
    pub successors: BTreeSet<usize>,
}

/// Tasks served by one certificate: start in the labels of (q, q′), stay in the
/// self-loop labels of q′ and reach any label leaving q′.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskGroup {
    pub key: PartitionKey,
    pub tasks: BTreeSet<ReachTask>,
    pub source_labels: BTreeSet<usize>,
    pub target_labels: BTreeSet<usize>,
    /// Largest horizon among the tasks; the certificate is synthesized for it.
    pub horizon: usize,
}

/// {p ∈ Π | δ(q, p) = q′}; an error when empty.
pub fn edge_labels(
    dfa: &Dfa,
    q: usize,
    q_next: usize,
) -> Result<BTreeSet<usize>, DecompositionError> {
    let labels = dfa.labels(q, q_next);
    if labels.is_empty() {
        return Err(DecompositionError::NoEdge {
            from: q,
            to: q_next,
        });
    }
    Ok(labels)
}

/// All walks with at most `n` edges from an initial state to an accepting
/// state that never take a self-loop. Single-state runs appear when an initial
/// state is accepting.
pub fn accepting_runs(
    dfa: &Dfa,
    n: usize,
    budget: usize,
) -> Result<BTreeSet<AcceptingRun>, DecompositionError> {
    if n == 0 {
        return Err(DecompositionError::ZeroLength);
    }
    let succ: Vec<Vec<usize>> = (0..dfa.num_states())
        .map(|q| dfa.successors(q).into_iter().filter(|&t| t != q).collect())
        .collect();
    let mut out = BTreeSet::new();
    let mut path = Vec::with_capacity(n + 1);
    for &q0 in dfa.initial() {
        path.push(q0);
        walk(dfa, &succ, n, budget, &mut path, &mut out)?;
        path.pop();
    }
    Ok(out)
}

fn walk(
    dfa: &Dfa,
    succ: &[Vec<usize>],
    n: usize,
    budget: usize,
    path: &mut Vec<usize>,
    out: &mut BTreeSet<AcceptingRun>,
) -> Result<(), DecompositionError> {
    let q = *path.last().expect("path is non-empty");
    if dfa.is_accepting(q) {
        out.insert(AcceptingRun(path.clone()));
        if out.len() > budget {
            return Err(DecompositionError::RunBudgetExceeded { budget });
        }
    }
    if path.len() > n {
        return Ok(());
    }
    for &t in &succ[q] {
        path.push(t);
        walk(dfa, succ, n, budget, path, out)?;
        path.pop();
    }
    Ok(())
}

/// R^p_N: runs keyed by every label of their first edge. Single-state runs are
/// skipped here; see [`Decomposition::vacuous`].
pub fn partition_by_initial(
    dfa: &Dfa,
    runs: &BTreeSet<AcceptingRun>,
) -> Result<BTreeMap<usize, BTreeSet<AcceptingRun>>, DecompositionError> {
    let mut out: BTreeMap<usize, BTreeSet<AcceptingRun>> = BTreeMap::new();
    for run in runs.iter().filter(|r| r.len() >= 2) {
        for p in edge_labels(dfa, run.0[0], run.0[1])? {
            out.entry(p).or_default().insert(run.clone());
        }
    }
    Ok(out)
}

/// P^p(q): one task per consecutive triple, with T = N + 2 − |q| when the
/// middle state has a self-loop and T = 1 otherwise. Empty for two-state runs.
pub fn reach_tasks(
    run: &AcceptingRun,
    n: usize,
    self_loops: &BTreeSet<usize>,
) -> Result<BTreeSet<ReachTask>, DecompositionError> {
    let len = run.len();
    if len < 2 {
        return Err(DecompositionError::RunTooShort { len });
    }
    let looping = (n + 2).saturating_sub(len).max(1);
    Ok(run
        .0
        .windows(3)
        .map(|w| ReachTask {
            source: w[0],
            via: w[1],
            target: w[2],
            horizon: if self_loops.contains(&w[1]) {
                looping
            } else {
                1
            },
        })
        .collect())
}

/// Δ(q′) \ {q′}.
pub fn leaving(dfa: &Dfa, q: usize) -> BTreeSet<usize> {
    dfa.successors(q).into_iter().filter(|&t| t != q).collect()
}

/// Groups tasks by (q, q′, Δ(q′)).
pub fn merge_partitions<'a>(
    dfa: &Dfa,
    tasks: impl IntoIterator<Item = &'a ReachTask>,
) -> Result<Vec<TaskGroup>, DecompositionError> {
    let mut groups: BTreeMap<PartitionKey, BTreeSet<ReachTask>> = BTreeMap::new();
    for task in tasks {
        let key = PartitionKey {
            source: task.source,
            via: task.via,
            successors: leaving(dfa, task.via),
        };
        groups.entry(key).or_default().insert(*task);
    }
    groups
        .into_iter()
        .map(|(key, tasks)| {
            let source_labels = edge_labels(dfa, key.source, key.via)?;
            let mut target_labels = BTreeSet::new();
            for &t in &key.successors {
                target_labels.extend(edge_labels(dfa, key.via, t)?);
            }
            let horizon = tasks.iter().map(|t| t.horizon).max().unwrap_or(1);
            Ok(TaskGroup {
                key,
                tasks,
                source_labels,
                target_labels,
                horizon,
            })
        })
        .collect()
}

/// Everything the bound computation needs, also serialized into reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub n: usize,
    pub self_loops: BTreeSet<usize>,
    pub runs: BTreeSet<AcceptingRun>,
    pub by_initial: BTreeMap<usize, BTreeSet<AcceptingRun>>,
    /// Tasks of each run of length at least 2.
    pub tasks: BTreeMap<AcceptingRun, BTreeSet<ReachTask>>,
    pub groups: Vec<TaskGroup>,
    /// Some initial state is accepting, so the negation holds on every trace.
    pub vacuous: bool,
}

impl Decomposition {
    pub fn new(dfa: &Dfa, n: usize) -> Result<Self, DecompositionError> {
        Self::with_budget(dfa, n, DEFAULT_RUN_BUDGET)
    }

    pub fn with_budget(dfa: &Dfa, n: usize, budget: usize) -> Result<Self, DecompositionError> {
        let self_loops = dfa.self_loops();
        let runs = accepting_runs(dfa, n, budget)?;
        let by_initial = partition_by_initial(dfa, &runs)?;
        let mut tasks = BTreeMap::new();
        for run in runs.iter().filter(|r| r.len() >= 2) {
            tasks.insert(run.clone(), reach_tasks(run, n, &self_loops)?);
        }
        let groups = merge_partitions(dfa, tasks.values().flatten())?;
        let vacuous = runs.iter().any(|r| r.len() == 1);
        Ok(Self {
            n,
            self_loops,
            runs,
            by_initial,
            tasks,
            groups,
            vacuous,
        })
    }

    /// Index of the group holding `task`.
    pub fn group_of(&self, task: &ReachTask) -> Option<usize> {
        self.groups.iter().position(|g| g.tasks.contains(task))
    }

    /// Index of the group keyed by the source edge (q, q′).
    pub fn group_for_edge(&self, source: usize, via: usize) -> Option<usize> {
        self.groups
            .iter()
            .position(|g| g.key.source == source && g.key.via == via)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::fixtures::example_one;
    use crate::formula::Alphabet;

    fn run(states: &[usize]) -> AcceptingRun {
        AcceptingRun(states.to_vec())
    }

    fn task(source: usize, via: usize, target: usize, horizon: usize) -> ReachTask {
        ReachTask {
            source,
            via,
            target,
            horizon,
        }
    }

    #[test]
    fn edge_labels_on_example() {
        let dfa = example_one();
        assert_eq!(edge_labels(&dfa, 0, 1).unwrap(), BTreeSet::from([0]));
        assert_eq!(edge_labels(&dfa, 0, 3).unwrap(), BTreeSet::from([1, 3]));
        assert_eq!(
            edge_labels(&dfa, 3, 0),
            Err(DecompositionError::NoEdge { from: 3, to: 0 })
        );
    }

    #[test]
    fn accepting_runs_on_example() {
        let dfa = example_one();
        let runs = accepting_runs(&dfa, 5, DEFAULT_RUN_BUDGET).unwrap();
        let expected = BTreeSet::from([
            run(&[0, 4, 3]),
            run(&[0, 1, 2, 3]),
            run(&[0, 1, 4, 3]),
            run(&[0, 3]),
        ]);
        assert_eq!(runs, expected);
        assert_eq!(
            accepting_runs(&dfa, 1, DEFAULT_RUN_BUDGET).unwrap(),
            BTreeSet::from([run(&[0, 3])])
        );
        assert_eq!(
            accepting_runs(&dfa, 0, 10),
            Err(DecompositionError::ZeroLength)
        );
    }

    #[test]
    fn unreachable_accepting_state_gives_no_runs() {
        let dfa = Dfa::new(
            Alphabet::indexed(2),
            vec![vec![0, 0], vec![1, 1]],
            vec![0],
            vec![false, true],
        )
        .unwrap();
        assert!(accepting_runs(&dfa, 4, 10).unwrap().is_empty());
    }

    #[test]
    fn walks_may_revisit_non_adjacent_states() {
        // 0 <-> 1 on p0, 1 -> 2 (accepting) on p1.
        let dfa = Dfa::new(
            Alphabet::indexed(2),
            vec![vec![1, 0], vec![0, 2], vec![2, 2]],
            vec![0],
            vec![false, false, true],
        )
        .unwrap();
        let runs = accepting_runs(&dfa, 4, 10).unwrap();
        assert_eq!(
            runs,
            BTreeSet::from([run(&[0, 1, 2]), run(&[0, 1, 0, 1, 2])])
        );
        assert_eq!(
            accepting_runs(&dfa, 40, 3),
            Err(DecompositionError::RunBudgetExceeded { budget: 3 })
        );
    }

    #[test]
    fn partition_on_example() {
        let dfa = example_one();
        let runs = accepting_runs(&dfa, 5, DEFAULT_RUN_BUDGET).unwrap();
        let parts = partition_by_initial(&dfa, &runs).unwrap();
        assert_eq!(
            parts[&0],
            BTreeSet::from([run(&[0, 1, 2, 3]), run(&[0, 1, 4, 3])])
        );
        assert_eq!(parts[&1], BTreeSet::from([run(&[0, 3])]));
        assert_eq!(parts[&2], BTreeSet::from([run(&[0, 4, 3])]));
        assert_eq!(parts[&3], BTreeSet::from([run(&[0, 3])]));
        assert!(partition_by_initial(&dfa, &BTreeSet::new())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn multi_label_first_edge_lists_run_under_each_label() {
        let dfa = Dfa::new(
            Alphabet::indexed(3),
            vec![vec![1, 1, 0], vec![1, 1, 1]],
            vec![0],
            vec![false, true],
        )
        .unwrap();
        let runs = accepting_runs(&dfa, 3, 10).unwrap();
        let parts = partition_by_initial(&dfa, &runs).unwrap();
        assert_eq!(parts.keys().copied().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn tasks_on_example() {
        let qs = BTreeSet::from([1, 2, 4]);
        assert_eq!(
            reach_tasks(&run(&[0, 1, 2, 3]), 5, &qs).unwrap(),
            BTreeSet::from([task(0, 1, 2, 3), task(1, 2, 3, 3)])
        );
        assert_eq!(
            reach_tasks(&run(&[0, 4, 3]), 5, &qs).unwrap(),
            BTreeSet::from([task(0, 4, 3, 4)])
        );
        assert!(reach_tasks(&run(&[0, 3]), 5, &qs).unwrap().is_empty());
        assert_eq!(
            reach_tasks(&run(&[0]), 5, &qs),
            Err(DecompositionError::RunTooShort { len: 1 })
        );
        // A via-state without self-loop gets horizon 1.
        assert_eq!(
            reach_tasks(&run(&[0, 1, 2]), 5, &BTreeSet::new()).unwrap(),
            BTreeSet::from([task(0, 1, 2, 1)])
        );
    }

    #[test]
    fn groups_on_example() {
        let dfa = example_one();
        let d = Decomposition::new(&dfa, 5).unwrap();
        assert!(!d.vacuous);
        let g01 = &d.groups[d.group_for_edge(0, 1).unwrap()];
        assert_eq!(
            g01.tasks,
            BTreeSet::from([task(0, 1, 2, 3), task(0, 1, 4, 3)])
        );
        assert_eq!(g01.key.successors, BTreeSet::from([2, 4]));
        assert_eq!(g01.source_labels, BTreeSet::from([0]));
        assert_eq!(g01.target_labels, BTreeSet::from([1, 2]));
        let g04 = &d.groups[d.group_for_edge(0, 4).unwrap()];
        assert_eq!(g04.tasks, BTreeSet::from([task(0, 4, 3, 4)]));
        assert_eq!(g04.horizon, 4);
        // (q0,q1), (q1,q2), (q1,q4), (q2,q3)... are keyed by source edge.
        let keys: BTreeSet<(usize, usize)> =
            d.groups.iter().map(|g| (g.key.source, g.key.via)).collect();
        assert_eq!(keys, BTreeSet::from([(0, 1), (0, 4), (1, 2), (1, 4)]));
        let total: usize = d.groups.iter().map(|g| g.tasks.len()).sum();
        let all: BTreeSet<ReachTask> = d.tasks.values().flatten().copied().collect();
        assert_eq!(total, all.len());
    }

    #[test]
    fn chain_gives_singleton_groups() {
        let dfa = Dfa::new(
            Alphabet::indexed(1),
            vec![vec![1], vec![2], vec![3], vec![3]],
            vec![0],
            vec![false, false, false, true],
        )
        .unwrap();
        let d = Decomposition::new(&dfa, 5).unwrap();
        assert!(d.groups.iter().all(|g| g.tasks.len() == 1));
        assert!(d.groups.iter().all(|g| g.horizon == 1));
    }

    #[test]
    fn accepting_initial_state_is_vacuous() {
        let dfa = Dfa::new(Alphabet::indexed(1), vec![vec![0]], vec![0], vec![true]).unwrap();
        assert!(Decomposition::new(&dfa, 3).unwrap().vacuous);
    }

    #[test]
    fn runs_replay_against_transitions() {
        let dfa = example_one();
        let d = Decomposition::new(&dfa, 7).unwrap();
        for r in &d.runs {
            assert!(dfa.is_initial(r.0[0]));
            assert!(dfa.is_accepting(*r.0.last().unwrap()));
            assert!(r.len() <= 8);
            for w in r.0.windows(2) {
                assert_ne!(w[0], w[1]);
                assert!(edge_labels(&dfa, w[0], w[1]).is_ok());
            }
        }
        for (r, tasks) in &d.tasks {
            for t in tasks {
                let expected = if d.self_loops.contains(&t.via) {
                    7 + 2 - r.len()
                } else {
                    1
                };
                assert_eq!(t.horizon, expected);
            }
        }
    }
}
