use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::automaton::Dfa;
use crate::decomposition::{leaving, PartitionKey};

/// A state of the switching automaton. Each mirrors one DFA state: the
/// initial state, the `via` state of an interior edge, or an accepting state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchState {
    /// `(q0, Δ(q0))`.
    Initial {
        q0: usize,
        successors: BTreeSet<usize>,
    },
    /// `(q, q′, Δ(q′))`; selects the controller of that partition.
    Interior(PartitionKey),
    /// `q ∈ F`.
    Final { q: usize },
}

impl SwitchState {
    /// The DFA state this one tracks.
    pub fn dfa_state(&self) -> usize {
        match self {
            SwitchState::Initial { q0, .. } => *q0,
            SwitchState::Interior(k) => k.via,
            SwitchState::Final { q } => *q,
        }
    }

    pub fn is_final(&self) -> bool {
        matches!(self, SwitchState::Final { .. })
    }

    pub fn name(&self) -> String {
        let set = |s: &BTreeSet<usize>| {
            s.iter()
                .map(|q| format!("q{q}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        match self {
            SwitchState::Initial { q0, successors } => format!("(q{q0},{{{}}})", set(successors)),
            SwitchState::Interior(k) => {
                format!("(q{},q{},{{{}}})", k.source, k.via, set(&k.successors))
            }
            SwitchState::Final { q } => format!("q{q}"),
        }
    }
}

/// The automaton `A_m` that decides which certified controller is active.
///
/// From an initial state, a label leading to `q″` moves to `(q0, q″, Δ(q″))`;
/// from `(q, q′, ·)`, a label leading to `q″ ≠ q′` moves to `(q′, q″, Δ(q″))`,
/// or to `q″` itself when it is accepting. Self-loops of the tracked DFA
/// state keep the current state; accepting states are absorbing. Only states
/// reachable from the initial ones are kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchingAutomaton {
    states: Vec<SwitchState>,
    initial: Vec<usize>,
    /// `delta[s][p]`, total.
    delta: Vec<Vec<usize>>,
    alphabet: Vec<String>,
}

impl SwitchingAutomaton {
    pub fn build(dfa: &Dfa) -> Self {
        let k = dfa.alphabet().len();
        let mut states: Vec<SwitchState> = Vec::new();
        let mut index: BTreeMap<SwitchState, usize> = BTreeMap::new();
        let mut queue = VecDeque::new();
        let mut intern =
            |s: SwitchState, states: &mut Vec<SwitchState>, queue: &mut VecDeque<usize>| -> usize {
                *index.entry(s.clone()).or_insert_with(|| {
                    states.push(s);
                    queue.push_back(states.len() - 1);
                    states.len() - 1
                })
            };
        let initial: Vec<usize> = dfa
            .initial()
            .iter()
            .map(|&q0| {
                let s = if dfa.is_accepting(q0) {
                    SwitchState::Final { q: q0 }
                } else {
                    SwitchState::Initial {
                        q0,
                        successors: leaving(dfa, q0),
                    }
                };
                intern(s, &mut states, &mut queue)
            })
            .collect();
        let mut delta: Vec<Vec<usize>> = Vec::new();
        while let Some(s) = queue.pop_front() {
            let current = states[s].clone();
            let q = current.dfa_state();
            let row: Vec<usize> = (0..k)
                .map(|p| {
                    let next = dfa.step(q, p);
                    if current.is_final() || next == q {
                        return s;
                    }
                    let target = if dfa.is_accepting(next) {
                        SwitchState::Final { q: next }
                    } else {
                        let source = match &current {
                            SwitchState::Initial { q0, .. } => *q0,
                            _ => q,
                        };
                        SwitchState::Interior(PartitionKey {
                            source,
                            via: next,
                            successors: leaving(dfa, next),
                        })
                    };
                    intern(target, &mut states, &mut queue)
                })
                .collect();
            if delta.len() <= s {
                delta.resize(s + 1, Vec::new());
            }
            delta[s] = row;
        }
        let alphabet = dfa
            .alphabet()
            .props()
            .iter()
            .map(|p| p.id.clone())
            .collect();
        Self {
            states,
            initial,
            delta,
            alphabet,
        }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[SwitchState] {
        &self.states
    }

    pub fn state(&self, s: usize) -> &SwitchState {
        &self.states[s]
    }

    pub fn initial(&self) -> &[usize] {
        &self.initial
    }

    pub fn step(&self, s: usize, label: usize) -> usize {
        self.delta[s][label]
    }

    pub fn is_final(&self, s: usize) -> bool {
        self.states[s].is_final()
    }

    /// Transitions as `(from, labels, to)`, self-loops included.
    pub fn edges(&self) -> Vec<(usize, Vec<usize>, usize)> {
        let mut out = Vec::new();
        for (s, row) in self.delta.iter().enumerate() {
            let mut by_target: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (p, &t) in row.iter().enumerate() {
                by_target.entry(t).or_default().push(p);
            }
            out.extend(by_target.into_iter().map(|(t, ps)| (s, ps, t)));
        }
        out
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph switching {\n  rankdir=LR;\n  node [shape=box];\n");
        for (s, st) in self.states.iter().enumerate() {
            let shape = if st.is_final() {
                "doubleoctagon"
            } else {
                "box"
            };
            let _ = writeln!(out, "  m{s} [label=\"{}\", shape={shape}];", st.name());
        }
        for (i, &s) in self.initial.iter().enumerate() {
            let _ = writeln!(out, "  start{i} [shape=point];\n  start{i} -> m{s};");
        }
        for (s, ps, t) in self.edges() {
            let names: Vec<&str> = ps.iter().map(|&p| self.alphabet[p].as_str()).collect();
            let _ = writeln!(out, "  m{s} -> m{t} [label=\"{}\"];", names.join(","));
        }
        out.push_str("}\n");
        out
    }
}
