//! Deterministic finite automata over the proposition alphabet, LTLf
//! translation, minimization and DOT/JSON exports.

mod minimize;
mod translate;

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::Alphabet;

pub use minimize::minimize;
pub use translate::{translate, translate_minimal, DEFAULT_STATE_BUDGET};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AutomatonError {
    #[error("malformed automaton: {0}")]
    Malformed(String),
    #[error("symbol {symbol} outside alphabet of size {size}")]
    SymbolOutOfRange { symbol: usize, size: usize },
    #[error("translation exceeded the state budget of {budget}")]
    StateBudgetExceeded { budget: usize },
    #[error("formula mentions proposition index {index} but the alphabet has {size} symbols")]
    FormulaOutsideAlphabet { index: usize, size: usize },
    #[error("cannot render an automaton over an empty alphabet")]
    EmptyAlphabet,
}

/// `(Q, Q0, Π, δ, F)` with dense state ids and a total transition function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dfa {
    alphabet: Alphabet,
    initial: Vec<usize>,
    delta: Vec<Vec<usize>>,
    accepting: Vec<bool>,
}

impl Dfa {
    /// `delta[q][p]` is the successor of `q` on proposition `p`.
    pub fn new(
        alphabet: Alphabet,
        delta: Vec<Vec<usize>>,
        initial: Vec<usize>,
        accepting: Vec<bool>,
    ) -> Result<Self, AutomatonError> {
        let n = delta.len();
        if n == 0 {
            return Err(AutomatonError::Malformed("no states".into()));
        }
        if accepting.len() != n {
            return Err(AutomatonError::Malformed(
                "accepting flags do not match state count".into(),
            ));
        }
        for (q, row) in delta.iter().enumerate() {
            if row.len() != alphabet.len() {
                return Err(AutomatonError::Malformed(format!(
                    "state {q} has {} transitions, expected {}",
                    row.len(),
                    alphabet.len()
                )));
            }
            if let Some(&t) = row.iter().find(|&&t| t >= n) {
                return Err(AutomatonError::Malformed(format!(
                    "state {q} targets unknown state {t}"
                )));
            }
        }
        let initial: Vec<usize> = initial
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if initial.is_empty() {
            return Err(AutomatonError::Malformed("no initial state".into()));
        }
        if let Some(&q) = initial.iter().find(|&&q| q >= n) {
            return Err(AutomatonError::Malformed(format!(
                "initial state {q} does not exist"
            )));
        }
        Ok(Self {
            alphabet,
            initial,
            delta,
            accepting,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    pub fn initial(&self) -> &[usize] {
        &self.initial
    }

    pub fn is_initial(&self, q: usize) -> bool {
        self.initial.contains(&q)
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting[q]
    }

    pub fn accepting_states(&self) -> BTreeSet<usize> {
        (0..self.num_states())
            .filter(|&q| self.accepting[q])
            .collect()
    }

    #[inline]
    pub fn step(&self, q: usize, symbol: usize) -> usize {
        self.delta[q][symbol]
    }

    /// Successor states Δ(q), self included when q has a self-loop.
    pub fn successors(&self, q: usize) -> BTreeSet<usize> {
        self.delta[q].iter().copied().collect()
    }

    /// State reached from `q` by reading `word`.
    pub fn run_from(&self, q: usize, word: &[usize]) -> Result<usize, AutomatonError> {
        let mut q = q;
        for &s in word {
            if s >= self.alphabet.len() {
                return Err(AutomatonError::SymbolOutOfRange {
                    symbol: s,
                    size: self.alphabet.len(),
                });
            }
            q = self.delta[q][s];
        }
        Ok(q)
    }

    /// True iff the run from some initial state on `word` ends in F. The empty
    /// word is accepted iff Q0 ∩ F ≠ ∅.
    pub fn accepts(&self, word: &[usize]) -> Result<bool, AutomatonError> {
        for &q0 in &self.initial {
            if self.accepting[self.run_from(q0, word)?] {
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn accepts_empty_word(&self) -> bool {
        self.initial.iter().any(|&q| self.accepting[q])
    }

    /// Q_s: states with at least one self-loop.
    pub fn self_loops(&self) -> BTreeSet<usize> {
        (0..self.num_states())
            .filter(|&q| self.delta[q].contains(&q))
            .collect()
    }

    /// States reachable from Q0.
    pub fn reachable(&self) -> BTreeSet<usize> {
        let mut seen: BTreeSet<usize> = self.initial.iter().copied().collect();
        let mut queue: VecDeque<usize> = self.initial.iter().copied().collect();
        while let Some(q) = queue.pop_front() {
            for &t in &self.delta[q] {
                if seen.insert(t) {
                    queue.push_back(t);
                }
            }
        }
        seen
    }

    /// Renumbers states in breadth-first order from the (sorted) initial states,
    /// visiting symbols in alphabet order. Unreachable states are dropped. Two
    /// automata are isomorphic iff their canonical forms are equal.
    pub fn canonical(&self) -> Dfa {
        let mut order: Vec<usize> = Vec::new();
        let mut id = vec![usize::MAX; self.num_states()];
        let mut queue = VecDeque::new();
        for &q in &self.initial {
            if id[q] == usize::MAX {
                id[q] = order.len();
                order.push(q);
                queue.push_back(q);
            }
        }
        while let Some(q) = queue.pop_front() {
            for &t in &self.delta[q] {
                if id[t] == usize::MAX {
                    id[t] = order.len();
                    order.push(t);
                    queue.push_back(t);
                }
            }
        }
        let delta = order
            .iter()
            .map(|&q| self.delta[q].iter().map(|&t| id[t]).collect())
            .collect();
        let accepting = order.iter().map(|&q| self.accepting[q]).collect();
        let initial = self.initial.iter().map(|&q| id[q]).collect();
        Dfa::new(self.alphabet.clone(), delta, initial, accepting)
            .expect("relabeling preserves validity")
    }

    /// Labels on the edge q → q′, i.e. {p ∈ Π | δ(q,p) = q′}.
    pub fn labels(&self, q: usize, q_next: usize) -> BTreeSet<usize> {
        (0..self.alphabet.len())
            .filter(|&p| self.delta[q][p] == q_next)
            .collect()
    }

    /// Graphviz rendering. Accepting states are double circles; parallel edges
    /// are merged into one edge with a comma-separated label.
    pub fn to_dot(&self) -> Result<String, AutomatonError> {
        if self.alphabet.is_empty() {
            return Err(AutomatonError::EmptyAlphabet);
        }
        let mut out = String::from("digraph dfa {\n  rankdir=LR;\n  node [shape=circle];\n");
        for q in 0..self.num_states() {
            let shape = if self.accepting[q] {
                "doublecircle"
            } else {
                "circle"
            };
            let _ = writeln!(out, "  q{q} [shape={shape}];");
        }
        for (i, &q0) in self.initial.iter().enumerate() {
            let _ = writeln!(out, "  start{i} [shape=point];\n  start{i} -> q{q0};");
        }
        for q in 0..self.num_states() {
            for t in self.successors(q) {
                let names: Vec<&str> = self
                    .labels(q, t)
                    .into_iter()
                    .map(|p| self.alphabet.name(p))
                    .collect();
                let _ = writeln!(out, "  q{q} -> q{t} [label=\"{}\"];", names.join(","));
            }
        }
        out.push_str("}\n");
        Ok(out)
    }

    pub fn dump(&self) -> DfaDump {
        let mut transitions = Vec::new();
        for q in 0..self.num_states() {
            for (p, &t) in self.delta[q].iter().enumerate() {
                transitions.push(TransitionDump {
                    from: q,
                    symbol: self.alphabet.name(p).to_string(),
                    to: t,
                });
            }
        }
        DfaDump {
            alphabet: self.alphabet.props().iter().map(|p| p.id.clone()).collect(),
            states: self.num_states(),
            initial: self.initial.clone(),
            accepting: self.accepting_states().into_iter().collect(),
            self_loops: self.self_loops().into_iter().collect(),
            transitions,
        }
    }
}

/// Flat JSON view of a [`Dfa`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DfaDump {
    pub alphabet: Vec<String>,
    pub states: usize,
    pub initial: Vec<usize>,
    pub accepting: Vec<usize>,
    pub self_loops: Vec<usize>,
    pub transitions: Vec<TransitionDump>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionDump {
    pub from: usize,
    pub symbol: String,
    pub to: usize,
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// The automaton for the negated two-region avoidance example, with states
    /// numbered q0..q4 as in its published drawing: q1 waits for both p1 and p2,
    /// q2 waits for p2, q4 waits for p1, q3 is the accepting sink.
    pub fn example_one() -> Dfa {
        let delta = vec![
            vec![1, 3, 4, 3],
            vec![1, 2, 4, 1],
            vec![2, 2, 3, 2],
            vec![3, 3, 3, 3],
            vec![4, 3, 4, 4],
        ];
        Dfa::new(
            Alphabet::indexed(4),
            delta,
            vec![0],
            vec![false, false, false, true, false],
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::example_one;
    use super::*;

    #[test]
    fn rejects_partial_transition_function() {
        let r = Dfa::new(Alphabet::indexed(2), vec![vec![0]], vec![0], vec![false]);
        assert!(matches!(r, Err(AutomatonError::Malformed(_))));
        let r = Dfa::new(Alphabet::indexed(1), vec![vec![1]], vec![0], vec![false]);
        assert!(matches!(r, Err(AutomatonError::Malformed(_))));
        let r = Dfa::new(Alphabet::indexed(1), vec![vec![0]], vec![], vec![false]);
        assert!(matches!(r, Err(AutomatonError::Malformed(_))));
    }

    #[test]
    fn acceptance_on_published_words() {
        let dfa = example_one();
        assert!(dfa.accepts(&[1]).unwrap());
        assert!(dfa.accepts(&[0, 1, 2]).unwrap());
        assert!(dfa.accepts(&[2, 1]).unwrap());
        assert!(!dfa.accepts(&[0, 3, 3]).unwrap());
        assert!(!dfa.accepts(&[]).unwrap());
        assert!(matches!(
            dfa.accepts(&[7]),
            Err(AutomatonError::SymbolOutOfRange { .. })
        ));
    }

    #[test]
    fn empty_word_acceptance_follows_initial_states() {
        let a = Alphabet::indexed(1);
        let dfa = Dfa::new(a.clone(), vec![vec![0]], vec![0], vec![true]).unwrap();
        assert!(dfa.accepts(&[]).unwrap());
        assert!(dfa.accepts_empty_word());
        let dfa = Dfa::new(a, vec![vec![1], vec![1]], vec![0], vec![false, true]).unwrap();
        assert!(!dfa.accepts(&[]).unwrap());
    }

    #[test]
    fn self_loop_sets() {
        let dfa = example_one();
        let non_final: BTreeSet<usize> = dfa
            .self_loops()
            .difference(&dfa.accepting_states())
            .copied()
            .collect();
        assert_eq!(non_final, BTreeSet::from([1, 2, 4]));
        assert_eq!(dfa.self_loops(), BTreeSet::from([1, 2, 3, 4]));

        let chain = Dfa::new(
            Alphabet::indexed(1),
            vec![vec![1], vec![2], vec![0]],
            vec![0],
            vec![false; 3],
        )
        .unwrap();
        assert!(chain.self_loops().is_empty());

        let all = Dfa::new(Alphabet::indexed(2), vec![vec![0, 0]], vec![0], vec![true]).unwrap();
        assert_eq!(all.self_loops(), BTreeSet::from([0]));
    }

    #[test]
    fn dot_export() {
        let one = Dfa::new(Alphabet::indexed(1), vec![vec![0]], vec![0], vec![false]).unwrap();
        let dot = one.to_dot().unwrap();
        assert_eq!(dot.matches("q0 [shape=circle]").count(), 1);
        assert_eq!(dot.matches("q1 ").count(), 0);

        let dot = example_one().to_dot().unwrap();
        let nodes = dot
            .lines()
            .filter(|l| l.trim_start().starts_with('q') && !l.contains("->"))
            .count();
        assert_eq!(nodes, 5);
        assert_eq!(dot.matches("doublecircle").count(), 1);
        // Edges: q0 has 3 distinct successors, q1 3, q2 2, q3 1, q4 2.
        assert_eq!(dot.matches(" -> q").count() - 1, 11);
        assert!(dot.contains("q0 -> q3 [label=\"p1,p3\"]"));

        let empty = Dfa::new(Alphabet::indexed(0), vec![vec![]], vec![0], vec![false]).unwrap();
        assert_eq!(empty.to_dot(), Err(AutomatonError::EmptyAlphabet));
    }

    #[test]
    fn json_dump_lists_every_transition() {
        let d = example_one().dump();
        assert_eq!(d.transitions.len(), 20);
        assert_eq!(d.accepting, vec![3]);
        let text = serde_json::to_string(&d).unwrap();
        let back: DfaDump = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);
    }
}
