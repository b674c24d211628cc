//! LTLf to DFA by formula progression.
//!
//! A state is a pair `(χ, acc)`: `χ` is the obligation the remaining suffix must
//! satisfy and `acc` records whether the word read so far satisfies the original
//! formula when it ends here. Reading `a` from `(χ, _)` moves to
//! `(prog(χ, a), last(χ, a))`.

use std::collections::{HashMap, VecDeque};

use super::{minimize, AutomatonError, Dfa};
use crate::formula::{simplify, Alphabet, Formula};

pub const DEFAULT_STATE_BUDGET: usize = 4096;

/// Atoms beyond this count fall back to structural state identity.
const MAX_TABLE_ATOMS: usize = 16;

/// Truth of `f` at a position that is the last one of the word, given that
/// position carries `a`.
fn last(f: &Formula, a: usize) -> bool {
    match f {
        Formula::True => true,
        Formula::Ap(p) => *p == a,
        Formula::Not(x) => !last(x, a),
        Formula::And(x, y) => last(x, a) && last(y, a),
        Formula::Or(x, y) => last(x, a) || last(y, a),
        Formula::Next(_) => false,
        Formula::Eventually(x) | Formula::Always(x) => last(x, a),
        Formula::Until(_, y) => last(y, a),
    }
}

/// Obligation on the suffix starting at the next position, given the current
/// position carries `a` and is not the last one.
fn prog(f: &Formula, a: usize) -> Formula {
    match f {
        Formula::True => Formula::True,
        Formula::Ap(p) => {
            if *p == a {
                Formula::True
            } else {
                Formula::ff()
            }
        }
        Formula::Not(x) => Formula::not(prog(x, a)),
        Formula::And(x, y) => Formula::and(prog(x, a), prog(y, a)),
        Formula::Or(x, y) => Formula::or(prog(x, a), prog(y, a)),
        Formula::Next(x) => (**x).clone(),
        Formula::Eventually(x) => Formula::or(prog(x, a), f.clone()),
        Formula::Always(x) => Formula::and(prog(x, a), f.clone()),
        Formula::Until(x, y) => Formula::or(prog(y, a), Formula::and(prog(x, a), f.clone())),
    }
}

fn collect_atoms(f: &Formula, out: &mut Vec<Formula>) {
    match f {
        Formula::True => {}
        Formula::Not(x) => collect_atoms(x, out),
        Formula::And(x, y) | Formula::Or(x, y) => {
            collect_atoms(x, out);
            collect_atoms(y, out);
        }
        _ => out.push(f.clone()),
    }
}

fn eval_bool(f: &Formula, atoms: &[Formula], bits: u32) -> bool {
    match f {
        Formula::True => true,
        Formula::Not(x) => !eval_bool(x, atoms, bits),
        Formula::And(x, y) => eval_bool(x, atoms, bits) && eval_bool(y, atoms, bits),
        Formula::Or(x, y) => eval_bool(x, atoms, bits) || eval_bool(y, atoms, bits),
        _ => {
            let i = atoms.binary_search(f).expect("atom collected");
            bits >> i & 1 == 1
        }
    }
}

/// Identity of an obligation up to propositional equivalence over its
/// temporal atoms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Key {
    Table(Vec<Formula>, Vec<bool>),
    Structural(Formula),
}

fn table(f: &Formula, atoms: &[Formula]) -> Vec<bool> {
    (0..1u32 << atoms.len())
        .map(|bits| eval_bool(f, atoms, bits))
        .collect()
}

fn key_of(f: &Formula) -> Key {
    let mut atoms = Vec::new();
    collect_atoms(f, &mut atoms);
    atoms.sort();
    atoms.dedup();
    if atoms.len() > MAX_TABLE_ATOMS {
        return Key::Structural(f.clone());
    }
    let full = table(f, &atoms);
    // Drop atoms the function does not depend on.
    let essential: Vec<Formula> = atoms
        .iter()
        .enumerate()
        .filter(|(i, _)| (0..full.len()).any(|b| full[b] != full[b ^ (1 << i)]))
        .map(|(_, a)| a.clone())
        .collect();
    if essential.len() == atoms.len() {
        Key::Table(atoms, full)
    } else {
        let t = table(f, &essential);
        Key::Table(essential, t)
    }
}

/// Progression automaton for `formula`, unminimized but restricted to
/// reachable states. Fails when more than `budget` states are generated.
pub fn translate(
    formula: &Formula,
    alphabet: &Alphabet,
    budget: usize,
) -> Result<Dfa, AutomatonError> {
    if let Some(index) = formula.max_prop() {
        if index >= alphabet.len() {
            return Err(AutomatonError::FormulaOutsideAlphabet {
                index,
                size: alphabet.len(),
            });
        }
    }
    let root = simplify(formula);
    let mut ids: HashMap<(Key, bool), usize> = HashMap::new();
    let mut reps: Vec<(Formula, bool)> = Vec::new();
    let mut delta: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();

    ids.insert((key_of(&root), false), 0);
    reps.push((root, false));
    queue.push_back(0);

    while let Some(q) = queue.pop_front() {
        let chi = reps[q].0.clone();
        let mut row = Vec::with_capacity(alphabet.len());
        for a in 0..alphabet.len() {
            let next = simplify(&prog(&chi, a));
            let flag = last(&chi, a);
            let key = (key_of(&next), flag);
            let id = match ids.get(&key) {
                Some(&id) => id,
                None => {
                    let id = reps.len();
                    if id >= budget {
                        return Err(AutomatonError::StateBudgetExceeded { budget });
                    }
                    ids.insert(key, id);
                    reps.push((next, flag));
                    queue.push_back(id);
                    id
                }
            };
            row.push(id);
        }
        // States are discovered in id order, so rows line up with ids.
        delta.push(row);
    }
    let accepting = reps.iter().map(|(_, f)| *f).collect();
    Dfa::new(alphabet.clone(), delta, vec![0], accepting)
}

/// [`translate`] followed by minimization and canonical renumbering.
pub fn translate_minimal(formula: &Formula, alphabet: &Alphabet) -> Result<Dfa, AutomatonError> {
    Ok(minimize(&translate(
        formula,
        alphabet,
        DEFAULT_STATE_BUDGET,
    )?))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::example_one;
    use super::*;
    use crate::formula::{evaluate, negate, parse, Trace};

    fn words(alpha: usize, max_len: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        let mut layer = vec![vec![]];
        for _ in 0..max_len {
            layer = layer
                .iter()
                .flat_map(|w: &Vec<usize>| {
                    (0..alpha).map(move |a| {
                        let mut w2 = w.clone();
                        w2.push(a);
                        w2
                    })
                })
                .collect();
            out.extend(layer.iter().cloned());
        }
        out
    }

    fn agrees(src: &str, alpha: usize, max_len: usize) {
        let a = Alphabet::indexed(alpha);
        let f = parse(src, &a).unwrap();
        let raw = translate(&f, &a, DEFAULT_STATE_BUDGET).unwrap();
        let min = minimize(&raw);
        assert!(min.num_states() <= raw.num_states());
        for w in words(alpha, max_len) {
            let expected = match Trace::new(w.clone()) {
                Ok(t) => evaluate(&f, &t, 0).unwrap(),
                Err(_) => false,
            };
            assert_eq!(raw.accepts(&w).unwrap(), expected, "{src} on {w:?}");
            assert_eq!(
                min.accepts(&w).unwrap(),
                expected,
                "{src} on {w:?} (minimal)"
            );
        }
    }

    #[test]
    fn language_matches_semantics() {
        for src in [
            "p0",
            "true",
            "false",
            "X p1",
            "!X true",
            "F p2 & G !p1",
            "p0 U (p1 & X p2)",
            "G (p0 | X p1)",
            "(p0 U p1) U G p2",
            "F G p0 | G F p1",
            "!(p0 U p1) & X X p2",
        ] {
            agrees(src, 3, 5);
        }
    }

    #[test]
    fn negated_example_matches_published_automaton() {
        let a = Alphabet::indexed(4);
        let f = parse("(p0 & (G !p1 | G !p2)) | (p2 & G !p1)", &a).unwrap();
        let dfa = translate_minimal(&negate(&f), &a).unwrap();
        assert_eq!(dfa.num_states(), 5);
        assert_eq!(dfa.canonical(), example_one().canonical());
        assert_eq!(dfa, dfa.canonical());
    }

    #[test]
    fn room_temperature_specification_has_three_states() {
        let a = Alphabet::indexed(4);
        let f = parse("p0 & G !(p1 | p2)", &a).unwrap();
        let dfa = translate_minimal(&negate(&f), &a).unwrap();
        assert_eq!(dfa.num_states(), 3);
        assert_eq!(dfa.accepting_states().len(), 1);
        assert!(dfa.accepts(&[1]).unwrap());
        assert!(dfa.accepts(&[3]).unwrap());
        assert!(dfa.accepts(&[0, 3, 2]).unwrap());
        assert!(!dfa.accepts(&[0, 3, 0]).unwrap());
    }

    #[test]
    fn trivial_formulas() {
        let a = Alphabet::indexed(2);
        let none = translate_minimal(&Formula::ff(), &a).unwrap();
        assert_eq!(none.num_states(), 1);
        assert!(none.accepting_states().is_empty());
        let all = translate_minimal(&Formula::True, &a).unwrap();
        assert_eq!(all.num_states(), 2);
        assert!(!all.accepts(&[]).unwrap());
        assert!(all.accepts(&[1, 0]).unwrap());
    }

    #[test]
    fn budget_is_enforced() {
        let a = Alphabet::indexed(2);
        let f = parse("X X X X X p0", &a).unwrap();
        assert_eq!(
            translate(&f, &a, 3),
            Err(AutomatonError::StateBudgetExceeded { budget: 3 })
        );
    }

    #[test]
    fn formula_outside_alphabet_rejected() {
        let f = Formula::ap(3);
        assert!(matches!(
            translate(&f, &Alphabet::indexed(2), 10),
            Err(AutomatonError::FormulaOutsideAlphabet { index: 3, size: 2 })
        ));
    }
}
