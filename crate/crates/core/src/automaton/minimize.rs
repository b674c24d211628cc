use std::collections::HashMap;

use super::Dfa;

/// Removes unreachable states, merges language-equivalent states by partition
/// refinement and returns the result in canonical numbering.
pub fn minimize(dfa: &Dfa) -> Dfa {
    let trimmed = dfa.canonical();
    let n = trimmed.num_states();
    let k = trimmed.alphabet().len();
    let mut class: Vec<usize> = (0..n)
        .map(|q| usize::from(trimmed.is_accepting(q)))
        .collect();
    let mut count = renumber(&mut class);
    loop {
        let mut sigs: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut next = vec![0; n];
        for q in 0..n {
            let mut sig = Vec::with_capacity(k + 1);
            sig.push(class[q]);
            sig.extend((0..k).map(|a| class[trimmed.step(q, a)]));
            let len = sigs.len();
            next[q] = *sigs.entry(sig).or_insert(len);
        }
        let new_count = sigs.len();
        class = next;
        if new_count == count {
            break;
        }
        count = new_count;
    }
    let mut delta = vec![Vec::new(); count];
    let mut accepting = vec![false; count];
    for q in 0..n {
        // Members of a class agree on successors' classes and acceptance.
        let c = class[q];
        delta[c] = (0..k).map(|a| class[trimmed.step(q, a)]).collect();
        accepting[c] = trimmed.is_accepting(q);
    }
    let initial = trimmed.initial().iter().map(|&q| class[q]).collect();
    Dfa::new(trimmed.alphabet().clone(), delta, initial, accepting)
        .expect("quotient of a valid automaton is valid")
        .canonical()
}

fn renumber(class: &mut [usize]) -> usize {
    let mut ids = HashMap::new();
    for c in class.iter_mut() {
        let len = ids.len();
        *c = *ids.entry(*c).or_insert(len);
    }
    ids.len()
}
