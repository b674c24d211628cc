use super::{Formula, FormulaError, Trace};

/// Truth value of `formula` at every position of `trace`, computed bottom-up
/// with one backward sweep per temporal operator.
pub fn evaluate_all(formula: &Formula, trace: &Trace) -> Vec<bool> {
    let s = trace.symbols();
    let n = s.len();
    match formula {
        Formula::True => vec![true; n],
        Formula::Ap(p) => s.iter().map(|sym| sym == p).collect(),
        Formula::Not(a) => evaluate_all(a, trace).into_iter().map(|v| !v).collect(),
        Formula::And(a, b) => {
            let (va, vb) = (evaluate_all(a, trace), evaluate_all(b, trace));
            va.iter().zip(&vb).map(|(x, y)| *x && *y).collect()
        }
        Formula::Or(a, b) => {
            let (va, vb) = (evaluate_all(a, trace), evaluate_all(b, trace));
            va.iter().zip(&vb).map(|(x, y)| *x || *y).collect()
        }
        // Strong next: false at the last position.
        Formula::Next(a) => {
            let va = evaluate_all(a, trace);
            (0..n).map(|i| i + 1 < n && va[i + 1]).collect()
        }
        Formula::Eventually(a) => {
            let mut v = evaluate_all(a, trace);
            for i in (0..n.saturating_sub(1)).rev() {
                v[i] = v[i] || v[i + 1];
            }
            v
        }
        Formula::Always(a) => {
            let mut v = evaluate_all(a, trace);
            for i in (0..n.saturating_sub(1)).rev() {
                v[i] = v[i] && v[i + 1];
            }
            v
        }
        Formula::Until(a, b) => {
            let va = evaluate_all(a, trace);
            let mut v = evaluate_all(b, trace);
            for i in (0..n.saturating_sub(1)).rev() {
                v[i] = v[i] || (va[i] && v[i + 1]);
            }
            v
        }
    }
}

/// `σ, i ⊨ φ`.
pub fn evaluate(formula: &Formula, trace: &Trace, i: usize) -> Result<bool, FormulaError> {
    if i >= trace.len() {
        return Err(FormulaError::IndexOutOfRange {
            index: i,
            len: trace.len(),
        });
    }
    Ok(evaluate_all(formula, trace)[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse, Alphabet};

    /// Direct transcription of the inductive definition, used as an oracle.
    fn naive(f: &Formula, s: &[usize], i: usize) -> bool {
        let n = s.len();
        match f {
            Formula::True => true,
            Formula::Ap(p) => s[i] == *p,
            Formula::Not(a) => !naive(a, s, i),
            Formula::And(a, b) => naive(a, s, i) && naive(b, s, i),
            Formula::Or(a, b) => naive(a, s, i) || naive(b, s, i),
            Formula::Next(a) => i < n - 1 && naive(a, s, i + 1),
            Formula::Eventually(a) => (i..n).any(|j| naive(a, s, j)),
            Formula::Always(a) => (i..n).all(|j| naive(a, s, j)),
            Formula::Until(a, b) => {
                (i..n).any(|j| naive(b, s, j) && (i..j).all(|k| naive(a, s, k)))
            }
        }
    }

    fn words(alpha: usize, max_len: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut layer = vec![vec![]];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for w in &layer {
                for a in 0..alpha {
                    let mut w2: Vec<usize> = w.clone();
                    w2.push(a);
                    next.push(w2);
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }

    #[test]
    fn true_holds_everywhere() {
        let t = Trace::new(vec![2, 1]).unwrap();
        assert!(evaluate(&Formula::True, &t, 0).unwrap());
    }

    #[test]
    fn next_false_at_last_position() {
        let t = Trace::new(vec![0]).unwrap();
        assert!(!evaluate(&Formula::next(Formula::ap(0)), &t, 0).unwrap());
    }

    #[test]
    fn always_not_p1_examples() {
        let f = Formula::always(Formula::not(Formula::ap(1)));
        assert!(evaluate(&f, &Trace::new(vec![0, 3, 3]).unwrap(), 0).unwrap());
        assert!(!evaluate(&f, &Trace::new(vec![0, 1]).unwrap(), 0).unwrap());
    }

    #[test]
    fn index_out_of_range() {
        let t = Trace::new(vec![0, 1]).unwrap();
        assert_eq!(
            evaluate(&Formula::True, &t, 2),
            Err(FormulaError::IndexOutOfRange { index: 2, len: 2 })
        );
    }

    #[test]
    fn sweep_matches_inductive_definition() {
        let a = Alphabet::indexed(3);
        let corpus = [
            "p0 U (p1 & X p2)",
            "G (p0 | F p1)",
            "F G p2 & !X X p0",
            "(p0 U p1) U G p2",
            "X !X true",
        ];
        for src in corpus {
            let f = parse(src, &a).unwrap();
            for w in words(3, 5) {
                let t = Trace::new(w.clone()).unwrap();
                let all = evaluate_all(&f, &t);
                for (i, v) in all.iter().enumerate() {
                    assert_eq!(*v, naive(&f, &w, i), "{src} on {w:?} at {i}");
                }
            }
        }
    }
}
