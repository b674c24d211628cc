use super::Formula;

/// Bottom-up canonical simplification: constant folding, double negation,
/// idempotence and complementary-literal absorption, and collapsing of
/// stacked `F`/`G`.
pub fn simplify(f: &Formula) -> Formula {
    match f {
        Formula::True | Formula::Ap(_) => f.clone(),
        Formula::Not(a) => match simplify(a) {
            Formula::Not(inner) => (*inner).clone(),
            other => Formula::not(other),
        },
        Formula::And(a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            if a.is_false() || b.is_false() || complementary(&a, &b) {
                Formula::ff()
            } else if a == Formula::True || a == b {
                b
            } else if b == Formula::True {
                a
            } else {
                Formula::and(a, b)
            }
        }
        Formula::Or(a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            if a == Formula::True || b == Formula::True || complementary(&a, &b) {
                Formula::True
            } else if a.is_false() || a == b {
                b
            } else if b.is_false() {
                a
            } else {
                Formula::or(a, b)
            }
        }
        Formula::Next(a) => {
            let a = simplify(a);
            if a.is_false() {
                a
            } else {
                Formula::next(a)
            }
        }
        Formula::Eventually(a) => {
            let a = simplify(a);
            if a == Formula::True || a.is_false() || matches!(a, Formula::Eventually(_)) {
                a
            } else {
                Formula::eventually(a)
            }
        }
        Formula::Always(a) => {
            let a = simplify(a);
            if a == Formula::True || a.is_false() || matches!(a, Formula::Always(_)) {
                a
            } else {
                Formula::always(a)
            }
        }
        Formula::Until(a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            if b == Formula::True || b.is_false() || a.is_false() {
                b
            } else if a == Formula::True {
                simplify(&Formula::eventually(b))
            } else {
                Formula::until(a, b)
            }
        }
    }
}

fn complementary(a: &Formula, b: &Formula) -> bool {
    matches!(a, Formula::Not(x) if **x == *b) || matches!(b, Formula::Not(x) if **x == *a)
}

/// Negation of `f`: a top-level `Not` followed by simplification, so that
/// `¬¬φ` comes back as `φ`.
pub fn negate(f: &Formula) -> Formula {
    simplify(&Formula::not(f.clone()))
}

/// Negation normal form. Negations end up only on `true`, propositions, and
/// on `X true` (the "last position" literal, since `X` is a strong next on
/// finite traces).
pub fn nnf(f: &Formula) -> Formula {
    match f {
        Formula::True | Formula::Ap(_) => f.clone(),
        Formula::Not(a) => nnf_negated(a),
        Formula::And(a, b) => Formula::and(nnf(a), nnf(b)),
        Formula::Or(a, b) => Formula::or(nnf(a), nnf(b)),
        Formula::Next(a) => Formula::next(nnf(a)),
        Formula::Eventually(a) => Formula::eventually(nnf(a)),
        Formula::Always(a) => Formula::always(nnf(a)),
        Formula::Until(a, b) => Formula::until(nnf(a), nnf(b)),
    }
}

fn nnf_negated(f: &Formula) -> Formula {
    match f {
        Formula::True | Formula::Ap(_) => Formula::not(f.clone()),
        Formula::Not(a) => nnf(a),
        Formula::And(a, b) => Formula::or(nnf_negated(a), nnf_negated(b)),
        Formula::Or(a, b) => Formula::and(nnf_negated(a), nnf_negated(b)),
        Formula::Next(a) => Formula::or(
            Formula::not(Formula::next(Formula::True)),
            Formula::next(nnf_negated(a)),
        ),
        Formula::Eventually(a) => Formula::always(nnf_negated(a)),
        Formula::Always(a) => Formula::eventually(nnf_negated(a)),
        Formula::Until(a, b) => {
            let not_b = nnf_negated(b);
            Formula::or(
                Formula::always(not_b.clone()),
                Formula::until(not_b.clone(), Formula::and(nnf_negated(a), not_b)),
            )
        }
    }
}
