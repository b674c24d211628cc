//! The four certificate conditions, a multi-start counterexample search and
//! an interval branch-and-bound verifier.
//!
//! A condition holds at `z` when some alternative `h_j` satisfies
//! `h_j(z) ≥ -(δ·s_j(x) + ε)`, where `s_j` is the absolute scale of the
//! polynomials behind `h_j` in original coordinates. Only the drift condition
//! has more than one alternative (one per input).

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::poly::{bisect_box, box_mid, Interval, Polynomial};
use crate::system::Region;
use crate::Scalar;

use super::samples::{corners, spread, SampleSet};
use super::{CegisConfig, CegisError, CegisProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    /// `B ≥ 0` on `X`.
    NonNegative,
    /// `B ≤ γ` on the source set.
    SourceBelowGamma,
    /// `B ≥ 1` on the target set.
    TargetAboveOne,
    /// `min_u E[B(f(x,u,w))] ≤ B(x) + c` on `X`.
    Drift,
}

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConditionKind::NonNegative => "B >= 0 on X",
            ConditionKind::SourceBelowGamma => "B <= gamma on source",
            ConditionKind::TargetAboveOne => "B >= 1 on target",
            ConditionKind::Drift => "min_u E[B(f)] <= B + c on X",
        })
    }
}

/// Worst values seen for one condition. Margins are `max_j h_j`; the
/// normalized margin divides each `h_j` by its scale first. Negative means
/// violated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionMargin {
    pub condition: ConditionKind,
    pub worst_margin: f64,
    pub worst_normalized: f64,
    /// Where the worst normalized margin was seen (original coordinates).
    pub at: Vec<f64>,
    pub boxes: usize,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict<T> {
    Certified,
    /// `x` violates `condition` by `violation` in normalized units, checked
    /// by direct evaluation.
    Refuted {
        x: Vec<T>,
        condition: ConditionKind,
        violation: T,
    },
    /// Box budget exhausted; `x` is the worst point seen.
    Unknown {
        x: Vec<T>,
        condition: ConditionKind,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verification<T> {
    pub verdict: Verdict<T>,
    pub margins: Vec<ConditionMargin>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample<T> {
    pub z: Vec<T>,
    pub x: Vec<T>,
    pub condition: ConditionKind,
    pub margin: T,
    pub normalized: T,
}

/// Checks a certificate, given in original coordinates, over the whole box.
pub fn verify<T: Scalar>(
    problem: &CegisProblem<T>,
    b: &Polynomial<T>,
    gamma: T,
    c: T,
    cfg: &CegisConfig,
) -> Result<Verification<T>, CegisError> {
    let b_z = problem.norm.poly_to_z(b);
    Ok(Conditions::build(problem, b, &b_z, gamma, c)?.verify(cfg))
}

/// Heuristic search for the worst violation (`margin < -ε`) among the four
/// conditions.
pub fn find_counterexample<T: Scalar>(
    problem: &CegisProblem<T>,
    b: &Polynomial<T>,
    gamma: T,
    c: T,
    cfg: &CegisConfig,
) -> Result<Option<Counterexample<T>>, CegisError> {
    let b_z = problem.norm.poly_to_z(b);
    Ok(Conditions::build(problem, b, &b_z, gamma, c)?.counterexample(&SampleSet::new(), cfg))
}

struct Alternative<T> {
    /// In normalized coordinates.
    h: Polynomial<T>,
    /// In original coordinates.
    scale: Vec<Polynomial<T>>,
    constant: T,
}

impl<T: Scalar> Alternative<T> {
    fn h_at(&self, z: &[T]) -> T {
        self.h.eval_state(z).unwrap_or(T::neg_infinity())
    }

    fn scale_at(&self, x: &[T]) -> T {
        self.scale
            .iter()
            .map(|p| p.abs_scale(x))
            .fold(self.constant, |a, b| a + b)
    }

    fn scale_lo(&self, xb: &[Interval<T>]) -> T {
        self.scale
            .iter()
            .map(|p| p.abs_scale_box(xb).map(|i| i.lo).unwrap_or(T::zero()))
            .fold(self.constant, |a, b| a + b)
    }
}

struct Condition<T> {
    kind: ConditionKind,
    /// `None` means the whole box.
    region: Option<Region<T>>,
    alts: Vec<Alternative<T>>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Overlap {
    Outside,
    Inside,
    Partial,
}

impl<T: Scalar> Condition<T> {
    fn in_region(&self, z: &[T]) -> bool {
        self.region.as_ref().is_none_or(|r| r.contains(z))
    }

    fn overlap(&self, bx: &[Interval<T>]) -> Overlap {
        let Some(region) = &self.region else {
            return Overlap::Inside;
        };
        let mut any_partial = false;
        for conj in &region.disjuncts {
            let mut inside = true;
            let mut outside = false;
            for g in conj {
                match g.enclose(bx) {
                    Ok(e) if e.hi < T::zero() => outside = true,
                    Ok(e) if e.lo >= T::zero() => {}
                    _ => inside = false,
                }
            }
            if outside {
                continue;
            }
            if inside {
                return Overlap::Inside;
            }
            any_partial = true;
        }
        if any_partial {
            Overlap::Partial
        } else {
            Overlap::Outside
        }
    }

    /// `(max_j h_j, max_j h_j / s_j)`.
    fn margin(&self, z: &[T], x: &[T]) -> (T, T) {
        let tiny = T::min_positive_value().sqrt();
        self.alts
            .iter()
            .fold((T::neg_infinity(), T::neg_infinity()), |(raw, norm), a| {
                let h = a.h_at(z);
                (raw.max(h), norm.max(h / a.scale_at(x).max(tiny)))
            })
    }

    fn refutes(&self, z: &[T], x: &[T], delta: T, eps: T) -> bool {
        self.alts
            .iter()
            .all(|a| a.h_at(z) < -(delta * a.scale_at(x) + eps))
    }
}

struct Worst<T> {
    margin: T,
    normalized: T,
    z: Option<Vec<T>>,
}

impl<T: Scalar> Worst<T> {
    fn new() -> Self {
        Self {
            margin: T::infinity(),
            normalized: T::infinity(),
            z: None,
        }
    }

    fn see(&mut self, z: &[T], (raw, norm): (T, T)) {
        self.margin = self.margin.min(raw);
        if norm < self.normalized || self.z.is_none() {
            self.normalized = norm;
            self.z = Some(z.to_vec());
        }
    }
}

enum Outcome<T> {
    Certified,
    Refuted(Vec<T>, T),
    Unknown(Vec<T>),
}

pub(crate) struct Conditions<'a, T> {
    problem: &'a CegisProblem<T>,
    conds: Vec<Condition<T>>,
}

impl<'a, T: Scalar> Conditions<'a, T> {
    pub(crate) fn build(
        problem: &'a CegisProblem<T>,
        b_x: &Polynomial<T>,
        b_z: &Polynomial<T>,
        gamma: T,
        c: T,
    ) -> Result<Self, CegisError> {
        let one = T::one();
        let single = |h: Polynomial<T>, constant: T| {
            vec![Alternative {
                h,
                scale: vec![b_x.clone()],
                constant,
            }]
        };
        let mut conds = vec![Condition {
            kind: ConditionKind::NonNegative,
            region: None,
            alts: single(b_z.clone(), T::zero()),
        }];
        if !problem.source_z.disjuncts.is_empty() {
            conds.push(Condition {
                kind: ConditionKind::SourceBelowGamma,
                region: Some(problem.source_z.clone()),
                alts: single(&Polynomial::constant(gamma) - b_z, gamma),
            });
        }
        if !problem.target_z.disjuncts.is_empty() {
            conds.push(Condition {
                kind: ConditionKind::TargetAboveOne,
                region: Some(problem.target_z.clone()),
                alts: single(b_z - &Polynomial::constant(one), one),
            });
        }
        let mut alts = Vec::new();
        for (fz, fx) in problem.dyn_z.iter().zip(&problem.dyn_x) {
            let next_z = b_z.compose(fz, problem.cap)?.expectation(&problem.noise)?;
            let next_x = b_x.compose(fx, problem.cap)?.expectation(&problem.noise)?;
            alts.push(Alternative {
                h: &(b_z + &Polynomial::constant(c)) - &next_z,
                scale: vec![next_x, b_x.clone()],
                constant: c,
            });
        }
        conds.push(Condition {
            kind: ConditionKind::Drift,
            region: None,
            alts,
        });
        Ok(Self { problem, conds })
    }

    fn starts(&self, cond: &Condition<T>, per_region: usize) -> Vec<Vec<T>> {
        let unit = self.problem.norm.unit_box();
        let n = unit.len();
        let mut pts = spread(&unit, per_region * n.max(1) * 4 + 1);
        if let Some(region) = &cond.region {
            for d in &region.disjuncts {
                if let Some(bx) = Region::new(vec![d.clone()]).bounding_box(&unit) {
                    pts.extend(corners(&bx));
                    pts.extend(spread(&bx, per_region * n.max(1)));
                }
            }
        }
        pts.retain(|z| cond.in_region(z));
        pts
    }

    pub(crate) fn counterexample(
        &self,
        samples: &SampleSet<T>,
        cfg: &CegisConfig,
    ) -> Option<Counterexample<T>> {
        let eps = T::lit(cfg.eps_num);
        let found: Vec<Counterexample<T>> = self
            .conds
            .par_iter()
            .filter_map(|cond| {
                let mut starts = self.starts(cond, cfg.samples_per_region.max(16));
                starts.extend(
                    samples
                        .samples()
                        .iter()
                        .map(|s| s.z.clone())
                        .filter(|z| cond.in_region(z)),
                );
                let raw = |z: &[T]| cond.margin(z, &self.problem.norm.to_x(z)).0;
                let mut scored: Vec<(T, Vec<T>)> =
                    starts.into_iter().map(|z| (raw(&z), z)).collect();
                scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
                let (z, m) = scored
                    .into_iter()
                    .take(4)
                    .map(|(m, z)| descend(cond, z, m, &raw))
                    .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))?;
                (m < -eps).then(|| {
                    let x = self.problem.norm.to_x(&z);
                    let (margin, normalized) = cond.margin(&z, &x);
                    Counterexample {
                        z,
                        x,
                        condition: cond.kind,
                        margin,
                        normalized,
                    }
                })
            })
            .collect();
        found.into_iter().min_by(|a, b| {
            a.normalized
                .partial_cmp(&b.normalized)
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    }

    pub(crate) fn verify(&self, cfg: &CegisConfig) -> Verification<T> {
        let results: Vec<(Outcome<T>, ConditionMargin)> = self
            .conds
            .par_iter()
            .map(|cond| self.branch_and_bound(cond, cfg))
            .collect();
        let mut verdict = Verdict::Certified;
        for (cond, (outcome, _)) in self.conds.iter().zip(&results) {
            match outcome {
                Outcome::Refuted(z, v) => {
                    verdict = Verdict::Refuted {
                        x: self.problem.norm.to_x(z),
                        condition: cond.kind,
                        violation: *v,
                    };
                    break;
                }
                Outcome::Unknown(z) if verdict == Verdict::Certified => {
                    verdict = Verdict::Unknown {
                        x: self.problem.norm.to_x(z),
                        condition: cond.kind,
                    };
                }
                _ => {}
            }
        }
        Verification {
            verdict,
            margins: results.into_iter().map(|(_, m)| m).collect(),
        }
    }

    fn branch_and_bound(
        &self,
        cond: &Condition<T>,
        cfg: &CegisConfig,
    ) -> (Outcome<T>, ConditionMargin) {
        let norm = &self.problem.norm;
        let delta = T::lit(cfg.delta);
        let eps = T::lit(cfg.eps_num);
        let mut worst = Worst::new();
        let mut boxes = 0usize;
        let finish = |outcome: Outcome<T>, worst: &Worst<T>, boxes: usize| {
            let at = worst
                .z
                .as_ref()
                .map(|z| norm.to_x(z).iter().map(|v| v.as_f64()).collect())
                .unwrap_or_default();
            let margin = ConditionMargin {
                condition: cond.kind,
                worst_margin: worst.margin.as_f64(),
                worst_normalized: worst.normalized.as_f64(),
                at,
                boxes,
                certified: matches!(outcome, Outcome::Certified),
            };
            (outcome, margin)
        };

        // Cheap scan first; most refutations show up here.
        for z in self.starts(cond, cfg.samples_per_region.max(16)) {
            let x = norm.to_x(&z);
            worst.see(&z, cond.margin(&z, &x));
            if cond.refutes(&z, &x, delta, eps) {
                let v = -cond.margin(&z, &x).1;
                return finish(Outcome::Refuted(z, v), &worst, boxes);
            }
        }

        let unit = norm.unit_box();
        let whole: Vec<Interval<T>> = cond
            .alts
            .iter()
            .map(|a| a.h.enclose(&unit).unwrap_or(everything()))
            .collect();
        let mut stack = vec![(unit, whole)];
        let mut unresolved: Option<Vec<T>> = None;
        let min_width = T::lit(1e-9);
        while let Some((bx, parents)) = stack.pop() {
            boxes += 1;
            if boxes > cfg.box_budget {
                let z = unresolved
                    .or(worst.z.clone())
                    .unwrap_or_else(|| box_mid(&bx));
                return finish(Outcome::Unknown(z), &worst, boxes - 1);
            }
            if cond.overlap(&bx) == Overlap::Outside {
                continue;
            }
            let xb = norm.box_to_x(&bx);
            let encs: Vec<Interval<T>> = cond
                .alts
                .iter()
                .zip(&parents)
                .map(|(a, p)| a.h.enclose_within(&bx, p).unwrap_or(everything()))
                .collect();
            if cond
                .alts
                .iter()
                .zip(&encs)
                .any(|(a, e)| e.lo >= -(delta * a.scale_lo(&xb) + eps))
            {
                continue;
            }
            let mid = box_mid(&bx);
            if cond.in_region(&mid) {
                let x = norm.to_x(&mid);
                let m = cond.margin(&mid, &x);
                worst.see(&mid, m);
                if cond.refutes(&mid, &x, delta, eps) {
                    return finish(Outcome::Refuted(mid, -m.1), &worst, boxes);
                }
            }
            if bx.iter().all(|s| s.width() < min_width) {
                unresolved.get_or_insert(mid);
                continue;
            }
            let (l, r) = bisect_box(&bx);
            stack.push((r, encs.clone()));
            stack.push((l, encs));
        }
        match unresolved {
            Some(z) => finish(Outcome::Unknown(z), &worst, boxes),
            None => finish(Outcome::Certified, &worst, boxes),
        }
    }
}

fn everything<T: Scalar>() -> Interval<T> {
    Interval::new(T::neg_infinity(), T::infinity())
}

/// Compass search on `f` from `z`, staying inside the unit box and the
/// condition's region.
fn descend<T: Scalar>(
    cond: &Condition<T>,
    mut z: Vec<T>,
    mut v: T,
    f: &impl Fn(&[T]) -> T,
) -> (Vec<T>, T) {
    let mut step = T::lit(0.05);
    let stop = T::lit(1e-7);
    let mut evals = 0;
    while step > stop && evals < 400 {
        let mut improved = false;
        'dirs: for d in 0..z.len() {
            for sign in [T::one(), -T::one()] {
                let mut y = z.clone();
                y[d] = (y[d] + sign * step).max(-T::one()).min(T::one());
                if y[d] == z[d] || !cond.in_region(&y) {
                    continue;
                }
                evals += 1;
                let w = f(&y);
                if w < v {
                    z = y;
                    v = w;
                    improved = true;
                    break 'dirs;
                }
            }
        }
        if !improved {
            step /= T::lit(2.0);
        }
    }
    (z, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cegis::{toy, TaskRegions};
    use crate::system::StochasticSystem;

    fn cfg() -> CegisConfig {
        CegisConfig {
            degree: 2,
            ..CegisConfig::default()
        }
    }

    fn poly(s: &str) -> Polynomial<f64> {
        Polynomial::parse(s).unwrap()
    }

    fn margin_of(v: &Verification<f64>, kind: ConditionKind) -> &ConditionMargin {
        v.margins.iter().find(|m| m.condition == kind).unwrap()
    }

    #[test]
    fn zero_barrier_fails_target() {
        let pr = toy::problem(2);
        let ce = find_counterexample(&pr, &Polynomial::zero(), 0.1, 0.01, &cfg())
            .unwrap()
            .unwrap();
        assert_eq!(ce.condition, ConditionKind::TargetAboveOne);
        assert!((0.8..=1.0).contains(&ce.x[0]));
        assert!((ce.margin + 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_one_fails_source() {
        let pr = toy::problem(2);
        let ce = find_counterexample(&pr, &Polynomial::constant(1.0), 0.5, 0.01, &cfg())
            .unwrap()
            .unwrap();
        assert_eq!(ce.condition, ConditionKind::SourceBelowGamma);
        assert!((-0.1..=0.1).contains(&ce.x[0]));
    }

    #[test]
    fn positive_definite_is_nonnegative() {
        let pr = toy::problem(2);
        let v = verify(&pr, &poly("1 + x1^2"), 0.1, 0.01, &cfg()).unwrap();
        assert!(margin_of(&v, ConditionKind::NonNegative).certified);
        // 1 + x² exceeds γ on the source set.
        assert!(matches!(
            v.verdict,
            Verdict::Refuted {
                condition: ConditionKind::SourceBelowGamma,
                ..
            }
        ));
    }

    #[test]
    fn refutation_near_zero() {
        // B = x² - 0.5 must be ≥ 1 on a target [0, 1]; worst at x = 0.
        let sys = toy::system();
        let regions = TaskRegions {
            source: toy::interval(-1.0, -0.9),
            target: toy::interval(0.0, 1.0),
        };
        let pr = CegisProblem::new(&sys, &regions, 3, &cfg()).unwrap();
        let b = poly("x1^2 - 0.5");
        let v = verify(&pr, &b, 0.9, 0.0, &cfg()).unwrap();
        let Verdict::Refuted { x, .. } = &v.verdict else {
            panic!("{:?}", v.verdict)
        };
        assert!(b.eval_state(x).unwrap() < 1.0);
        let ce = find_counterexample(&pr, &b, 0.9, 0.0, &cfg())
            .unwrap()
            .unwrap();
        assert!(ce.x[0].abs() < 1e-3, "{ce:?}");
    }

    #[test]
    fn refuted_points_really_violate() {
        let pr = toy::problem(2);
        for b in ["x1", "0.3 - x1^2", "2*x1^2 - 0.1", "x1^2"] {
            let v = verify(&pr, &poly(b), 0.1, 0.0, &cfg()).unwrap();
            if let Verdict::Refuted { x, condition, .. } = v.verdict {
                let bx = poly(b);
                let val = bx.eval_state(&x).unwrap();
                let ok = match condition {
                    ConditionKind::NonNegative => val >= 0.0,
                    ConditionKind::SourceBelowGamma => val <= 0.1,
                    ConditionKind::TargetAboveOne => val >= 1.0,
                    ConditionKind::Drift => pr
                        .drift_polys(&bx, 0.0)
                        .unwrap()
                        .iter()
                        .any(|d| d.eval_state(&x).unwrap() <= 0.0),
                };
                assert!(!ok, "{b}: {condition} at {x:?}");
            }
        }
    }

    #[test]
    fn hand_certificate_is_certified() {
        // x⁺ = 0.5x + u + 0.1w with u = 0 contracts x², so B = x²/0.64
        // drifts down except for the noise term 0.01/0.64.
        let pr = toy::problem(2);
        let b = poly("1.5625*x1^2");
        let v = verify(&pr, &b, 0.015625, 0.015625, &cfg()).unwrap();
        assert_eq!(v.verdict, Verdict::Certified, "{:?}", v.margins);
        assert!(v.margins.iter().all(|m| m.certified));
    }

    #[test]
    fn budget_exhaustion_is_unknown() {
        let pr = toy::problem(2);
        // Valid, but the region conditions need more than the root box.
        let b = poly("1.5625*x1^2");
        let tiny = CegisConfig {
            box_budget: 1,
            ..cfg()
        };
        let v = verify(&pr, &b, 0.05, 0.05, &tiny).unwrap();
        assert!(
            matches!(
                v.verdict,
                Verdict::Unknown {
                    condition: ConditionKind::SourceBelowGamma,
                    ..
                }
            ),
            "{:?}",
            v.verdict
        );
        assert!(verify(&pr, &b, 0.05, 0.05, &cfg()).unwrap().verdict == Verdict::Certified);
    }

    #[test]
    fn two_dimensional_disk_regions() {
        let sys = StochasticSystem::new(
            crate::system::Dynamics::parse(&["0.5*x1 + 0.1*w1", "0.5*x2 + u1"]).unwrap(),
            vec![vec![0.0]],
            crate::poly::NoiseSpec::standard(1),
            vec![Interval::new(-2.0, 2.0), Interval::new(-2.0, 2.0)],
        )
        .unwrap();
        let disk = Region::new(vec![vec![poly("0.25 - x1^2 - x2^2")]]);
        let ring = Region::new(vec![vec![poly("x1^2 + x2^2 - 3")]]);
        let pr = CegisProblem::new(
            &sys,
            &TaskRegions {
                source: disk,
                target: ring,
            },
            3,
            &cfg(),
        )
        .unwrap();
        let b = poly("0.4444444*x1^2 + 0.4444444*x2^2");
        let v = verify(&pr, &b, 0.12, 0.01, &cfg()).unwrap();
        assert_eq!(v.verdict, Verdict::Certified, "{:?}", v.margins);
    }
}
