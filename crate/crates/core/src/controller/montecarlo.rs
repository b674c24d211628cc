use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::automaton::Dfa;
use crate::formula::{Formula, Trace};
use crate::system::{run_rng, Labeling, Region, StochasticSystem};
use crate::Scalar;

use super::policy::{drive, ControlLaw};
use super::switching::SwitchingAutomaton;
use super::{check_trace, ControllerError};

/// Where each run starts.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialStates<T> {
    Point(Vec<T>),
    /// Uniform over the region, by rejection from its bounding box in X.
    Region(Region<T>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonteCarloConfig {
    pub runs: usize,
    pub steps: usize,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            runs: 10_000,
            steps: 50,
            confidence: 0.99,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub runs: usize,
    pub steps: usize,
    pub seed: u64,
    pub satisfied: usize,
    pub frequency: f64,
    pub confidence: f64,
    /// Clopper–Pearson interval for the satisfaction probability.
    pub lower: f64,
    pub upper: f64,
    /// Runs with at least one policy fallback, and the total count.
    pub fallback_runs: usize,
    pub fallback_steps: usize,
    /// Runs in which some state left X and was projected back.
    pub clamped_runs: usize,
}

/// Exact two-sided binomial interval for `successes` out of `n`.
pub fn clopper_pearson(
    successes: usize,
    n: usize,
    confidence: f64,
) -> Result<(f64, f64), ControllerError> {
    if n == 0 {
        return Err(ControllerError::NoRuns);
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(ControllerError::Confidence(confidence));
    }
    if successes > n {
        return Err(ControllerError::Statistics(format!(
            "{successes} successes out of {n}"
        )));
    }
    let alpha = 1.0 - confidence;
    let (k, n) = (successes as f64, n as f64);
    let quantile = |a: f64, b: f64, p: f64| {
        Beta::new(a, b)
            .map(|d| d.inverse_cdf(p))
            .map_err(|e| ControllerError::Statistics(e.to_string()))
    };
    let lower = if successes == 0 {
        0.0
    } else {
        quantile(k, n - k + 1.0, alpha / 2.0)?
    };
    let upper = if successes as f64 == n {
        1.0
    } else {
        quantile(k + 1.0, n - k, 1.0 - alpha / 2.0)?
    };
    Ok((lower, upper))
}

/// Estimates the probability of satisfying the specification with
/// independent seeded runs in parallel. Every run is checked against the
/// DFA of the negation; with a formula, also against the semantics.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo<T: Scalar, L: ControlLaw<T> + ?Sized>(
    sys: &StochasticSystem<T>,
    labeling: &Labeling<T>,
    automaton: &SwitchingAutomaton,
    law: &L,
    negated: &Dfa,
    formula: Option<&Formula>,
    initial: &InitialStates<T>,
    cfg: &MonteCarloConfig,
) -> Result<MonteCarloSummary, ControllerError> {
    if cfg.runs == 0 {
        return Err(ControllerError::NoRuns);
    }
    if cfg.steps == 0 {
        return Err(ControllerError::Statistics(
            "runs need at least one step".into(),
        ));
    }
    let outcomes: Vec<(bool, usize, bool)> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = run_rng(cfg.seed, r as u64);
            let x0 = match initial {
                InitialStates::Point(x) => x.clone(),
                InitialStates::Region(reg) => reg
                    .sample(sys.state_box(), &mut rng, 100_000)
                    .ok_or(ControllerError::EmptyInitialRegion)?,
            };
            let mut labels = Vec::with_capacity(cfg.steps);
            let out = drive(
                sys,
                labeling,
                automaton,
                law,
                &x0,
                cfg.steps,
                &mut rng,
                |_, l, _, _| labels.push(l),
            )?;
            let accepted = negated.accepts(&labels)?;
            if accepted != out.violated {
                return Err(ControllerError::Mismatch {
                    trace: labels,
                    detail: "switching automaton vs DFA".into(),
                });
            }
            if let Some(phi) = formula {
                check_trace(phi, negated, &Trace::new(labels)?)?;
            }
            Ok((!out.violated, out.fallbacks.len(), out.clamped > 0))
        })
        .collect::<Result<_, ControllerError>>()?;
    let satisfied = outcomes.iter().filter(|o| o.0).count();
    let (lower, upper) = clopper_pearson(satisfied, cfg.runs, cfg.confidence)?;
    Ok(MonteCarloSummary {
        runs: cfg.runs,
        steps: cfg.steps,
        seed: cfg.seed,
        satisfied,
        frequency: satisfied as f64 / cfg.runs as f64,
        confidence: cfg.confidence,
        lower,
        upper,
        fallback_runs: outcomes.iter().filter(|o| o.1 > 0).count(),
        fallback_steps: outcomes.iter().map(|o| o.1).sum(),
        clamped_runs: outcomes.iter().filter(|o| o.2).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::policy::tests::{room, room_automaton, room_labels};
    use crate::controller::ConstantLaw;
    use crate::formula::{negate, parse, Alphabet};
    use crate::poly::Interval;
    use proptest::prelude::*;

    #[test]
    fn boundary_intervals() {
        let (lo, hi) = clopper_pearson(100, 100, 0.99).unwrap();
        assert_eq!(hi, 1.0);
        // (α/2)^(1/n) when every run succeeds.
        assert!((lo - 0.005f64.powf(0.01)).abs() < 1e-9, "{lo}");
        let (lo, hi) = clopper_pearson(0, 100, 0.99).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.005f64.powf(0.01))).abs() < 1e-9);
    }

    #[test]
    fn matches_reference_values() {
        // 8 of 10 at 95%: [0.4439045, 0.9747893].
        let (lo, hi) = clopper_pearson(8, 10, 0.95).unwrap();
        assert!((lo - 0.4439045).abs() < 1e-6, "{lo}");
        assert!((hi - 0.9747893).abs() < 1e-6, "{hi}");
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(
            clopper_pearson(0, 0, 0.9),
            Err(ControllerError::NoRuns)
        ));
        assert!(matches!(
            clopper_pearson(1, 2, 1.0),
            Err(ControllerError::Confidence(_))
        ));
    }

    proptest! {
        #[test]
        fn interval_contains_frequency(n in 1usize..500, frac in 0.0f64..=1.0, conf in 0.5f64..0.999) {
            let k = ((n as f64) * frac).round() as usize;
            let (lo, hi) = clopper_pearson(k, n, conf).unwrap();
            let f = k as f64 / n as f64;
            prop_assert!(0.0 <= lo && lo <= f + 1e-12 && f <= hi + 1e-12 && hi <= 1.0);
        }
    }

    fn room_mc(seed: u64, law: &ConstantLaw) -> MonteCarloSummary {
        let ab = Alphabet::indexed(4);
        let phi = parse("p0 & G !(p1 | p2)", &ab).unwrap();
        let neg = crate::automaton::translate_minimal(&negate(&phi), &ab).unwrap();
        let init = InitialStates::Region(Region::from_box(&[Interval::new(21.0, 22.0)]));
        let cfg = MonteCarloConfig {
            runs: 400,
            steps: 50,
            confidence: 0.99,
            seed,
        };
        monte_carlo(
            &room(0.1),
            &room_labels(),
            &room_automaton(),
            law,
            &neg,
            Some(&phi),
            &init,
            &cfg,
        )
        .unwrap()
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        assert_eq!(room_mc(7, &ConstantLaw(1)), room_mc(7, &ConstantLaw(1)));
    }

    #[test]
    fn cooling_always_fails() {
        // Valve closed: the room drifts toward 15 degrees.
        let s = room_mc(3, &ConstantLaw(0));
        assert_eq!(s.satisfied, 0);
        assert_eq!(s.lower, 0.0);
    }
}
