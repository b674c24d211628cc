use serde::{Deserialize, Serialize};

use crate::Scalar;

use super::samples::SampleSet;
use super::{
    cegis_loop, BarrierCertificate, CegisConfig, CegisError, CegisProblem, IterationRecord,
};

const GAMMA_LADDER: [f64; 9] = [0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001];
const ALTERNATION_ROUNDS: usize = 6;

/// One CEGIS run inside the bisection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub gamma: f64,
    pub c: f64,
    pub certified: bool,
    pub iterations: usize,
    /// Best `min(1, γ + cT)` certified so far, after this step.
    pub best_bound: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BisectionOutcome<T> {
    pub certificate: Option<BarrierCertificate<T>>,
    pub horizon: usize,
    pub steps: Vec<BisectionStep>,
    /// Iterations of the run that produced the certificate.
    pub log: Vec<IterationRecord>,
    pub samples: usize,
}

impl<T: Scalar> BisectionOutcome<T> {
    pub fn bound(&self) -> Option<T> {
        self.certificate.as_ref().map(|c| c.bound(self.horizon))
    }
}

struct State<'a, T> {
    problem: &'a CegisProblem<T>,
    cfg: &'a CegisConfig,
    samples: SampleSet<T>,
    horizon: f64,
    best: Option<(BarrierCertificate<T>, Vec<IterationRecord>)>,
    best_bound: f64,
    steps: Vec<BisectionStep>,
}

impl<T: Scalar> State<'_, T> {
    fn attempt(&mut self, gamma: f64, c: f64) -> Result<bool, CegisError> {
        let run = cegis_loop(
            self.problem,
            &mut self.samples,
            T::lit(gamma),
            T::lit(c),
            self.cfg,
        )?;
        let iterations = run.log.len();
        let (certified, note) = match run.result {
            Ok(cert) => {
                let bound = (gamma + c * self.horizon).min(1.0);
                if bound < self.best_bound {
                    self.best_bound = bound;
                    self.best = Some((cert, run.log));
                }
                (true, "certified".to_string())
            }
            Err(why) => (false, why.to_string()),
        };
        self.steps.push(BisectionStep {
            gamma,
            c,
            certified,
            iterations,
            best_bound: self.best.as_ref().map(|_| self.best_bound),
            note,
        });
        Ok(certified)
    }

    /// Smallest certified `c` in `[0, hi]` at fixed `γ`, assuming `hi` is
    /// certified.
    fn shrink_c(&mut self, gamma: f64, hi: f64) -> Result<f64, CegisError> {
        let (mut lo, mut hi) = (0.0, hi);
        while self.horizon * (hi - lo) > self.cfg.bisection_tol {
            let mid = 0.5 * (lo + hi);
            if self.attempt(gamma, mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    fn shrink_gamma(&mut self, hi: f64, c: f64) -> Result<f64, CegisError> {
        let (mut lo, mut hi) = (0.0, hi);
        while hi - lo > self.cfg.bisection_tol {
            let mid = 0.5 * (lo + hi);
            if self.attempt(mid, c)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// Minimizes `γ + cT` over certified pairs: a descending ladder of `γ`
/// values, each with a bisection on `c`, then alternating bisections on `γ`
/// and `c` from the best pair. The best certified bound never increases
/// from one step to the next.
pub fn bisect_gamma_c<T: Scalar>(
    problem: &CegisProblem<T>,
    cfg: &CegisConfig,
) -> Result<BisectionOutcome<T>, CegisError> {
    let mut samples = SampleSet::new();
    samples.seed(problem, cfg.samples_per_region);
    let mut st = State {
        problem,
        cfg,
        samples,
        horizon: problem.horizon() as f64,
        best: None,
        best_bound: f64::INFINITY,
        steps: Vec::new(),
    };

    for gamma in GAMMA_LADDER {
        let ceiling = st.best_bound.min(1.0);
        if gamma >= ceiling {
            continue;
        }
        let c_hi = (ceiling - gamma) / st.horizon;
        if st.attempt(gamma, c_hi)? {
            st.shrink_c(gamma, c_hi)?;
        }
    }

    for _ in 0..ALTERNATION_ROUNDS {
        let Some((gamma, c)) = st
            .best
            .as_ref()
            .map(|(b, _)| (b.gamma.as_f64(), b.c.as_f64()))
        else {
            break;
        };
        let before = st.best_bound;
        // `c` first, then `γ`.
        let c = st.shrink_c(gamma, c)?;
        st.shrink_gamma(gamma, c)?;
        if before - st.best_bound <= cfg.bisection_tol {
            break;
        }
    }

    let samples = st.samples.len();
    let (certificate, log) = match st.best {
        Some((c, log)) => (Some(c), log),
        None => (None, Vec::new()),
    };
    Ok(BisectionOutcome {
        certificate,
        horizon: problem.horizon(),
        steps: st.steps,
        log,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cegis::{toy, verify, Verdict};

    #[test]
    fn toy_bisection_is_monotone_and_verified() {
        let pr = toy::problem(4);
        let cfg = CegisConfig {
            bisection_tol: 1e-3,
            ..CegisConfig::default()
        };
        let out = bisect_gamma_c(&pr, &cfg).unwrap();
        let cert = out.certificate.clone().expect("toy task certifies");
        let bounds: Vec<f64> = out.steps.iter().filter_map(|s| s.best_bound).collect();
        assert!(bounds.windows(2).all(|w| w[1] <= w[0]), "{bounds:?}");
        assert!((out.bound().unwrap() - bounds.last().unwrap()).abs() < 1e-12);
        let v = verify(&pr, &cert.b, cert.gamma, cert.c, &cfg).unwrap();
        assert_eq!(v.verdict, Verdict::Certified);
        assert!(cert.gamma >= 0.0 && cert.c >= 0.0);
    }

    #[test]
    fn zero_drift_constant_is_reached() {
        // x⁺ = x/2 contracts B = a·x², so E[B(x⁺)] ≤ B(x) with c = 0.
        let sys = crate::system::StochasticSystem::new(
            crate::system::Dynamics::parse(&["0.5*x1"]).unwrap(),
            vec![vec![0.0]],
            crate::poly::NoiseSpec::standard(1),
            vec![crate::poly::Interval::new(-1.0, 1.0)],
        )
        .unwrap();
        let regions = crate::cegis::TaskRegions {
            source: toy::interval(-0.1, 0.1),
            target: toy::interval(0.8, 1.0),
        };
        let cfg = CegisConfig {
            degree: 2,
            bisection_tol: 1e-4,
            ..CegisConfig::default()
        };
        let pr = CegisProblem::new(&sys, &regions, 5, &cfg).unwrap();
        let out = bisect_gamma_c(&pr, &cfg).unwrap();
        let cert = out.certificate.expect("certifies");
        assert!(cert.c < 1e-4, "c = {}", cert.c);
    }
}
