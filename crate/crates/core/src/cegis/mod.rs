//! Counterexample-guided synthesis of control barrier certificates for a
//! single reach-avoid task with a finite input set.
//!
//! All search happens in normalized coordinates `z = (x - center) / half`,
//! which map the working box onto `[-1, 1]^n`. Certificates are reported in
//! the original coordinates.

mod bisect;
mod candidate;
mod samples;
mod verify;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::LpError;
use crate::poly::{Interval, Monomial, NoiseSpec, PolyError, Polynomial, Var, DEFAULT_DEGREE_CAP};
use crate::system::{Region, StochasticSystem, SystemError};
use crate::Scalar;

pub use bisect::{bisect_gamma_c, BisectionOutcome, BisectionStep};
pub use candidate::{synthesize_candidate, Candidate};
pub use samples::{Sample, SampleSet};
pub use verify::{
    find_counterexample, verify, ConditionKind, ConditionMargin, Counterexample, Verdict,
    Verification,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CegisError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("state box side {0} has zero or non-finite width")]
    DegenerateBox(usize),
    #[error("template degree must be at least 1")]
    EmptyTemplate,
}

/// Tuning knobs for one synthesis task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CegisConfig {
    pub degree: u32,
    pub max_iters: usize,
    pub samples_per_region: usize,
    /// Verification slack, relative to the condition scale.
    pub delta: f64,
    /// Absolute numerical slack; also the strict-inequality margin.
    pub eps_num: f64,
    pub p_max: f64,
    /// Sub-boxes per condition before verification gives up.
    pub box_budget: usize,
    /// LP solves per candidate search before giving up.
    pub search_budget: usize,
    pub degree_cap: u32,
    /// Stop width for the `γ` and `T·c` bisections.
    pub bisection_tol: f64,
    /// Uniform slack the candidate LP aims for beyond the margin.
    pub lp_depth: f64,
}

impl Default for CegisConfig {
    fn default() -> Self {
        Self {
            degree: 4,
            max_iters: 200,
            samples_per_region: 64,
            delta: 1e-6,
            eps_num: 1e-9,
            p_max: 1e6,
            box_budget: 200_000,
            search_budget: 4000,
            degree_cap: DEFAULT_DEGREE_CAP,
            bisection_tol: 1e-4,
            lp_depth: 1.0,
        }
    }
}

/// Affine map between the working box and `[-1, 1]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer<T> {
    center: Vec<T>,
    half: Vec<T>,
}

impl<T: Scalar> Normalizer<T> {
    pub fn from_box(bx: &[Interval<T>]) -> Result<Self, CegisError> {
        let mut center = Vec::with_capacity(bx.len());
        let mut half = Vec::with_capacity(bx.len());
        for (i, side) in bx.iter().enumerate() {
            let h = side.radius();
            if h.is_nan() || h <= T::zero() || !h.is_finite() {
                return Err(CegisError::DegenerateBox(i));
            }
            center.push(side.mid());
            half.push(h);
        }
        Ok(Self { center, half })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn to_z(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(&self.center)
            .zip(&self.half)
            .map(|((v, c), h)| (*v - *c) / *h)
            .collect()
    }

    pub fn to_x(&self, z: &[T]) -> Vec<T> {
        z.iter()
            .zip(&self.center)
            .zip(&self.half)
            .map(|((v, c), h)| *c + *h * *v)
            .collect()
    }

    pub fn box_to_x(&self, zb: &[Interval<T>]) -> Vec<Interval<T>> {
        zb.iter()
            .zip(&self.center)
            .zip(&self.half)
            .map(|((s, c), h)| Interval::new(*c + *h * s.lo, *c + *h * s.hi))
            .collect()
    }

    pub fn unit_box(&self) -> Vec<Interval<T>> {
        vec![Interval::new(-T::one(), T::one()); self.dim()]
    }

    /// `p(center + half ∘ z)`, with `z` written as the state variables.
    pub fn poly_to_z(&self, p: &Polynomial<T>) -> Polynomial<T> {
        p.substitute(|v| match v {
            Var::State(i) if i < self.dim() => Some(
                &Polynomial::constant(self.center[i]) + &Polynomial::var(v).scale(self.half[i]),
            ),
            _ => None,
        })
    }

    /// Inverse of [`poly_to_z`](Self::poly_to_z).
    pub fn poly_to_x(&self, p: &Polynomial<T>) -> Polynomial<T> {
        p.substitute(|v| match v {
            Var::State(i) if i < self.dim() => Some(
                (&Polynomial::var(v) - &Polynomial::constant(self.center[i]))
                    .scale(T::one() / self.half[i]),
            ),
            _ => None,
        })
    }

    pub fn region_to_z(&self, r: &Region<T>) -> Region<T> {
        Region::new(
            r.disjuncts
                .iter()
                .map(|conj| conj.iter().map(|g| self.poly_to_z(g)).collect())
                .collect(),
        )
    }
}

/// `B(p, z) = Σ p_i b_i(z)` over all state monomials up to a total degree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    basis: Vec<Monomial>,
}

impl Template {
    pub fn full(dim: usize, degree: u32) -> Result<Self, CegisError> {
        if degree == 0 {
            return Err(CegisError::EmptyTemplate);
        }
        let mut basis = Vec::new();
        let mut exps = vec![0u32; dim];
        fn rec(i: usize, left: u32, exps: &mut Vec<u32>, out: &mut Vec<Monomial>) {
            if i == exps.len() {
                out.push(Monomial::state_powers(exps));
                return;
            }
            for e in 0..=left {
                exps[i] = e;
                rec(i + 1, left - e, exps, out);
            }
            exps[i] = 0;
        }
        rec(0, degree, &mut exps, &mut basis);
        basis.sort();
        Ok(Self { basis })
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn basis(&self) -> &[Monomial] {
        &self.basis
    }

    pub fn eval<T: Scalar>(&self, z: &[T]) -> Vec<T> {
        self.basis.iter().map(|m| m.eval_state(z)).collect()
    }

    pub fn poly<T: Scalar>(&self, p: &[T]) -> Polynomial<T> {
        Polynomial::from_terms(self.basis.iter().cloned().zip(p.iter().copied()))
    }
}

/// Source and target sets of a merged reach task, in original coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRegions<T> {
    pub source: Region<T>,
    pub target: Region<T>,
}

/// A task prepared for synthesis: regions and dynamics in normalized
/// coordinates and, for every input, the drift of every basis monomial.
#[derive(Debug, Clone)]
pub struct CegisProblem<T> {
    pub(crate) norm: Normalizer<T>,
    pub(crate) inputs: Vec<Vec<T>>,
    pub(crate) noise: NoiseSpec<T>,
    /// `f(x, u, w)` per input, original coordinates.
    pub(crate) dyn_x: Vec<Vec<Polynomial<T>>>,
    /// `(f(center + half z, u, w) - center) / half` per input.
    pub(crate) dyn_z: Vec<Vec<Polynomial<T>>>,
    pub(crate) source_z: Region<T>,
    pub(crate) target_z: Region<T>,
    pub(crate) template: Template,
    /// `E[b_i(f̃(z,u,w))] - b_i(z)`, indexed `[u][i]`.
    pub(crate) drift_basis: Vec<Vec<Polynomial<T>>>,
    pub(crate) cap: u32,
    pub(crate) horizon: usize,
}

impl<T: Scalar> CegisProblem<T> {
    pub fn new(
        sys: &StochasticSystem<T>,
        regions: &TaskRegions<T>,
        horizon: usize,
        cfg: &CegisConfig,
    ) -> Result<Self, CegisError> {
        let f = sys.polynomial_dynamics()?;
        let norm = Normalizer::from_box(sys.state_box())?;
        let template = Template::full(sys.state_dim(), cfg.degree)?;
        let mut dyn_x = Vec::new();
        let mut dyn_z = Vec::new();
        for u in sys.inputs() {
            let fx = f
                .iter()
                .map(|fi| fi.fix_inputs(u))
                .collect::<Result<Vec<_>, _>>()?;
            let fz = fx
                .iter()
                .enumerate()
                .map(|(i, fi)| {
                    (&norm.poly_to_z(fi) - &Polynomial::constant(norm.center[i]))
                        .scale(T::one() / norm.half[i])
                })
                .collect::<Vec<_>>();
            dyn_x.push(fx);
            dyn_z.push(fz);
        }
        let mut drift_basis = Vec::new();
        for fz in &dyn_z {
            let mut row = Vec::with_capacity(template.len());
            for m in template.basis() {
                let b = Polynomial::term(T::one(), m.clone());
                let next = b.compose(fz, cfg.degree_cap)?.expectation(sys.noise())?;
                row.push(&next - &b);
            }
            drift_basis.push(row);
        }
        Ok(Self {
            source_z: norm.region_to_z(&regions.source),
            target_z: norm.region_to_z(&regions.target),
            norm,
            inputs: sys.inputs().to_vec(),
            noise: sys.noise().clone(),
            dyn_x,
            dyn_z,
            template,
            drift_basis,
            cap: cfg.degree_cap,
            horizon: horizon.max(1),
        })
    }

    pub fn normalizer(&self) -> &Normalizer<T> {
        &self.norm
    }

    pub fn template(&self) -> &Template {
        &self.template
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    /// `E[B(f(x,u,w))] - B(x) - c` for every input, original coordinates.
    pub fn drift_polys(&self, b: &Polynomial<T>, c: T) -> Result<Vec<Polynomial<T>>, CegisError> {
        self.dyn_x
            .iter()
            .map(|f| {
                let next = b.compose(f, self.cap)?.expectation(&self.noise)?;
                Ok(&(&next - b) - &Polynomial::constant(c))
            })
            .collect()
    }
}

/// A certified barrier for one task, in original coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BarrierCertificate<T> {
    pub b: Polynomial<T>,
    pub gamma: T,
    pub c: T,
    pub inputs: Vec<Vec<T>>,
    /// `D_u(x) = E[B(f(x,u,w))] - B(x) - c`, one per input.
    pub drift: Vec<Polynomial<T>>,
    pub margins: Vec<ConditionMargin>,
    pub iterations: usize,
}

impl<T: Scalar> BarrierCertificate<T> {
    /// Reachability bound `min(1, γ + cT)`.
    pub fn bound(&self, horizon: usize) -> T {
        crate::bounds::reach_bound(self.gamma, self.c, horizon)
    }

    pub fn drift_at(&self, x: &[T]) -> Vec<T> {
        self.drift
            .iter()
            .map(|d| d.eval_state(x).unwrap_or(T::infinity()))
            .collect()
    }

    /// Smallest input index with `D_u(x) ≤ tol`, if any.
    pub fn valid_input(&self, x: &[T], tol: T) -> Option<usize> {
        self.drift_at(x).iter().position(|d| *d <= tol)
    }
}

/// One CEGIS iteration, as recorded in the synthesis log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub samples: usize,
    pub lp_solves: usize,
    pub counterexample: Option<Vec<f64>>,
    pub condition: Option<ConditionKind>,
    /// `"counterexample"`, `"verifier"`, `"certified"` or `"infeasible"`.
    pub event: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CegisFailure {
    /// No input assignment makes the sample constraints feasible.
    Infeasible(String),
    MaxIterations(usize),
    /// The candidate search ran out of LP solves.
    SearchBudget(usize),
    /// A counterexample coincided with an existing sample.
    Stalled,
}

impl std::fmt::Display for CegisFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CegisFailure::Infeasible(why) => write!(f, "infeasible on samples: {why}"),
            CegisFailure::MaxIterations(n) => write!(f, "no certificate after {n} iterations"),
            CegisFailure::SearchBudget(n) => write!(f, "candidate search exceeded {n} LP solves"),
            CegisFailure::Stalled => write!(f, "counterexample repeated an existing sample"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CegisRun<T> {
    pub gamma: T,
    pub c: T,
    pub result: Result<BarrierCertificate<T>, CegisFailure>,
    pub log: Vec<IterationRecord>,
}

/// Candidate / counterexample / verify loop at fixed `γ` and `c`. The sample
/// set only grows, so later calls reuse what earlier ones learned.
pub fn cegis_loop<T: Scalar>(
    problem: &CegisProblem<T>,
    samples: &mut SampleSet<T>,
    gamma: T,
    c: T,
    cfg: &CegisConfig,
) -> Result<CegisRun<T>, CegisError> {
    if samples.is_empty() {
        samples.seed(problem, cfg.samples_per_region);
    }
    let mut log = Vec::new();
    let run = |result, log| {
        Ok(CegisRun {
            gamma,
            c,
            result,
            log,
        })
    };
    for iteration in 0..cfg.max_iters {
        let n_samples = samples.len();
        let (p, lp_solves) = match synthesize_candidate(problem, samples, gamma, c, cfg)? {
            (Candidate::Found { p, assignment }, calls) => {
                samples.set_preferences(&assignment);
                (p, calls)
            }
            (Candidate::Infeasible(why), calls) => {
                log.push(record(iteration, n_samples, calls, None, "infeasible"));
                return run(Err(CegisFailure::Infeasible(why)), log);
            }
            (Candidate::BudgetExhausted, calls) => {
                log.push(record(iteration, n_samples, calls, None, "infeasible"));
                return run(Err(CegisFailure::SearchBudget(cfg.search_budget)), log);
            }
        };
        let b_z = problem.template.poly(&p);
        let b_x = problem.norm.poly_to_x(&b_z);
        let cx = verify::Conditions::build(problem, &b_x, &b_z, gamma, c)?;

        let (point, kind, event) = if let Some(ce) = cx.counterexample(samples, cfg) {
            (ce.z, ce.condition, "counterexample")
        } else {
            let v = cx.verify(cfg);
            match v.verdict {
                Verdict::Certified => {
                    log.push(record(iteration, n_samples, lp_solves, None, "certified"));
                    let cert = BarrierCertificate {
                        drift: problem.drift_polys(&b_x, c)?,
                        b: b_x,
                        gamma,
                        c,
                        inputs: problem.inputs.clone(),
                        margins: v.margins,
                        iterations: iteration + 1,
                    };
                    return run(Ok(cert), log);
                }
                Verdict::Refuted { x, condition, .. } | Verdict::Unknown { x, condition } => {
                    (problem.norm.to_z(&x), condition, "verifier")
                }
            }
        };
        let x = problem.norm.to_x(&point);
        log.push(IterationRecord {
            iteration,
            samples: n_samples,
            lp_solves,
            counterexample: Some(x.iter().map(|v| v.as_f64()).collect()),
            condition: Some(kind),
            event: event.to_string(),
        });
        if !samples.push(problem, point) {
            return run(Err(CegisFailure::Stalled), log);
        }
    }
    run(Err(CegisFailure::MaxIterations(cfg.max_iters)), log)
}

fn record(
    iteration: usize,
    samples: usize,
    lp_solves: usize,
    ce: Option<Vec<f64>>,
    event: &str,
) -> IterationRecord {
    IterationRecord {
        iteration,
        samples,
        lp_solves,
        counterexample: ce,
        condition: None,
        event: event.to_string(),
    }
}
