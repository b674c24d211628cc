//! Discrete-time stochastic control systems `x(k+1) = f(x(k), u(k), w(k))`,
//! semi-algebraic regions, labeling and trajectory simulation.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::formula::Alphabet;
use crate::poly::{box_contains, Interval, NoiseSpec, PolyError, Polynomial, Var};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("input {0:?} is not in the input set")]
    InputNotAllowed(Vec<f64>),
    #[error("input index {index} out of range for {len} inputs")]
    InputIndex { index: usize, len: usize },
    #[error("the input set is empty")]
    NoInputs,
    #[error("dynamics component {component} uses {var}, which is out of range")]
    VariableOutOfRange { component: usize, var: Var },
    #[error("state box side {0} is empty or unbounded")]
    BadBox(usize),
    #[error("labeling: {0}")]
    Labeling(String),
    #[error("could not sample a point of region `{0}`")]
    Sampling(String),
    #[error("dynamics are not polynomial: {0}")]
    NotPolynomial(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Right-hand side `f`: polynomial (certifiable) or general expressions
/// (simulation only).
#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics<T> {
    Polynomial(Vec<Polynomial<T>>),
    Expression(Vec<Expr>),
}

impl<T: Scalar> Dynamics<T> {
    /// Parses component strings, keeping polynomial form when every component
    /// expands to a polynomial.
    pub fn parse(components: &[impl AsRef<str>]) -> Result<Self, SystemError> {
        let exprs = components
            .iter()
            .map(|c| Expr::parse(c.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        match exprs
            .iter()
            .map(|e| e.to_poly::<T>())
            .collect::<Result<Vec<_>, _>>()
        {
            Ok(polys) => Ok(Dynamics::Polynomial(polys)),
            Err(_) => Ok(Dynamics::Expression(exprs)),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Dynamics::Polynomial(p) => p.len(),
            Dynamics::Expression(e) => e.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn vars(&self, component: usize) -> Vec<Var> {
        match self {
            Dynamics::Polynomial(p) => p[component].vars(),
            Dynamics::Expression(e) => e[component].vars(),
        }
    }
}

/// Union of conjunctions of `g(x) ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Region<T> {
    pub disjuncts: Vec<Vec<Polynomial<T>>>,
}

impl<T: Scalar> Region<T> {
    pub fn new(disjuncts: Vec<Vec<Polynomial<T>>>) -> Self {
        Self { disjuncts }
    }

    /// The whole space.
    pub fn everything() -> Self {
        Self {
            disjuncts: vec![vec![]],
        }
    }

    /// `{x | lo_i ≤ x_i ≤ hi_i}` as a single conjunction.
    pub fn from_box(bx: &[Interval<T>]) -> Self {
        let mut g = Vec::new();
        for (i, side) in bx.iter().enumerate() {
            let xi = Polynomial::var(Var::State(i));
            g.push(&xi - &Polynomial::constant(side.lo));
            g.push(&Polynomial::constant(side.hi) - &xi);
        }
        Self { disjuncts: vec![g] }
    }

    pub fn union(mut self, other: Region<T>) -> Self {
        self.disjuncts.extend(other.disjuncts);
        self
    }

    pub fn contains(&self, x: &[T]) -> bool {
        self.disjuncts.iter().any(|conj| {
            conj.iter()
                .all(|g| g.eval_state(x).map(|v| v >= T::zero()).unwrap_or(false))
        })
    }

    /// Closure of the complement, in disjunctive form: every conjunct of every
    /// disjunct is violated by some choice, so the product of choices is
    /// expanded. Returns `None` above `max_disjuncts`.
    pub fn complement_closure(&self, max_disjuncts: usize) -> Option<Region<T>> {
        let mut acc: Vec<Vec<Polynomial<T>>> = vec![vec![]];
        for conj in &self.disjuncts {
            if conj.is_empty() {
                // Complement of everything is empty.
                return Some(Region { disjuncts: vec![] });
            }
            let mut next = Vec::new();
            for partial in &acc {
                for g in conj {
                    let mut d = partial.clone();
                    d.push(-g);
                    next.push(d);
                }
            }
            if next.len() > max_disjuncts {
                return None;
            }
            acc = next;
        }
        Some(Region { disjuncts: acc })
    }

    /// Tightest box implied by univariate affine constraints of each
    /// disjunct, intersected with `outer`. `None` when provably empty.
    pub fn bounding_box(&self, outer: &[Interval<T>]) -> Option<Vec<Interval<T>>> {
        let mut hull: Option<Vec<Interval<T>>> = None;
        for conj in &self.disjuncts {
            let mut bx = outer.to_vec();
            let mut empty = false;
            for g in conj {
                if let Some((i, a, b)) = univariate_affine(g) {
                    // a·x_i + b ≥ 0
                    if i >= bx.len() || a == T::zero() {
                        continue;
                    }
                    let bound = -b / a;
                    if a > T::zero() {
                        bx[i].lo = bx[i].lo.max(bound);
                    } else {
                        bx[i].hi = bx[i].hi.min(bound);
                    }
                    if bx[i].lo > bx[i].hi {
                        empty = true;
                    }
                }
            }
            if empty {
                continue;
            }
            hull = Some(match hull {
                None => bx,
                Some(h) => h.iter().zip(&bx).map(|(a, b)| a.hull(b)).collect(),
            });
        }
        hull
    }

    /// Uniform point of the region by rejection from its bounding box.
    pub fn sample(
        &self,
        outer: &[Interval<T>],
        rng: &mut impl Rng,
        tries: usize,
    ) -> Option<Vec<T>> {
        let bx = self.bounding_box(outer)?;
        for _ in 0..tries {
            let x: Vec<T> = bx
                .iter()
                .map(|s| s.lo + s.width() * T::lit(rng.random::<f64>()))
                .collect();
            if self.contains(&x) {
                return Some(x);
            }
        }
        None
    }
}

/// `(i, a, b)` when `g = a·x_i + b`.
fn univariate_affine<T: Scalar>(g: &Polynomial<T>) -> Option<(usize, T, T)> {
    if g.degree() > 1 {
        return None;
    }
    let vars = g.vars();
    match vars.as_slice() {
        [Var::State(i)] => {
            let a = g.coeff(&crate::poly::Monomial::var(Var::State(*i)));
            Some((*i, a, g.constant_term()))
        }
        _ => None,
    }
}

/// Maps states to propositions: the first listed region containing `x`, else
/// the default proposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeling<T> {
    alphabet: Alphabet,
    regions: Vec<(usize, Region<T>)>,
    default: usize,
}

impl<T: Scalar> Labeling<T> {
    pub fn new(
        alphabet: Alphabet,
        regions: Vec<(usize, Region<T>)>,
        default: usize,
    ) -> Result<Self, SystemError> {
        if default >= alphabet.len() {
            return Err(SystemError::Labeling(format!(
                "default proposition {default} not in alphabet"
            )));
        }
        for (p, _) in &regions {
            if *p >= alphabet.len() {
                return Err(SystemError::Labeling(format!(
                    "proposition {p} not in alphabet"
                )));
            }
            if *p == default {
                return Err(SystemError::Labeling(format!(
                    "`{}` is the default label and cannot also have a region",
                    alphabet.name(*p)
                )));
            }
        }
        Ok(Self {
            alphabet,
            regions,
            default,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn default_label(&self) -> usize {
        self.default
    }

    pub fn label(&self, x: &[T]) -> usize {
        self.regions
            .iter()
            .find(|(_, r)| r.contains(x))
            .map_or(self.default, |(p, _)| *p)
    }

    /// Listed region of `p`; `None` for the default proposition.
    pub fn listed_region(&self, p: usize) -> Option<&Region<T>> {
        self.regions.iter().find(|(q, _)| *q == p).map(|(_, r)| r)
    }

    /// Closed superset of `L⁻¹(p)`. For the default proposition this is the
    /// closure of the complement of every listed region.
    pub fn region(&self, p: usize, max_disjuncts: usize) -> Option<Region<T>> {
        if p != self.default {
            return self.listed_region(p).cloned();
        }
        let mut acc = Region::everything();
        for (_, r) in &self.regions {
            let c = r.complement_closure(max_disjuncts)?;
            let mut next = Vec::new();
            for a in &acc.disjuncts {
                for b in &c.disjuncts {
                    let mut d = a.clone();
                    d.extend(b.iter().cloned());
                    next.push(d);
                }
            }
            if next.len() > max_disjuncts {
                return None;
            }
            acc = Region::new(next);
        }
        Some(acc)
    }

    /// Closed superset of the union of `L⁻¹(p)` over `props`.
    pub fn union_region(
        &self,
        props: impl IntoIterator<Item = usize>,
        max_disjuncts: usize,
    ) -> Option<Region<T>> {
        let mut acc = Region::new(vec![]);
        for p in props {
            acc = acc.union(self.region(p, max_disjuncts)?);
        }
        Some(acc)
    }

    /// Pairs of listed regions sharing a grid point of the box.
    pub fn overlaps(&self, bx: &[Interval<T>], per_axis: usize) -> Vec<(usize, usize)> {
        let mut found = Vec::new();
        let n = bx.len();
        let per_axis = per_axis.max(2);
        let total = per_axis.saturating_pow(n as u32).min(1 << 20);
        for idx in 0..total {
            let mut k = idx;
            let x: Vec<T> = bx
                .iter()
                .map(|s| {
                    let j = k % per_axis;
                    k /= per_axis;
                    s.lo + s.width() * T::from_usize_lossy(j) / T::from_usize_lossy(per_axis - 1)
                })
                .collect();
            let inside: Vec<usize> = self
                .regions
                .iter()
                .filter(|(_, r)| r.contains(&x))
                .map(|(p, _)| *p)
                .collect();
            for a in 0..inside.len() {
                for b in a + 1..inside.len() {
                    let pair = (inside[a].min(inside[b]), inside[a].max(inside[b]));
                    if !found.contains(&pair) {
                        found.push(pair);
                    }
                }
            }
        }
        found
    }
}

/// The tuple (X, V_w, U, w, f) with a finite input set and a bounded working
/// box X.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticSystem<T> {
    n: usize,
    m: usize,
    inputs: Vec<Vec<T>>,
    dynamics: Dynamics<T>,
    noise: NoiseSpec<T>,
    state_box: Vec<Interval<T>>,
}

impl<T: Scalar> StochasticSystem<T> {
    pub fn new(
        dynamics: Dynamics<T>,
        inputs: Vec<Vec<T>>,
        noise: NoiseSpec<T>,
        state_box: Vec<Interval<T>>,
    ) -> Result<Self, SystemError> {
        let n = dynamics.len();
        if state_box.len() != n {
            return Err(SystemError::Dimension {
                what: "state box".into(),
                expected: n,
                got: state_box.len(),
            });
        }
        for (i, s) in state_box.iter().enumerate() {
            if !(s.lo.is_finite() && s.hi.is_finite() && s.lo <= s.hi) {
                return Err(SystemError::BadBox(i));
            }
        }
        let m = inputs.first().ok_or(SystemError::NoInputs)?.len();
        for u in &inputs {
            if u.len() != m {
                return Err(SystemError::Dimension {
                    what: "input".into(),
                    expected: m,
                    got: u.len(),
                });
            }
        }
        for c in 0..n {
            for v in dynamics.vars(c) {
                let ok = match v {
                    Var::State(i) => i < n,
                    Var::Input(i) => i < m,
                    Var::Noise(i) => i < noise.len(),
                };
                if !ok {
                    return Err(SystemError::VariableOutOfRange {
                        component: c,
                        var: v,
                    });
                }
            }
        }
        Ok(Self {
            n,
            m,
            inputs,
            dynamics,
            noise,
            state_box,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn inputs(&self) -> &[Vec<T>] {
        &self.inputs
    }

    pub fn noise(&self) -> &NoiseSpec<T> {
        &self.noise
    }

    pub fn state_box(&self) -> &[Interval<T>] {
        &self.state_box
    }

    pub fn dynamics(&self) -> &Dynamics<T> {
        &self.dynamics
    }

    /// Polynomial right-hand side, required for certification.
    pub fn polynomial_dynamics(&self) -> Result<&[Polynomial<T>], SystemError> {
        match &self.dynamics {
            Dynamics::Polynomial(p) => Ok(p),
            Dynamics::Expression(e) => Err(SystemError::NotPolynomial(
                e.iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("; "),
            )),
        }
    }

    pub fn input_index(&self, u: &[T]) -> Option<usize> {
        self.inputs.iter().position(|v| v.as_slice() == u)
    }

    /// `f(x, u, w)` for a given noise realization.
    pub fn eval(&self, x: &[T], u: &[T], w: &[T]) -> Result<Vec<T>, SystemError> {
        if x.len() != self.n {
            return Err(SystemError::Dimension {
                what: "state".into(),
                expected: self.n,
                got: x.len(),
            });
        }
        match &self.dynamics {
            Dynamics::Polynomial(p) => p
                .iter()
                .map(|f| f.eval(x, u, w).map_err(Into::into))
                .collect(),
            Dynamics::Expression(e) => Ok(e.iter().map(|f| f.eval(x, u, w)).collect()),
        }
    }

    /// Fresh noise draw.
    pub fn draw_noise(&self, rng: &mut impl Rng) -> Vec<T> {
        self.noise
            .0
            .iter()
            .map(|c| {
                let z: f64 = rng.sample(StandardNormal);
                c.mean + c.std * T::lit(z)
            })
            .collect()
    }

    /// One transition with input `u ∈ U`.
    pub fn step(&self, x: &[T], u: &[T], rng: &mut impl Rng) -> Result<Vec<T>, SystemError> {
        if self.input_index(u).is_none() {
            return Err(SystemError::InputNotAllowed(
                u.iter().map(|v| v.as_f64()).collect(),
            ));
        }
        let w = self.draw_noise(rng);
        self.eval(x, u, &w)
    }

    /// One transition with the input at `index` in U.
    pub fn step_index(
        &self,
        x: &[T],
        index: usize,
        rng: &mut impl Rng,
    ) -> Result<Vec<T>, SystemError> {
        let u = self.inputs.get(index).ok_or(SystemError::InputIndex {
            index,
            len: self.inputs.len(),
        })?;
        let w = self.draw_noise(rng);
        self.eval(x, u, &w)
    }

    /// Projects onto X; reports whether anything moved.
    pub fn clamp(&self, x: &mut [T]) -> bool {
        let mut moved = false;
        for (v, s) in x.iter_mut().zip(&self.state_box) {
            let c = v.max(s.lo).min(s.hi);
            if c != *v || v.is_nan() {
                moved = true;
                *v = if v.is_nan() { s.mid() } else { c };
            }
        }
        moved
    }

    pub fn in_box(&self, x: &[T]) -> bool {
        box_contains(&self.state_box, x)
    }

    /// Simulates `n_steps` states `x(0..N)` under `policy`.
    pub fn simulate(
        &self,
        policy: &mut dyn Policy<T>,
        labeling: &Labeling<T>,
        x0: &[T],
        n_steps: usize,
        seed: u64,
    ) -> Result<Trajectory<T>, SystemError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut traj = Trajectory::default();
        let mut x = x0.to_vec();
        if self.clamp(&mut x) {
            traj.clamped += 1;
        }
        policy.reset();
        for k in 0..n_steps {
            let label = labeling.label(&x);
            traj.states.push(x.clone());
            traj.labels.push(label);
            if k + 1 == n_steps {
                break;
            }
            let ui = policy.select(&x, label);
            traj.inputs.push(ui);
            x = self.step_index(&x, ui, &mut rng)?;
            if self.clamp(&mut x) {
                traj.clamped += 1;
            }
        }
        Ok(traj)
    }
}

/// Chooses an input index for the current state and its label.
pub trait Policy<T> {
    /// Called before each trajectory.
    fn reset(&mut self) {}
    fn select(&mut self, x: &[T], label: usize) -> usize;
}

/// Always the same input.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPolicy(pub usize);

impl<T> Policy<T> for ConstantPolicy {
    fn select(&mut self, _x: &[T], _label: usize) -> usize {
        self.0
    }
}

/// States `x(0..N)`, inputs applied between them and the label trace.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory<T> {
    pub states: Vec<Vec<T>>,
    pub inputs: Vec<usize>,
    pub labels: Vec<usize>,
    /// Number of states projected back onto X.
    pub clamped: usize,
}

/// Per-run generator: the master seed picks the key, the run index the
/// ChaCha stream, so runs are independent and order-insensitive.
pub fn run_rng(master: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(run);
    rng
}
