//! Sparse multivariate polynomials over state, input and noise variables.

mod interval;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::Scalar;

pub use interval::{bisect_box, box_contains, box_mid, Interval, IntervalBox};

pub const DEFAULT_DEGREE_CAP: u32 = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("no value supplied for variable {0}")]
    MissingVariable(Var),
    #[error("degree {degree} exceeds the cap of {cap}")]
    DegreeCapExceeded { degree: u32, cap: u32 },
    #[error("noise variable {0} has no distribution")]
    NoiseNotCovered(Var),
    #[error("variable {0} is not a state variable")]
    NonStateVariable(Var),
    #[error("expected {expected} components, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("standard deviation of w{index} must be finite and non-negative")]
    InvalidNoise { index: usize },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// A variable. Ordering puts states before inputs before noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    State(usize),
    Input(usize),
    Noise(usize),
}

impl Var {
    /// Parses the 1-based names `x1`, `u2`, `w3`.
    pub fn parse(name: &str) -> Option<Var> {
        let (head, tail) = name.split_at(name.char_indices().nth(1).map_or(name.len(), |(i, _)| i));
        let k: usize = tail.parse().ok()?;
        if k == 0 || tail.starts_with('0') {
            return None;
        }
        match head {
            "x" => Some(Var::State(k - 1)),
            "u" => Some(Var::Input(k - 1)),
            "w" => Some(Var::Noise(k - 1)),
            _ => None,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::State(i) => write!(f, "x{}", i + 1),
            Var::Input(i) => write!(f, "u{}", i + 1),
            Var::Noise(i) => write!(f, "w{}", i + 1),
        }
    }
}

/// Product of variable powers; factors sorted by variable, exponents positive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    factors: Vec<(Var, u32)>,
}

impl Monomial {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn var(v: Var) -> Self {
        Self {
            factors: vec![(v, 1)],
        }
    }

    /// Builds from arbitrary factors, merging repeats and dropping zero powers.
    pub fn from_factors(factors: impl IntoIterator<Item = (Var, u32)>) -> Self {
        let mut map: BTreeMap<Var, u32> = BTreeMap::new();
        for (v, e) in factors {
            *map.entry(v).or_default() += e;
        }
        Self {
            factors: map.into_iter().filter(|&(_, e)| e > 0).collect(),
        }
    }

    /// `x1^e1 · … · xn^en` for a dense exponent vector over states.
    pub fn state_powers(exps: &[u32]) -> Self {
        Self::from_factors(exps.iter().enumerate().map(|(i, &e)| (Var::State(i), e)))
    }

    pub fn factors(&self) -> &[(Var, u32)] {
        &self.factors
    }

    pub fn degree(&self) -> u32 {
        self.factors.iter().map(|&(_, e)| e).sum()
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn exponent(&self, v: Var) -> u32 {
        self.factors
            .iter()
            .find(|(w, _)| *w == v)
            .map_or(0, |&(_, e)| e)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.factors.len() + other.factors.len());
        let (mut i, mut j) = (0, 0);
        while i < self.factors.len() && j < other.factors.len() {
            let (a, b) = (self.factors[i], other.factors[j]);
            match a.0.cmp(&b.0) {
                Ordering::Less => {
                    out.push(a);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a.0, a.1 + b.1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.factors[i..]);
        out.extend_from_slice(&other.factors[j..]);
        Monomial { factors: out }
    }

    pub fn eval<T: Scalar>(&self, value: impl Fn(Var) -> Option<T>) -> Result<T, PolyError> {
        let mut acc = T::one();
        for &(v, e) in &self.factors {
            let x = value(v).ok_or(PolyError::MissingVariable(v))?;
            acc *= x.powi(e as i32);
        }
        Ok(acc)
    }

    /// Evaluates a monomial over state variables only.
    pub fn eval_state<T: Scalar>(&self, x: &[T]) -> T {
        let mut acc = T::one();
        for &(v, e) in &self.factors {
            if let Var::State(i) = v {
                acc *= x[i].powi(e as i32);
            }
        }
        acc
    }
}

impl Ord for Monomial {
    /// Graded: total degree first, then factor lists.
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.factors.cmp(&self.factors))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "1");
        }
        for (k, (v, e)) in self.factors.iter().enumerate() {
            if k > 0 {
                write!(f, "*")?;
            }
            if *e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

/// Mean and standard deviation of one Gaussian noise component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NoiseComponent<T> {
    #[serde(default = "T::zero")]
    pub mean: T,
    pub std: T,
}

/// Independent Gaussian components `w_i ~ N(mean_i, std_i²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NoiseSpec<T>(pub Vec<NoiseComponent<T>>);

impl<T: Scalar> NoiseSpec<T> {
    pub fn new(components: Vec<NoiseComponent<T>>) -> Result<Self, PolyError> {
        for (index, c) in components.iter().enumerate() {
            if !(c.std >= T::zero() && c.std.is_finite() && c.mean.is_finite()) {
                return Err(PolyError::InvalidNoise { index });
            }
        }
        Ok(Self(components))
    }

    /// `k` standard normal components.
    pub fn standard(k: usize) -> Self {
        Self(vec![
            NoiseComponent {
                mean: T::zero(),
                std: T::one()
            };
            k
        ])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `E[w_i^k]`.
    pub fn moment(&self, i: usize, k: u32) -> Option<T> {
        let NoiseComponent { mean, std } = *self.0.get(i)?;
        Some(gaussian_moment(mean, std, k))
    }
}

/// `E[(μ + σZ)^k]` with `Z` standard normal, expanded binomially using
/// `E[Z^j] = (j−1)!!` for even `j` and 0 for odd `j`.
pub fn gaussian_moment<T: Scalar>(mean: T, std: T, k: u32) -> T {
    let mut total = T::zero();
    let mut binom = T::one();
    let mut dfact = T::one();
    for j in 0..=k {
        if j > 0 {
            binom =
                binom * T::from_usize_lossy((k - j + 1) as usize) / T::from_usize_lossy(j as usize);
        }
        if j % 2 == 0 {
            if j >= 2 {
                dfact *= T::from_usize_lossy((j - 1) as usize);
            }
            total += binom * mean.powi((k - j) as i32) * std.powi(j as i32) * dfact;
        }
    }
    total
}

/// Polynomial with coefficients in `T`; never stores a zero coefficient.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial<T> {
    terms: BTreeMap<Monomial, T>,
}

impl<T: Scalar> Polynomial<T> {
    pub fn zero() -> Self {
        Self {
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: T) -> Self {
        Self::term(c, Monomial::one())
    }

    pub fn var(v: Var) -> Self {
        Self::term(T::one(), Monomial::var(v))
    }

    pub fn term(c: T, m: Monomial) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, T)>) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: T) {
        if c == T::zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                *v += c;
                if *v == T::zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Terms in ascending graded order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &T)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> T {
        self.terms.get(m).copied().unwrap_or_else(T::zero)
    }

    pub fn constant_term(&self) -> T {
        self.coeff(&Monomial::one())
    }

    pub fn scale(&self, c: T) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, v)| (m.clone(), *v * c)))
    }

    pub fn powu(&self, k: u32) -> Self {
        let mut acc = Self::constant(T::one());
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// True when every variable is a state variable.
    pub fn is_state_only(&self) -> bool {
        self.vars().iter().all(|v| matches!(v, Var::State(_)))
    }

    /// Sorted distinct variables.
    pub fn vars(&self) -> Vec<Var> {
        let mut v: Vec<Var> = self
            .terms
            .keys()
            .flat_map(|m| m.factors.iter().map(|&(v, _)| v))
            .collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn eval_with(&self, value: impl Fn(Var) -> Option<T> + Copy) -> Result<T, PolyError> {
        let mut acc = T::zero();
        for (m, c) in &self.terms {
            acc += *c * m.eval(value)?;
        }
        Ok(acc)
    }

    /// Evaluates at states `x`, inputs `u` and noise `w`.
    pub fn eval(&self, x: &[T], u: &[T], w: &[T]) -> Result<T, PolyError> {
        self.eval_with(|v| match v {
            Var::State(i) => x.get(i).copied(),
            Var::Input(i) => u.get(i).copied(),
            Var::Noise(i) => w.get(i).copied(),
        })
    }

    /// Evaluates a state-only polynomial; other variables read as missing.
    pub fn eval_state(&self, x: &[T]) -> Result<T, PolyError> {
        self.eval(x, &[], &[])
    }

    /// Replaces variables for which `sub` returns a polynomial; the rest stay.
    pub fn substitute(&self, sub: impl Fn(Var) -> Option<Polynomial<T>>) -> Self {
        let mut cache: BTreeMap<(Var, u32), Polynomial<T>> = BTreeMap::new();
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let mut acc = Self::constant(*c);
            let mut kept = Vec::new();
            for &(v, e) in &m.factors {
                match sub(v) {
                    Some(p) => {
                        let pw = cache.entry((v, e)).or_insert_with(|| p.powu(e));
                        acc = &acc * &*pw;
                    }
                    None => kept.push((v, e)),
                }
            }
            if !kept.is_empty() {
                acc = &acc * &Self::term(T::one(), Monomial::from_factors(kept));
            }
            out = &out + &acc;
        }
        out
    }

    /// `B(f(x,u,w))`: each `x_i` replaced by `f[i]`.
    pub fn compose(&self, f: &[Polynomial<T>], cap: u32) -> Result<Self, PolyError> {
        if let Some(Var::State(i)) = self
            .vars()
            .into_iter()
            .filter(|v| matches!(v, Var::State(_)))
            .max()
        {
            if i >= f.len() {
                return Err(PolyError::DimensionMismatch {
                    expected: i + 1,
                    got: f.len(),
                });
            }
        }
        // Degree check before expanding.
        let bound = self
            .terms
            .keys()
            .map(|m| {
                m.factors
                    .iter()
                    .map(|&(v, e)| match v {
                        Var::State(i) => e * f[i].degree(),
                        _ => e,
                    })
                    .sum::<u32>()
            })
            .max()
            .unwrap_or(0);
        if bound > cap {
            return Err(PolyError::DegreeCapExceeded { degree: bound, cap });
        }
        Ok(self.substitute(|v| match v {
            Var::State(i) => Some(f[i].clone()),
            _ => None,
        }))
    }

    /// Conditional expectation over the noise variables.
    pub fn expectation(&self, noise: &NoiseSpec<T>) -> Result<Self, PolyError> {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let mut coef = *c;
            let mut kept = Vec::new();
            for &(v, e) in &m.factors {
                match v {
                    Var::Noise(i) => {
                        coef *= noise.moment(i, e).ok_or(PolyError::NoiseNotCovered(v))?
                    }
                    _ => kept.push((v, e)),
                }
            }
            out.add_term(Monomial::from_factors(kept), coef);
        }
        Ok(out)
    }

    /// Substitutes concrete input values.
    pub fn fix_inputs(&self, u: &[T]) -> Result<Self, PolyError> {
        if let Some(v) = self
            .vars()
            .into_iter()
            .find(|v| matches!(v, Var::Input(i) if *i >= u.len()))
        {
            return Err(PolyError::MissingVariable(v));
        }
        Ok(self.substitute(|v| match v {
            Var::Input(i) => Some(Self::constant(u[i])),
            _ => None,
        }))
    }

    fn check_state_box(&self, bx: &[Interval<T>]) -> Result<(), PolyError> {
        for v in self.vars() {
            match v {
                Var::State(i) if i < bx.len() => {}
                Var::State(_) => return Err(PolyError::MissingVariable(v)),
                _ => return Err(PolyError::NonStateVariable(v)),
            }
        }
        Ok(())
    }

    /// Range of `Σ |c|·|m(x)|` over the box; the scale against which rounding
    /// and verification slack are measured.
    pub fn abs_scale_box(&self, bx: &[Interval<T>]) -> Result<Interval<T>, PolyError> {
        self.check_state_box(bx)?;
        let (mut lo, mut hi) = (T::zero(), T::zero());
        for (m, c) in &self.terms {
            let (mut a, mut b) = (c.abs(), c.abs());
            for &(v, e) in &m.factors {
                if let Var::State(i) = v {
                    a *= bx[i].mig().powi(e as i32);
                    b *= bx[i].mag().powi(e as i32);
                }
            }
            lo += a;
            hi += b;
        }
        Ok(Interval::new(lo, hi))
    }

    /// `Σ |c|·|m(x)|` at a point.
    pub fn abs_scale(&self, x: &[T]) -> T {
        self.terms
            .iter()
            .map(|(m, c)| c.abs() * m.eval_state(x).abs())
            .fold(T::zero(), |a, b| a + b)
    }

    fn naive_enclosure(&self, bx: &[Interval<T>]) -> Interval<T> {
        let mut acc = Interval::point(T::zero());
        for (m, c) in &self.terms {
            let mut r = Interval::point(*c);
            for &(v, e) in &m.factors {
                if let Var::State(i) = v {
                    r = r * bx[i].powi(e);
                }
            }
            acc = acc + r;
        }
        acc
    }

    /// Range bound after shifting each variable to the box midpoint, so every
    /// monomial ranges over a box symmetric about the origin.
    fn centered_enclosure(&self, bx: &[Interval<T>]) -> Interval<T> {
        let shifted = self.substitute(|v| match v {
            Var::State(i) => Some(Self::var(v) + Self::constant(bx[i].mid())),
            _ => None,
        });
        let mut acc = Interval::point(T::zero());
        for (m, c) in &shifted.terms {
            let mut size = c.abs();
            let mut odd = false;
            for &(v, e) in &m.factors {
                if let Var::State(i) = v {
                    size *= bx[i].radius().powi(e as i32);
                    odd |= e % 2 == 1;
                }
            }
            let r = if m.is_one() {
                Interval::point(*c)
            } else if odd {
                Interval::new(-size, size)
            } else if *c >= T::zero() {
                Interval::new(T::zero(), size)
            } else {
                Interval::new(-size, T::zero())
            };
            acc = acc + r;
        }
        acc
    }

    /// Sound enclosure of the range of a state-only polynomial over a box:
    /// the intersection of naive interval evaluation and the centered form,
    /// widened by a rounding allowance.
    pub fn enclose(&self, bx: &[Interval<T>]) -> Result<Interval<T>, PolyError> {
        self.check_state_box(bx)?;
        let naive = self.naive_enclosure(bx);
        let centered = self.centered_enclosure(bx);
        let tight = naive
            .intersect(&centered)
            .unwrap_or(if centered.width() < naive.width() {
                centered
            } else {
                naive
            });
        let scale = self.abs_scale_box(bx)?.hi;
        let eps = T::epsilon() * T::lit(256.0) * (scale + T::one()) + T::min_positive_value();
        Ok(tight.widen(eps))
    }

    /// [`enclose`](Self::enclose) intersected with an enclosure already known
    /// for a box containing `bx`.
    pub fn enclose_within(
        &self,
        bx: &[Interval<T>],
        parent: &Interval<T>,
    ) -> Result<Interval<T>, PolyError> {
        let e = self.enclose(bx)?;
        Ok(e.intersect(parent).unwrap_or(e))
    }

    /// Converts coefficients to another scalar type.
    pub fn cast<S: Scalar>(&self) -> Polynomial<S> {
        Polynomial::from_terms(
            self.terms
                .iter()
                .map(|(m, c)| (m.clone(), S::lit(c.as_f64()))),
        )
    }

    /// Parses `"0.5*x1^2 - 3*x1*u1 + w1"`-style text. Any expression that
    /// expands to a polynomial is accepted.
    pub fn parse(text: &str) -> Result<Self, PolyError> {
        Ok(Expr::parse(text)?.to_poly()?)
    }
}

impl<T: Scalar> fmt::Display for Polynomial<T> {
    /// Highest degree first, `+`/`-` separated, unit coefficients omitted.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = *c < T::zero();
            let mag = c.abs();
            match (k, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            if m.is_one() {
                write!(f, "{mag}")?;
            } else if mag == T::one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{mag}*{m}")?;
            }
        }
        Ok(())
    }
}

impl<T: Scalar> Serialize for Polynomial<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Polynomial<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Polynomial::parse(&text).map_err(serde::de::Error::custom)
    }
}

impl<T: Scalar> Add<&Polynomial<T>> for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn add(self, o: &Polynomial<T>) -> Polynomial<T> {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(m.clone(), *c);
        }
        out
    }
}

impl<T: Scalar> Sub<&Polynomial<T>> for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn sub(self, o: &Polynomial<T>) -> Polynomial<T> {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(m.clone(), -*c);
        }
        out
    }
}

impl<T: Scalar> Mul<&Polynomial<T>> for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn mul(self, o: &Polynomial<T>) -> Polynomial<T> {
        let mut out = Polynomial::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                out.add_term(ma.mul(mb), *ca * *cb);
            }
        }
        out
    }
}

impl<T: Scalar> Neg for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn neg(self) -> Polynomial<T> {
        self.scale(-T::one())
    }
}

impl<T: Scalar> Neg for Polynomial<T> {
    type Output = Polynomial<T>;
    fn neg(self) -> Polynomial<T> {
        -&self
    }
}

macro_rules! owned_ops {
    ($($tr:ident $method:ident),*) => {$(
        impl<T: Scalar> $tr for Polynomial<T> {
            type Output = Polynomial<T>;
            fn $method(self, o: Polynomial<T>) -> Polynomial<T> {
                (&self).$method(&o)
            }
        }
        impl<T: Scalar> $tr<&Polynomial<T>> for Polynomial<T> {
            type Output = Polynomial<T>;
            fn $method(self, o: &Polynomial<T>) -> Polynomial<T> {
                (&self).$method(o)
            }
        }
    )*};
}

owned_ops!(Add add, Sub sub, Mul mul);
