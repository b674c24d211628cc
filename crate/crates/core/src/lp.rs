//! Feasibility of `G p ≤ b` with `|p_i| ≤ P_max`.
//!
//! The minimal uniform violation
//!
//! ```text
//! min t   s.t.  g_r·p − t ≤ b_r − τ,   ±p_i ≤ P_max,   −t ≤ depth
//! ```
//!
//! is solved through its dual `min dᵀy  s.t. Gᵀy = 0, hᵀy = 1, y ≥ 0`, whose
//! tableau has only `n + 1` rows however many constraints there are. The
//! primal point is read off the simplex multipliers. With `depth > 0` the
//! returned point also maximizes the uniform slack, up to `depth`, which keeps
//! it away from the boundary of the feasible set.

use thiserror::Error;

use crate::Scalar;

pub const DEFAULT_P_MAX: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("constraint {row} has {got} coefficients, expected {expected}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite coefficient in constraint {row}")]
    NonFinite { row: usize },
    #[error("simplex did not converge within {0} pivots")]
    IterationLimit(usize),
    #[error("solver and direct evaluation disagree after retries (residual {0:e})")]
    NumericalFailure(f64),
}

/// `coeffs · p ≤ rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint<T> {
    pub coeffs: Vec<T>,
    pub rhs: T,
}

impl<T: Scalar> LinearConstraint<T> {
    pub fn le(coeffs: Vec<T>, rhs: T) -> Self {
        Self { coeffs, rhs }
    }

    /// `coeffs · p ≥ rhs`.
    pub fn ge(coeffs: Vec<T>, rhs: T) -> Self {
        Self {
            coeffs: coeffs.into_iter().map(|c| -c).collect(),
            rhs: -rhs,
        }
    }

    pub fn residual(&self, p: &[T]) -> T {
        self.coeffs
            .iter()
            .zip(p)
            .fold(T::zero(), |a, (c, v)| a + *c * *v)
            - self.rhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions<T> {
    /// Box on every coordinate.
    pub p_max: T,
    /// Required slack on every constraint (the strict-inequality margin).
    pub margin: T,
    /// Accepted residual when checking the returned point.
    pub tol: T,
    pub max_pivots: usize,
    /// How much slack beyond the margin to ask for (0: plain feasibility).
    pub depth: T,
}

impl<T: Scalar> Default for LpOptions<T> {
    fn default() -> Self {
        Self {
            p_max: T::lit(DEFAULT_P_MAX),
            margin: T::zero(),
            tol: T::lit(1e-9),
            max_pivots: 0,
            depth: T::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<T> {
    /// Satisfies every constraint with the requested margin, up to `tol`.
    Feasible(Vec<T>),
    /// Smallest achievable uniform violation (in row-normalized units) is
    /// positive.
    Infeasible { violation: T },
}

impl<T> LpOutcome<T> {
    pub fn point(&self) -> Option<&[T]> {
        match self {
            LpOutcome::Feasible(p) => Some(p),
            LpOutcome::Infeasible { .. } => None,
        }
    }
}

pub fn lp_feasible<T: Scalar>(
    n: usize,
    rows: &[LinearConstraint<T>],
    opts: &LpOptions<T>,
) -> Result<LpOutcome<T>, LpError> {
    for (row, c) in rows.iter().enumerate() {
        if c.coeffs.len() != n {
            return Err(LpError::DimensionMismatch {
                row,
                expected: n,
                got: c.coeffs.len(),
            });
        }
        if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite { row });
        }
    }
    if n == 0 {
        let worst = rows
            .iter()
            .map(|r| -r.rhs + opts.margin)
            .fold(T::neg_infinity(), T::max);
        return Ok(if worst <= opts.tol {
            LpOutcome::Feasible(vec![])
        } else {
            LpOutcome::Infeasible { violation: worst }
        });
    }

    let mut last_residual = T::zero();
    for attempt in 0..3 {
        let perturb = if attempt == 0 {
            T::zero()
        } else {
            opts.tol * T::lit(10f64.powi(attempt))
        };
        let (p, t) = solve_dual(n, rows, opts, perturb)?;
        // Direct check in the caller's units.
        let residual = rows
            .iter()
            .map(|r| r.residual(&p) + opts.margin)
            .fold(T::neg_infinity(), T::max);
        let scaled_ok = t <= opts.tol;
        let direct_ok = rows.iter().all(|r| {
            let scale = row_scale(r);
            (r.residual(&p) + opts.margin) / scale <= opts.tol * T::lit(10.0)
        }) && p
            .iter()
            .all(|v| v.abs() <= opts.p_max * (T::one() + opts.tol));
        if scaled_ok && direct_ok {
            return Ok(LpOutcome::Feasible(p));
        }
        if !scaled_ok {
            return Ok(LpOutcome::Infeasible { violation: t });
        }
        last_residual = residual;
    }
    Err(LpError::NumericalFailure(last_residual.as_f64()))
}

fn row_scale<T: Scalar>(r: &LinearConstraint<T>) -> T {
    let m = r.coeffs.iter().fold(T::zero(), |a, c| a.max(c.abs()));
    if m > T::zero() {
        m
    } else {
        T::one()
    }
}

/// Returns the primal point and the optimal scaled violation `t`.
fn solve_dual<T: Scalar>(
    n: usize,
    rows: &[LinearConstraint<T>],
    opts: &LpOptions<T>,
    perturb: T,
) -> Result<(Vec<T>, T), LpError> {
    // Dual columns: one per constraint row, 2n box rows, then s (the t ≥ −depth
    // row), then n artificial columns. Each column has n + 1 entries.
    let m = rows.len();
    let ncols = m + 2 * n + 1 + n;
    let s_col = m + 2 * n;
    let art0 = s_col + 1;
    let nr = n + 1;
    let width = ncols + 1;
    let rhs = ncols;

    let mut tab = vec![T::zero(); nr * width];
    let mut cost = vec![T::zero(); ncols];
    for (j, r) in rows.iter().enumerate() {
        let scale = row_scale(r);
        for i in 0..n {
            tab[i * width + j] = r.coeffs[i] / scale;
        }
        tab[n * width + j] = T::one();
        // Tiny deterministic tilt on retries to step off degenerate faces.
        let tilt = perturb * T::from_usize_lossy(j % 7 + 1);
        cost[j] = (r.rhs - opts.margin) / scale + tilt;
    }
    for i in 0..n {
        tab[i * width + m + 2 * i] = T::one();
        tab[i * width + m + 2 * i + 1] = -T::one();
        cost[m + 2 * i] = opts.p_max;
        cost[m + 2 * i + 1] = opts.p_max;
    }
    tab[n * width + s_col] = T::one();
    cost[s_col] = opts.depth;
    tab[n * width + rhs] = T::one();
    for i in 0..n {
        tab[i * width + art0 + i] = T::one();
    }

    let mut basis: Vec<usize> = (0..n).map(|i| art0 + i).collect();
    basis.push(s_col);
    // Reduced costs d_j − c_Bᵀ B⁻¹ A_j. The starting basis is the identity
    // and only s carries a cost.
    let mut red: Vec<T> = (0..ncols)
        .map(|j| cost[j] - opts.depth * tab[n * width + j])
        .collect();
    let eps = T::epsilon().sqrt() * T::lit(1e-3);
    let max_pivots = if opts.max_pivots > 0 {
        opts.max_pivots
    } else {
        50 * (ncols + nr) + 1000
    };
    let mut degenerate = 0usize;

    for _ in 0..max_pivots {
        let bland = degenerate > 50;
        // Entering column: never an artificial.
        let mut enter = None;
        let mut best = -eps;
        for (j, &r) in red.iter().enumerate().take(art0) {
            if basis.contains(&j) {
                continue;
            }
            if r < best {
                enter = Some(j);
                if bland {
                    break;
                }
                best = r;
            }
        }
        let Some(e) = enter else {
            let pi: Vec<T> = (0..nr)
                .map(|i| {
                    if i < n {
                        -red[art0 + i]
                    } else {
                        opts.depth - red[s_col]
                    }
                })
                .collect();
            let p: Vec<T> = pi[..n].to_vec();
            let t = -pi[n];
            return Ok((p, t));
        };
        // Ratio test; basic artificials (value 0) leave on any nonzero entry.
        let mut leave = None;
        let mut ratio = T::infinity();
        for i in 0..nr {
            let a = tab[i * width + e];
            if basis[i] >= art0 && a.abs() > eps {
                leave = Some(i);
                ratio = T::zero();
                break;
            }
            if a > eps {
                let r = tab[i * width + rhs] / a;
                if r < ratio
                    || (r == ratio && bland && leave.is_some_and(|l: usize| basis[i] < basis[l]))
                {
                    ratio = r;
                    leave = Some(i);
                }
            }
        }
        let Some(l) = leave else {
            // Unbounded dual would mean an infeasible primal, which the box
            // and the free t rule out; treat as numerical trouble.
            return Err(LpError::NumericalFailure(f64::INFINITY));
        };
        degenerate = if ratio <= eps { degenerate + 1 } else { 0 };
        pivot(&mut tab, width, nr, l, e);
        let factor = red[e];
        for j in 0..ncols {
            red[j] -= factor * tab[l * width + j];
        }
        basis[l] = e;
    }
    Err(LpError::IterationLimit(max_pivots))
}

fn pivot<T: Scalar>(tab: &mut [T], width: usize, nr: usize, l: usize, e: usize) {
    let pv = tab[l * width + e];
    for j in 0..width {
        tab[l * width + j] /= pv;
    }
    for i in 0..nr {
        if i == l {
            continue;
        }
        let f = tab[i * width + e];
        if f != T::zero() {
            for j in 0..width {
                let v = tab[l * width + j];
                tab[i * width + j] -= f * v;
            }
        }
    }
}
