use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::Scalar;

/// Closed interval `[lo, hi]`. Arithmetic is the textbook one without directed
/// rounding; callers widen results by a rounding allowance where soundness
/// matters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Interval<T> {
    /// Panics if `lo > hi` or either end is NaN.
    pub fn new(lo: T, hi: T) -> Self {
        assert!(lo <= hi, "interval bounds out of order: [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(v: T) -> Self {
        Self { lo: v, hi: v }
    }

    /// Interval spanning both values in either order.
    pub fn spanning(a: T, b: T) -> Self {
        Self {
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn mid(&self) -> T {
        self.lo + (self.hi - self.lo) / T::lit(2.0)
    }

    pub fn radius(&self) -> T {
        self.width() / T::lit(2.0)
    }

    pub fn contains(&self, v: T) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn hull(&self, other: &Self) -> Self {
        Self {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Self { lo, hi })
    }

    /// Largest absolute value in the interval.
    pub fn mag(&self) -> T {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value in the interval.
    pub fn mig(&self) -> T {
        if self.contains(T::zero()) {
            T::zero()
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    /// Exact range of `x^k` over the interval.
    pub fn powi(&self, k: u32) -> Self {
        match k {
            0 => Self::point(T::one()),
            1 => *self,
            _ if k % 2 == 1 => Self {
                lo: self.lo.powi(k as i32),
                hi: self.hi.powi(k as i32),
            },
            _ => Self {
                lo: self.mig().powi(k as i32),
                hi: self.mag().powi(k as i32),
            },
        }
    }

    pub fn scale(&self, c: T) -> Self {
        Self::spanning(self.lo * c, self.hi * c)
    }

    /// Pushes both ends outward by `eps`.
    pub fn widen(&self, eps: T) -> Self {
        Self {
            lo: self.lo - eps,
            hi: self.hi + eps,
        }
    }

    /// Splits at the midpoint.
    pub fn bisect(&self) -> (Self, Self) {
        let m = self.mid();
        (Self { lo: self.lo, hi: m }, Self { lo: m, hi: self.hi })
    }
}

impl<T: Scalar> Add for Interval<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            lo: self.lo + o.lo,
            hi: self.hi + o.hi,
        }
    }
}

impl<T: Scalar> Sub for Interval<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            lo: self.lo - o.hi,
            hi: self.hi - o.lo,
        }
    }
}

impl<T: Scalar> Neg for Interval<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl<T: Scalar> Mul for Interval<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let c = [
            self.lo * o.lo,
            self.lo * o.hi,
            self.hi * o.lo,
            self.hi * o.hi,
        ];
        let lo = c.iter().copied().fold(T::infinity(), T::min);
        let hi = c.iter().copied().fold(T::neg_infinity(), T::max);
        Self { lo, hi }
    }
}

impl<T: Scalar> fmt::Display for Interval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Axis-aligned box, one interval per state coordinate.
pub type IntervalBox<T> = Vec<Interval<T>>;

/// Midpoint of every side.
pub fn box_mid<T: Scalar>(b: &[Interval<T>]) -> Vec<T> {
    b.iter().map(Interval::mid).collect()
}

/// Splits along the widest side.
pub fn bisect_box<T: Scalar>(b: &[Interval<T>]) -> (IntervalBox<T>, IntervalBox<T>) {
    let axis = (0..b.len())
        .max_by(|&i, &j| {
            b[i].width()
                .partial_cmp(&b[j].width())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("box has at least one side");
    let (l, r) = b[axis].bisect();
    let mut left = b.to_vec();
    let mut right = b.to_vec();
    left[axis] = l;
    right[axis] = r;
    (left, right)
}

pub fn box_contains<T: Scalar>(b: &[Interval<T>], x: &[T]) -> bool {
    b.len() == x.len() && b.iter().zip(x).all(|(i, v)| i.contains(*v))
}

#[cfg(test)]
mod tests {
    use super::*;

    type I = Interval<f64>;

    #[test]
    fn even_power_straddling_zero() {
        assert_eq!(I::new(-1.0, 2.0).powi(2), I::new(0.0, 4.0));
        assert_eq!(I::new(-3.0, -1.0).powi(2), I::new(1.0, 9.0));
        assert_eq!(I::new(-2.0, 1.0).powi(3), I::new(-8.0, 1.0));
    }

    #[test]
    fn arithmetic() {
        let a = I::new(-1.0, 2.0);
        let b = I::new(3.0, 4.0);
        assert_eq!(a + b, I::new(2.0, 6.0));
        assert_eq!(a - b, I::new(-5.0, -1.0));
        assert_eq!(a * b, I::new(-4.0, 8.0));
        assert_eq!(-a, I::new(-2.0, 1.0));
        assert_eq!(a.scale(-2.0), I::new(-4.0, 2.0));
        assert_eq!(a.intersect(&b), None);
        assert_eq!(a.hull(&b), I::new(-1.0, 4.0));
    }

    #[test]
    fn box_bisection_splits_widest_side() {
        let b = vec![I::new(0.0, 1.0), I::new(0.0, 4.0)];
        let (l, r) = bisect_box(&b);
        assert_eq!(l[1], I::new(0.0, 2.0));
        assert_eq!(r[1], I::new(2.0, 4.0));
        assert_eq!(l[0], b[0]);
    }

    #[test]
    fn works_in_single_precision() {
        let a = Interval::<f32>::new(-1.0, 2.0);
        assert_eq!(a.powi(2), Interval::new(0.0, 4.0));
    }
}
