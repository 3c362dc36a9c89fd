//! Nested first-order jets.
//!
//! A [`Dual<T>`] carries a value and one tangent over the scalar type `T`.
//! Nesting `Dual<Dual<f64>>` gives mixed second derivatives, and so on. The
//! nesting is capped at [`MAX_NESTING`] levels so that every field can be
//! monomorphised ahead of time and called through [`DynField`].

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::DynField;
use crate::error::Result;

/// Deepest jet level that is compiled in. `J6` cannot be lifted further.
pub const MAX_NESTING: usize = 6;

/// Scalar types that smooth fields are evaluated on.
///
/// `f64` is level 0; each [`Dual`] wrapper adds one level.
pub trait Real:
    Copy
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// The next nesting level. The deepest level maps to itself and must not be lifted.
    type Lifted: Real;
    /// Nesting depth; `f64` has depth 0.
    const DEPTH: usize;

    fn cst(v: f64) -> Self;
    /// Innermost primal value.
    fn re(&self) -> f64;
    fn is_finite(&self) -> bool;

    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, p: f64) -> Self;
    fn abs(self) -> Self;
    /// Four-quadrant arctangent of `self / x`.
    fn atan2(self, x: Self) -> Self;

    /// Seeds `value + ε·tangent` one level up.
    fn lift(value: Self, tangent: Self) -> Self::Lifted;
    /// Inverse of [`Real::lift`]: returns `(value, tangent)`.
    fn split(lifted: Self::Lifted) -> (Self, Self);

    /// Evaluates a type-erased field at this level.
    fn call(field: &dyn DynField, x: &[Self]) -> Result<Vec<Self>>;
}

/// First-order jet `re + ε·eps` with `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

pub type J1 = Dual<f64>;
pub type J2 = Dual<J1>;
pub type J3 = Dual<J2>;
pub type J4 = Dual<J3>;
pub type J5 = Dual<J4>;
pub type J6 = Dual<J5>;

impl<T: Real> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Dual { re, eps }
    }

    fn d_sin(self) -> Self {
        Dual::new(self.re.sin(), self.eps * self.re.cos())
    }

    fn d_cos(self) -> Self {
        Dual::new(self.re.cos(), -(self.eps * self.re.sin()))
    }

    fn d_exp(self) -> Self {
        let e = self.re.exp();
        Dual::new(e, self.eps * e)
    }

    fn d_ln(self) -> Self {
        Dual::new(self.re.ln(), self.eps / self.re)
    }

    fn d_sqrt(self) -> Self {
        let s = self.re.sqrt();
        Dual::new(s, self.eps / (s * 2.0))
    }

    fn d_powi(self, n: i32) -> Self {
        match n {
            0 => Dual::new(T::cst(1.0), T::cst(0.0)),
            1 => self,
            _ => Dual::new(self.re.powi(n), self.eps * self.re.powi(n - 1) * f64::from(n)),
        }
    }

    fn d_powf(self, p: f64) -> Self {
        Dual::new(self.re.powf(p), self.eps * self.re.powf(p - 1.0) * p)
    }

    fn d_abs(self) -> Self {
        if self.re.re() < 0.0 {
            -self
        } else {
            self
        }
    }

    fn d_atan2(self, x: Self) -> Self {
        let y = self;
        let r2 = x.re * x.re + y.re * y.re;
        Dual::new(y.re.atan2(x.re), (x.re * y.eps - y.re * x.eps) / r2)
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual::new(self.re + o.re, self.eps + o.eps)
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual::new(self.re - o.re, self.eps - o.eps)
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl<T: Real> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.re / o.re;
        Dual::new(q, (self.eps - q * o.eps) / o.re)
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual::new(-self.re, -self.eps)
    }
}

impl<T: Real> Add<f64> for Dual<T> {
    type Output = Self;
    fn add(self, c: f64) -> Self {
        Dual::new(self.re + c, self.eps)
    }
}

impl<T: Real> Sub<f64> for Dual<T> {
    type Output = Self;
    fn sub(self, c: f64) -> Self {
        Dual::new(self.re - c, self.eps)
    }
}

impl<T: Real> Mul<f64> for Dual<T> {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        Dual::new(self.re * c, self.eps * c)
    }
}

impl<T: Real> Div<f64> for Dual<T> {
    type Output = Self;
    fn div(self, c: f64) -> Self {
        Dual::new(self.re / c, self.eps / c)
    }
}

impl Real for f64 {
    type Lifted = J1;
    const DEPTH: usize = 0;

    fn cst(v: f64) -> Self {
        v
    }
    fn re(&self) -> f64 {
        *self
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
    fn lift(value: Self, tangent: Self) -> J1 {
        Dual::new(value, tangent)
    }
    fn split(lifted: J1) -> (Self, Self) {
        (lifted.re, lifted.eps)
    }
    fn call(field: &dyn DynField, x: &[Self]) -> Result<Vec<Self>> {
        field.eval0(x)
    }
}

macro_rules! impl_real_dual {
    (@common $depth:expr, $eval:ident) => {
        const DEPTH: usize = $depth;

        fn cst(v: f64) -> Self {
            Dual::new(Real::cst(v), Real::cst(0.0))
        }
        fn re(&self) -> f64 {
            self.re.re()
        }
        fn is_finite(&self) -> bool {
            self.re.is_finite() && self.eps.is_finite()
        }
        fn sin(self) -> Self {
            self.d_sin()
        }
        fn cos(self) -> Self {
            self.d_cos()
        }
        fn exp(self) -> Self {
            self.d_exp()
        }
        fn ln(self) -> Self {
            self.d_ln()
        }
        fn sqrt(self) -> Self {
            self.d_sqrt()
        }
        fn powi(self, n: i32) -> Self {
            self.d_powi(n)
        }
        fn powf(self, p: f64) -> Self {
            self.d_powf(p)
        }
        fn abs(self) -> Self {
            self.d_abs()
        }
        fn atan2(self, x: Self) -> Self {
            self.d_atan2(x)
        }
        fn call(field: &dyn DynField, x: &[Self]) -> Result<Vec<Self>> {
            field.$eval(x)
        }
    };
    ($ty:ty, $lifted:ty, $depth:expr, $eval:ident) => {
        impl Real for $ty {
            type Lifted = $lifted;
            impl_real_dual!(@common $depth, $eval);

            fn lift(value: Self, tangent: Self) -> $lifted {
                Dual::new(value, tangent)
            }
            fn split(lifted: $lifted) -> (Self, Self) {
                (lifted.re, lifted.eps)
            }
        }
    };
    (terminal $ty:ty, $depth:expr, $eval:ident) => {
        impl Real for $ty {
            type Lifted = $ty;
            impl_real_dual!(@common $depth, $eval);

            fn lift(_: Self, _: Self) -> $ty {
                unreachable!("jet nesting exhausted; callers check DEPTH before lifting")
            }
            fn split(_: $ty) -> (Self, Self) {
                unreachable!("jet nesting exhausted; callers check DEPTH before lifting")
            }
        }
    };
}

impl_real_dual!(J1, J2, 1, eval1);
impl_real_dual!(J2, J3, 2, eval2);
impl_real_dual!(J3, J4, 3, eval3);
impl_real_dual!(J4, J5, 4, eval4);
impl_real_dual!(J5, J6, 5, eval5);
impl_real_dual!(terminal J6, 6, eval6);

/// Returns `Err` unless `T` can be lifted `levels` more times.
pub(crate) fn ensure_headroom<T: Real>(levels: usize) -> Result<()> {
    if T::DEPTH + levels > MAX_NESTING {
        Err(crate::Error::NestingDepth {
            requested: T::DEPTH + levels,
            max: MAX_NESTING,
        })
    } else {
        Ok(())
    }
}

/// Lifts a whole point along a direction.
pub(crate) fn lift_point<T: Real>(x: &[T], dir: &[T]) -> Vec<T::Lifted> {
    x.iter().zip(dir).map(|(&v, &d)| T::lift(v, d)).collect()
}
