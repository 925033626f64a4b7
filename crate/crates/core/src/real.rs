//! Scalar abstraction shared by the double-precision and multiprecision code paths.
//!
//! Everything that has to resolve errors far below `f64` round-off (expansion
//! remainders, adiabatic drift, cubic Taylor coefficients of the return map) is
//! written against [`Real`] and instantiated with [`Mp`].

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_dual::{Dual3, DualNum};
use rug::float::Constant;
use rug::Float;

/// Working precision of [`Mp`] in bits.
pub const MP_PREC: u32 = 192;

pub trait Real:
    Clone
    + fmt::Debug
    + PartialOrd
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
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn pi() -> Self;
    fn sqrt(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Self;
    fn atan2(&self, x: &Self) -> Self;
    fn floor(&self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    /// Exact rational `p/q` at working precision.
    fn ratio(p: f64, q: f64) -> Self {
        Self::from_f64(p) / q
    }

    fn abs(&self) -> Self {
        if self.to_f64() < 0.0 {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn sq(&self) -> Self {
        self.clone() * self.clone()
    }

    fn powi(&self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc * self.clone();
        }
        acc
    }

    fn hypot(&self, other: &Self) -> Self {
        (self.sq() + other.sq()).sqrt()
    }

    /// Fractional part with floor semantics, in `[0, 1)`.
    fn fract_floor(&self) -> Self {
        self.clone() - self.floor()
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn pi() -> Self {
        std::f64::consts::PI
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn tan(&self) -> Self {
        f64::tan(*self)
    }
    fn atan2(&self, x: &Self) -> Self {
        f64::atan2(*self, *x)
    }
    fn floor(&self) -> Self {
        f64::floor(*self)
    }
}

/// MPFR float at [`MP_PREC`] bits.
#[derive(Clone, PartialEq, PartialOrd)]
pub struct Mp(pub Float);

impl fmt::Debug for Mp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.30e}", self.0)
    }
}

impl Mp {
    pub fn new(x: f64) -> Self {
        Mp(Float::with_val(MP_PREC, x))
    }
}

macro_rules! mp_binop {
    ($tr:ident, $f:ident) => {
        impl $tr for Mp {
            type Output = Mp;
            fn $f(self, rhs: Mp) -> Mp {
                Mp($tr::$f(self.0, rhs.0))
            }
        }
        impl $tr<f64> for Mp {
            type Output = Mp;
            fn $f(self, rhs: f64) -> Mp {
                Mp($tr::$f(self.0, rhs))
            }
        }
    };
}
mp_binop!(Add, add);
mp_binop!(Sub, sub);
mp_binop!(Mul, mul);
mp_binop!(Div, div);

impl Neg for Mp {
    type Output = Mp;
    fn neg(self) -> Mp {
        Mp(-self.0)
    }
}

impl Real for Mp {
    fn from_f64(x: f64) -> Self {
        Mp::new(x)
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
    fn pi() -> Self {
        Mp(Float::with_val(MP_PREC, Constant::Pi))
    }
    fn sqrt(&self) -> Self {
        Mp(self.0.clone().sqrt())
    }
    fn sin(&self) -> Self {
        Mp(self.0.clone().sin())
    }
    fn cos(&self) -> Self {
        Mp(self.0.clone().cos())
    }
    fn tan(&self) -> Self {
        Mp(self.0.clone().tan())
    }
    fn atan2(&self, x: &Self) -> Self {
        Mp(self.0.clone().atan2(&x.0))
    }
    fn floor(&self) -> Self {
        Mp(self.0.clone().floor())
    }
}

/// Third-order jets, used to differentiate the closed-form charts.
pub type Jet = Dual3<f64>;

impl Real for Jet {
    fn from_f64(x: f64) -> Self {
        Dual3::from_re(x)
    }
    fn to_f64(&self) -> f64 {
        self.re
    }
    fn pi() -> Self {
        Dual3::from_re(std::f64::consts::PI)
    }
    fn sqrt(&self) -> Self {
        DualNum::sqrt(self)
    }
    fn sin(&self) -> Self {
        DualNum::sin(self)
    }
    fn cos(&self) -> Self {
        DualNum::cos(self)
    }
    fn tan(&self) -> Self {
        DualNum::tan(self)
    }
    fn atan2(&self, x: &Self) -> Self {
        DualNum::atan2(self, *x)
    }
    fn floor(&self) -> Self {
        Dual3::from_re(self.re.floor())
    }
}

/// Value and first three derivatives of `f` at `x`.
pub fn derivatives<F: Fn(Jet) -> Jet>(f: F, x: f64) -> [f64; 4] {
    let j = f(Dual3::from_re(x).derivative());
    [j.re, j.v1, j.v2, j.v3]
}
