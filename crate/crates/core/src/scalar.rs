//! Scalar abstractions.
//!
//! Linear-algebra oracles (ranks, nullspaces, group averages) only need field
//! arithmetic and run over exact rationals as well as floats. Networks and
//! training need a real floating-point type.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, Neg, SubAssign};

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// Field arithmetic with a notion of "numerically zero".
pub trait Field:
    Clone + Debug + PartialEq + Num + Neg<Output = Self> + FromPrimitive + Send + Sync + 'static
{
    /// Magnitude used for pivot selection.
    fn magnitude(&self) -> f64;

    /// Whether the value is zero for elimination purposes. Exact types
    /// compare against zero; floats use a relative floor.
    fn negligible(&self) -> bool;

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

macro_rules! float_field {
    ($t:ty, $tol:expr) => {
        impl Field for $t {
            fn magnitude(&self) -> f64 {
                self.abs() as f64
            }

            fn negligible(&self) -> bool {
                self.abs() <= $tol
            }
        }
    };
}

float_field!(f64, 1e-10);
float_field!(f32, 1e-5);

impl Field for Rational64 {
    fn magnitude(&self) -> f64 {
        self.abs().to_f64().unwrap_or(f64::INFINITY)
    }

    fn negligible(&self) -> bool {
        self.is_zero()
    }
}

impl Field for BigRational {
    fn magnitude(&self) -> f64 {
        let a = self.abs();
        match (a.numer().to_f64(), a.denom().to_f64()) {
            (Some(n), Some(d)) => n / d,
            _ => f64::INFINITY,
        }
    }

    fn negligible(&self) -> bool {
        self.is_zero()
    }
}

/// Floating-point scalar used by networks and the trainer.
pub trait Real:
    Field + Float + AddAssign + SubAssign + MulAssign + Sum + Display + Default
{
    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 converts")
    }

    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f64 {}
impl Real for f32 {}

/// Exact rational from a small integer ratio.
pub fn big_ratio(numer: i64, denom: i64) -> BigRational {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}
