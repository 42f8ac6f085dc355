use num::bigint::BigInt;
use num::rational::BigRational;
use num::{FromPrimitive, Num, Signed, ToPrimitive};
use std::fmt::Debug;

/// Field elements the piecewise-polynomial code runs on: f64 for fast
/// profiles, exact rationals for verification.
pub trait Scalar:
    Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync
{
    /// Exact conversion of a finite double.
    fn from_f64_exact(x: f64) -> Self;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Distance below which two breakpoints are merged.
    fn coalesce_tol(scale: &Self) -> Self;

    fn int(i: i64) -> Self {
        <Self as FromPrimitive>::from_i64(i).expect("integer conversion")
    }

    fn half() -> Self {
        Self::one() / Self::int(2)
    }

    fn is_exact() -> bool;
}

impl Scalar for f64 {
    fn from_f64_exact(x: f64) -> Self {
        x
    }

    fn coalesce_tol(scale: &Self) -> Self {
        1e-14 * scale.abs()
    }

    fn is_exact() -> bool {
        false
    }
}

impl Scalar for BigRational {
    fn from_f64_exact(x: f64) -> Self {
        BigRational::from_float(x).expect("finite value")
    }

    fn to_f64_lossy(&self) -> f64 {
        // ToPrimitive on big ratios can lose range; divide in two steps if needed.
        match self.to_f64() {
            Some(v) if v.is_finite() => v,
            _ => {
                let n = self.numer().to_f64().unwrap_or(f64::NAN);
                let d = self.denom().to_f64().unwrap_or(f64::NAN);
                n / d
            }
        }
    }

    fn coalesce_tol(_scale: &Self) -> Self {
        BigRational::from_integer(BigInt::from(0))
    }

    fn is_exact() -> bool {
        true
    }
}

pub type Rational = BigRational;
