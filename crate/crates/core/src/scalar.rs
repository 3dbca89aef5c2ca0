//! Floating-point abstraction shared by every solver in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar type the solvers are generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_usize_(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    fn to_f64_(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    /// Tolerance used when checking that probability rows sum to one.
    ///
    /// `1e-12` for `f64`; scaled machine epsilon for narrower types.
    fn row_tolerance(len: usize) -> Self {
        let floor = Self::epsilon() * Self::from_usize_(8 * len.max(1));
        Self::lit(1e-12).max(floor)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn sup_dist<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter()
        .zip(b)
        .fold(F::zero(), |m, (x, y)| m.max((*x - *y).abs()))
}

pub(crate) fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}
