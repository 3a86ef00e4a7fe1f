use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::FromPrimitive;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Scalar type the encoder is generic over: `f32` for training, `f64` for
/// gradient checks and exactness tests.
pub trait Float:
    num_traits::Float
    + LinalgScalar
    + ScalarOperand
    + FromPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    fn cst(x: f64) -> Self {
        Self::from_f64(x).expect("representable constant")
    }

    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("finite float")
    }
}

impl Float for f32 {}
impl Float for f64 {}
