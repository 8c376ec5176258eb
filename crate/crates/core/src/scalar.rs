use ndarray::LinalgScalar;
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar the whole crate is generic over: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum<Self>
    + LinalgScalar
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + Debug
    + Display
    + 'static
{
    /// Conversion from an `f64` constant.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant must be representable")
    }

    /// Widening (or identity) conversion to `f64`.
    fn to64(self) -> f64 {
        self.to_f64().expect("scalar must convert to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
