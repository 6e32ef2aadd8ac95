use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the Gaussian-process core can be instantiated with.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Diagonal nugget added to correlation matrices, in correlation units.
    const NUGGET: f64;

    /// Floor applied to the profiled process variance.
    const VARIANCE_FLOOR: f64;

    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }
}

impl Scalar for f64 {
    const NUGGET: f64 = 1e-8;
    const VARIANCE_FLOOR: f64 = 1e-12;
}

// f32 cannot resolve a 1e-8 nugget; 1e-4 keeps moderate designs factorizable.
impl Scalar for f32 {
    const NUGGET: f64 = 1e-4;
    const VARIANCE_FLOOR: f64 = 1e-12;
}
