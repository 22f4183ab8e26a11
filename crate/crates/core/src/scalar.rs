use std::fmt::Debug;

/// Floating point coordinate type: `f32` or `f64`.
pub trait Scalar:
    num_traits::Float + num_traits::FromPrimitive + num_traits::NumCast + Debug + Default + Send + Sync
{
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal fits scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
