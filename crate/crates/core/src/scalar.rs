//! Scalar abstraction over the numeric kernels.

use num_traits::{Float, FromPrimitive, NumAssignOps};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar accepted by the tensor, DSP, and optimizer kernels.
///
/// Implemented for `f32` and `f64`. The pipeline types at the crate root are
/// aliases instantiated at `f64`, which is what all persistence formats and
/// tolerance contracts assume.
pub trait Scalar:
    Float + FromPrimitive + NumAssignOps + Sum + Default + Debug + Display + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}
