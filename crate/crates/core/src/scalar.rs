//! Scalar abstraction shared by every numerical routine.

use nalgebra as na;
use num_traits as nt;

/// Real floating-point scalar usable by the reduction algorithms.
pub trait Real:
    na::RealField + Copy + nt::FromPrimitive + nt::ToPrimitive + std::fmt::Display
{
    /// Relative singular-value threshold used for rank decisions.
    fn default_rank_tol() -> Self;

    fn lit(v: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(v).expect("literal representable")
    }

    fn as_f64(self) -> f64 {
        nt::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Real for f64 {
    fn default_rank_tol() -> Self {
        1e-10
    }
}

impl Real for f32 {
    fn default_rank_tol() -> Self {
        1e-4
    }
}
