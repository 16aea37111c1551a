//! Floating-point scalar abstraction for the linear-algebra and LP kernels.

use num_traits::{Float, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

/// A real scalar usable by the factorization and simplex kernels.
///
/// The associated tolerances are the defaults quoted for double precision;
/// single precision gets proportionally looser ones.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + Sum + Default + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Relative pivot floor below which a factorization is flagged singular.
    const PIVOT_FLOOR: f64;
    /// Primal/dual feasibility tolerance of the simplex method.
    const LP_TOL: f64;

    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f64 {
    const PIVOT_FLOOR: f64 = 1e-12;
    const LP_TOL: f64 = 1e-9;
}

impl Scalar for f32 {
    const PIVOT_FLOOR: f64 = 1e-6;
    const LP_TOL: f64 = 1e-4;
}
