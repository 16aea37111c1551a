//! Stationary distributions of stochastic reaction networks by state-space
//! truncation: birth-death products, LDQBDP recursions, truncation-and-augmentation
//! (single and iterated), LP outer approximations, and the error bounds that go
//! with them.
//!
//! The linear-algebra and simplex kernels are generic over [`Scalar`]; the
//! aliases below fix them to `f64`, which is what every scheme uses.

pub mod bench;
pub mod dist;
pub mod error;
pub mod errors;
pub mod lpsolve;
pub mod model;
pub mod numlin;
pub mod scalar;
pub mod schemes;
pub mod simulate;
pub mod statespace;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type SparseMatrix = numlin::SparseMatrix<f64>;
pub type DenseMatrix = numlin::DenseMatrix<f64>;
pub type LuFactorization = numlin::LuFactorization<f64>;
pub type LinearProgram = lpsolve::LinearProgram<f64>;
pub type LpSolution = lpsolve::LpSolution<f64>;
