//! The truncation-based approximation schemes.

pub mod bdp;
pub mod ita;
pub mod ldqbdp;
pub mod lp;
pub mod ta;
