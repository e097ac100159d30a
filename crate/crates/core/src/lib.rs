//! Exact tensor products of cohomological field theories on genus-zero
//! moduli spaces, with the matching constructions for Frobenius manifolds.

pub mod error;
pub mod frobenius;
pub mod poly;
pub mod rank_one;
pub mod scalar;
pub mod m0n;
pub mod models;
pub mod semisimple;
pub mod series;
pub mod tensor;
pub mod trees;

pub use error::{Error, Result};
pub use poly::{Monomial, Poly};
pub use scalar::{Coeff, Rational};
