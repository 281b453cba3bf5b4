//! Computational tools around Jacobi-ideal membership, shift functions along
//! one-dimensional flows, conjugating lifts and interpolating diffeomorphisms.

pub mod confspace;
pub mod critical;
pub mod demo;
pub mod diffeo;
pub mod error;
pub mod expr;
pub mod flow;
pub mod jacobi;
pub mod lift;
pub mod numeric;
pub mod section;
pub mod series;
pub mod verify;

pub use error::{DomainKind, Error, Result};
pub use expr::{directional_derivative, Func, Rational, SmoothExpr, VectorFieldExpr};
pub use series::{Monomial, TruncSeries};
