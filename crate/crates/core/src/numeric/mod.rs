pub mod extrap;
pub mod ode;
pub mod quad;
pub mod roots;

pub use extrap::{neville_at_zero, two_sided_limit, Limit};
pub use ode::{OdeOptions, OdeSolution};
pub use quad::{integrate, integrate_with, QuadOptions, Quadrature};
pub use roots::{bisect, brent, invert_increasing};
