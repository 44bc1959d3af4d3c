//! Certified subdivision for implicit hypersurfaces `f = 0` over `[-a, a]^n`
//! in the style of Plantinga and Vegter, at two arithmetic levels: exact
//! rational interval tests and variable-precision floating point with a
//! per-box precision schedule. A condition-number toolkit and a randomized
//! experiment harness sit alongside the subdivision engine.

pub mod amortize;
pub mod arith;
pub mod boxes;
pub mod condition;
pub mod effective;
pub mod fp;
pub mod interval;
pub mod io;
pub mod poly;
pub mod random;

pub use boxes::NBox;
pub use poly::{AffinePoly, HomoPoly, MultiIndex, SpherePoint};
