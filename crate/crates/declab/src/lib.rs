//! Numerical laboratory for `l^2 L^p` decoupling experiments on the parabola
//! and the circle.
//!
//! The library has three layers:
//!
//! * measurement primitives: weight calculus on squares ([`geometry`]),
//!   extension operators `E_J g(x) = int_J g(xi) e(xi x_1 + h(xi) x_2) dxi`
//!   and their `L^p` norms ([`extension`]);
//! * experiments: empirical decoupling, bilinear and ball-inflation ratios
//!   over seeded test families ([`lab`]);
//! * exact bookkeeping: explicit bound recursions in the log domain
//!   ([`bounds`]), lattice points on circles ([`lattice`]) and sixth-moment
//!   correlation counts ([`expsum`]).
//!
//! Everything that reports a number is deterministic for a fixed seed; slow
//! reference routes are kept alongside every fast path and the two are
//! cross-tested.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod expsum;
pub mod extension;
pub mod geometry;
pub mod lab;
pub mod lattice;
pub mod numerics;

pub use error::{Error, Result};
