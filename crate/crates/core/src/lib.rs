//! Epsilon-geodesics in the space of ALE Kähler potentials.
//!
//! The library works on U(n)-invariant model spaces, where a Kähler
//! potential is a function of `u = |z|^2` and a path of potentials is a
//! field over `(x, t)` with `x = log r`. The regularized homogeneous complex
//! Monge–Ampère problem on `M × Σ` then becomes a two-dimensional fully
//! nonlinear elliptic equation which is solved by damped Newton iteration
//! with continuation in the regularization level.
//!
//! Interchangeable pieces (background metrics, endpoint profiles, barrier
//! profiles, linear solvers) live behind traits and are looked up by name
//! through [`registry::Registry`].

pub mod analysis;
pub mod barriers;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod ma;
pub mod registry;
pub mod slice;
pub mod solver;

pub use error::{Error, Result};
