//! Numerical laboratory for convex functions, Monge-Ampere measures, sections and a
//! singular Monge-Ampere solution built on a Cantor-type set.

pub mod config;
pub mod convex;
pub mod error;
pub mod estimates;
pub mod geometry;
pub mod grid;
pub mod magf;
pub mod sections;
pub mod singular;
pub mod solver;
pub mod stencil;

pub use error::{MalabError, Result};
