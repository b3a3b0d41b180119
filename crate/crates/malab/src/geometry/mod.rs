//! Convex hulls, John ellipsoids and direction sets.

mod directions;
mod ellipsoid;
mod hull;

pub use directions::{circle_directions, icosphere_directions, sphere_directions};
pub use ellipsoid::{john_ellipsoid, john_of_hull, Ellipsoid, JohnEllipsoid, JOHN_GAP, JOHN_MAX_ITER};
pub use hull::{affine_basis, convex_hull, HalfSpace, Hull, P3};
