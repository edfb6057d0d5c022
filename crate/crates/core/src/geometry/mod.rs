//! Norms on the plane and the geometry of their unit spheres.

mod atlas;
mod norm;
mod spec;

pub use atlas::{BoundaryAtlas, Cone, DEFAULT_ATLAS_TOL, DEFAULT_SAMPLES, MIN_SAMPLES};
pub use norm::{conjugate, PlanarNorm, Smoothness};
pub use spec::NormSpec;
