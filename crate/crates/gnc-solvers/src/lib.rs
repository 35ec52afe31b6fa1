//! Weighted non-minimal solvers pluggable into the GNC engine, plus a RANSAC
//! baseline over the same solvers.
//!
//! Two estimation problems are covered:
//!
//! - [`registration`]: rigid alignment of 3D point correspondences with the
//!   weighted closed-form SVD solver.
//! - [`shape`]: weak-perspective shape alignment (scale, rotation and 2D
//!   translation from 2D feature / 3D model correspondences) via translation
//!   marginalization, a quaternion monomial lift, and certified-by-test
//!   multi-start minimization of the lifted quartic.

pub mod ransac;
pub mod registration;
pub mod shape;
