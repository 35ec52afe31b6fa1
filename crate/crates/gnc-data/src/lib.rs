//! Synthetic problem instances and evaluation metrics for robust estimation.
//!
//! The generators produce point-cloud registration and shape-alignment
//! instances with a known ground truth, Gaussian inlier noise, and a
//! controlled fraction of adversarial outliers, so that estimators can be
//! scored objectively. Everything is seeded and bit-reproducible across
//! platforms. A small ASCII PLY reader lets registration instances start from
//! real scan data instead of random clouds.

mod metrics;
mod ply;
mod synthetic;

pub use metrics::{precision_recall, rotation_error_deg};
pub use ply::{load_ply_points, PlyError};
pub use synthetic::{
    generate_registration, generate_shape_alignment, random_rotation, GenerateError,
    RegistrationInstance, RegistrationInstanceSpec, ShapeInstance, ShapeInstanceSpec, SourceCloud,
};
