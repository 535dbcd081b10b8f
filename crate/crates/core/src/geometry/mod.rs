//! Superlevel sets and their geometry: boundary extraction, fractional mean
//! curvature, normal translation, set-to-set distances and the minimality
//! audit of level sets.

mod boundary;
mod curvature;
mod levelset;
mod minimality;

pub use boundary::{Boundary, BoundaryPoint};
pub use curvature::{
    boundary_distance, boundary_points, el_residual, first_variation_check, inclusion_curvature_check,
    mean_curvature, mean_curvature_with, nearest_boundary_point, support_radius, translate_along_normal,
    CurvatureOptions, ElResidual, FirstVariationReport,
};
pub use levelset::{distinct_levels, midpoint_thresholds, superlevel_set, LevelSet};
pub use minimality::{levelset_minimality_margin, CompetitorSpec, MinimalityMargin};
