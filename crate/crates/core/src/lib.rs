//! Fractional total-variation denoising on regular 1D/2D grids.
//!
//! The crate minimizes
//!
//! ```text
//! F(u) = ½ ∬ K(x-y) |u(x)-u(y)| dx dy + ½ ∫ (u-f)²,   K(z) = |z|^{-(n+s)}
//! ```
//!
//! on a regular grid (optionally coupled to a zero exterior), returns a dual field that
//! certifies optimality, and provides the set-level tooling used to audit a
//! solution: nonlocal perimeters, superlevel sets, fractional mean
//! curvature, normal translations and Hölder-modulus estimates.
//!
//! Every numeric type is generic over [`Real`] (`f32` or `f64`); the `*64`
//! and `*32` aliases below name the common instantiations.

pub mod energy;
pub mod error;
mod flow;
pub mod geometry;
pub mod grid;
pub mod kernel;
pub mod oracle;
pub mod quadrature;
pub mod regularity;
pub mod scalar;
pub mod solver;

pub use energy::{
    coarea_gap, exterior_term, fidelity, isoperimetric_ratio, localized_perimeter, perimeter, prescribed_energy, seminorm,
    submodularity_gap, total_energy, EnergyBreakdown, PerimeterValue,
};
pub use error::{Error, Result};
pub use geometry::{
    boundary_distance, el_residual, first_variation_check, inclusion_curvature_check, levelset_minimality_margin,
    mean_curvature, superlevel_set, support_radius, translate_along_normal, BoundaryPoint, CompetitorSpec, LevelSet,
};
pub use grid::{load_field, save_csv, synth_field, Grid, ScalarField, SynthKind};
pub use kernel::{build_pair_weights, kernel_eval, tail_mass, KernelSpec, NearFieldRule, PairWeights};
pub use regularity::{
    holder_seminorm, key_inequality_experiment, modulus_inheritance_report, HolderEstimate, KeyInequalityReport,
    ModulusReport,
};
pub use scalar::{Point, Real};
pub use solver::{
    certificate_check, comparison_experiment, minimize, minimize_with, CertificateReport, ComparisonReport, DualField,
    LogRecord, SolveResult, SolverOptions,
};

pub type Grid64 = Grid<f64>;
pub type Grid32 = Grid<f32>;
pub type Field64 = ScalarField<f64>;
pub type Field32 = ScalarField<f32>;
pub type KernelSpec64 = KernelSpec<f64>;
pub type KernelSpec32 = KernelSpec<f32>;
pub type PairWeights64 = PairWeights<f64>;
pub type PairWeights32 = PairWeights<f32>;
pub type LevelSet64 = geometry::LevelSet<f64>;
pub type DualField64 = DualField<f64>;
pub type SolveResult64 = SolveResult<f64>;
pub type SolverOptions64 = SolverOptions<f64>;
