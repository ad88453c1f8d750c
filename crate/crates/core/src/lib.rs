//! Fractional visco-elasticity in one space dimension: exponentially
//! weighted time signals, fractional material laws, staggered spatial
//! operators, a frequency-domain solver and periodic homogenization.

pub mod error;
pub mod homogenization;
pub mod material_law;
pub mod solver;
pub mod spatial_operators;
pub mod weighted_time;

pub use error::{Error, Result};
pub use homogenization::{
    effective_coefficients, oscillate, EffectiveCoefficients, HomogReport, HomogenizationStudy,
    PeriodicCoefficient, Profile,
};
pub use material_law::{
    frac_elasticity_law, homogenized_law, select_nu0, CoefficientField, MaterialLaw,
    SeriesTruncation,
};
pub use solver::{solve, EvolutionaryProblem, Solution, SolverReport};
pub use spatial_operators::{build_setup, BoundaryCondition, SpatialSetup};
pub use weighted_time::{TimeGrid, WeightedSignal};
