//! Numerical checks: Euler residuals, a pseudo-spectral vorticity solver,
//! frequency extraction and exact-versus-evolved comparisons.

mod compare;
mod residual;
mod solver;
mod spectrum;

pub use compare::{compare_exact_vs_evolved, ErrorRow, PlanarExact, PlanarGlued};
pub use residual::{euler_residual, residual_from_samples, ResidualReport, TIME_STEP};
pub use solver::{random_vorticity, solve_euler_2d, velocity_from_vorticity, SolverOptions, SolverState, Trajectory};
pub use spectrum::{
    frequency_analysis, predicted_frequencies, FrequencyOptions, ModeProbe, Peak, PeakReport, PointProbe,
};
