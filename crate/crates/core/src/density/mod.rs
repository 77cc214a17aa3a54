//! Locally radial approximation of stream functions on the 2-torus.
//!
//! A stream function is replaced by radial plateaus on a packing of disjoint
//! disks that stay away from a set of vertical lines. Letting each group of
//! disks between two lines drift vertically with its own speed gives exact
//! Euler solutions whose initial data approximate the original function.

mod packing;
mod radial;
mod theorem;

pub use packing::{pack_balls, pack_balls_with, Ball, BallIndex, BallPacking, PackingOptions, VerticalLines};
pub use radial::{
    build_locally_radial, build_locally_radial_on, choose_smoothing_index, gauss_legendre, measured_error,
    smoothing_bound, step_average, weakstar_convergence_check, CertifiedReport, LocallyRadialFunction, PairingRow,
    PolarRule, StreamFunction, TestFunction,
};
pub use theorem::{build_chi_jm, build_theorem_family, ChiJM, FamilyEmbedding, TheoremFamily};
