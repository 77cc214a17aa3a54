//! Quasi-periodic solutions of the incompressible Euler equations on tori.
//!
//! Closed-form constructions (steady compactly supported flows, glued
//! traveling tubes, locally radial approximations on the 2-torus) together
//! with spectral tools to check them: residuals, a pseudo-spectral vorticity
//! solver, frequency extraction and orbit diagnostics.

pub mod density;
pub mod error;
pub mod field;
pub mod gluing;
pub mod par;
pub mod profile;
pub mod qpf;
pub mod spectral;
pub mod stationary;
pub mod torus;
pub mod verify;

pub use error::{Error, Result};
pub use field::{Grid, SampledField};
pub use torus::{FrequencyVector, TorusPoint};

/// A time-independent vector field on the torus or on a box.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    /// Number of output components (usually `dim`).
    fn components(&self) -> usize {
        self.dim()
    }
    fn eval(&self, x: &[f64], out: &mut [f64]);
}

/// A time-dependent vector field `u(t, x)`.
pub trait TimeField: Sync {
    fn dim(&self) -> usize;
    fn eval_at(&self, t: f64, x: &[f64], out: &mut [f64]);
}

/// A scalar field on the torus or on a box.
pub trait ScalarField: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
}

/// Time-dependent scalar field, used for pressures.
pub trait TimeScalar: Sync {
    fn value_at(&self, t: f64, x: &[f64]) -> f64;
}

impl<F: Fn(f64, &[f64]) -> f64 + Sync> TimeScalar for F {
    fn value_at(&self, t: f64, x: &[f64]) -> f64 {
        self(t, x)
    }
}

/// Freezes a time-dependent field at a fixed time.
pub struct AtTime<'a, F: ?Sized> {
    pub field: &'a F,
    pub t: f64,
}

impl<F: TimeField + ?Sized> VectorField for AtTime<'_, F> {
    fn dim(&self) -> usize {
        self.field.dim()
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        self.field.eval_at(self.t, x, out)
    }
}

/// Wraps a closure as a vector field.
pub struct FnField<F> {
    pub dim: usize,
    pub components: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> VectorField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn components(&self) -> usize {
        self.components
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// Wraps a closure as a scalar field.
pub struct FnScalar<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> ScalarField for FnScalar<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}
