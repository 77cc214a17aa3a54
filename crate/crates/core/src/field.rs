//! Uniform grids and sampled fields.
//!
//! Values are stored components-outermost and row-major over the grid axes
//! (last axis fastest).

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::{ScalarField, VectorField};

/// A uniform periodic grid on a box `origin + [0, extent)` per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub shape: Vec<usize>,
    pub origin: Vec<f64>,
    pub extent: Vec<f64>,
}

impl Grid {
    /// Standard torus grid with spacing `2π/n_i`.
    pub fn torus(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), origin: vec![0.0; shape.len()], extent: vec![TAU; shape.len()] }
    }

    pub fn cube(d: usize, n: usize) -> Self {
        Self::torus(&vec![n; d])
    }

    /// Centered box `[-half, half)^d`.
    pub fn centered_box(d: usize, n: usize, half: f64) -> Self {
        Self { shape: vec![n; d], origin: vec![-half; d], extent: vec![2.0 * half; d] }
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extent[axis] / self.shape[axis] as f64
    }

    /// Quadrature weight of one cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    /// Coordinates of flat index `idx`.
    pub fn point(&self, mut idx: usize, x: &mut [f64]) {
        for a in (0..self.dim()).rev() {
            let n = self.shape[a];
            x[a] = self.origin[a] + (idx % n) as f64 * self.spacing(a);
            idx /= n;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.shape.len();
        if d == 0 || self.origin.len() != d || self.extent.len() != d {
            return Err(Error::InvalidParameter("inconsistent grid metadata".into()));
        }
        if self.shape.contains(&0) || self.extent.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::InvalidParameter("degenerate grid".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub grid: Grid,
    pub components: usize,
    pub values: Vec<f64>,
}

impl SampledField {
    pub fn new(grid: Grid, components: usize, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if components == 0 || values.len() != components * grid.len() {
            return Err(Error::InvalidParameter(format!(
                "value array of length {} does not match {} components on {} points",
                values.len(),
                components,
                grid.len()
            )));
        }
        Ok(Self { grid, components, values })
    }

    pub fn zeros(grid: Grid, components: usize) -> Self {
        let n = grid.len() * components;
        Self { grid, components, values: vec![0.0; n] }
    }

    /// Samples a scalar function given as a closure.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let d = grid.dim();
        let mut values = vec![0.0; grid.len()];
        par::for_each_chunk_mut(&mut values, par::CHUNK, |c, chunk| {
            let mut x = vec![0.0; d];
            for (k, v) in chunk.iter_mut().enumerate() {
                grid.point(c * par::CHUNK + k, &mut x);
                *v = f(&x);
            }
        });
        Self { grid, components: 1, values }
    }

    pub fn sample_scalar(grid: Grid, f: &dyn ScalarField) -> Self {
        Self::from_fn(grid, |x| f.value(x))
    }

    /// Samples all components of a vector field.
    pub fn sample_vector(grid: Grid, f: &(impl VectorField + ?Sized)) -> Self {
        let d = grid.dim();
        let c = f.components();
        let n = grid.len();
        // sample pointwise into interleaved storage, then transpose
        let mut inter = vec![0.0; n * c];
        let chunk = par::CHUNK * c;
        par::for_each_chunk_mut(&mut inter, chunk, |ci, block| {
            let mut x = vec![0.0; d];
            for (k, out) in block.chunks_mut(c).enumerate() {
                grid.point(ci * par::CHUNK + k, &mut x);
                f.eval(&x, out);
            }
        });
        let mut values = vec![0.0; n * c];
        for comp in 0..c {
            let dst = &mut values[comp * n..(comp + 1) * n];
            for (i, v) in dst.iter_mut().enumerate() {
                *v = inter[i * c + comp];
            }
        }
        Self { grid, components: c, values }
    }

    pub fn component(&self, i: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.values[i * n..(i + 1) * n]
    }

    pub fn max_abs(&self) -> f64 {
        let v = &self.values;
        par::max_range(v.len(), |i| v[i].abs())
    }

    /// Pointwise Euclidean norm maximum over the grid.
    pub fn max_norm(&self) -> f64 {
        let n = self.grid.len();
        let c = self.components;
        let v = &self.values;
        par::max_range(n, |i| (0..c).map(|k| v[k * n + i] * v[k * n + i]).sum::<f64>().sqrt())
    }

    /// Grid mean of each component.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.grid.len();
        (0..self.components)
            .map(|k| {
                let s = self.component(k);
                par::sum_range(n, |i| s[i]) / n as f64
            })
            .collect()
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.components != other.components {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Discrete L^q norm of `f - g` (max norm for `q = ∞`).
pub fn lq_error(f: &SampledField, g: &SampledField, q: f64) -> Result<f64> {
    f.same_grid(g)?;
    if !(q >= 1.0) {
        return Err(Error::InvalidParameter(format!("q must be in [1, ∞], got {q}")));
    }
    let (a, b) = (&f.values, &g.values);
    if q.is_infinite() {
        return Ok(par::max_range(a.len(), |i| (a[i] - b[i]).abs()));
    }
    let s = par::sum_range(a.len(), |i| (a[i] - b[i]).abs().powf(q));
    Ok((s * f.grid.cell_volume()).powf(1.0 / q))
}

/// Discrete integral of `f g`.
pub fn weakstar_pairing(f: &SampledField, g: &SampledField) -> Result<f64> {
    f.same_grid(g)?;
    let (a, b) = (&f.values, &g.values);
    Ok(par::sum_range(a.len(), |i| a[i] * b[i]) * f.grid.cell_volume())
}
