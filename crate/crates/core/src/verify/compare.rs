use serde::{Deserialize, Serialize};

use super::solver::{solve_euler_2d, velocity_from_vorticity, SolverOptions};
use crate::density::TheoremFamily;
use crate::error::{Error, Result};
use crate::field::{lq_error, Grid, SampledField};
use crate::gluing::GluedSolution;
use crate::par;

/// A planar exact solution with velocity `∇⊥ψ + U` and vorticity `Δψ`.
pub trait PlanarExact: Sync {
    fn vorticity(&self, t: f64, x: &[f64]) -> f64;
    fn velocity(&self, t: f64, x: &[f64]) -> [f64; 2];
    fn mean_velocity(&self) -> [f64; 2] {
        [0.0; 2]
    }
}

impl PlanarExact for TheoremFamily {
    fn vorticity(&self, t: f64, x: &[f64]) -> f64 {
        TheoremFamily::vorticity(self, t, x)
    }
    fn velocity(&self, t: f64, x: &[f64]) -> [f64; 2] {
        TheoremFamily::velocity(self, t, x)
    }
}

/// A planar glued solution with the closed-form base flow.
pub struct PlanarGlued<'a> {
    sol: &'a GluedSolution,
    mean: [f64; 2],
}

impl<'a> PlanarGlued<'a> {
    pub fn new(sol: &'a GluedSolution) -> Result<Self> {
        sol.vorticity_2d(0.0, &[0.0, 0.0])?;
        let m = sol.mean_velocity();
        Ok(Self { sol, mean: [m[0], m[1]] })
    }
}

impl PlanarExact for PlanarGlued<'_> {
    fn vorticity(&self, t: f64, x: &[f64]) -> f64 {
        self.sol.vorticity_2d(t, x).unwrap_or(0.0)
    }
    fn velocity(&self, t: f64, x: &[f64]) -> [f64; 2] {
        let v = self.sol.eval_solution(t, x);
        [v[0], v[1]]
    }
    fn mean_velocity(&self) -> [f64; 2] {
        self.mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub t: f64,
    pub sup_vorticity: f64,
    pub l2_vorticity: f64,
    pub sup_velocity: f64,
    pub l2_velocity: f64,
}

/// Evolves the exact initial vorticity and tabulates its distance to the
/// exact solution at `checkpoints`. The grid mean of the sampled initial
/// vorticity (zero up to quadrature error) is removed.
pub fn compare_exact_vs_evolved(
    exact: &(impl PlanarExact + ?Sized),
    resolution: usize,
    dt: f64,
    checkpoints: &[f64],
) -> Result<Vec<ErrorRow>> {
    let horizon = checkpoints.iter().copied().fold(0.0, f64::max);
    if checkpoints.is_empty() {
        return Err(Error::InvalidParameter("no checkpoints".into()));
    }
    let grid = Grid::cube(2, resolution);
    let sample_w = |t: f64| SampledField::from_fn(grid.clone(), |x| exact.vorticity(t, x));
    let mut w0 = sample_w(0.0);
    let m = w0.mean()[0];
    w0.values.iter_mut().for_each(|v| *v -= m);
    let mut opts = SolverOptions::new(dt, horizon);
    opts.snapshots = checkpoints.to_vec();
    opts.mean_velocity = exact.mean_velocity();
    let tr = solve_euler_2d(&w0, &opts)?;
    let mut rows = vec![];
    for (state, &t) in tr.states.iter().zip(checkpoints) {
        let we = sample_w(t);
        let n = grid.len();
        let ue = par::map_range(n, |i| {
            let mut x = [0.0; 2];
            grid.point(i, &mut x);
            exact.velocity(t, &x)
        });
        let mut vals: Vec<f64> = ue.iter().map(|v| v[0]).collect();
        vals.extend(ue.iter().map(|v| v[1]));
        let ue = SampledField::new(grid.clone(), 2, vals)?;
        let un = velocity_from_vorticity(&state.omega, opts.mean_velocity)?;
        let du: Vec<f64> =
            (0..n).map(|i| (un.values[i] - ue.values[i]).hypot(un.values[n + i] - ue.values[n + i])).collect();
        let du = SampledField::new(grid.clone(), 1, du)?;
        let zero = SampledField::zeros(grid.clone(), 1);
        rows.push(ErrorRow {
            t,
            sup_vorticity: lq_error(&state.omega, &we, f64::INFINITY)?,
            l2_vorticity: lq_error(&state.omega, &we, 2.0)?,
            sup_velocity: lq_error(&du, &zero, f64::INFINITY)?,
            l2_velocity: lq_error(&du, &zero, 2.0)?,
        });
    }
    Ok(rows)
}
